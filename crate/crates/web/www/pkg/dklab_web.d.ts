/* tslint:disable */
/* eslint-disable */

/**
 * Von Mises kernel and its Gaussian counterpart on `[−π, π)`.
 */
export class KernelProfile {
    free(): void;
    [Symbol.dispose](): void;
    gaussian(): Float64Array;
    kernel(): Float64Array;
    constructor(epsilon: number, points: number);
    /**
     * `sup |w_ε − γ_ε|` on `[−π, π]`.
     */
    residual(): number;
    x(): Float64Array;
}

/**
 * Interacting Langevin particles with `W = cos`.
 */
export class ParticleDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Regularised momentum density `j_ε` on the kernel grid.
     */
    current(): Float64Array;
    /**
     * Regularised density `ρ_ε` on the kernel grid.
     */
    density(): Float64Array;
    grid(): Float64Array;
    momenta(): Float64Array;
    constructor(n: number, epsilon: number, coupling: number, sigma: number, seed: bigint);
    positions(): Float64Array;
    step(steps: number): void;
    time(): number;
}

/**
 * One trajectory of the regularised SPDE with stopping.
 */
export class SpdeDemo {
    free(): void;
    [Symbol.dispose](): void;
    current(): Float64Array;
    grid(): Float64Array;
    mass(): number;
    constructor(epsilon: number, n_noise: number, rho_modulation: number, seed: bigint);
    norm(): number;
    rho(): Float64Array;
    /**
     * `running`, `stopped_norm` or `stopped_floor`.
     */
    status(): string;
    /**
     * Advance up to `steps` steps; false once the trajectory has stopped or
     * reached the horizon.
     */
    step(steps: number): boolean;
    time(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_kernelprofile_free: (a: number, b: number) => void;
    readonly __wbg_particledemo_free: (a: number, b: number) => void;
    readonly __wbg_spdedemo_free: (a: number, b: number) => void;
    readonly kernelprofile_gaussian: (a: number) => [number, number];
    readonly kernelprofile_kernel: (a: number) => [number, number];
    readonly kernelprofile_new: (a: number, b: number) => [number, number, number];
    readonly kernelprofile_residual: (a: number) => number;
    readonly kernelprofile_x: (a: number) => [number, number];
    readonly particledemo_current: (a: number) => [number, number, number, number];
    readonly particledemo_density: (a: number) => [number, number, number, number];
    readonly particledemo_grid: (a: number) => [number, number];
    readonly particledemo_momenta: (a: number) => [number, number];
    readonly particledemo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly particledemo_positions: (a: number) => [number, number];
    readonly particledemo_step: (a: number, b: number) => [number, number];
    readonly particledemo_time: (a: number) => number;
    readonly spdedemo_current: (a: number) => [number, number];
    readonly spdedemo_grid: (a: number) => [number, number];
    readonly spdedemo_mass: (a: number) => number;
    readonly spdedemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly spdedemo_norm: (a: number) => number;
    readonly spdedemo_rho: (a: number) => [number, number];
    readonly spdedemo_status: (a: number) => [number, number];
    readonly spdedemo_step: (a: number, b: number) => [number, number, number];
    readonly spdedemo_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
