/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_kernelprofile_free: (a: number, b: number) => void;
export const __wbg_particledemo_free: (a: number, b: number) => void;
export const __wbg_spdedemo_free: (a: number, b: number) => void;
export const kernelprofile_gaussian: (a: number) => [number, number];
export const kernelprofile_kernel: (a: number) => [number, number];
export const kernelprofile_new: (a: number, b: number) => [number, number, number];
export const kernelprofile_residual: (a: number) => number;
export const kernelprofile_x: (a: number) => [number, number];
export const particledemo_current: (a: number) => [number, number, number, number];
export const particledemo_density: (a: number) => [number, number, number, number];
export const particledemo_grid: (a: number) => [number, number];
export const particledemo_momenta: (a: number) => [number, number];
export const particledemo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const particledemo_positions: (a: number) => [number, number];
export const particledemo_step: (a: number, b: number) => [number, number];
export const particledemo_time: (a: number) => number;
export const spdedemo_current: (a: number) => [number, number];
export const spdedemo_grid: (a: number) => [number, number];
export const spdedemo_mass: (a: number) => number;
export const spdedemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const spdedemo_norm: (a: number) => number;
export const spdedemo_rho: (a: number) => [number, number];
export const spdedemo_status: (a: number) => [number, number];
export const spdedemo_step: (a: number, b: number) => [number, number, number];
export const spdedemo_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
