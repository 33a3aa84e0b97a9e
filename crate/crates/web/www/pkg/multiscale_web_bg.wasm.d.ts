/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_fvsim_free: (a: number, b: number) => void;
export const __wbg_microsim_free: (a: number, b: number) => void;
export const fvsim_advance_to: (a: number, b: number) => [number, number, number];
export const fvsim_mass: (a: number) => number;
export const fvsim_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const fvsim_nx: (a: number) => number;
export const fvsim_radii: (a: number) => [number, number];
export const fvsim_size: (a: number) => [number, number];
export const fvsim_spatial: (a: number) => [number, number];
export const fvsim_time: (a: number) => number;
export const kernel_profile: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const microsim_advance_to: (a: number, b: number) => number;
export const microsim_capped: (a: number) => number;
export const microsim_count: (a: number) => number;
export const microsim_new: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
export const microsim_particles: (a: number) => [number, number];
export const microsim_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
