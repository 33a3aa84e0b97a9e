/* tslint:disable */
/* eslint-disable */

/**
 * Meso or macro density on a square grid.
 */
export class FvSim {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances to time `t` (or by at most the step budget); returns the steps taken.
     */
    advance_to(t: number): number;
    mass(): number;
    /**
     * `scale` is `"meso"` or `"macro"`.
     */
    constructor(scale: string, preset: string, half_width: number, nx: number, nr: number, eps: number);
    nx(): number;
    radii(): Float64Array;
    /**
     * Mass per radius bin.
     */
    size(): Float64Array;
    /**
     * Row-major `ny x nx` spatial density.
     */
    spatial(): Float64Array;
    time(): number;
}

/**
 * One realisation of the particle system.
 */
export class MicroSim {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances to time `t`, stopping early at the particle cap or the step budget.
     */
    advance_to(t: number): number;
    capped(): boolean;
    count(): number;
    constructor(preset: string, n0: number, seed: bigint, half_width: number, cap: number);
    /**
     * Flat `[x0, y0, r0, x1, y1, r1, …]`.
     */
    particles(): Float64Array;
    time(): number;
}

/**
 * `K_ε(r, s, (x, 0))` at `n` evenly spaced `x` in `[-extent, extent]`.
 */
export function kernel_profile(r: number, s: number, eps: number, extent: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_fvsim_free: (a: number, b: number) => void;
    readonly __wbg_microsim_free: (a: number, b: number) => void;
    readonly fvsim_advance_to: (a: number, b: number) => [number, number, number];
    readonly fvsim_mass: (a: number) => number;
    readonly fvsim_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly fvsim_nx: (a: number) => number;
    readonly fvsim_radii: (a: number) => [number, number];
    readonly fvsim_size: (a: number) => [number, number];
    readonly fvsim_spatial: (a: number) => [number, number];
    readonly fvsim_time: (a: number) => number;
    readonly kernel_profile: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly microsim_advance_to: (a: number, b: number) => number;
    readonly microsim_capped: (a: number) => number;
    readonly microsim_count: (a: number) => number;
    readonly microsim_new: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
    readonly microsim_particles: (a: number) => [number, number];
    readonly microsim_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
