/* tslint:disable */
/* eslint-disable */

/**
 * Class A density of states. Returns `[center, histogram, semicircle]`
 * triples, flattened.
 */
export function semicircle_dos(n: number, nsamples: number, bins: number, seed: number): Float64Array;

/**
 * Volume of the supersphere `S^{p|2}` as `[re, im, error]`.
 */
export function supersphere_vol(p: number): Float64Array;

/**
 * Generating function at `N = 1`, `n = 1` by quadrature, as `[re, im, error]`.
 */
export function z_gen(_class: string, alpha_re: number, alpha_im: number, beta_re: number, beta_im: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly semicircle_dos: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly supersphere_vol: (a: number) => [number, number, number, number];
    readonly z_gen: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
