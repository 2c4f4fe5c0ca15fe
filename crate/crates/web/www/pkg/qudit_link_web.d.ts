/* tslint:disable */
/* eslint-disable */

export function distance_sweep(m: number, strategy: string, max_km: number, steps: number, trajectories: number, seed: number): Float64Array;

/**
 * Outcome distribution of a uniform `2^m`-bin qudit with laser amplitude
 * and phase noise and interferometer phase noise, averaged over `samples`
 * draws. Without noise all weight is on `k = 0`.
 */
export function qft_outcomes(m: number, sigma_a: number, sigma_p: number, sigma_x: number, samples: number, seed: number): Float64Array;

/**
 * `points` samples of `(ω/κ, |r0|, arg r0, |r1|, arg r1)` for laser
 * detunings in `[-span, span]·κ`, flattened.
 */
export function reflection_curve(cooperativity1: number, kappa_a_ratio: number, span: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly distance_sweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly qft_outcomes: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly reflection_curve: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
