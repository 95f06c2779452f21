/* tslint:disable */
/* eslint-disable */

/**
 * Rows of `(loss_db, finite four-intensity rate, infinite-decoy rate)`.
 * The finite rate uses the experiment's operating point and an i.i.d.
 * sending schedule of `pulses` triples.
 */
export function key_rate_curve(loss_from: number, loss_to: number, points: number, pulses: number, det_eff: number, e_d: number, visibility: number): Float64Array;

/**
 * Rows of `(phase sum, P(Φ+), P(Φ-))` as the analyzer phase sum sweeps
 * `[0, 2π]`, for equal intensities `mu` and delay `dt_ps` between users.
 */
export function projection_vs_phase(mu: number, dt_ps: number, fwhm_ps: number, points: number): Float64Array;

/**
 * X-basis error rate on a `steps x steps` grid of Bob/Charlie delays in
 * `[-range_ps, range_ps]`, row-major with Bob's delay as the row.
 */
export function qber_surface(visibility: number, fwhm_ps: number, range_ps: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly key_rate_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly projection_vs_phase: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly qber_surface: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
