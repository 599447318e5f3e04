/* tslint:disable */
/* eslint-disable */

export function captionScores(hypothesis: string, references: string): string;

/**
 * Filtered matrix followed by `[k, retained, full, removed_norm]`.
 */
export function filterForExpert(rows: number, cols: number, data: Float64Array, index: number, experts: number): Float64Array;

export function randomMatrix(rows: number, cols: number, seed: number): Float64Array;

export function svdSpectrum(rows: number, cols: number, data: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly captionScores: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly filterForExpert: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly randomMatrix: (a: number, b: number, c: number) => [number, number];
    readonly svdSpectrum: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
