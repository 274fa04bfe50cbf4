/* tslint:disable */
/* eslint-disable */

/**
 * A solved field plus the scalar the page reports next to it.
 */
export class Solution {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Copied into a `Float64Array`.
     */
    field(): Float64Array;
    readonly cols: number;
    readonly iterations: number;
    readonly residual: number;
    readonly rows: number;
    /**
     * Eigenvalue, or the maximum of the torsion function.
     */
    readonly value: number;
}

export function first_eigenpair(shape: string, n: number, p: number): Solution;

export function lambda_curve(shape: string, n: number, p_min: number, p_max: number, count: number): Float64Array;

export function torsion(shape: string, n: number, p: number): Solution;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_solution_free: (a: number, b: number) => void;
    readonly first_eigenpair: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly lambda_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly solution_cols: (a: number) => number;
    readonly solution_field: (a: number) => [number, number];
    readonly solution_iterations: (a: number) => number;
    readonly solution_residual: (a: number) => number;
    readonly solution_rows: (a: number) => number;
    readonly solution_value: (a: number) => number;
    readonly torsion: (a: number, b: number, c: number, d: number) => [number, number, number];
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
