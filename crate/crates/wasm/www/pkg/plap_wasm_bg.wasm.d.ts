/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_solution_free: (a: number, b: number) => void;
export const first_eigenpair: (a: number, b: number, c: number, d: number) => [number, number, number];
export const lambda_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const solution_cols: (a: number) => number;
export const solution_field: (a: number) => [number, number];
export const solution_iterations: (a: number) => number;
export const solution_residual: (a: number) => number;
export const solution_rows: (a: number) => number;
export const solution_value: (a: number) => number;
export const torsion: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
