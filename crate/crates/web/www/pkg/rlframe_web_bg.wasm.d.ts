/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_griddemo_free: (a: number, b: number) => void;
export const __wbg_mountaincardemo_free: (a: number, b: number) => void;
export const griddemo_episodes: (a: number) => number;
export const griddemo_greedy_path: (a: number) => [number, number, number, number];
export const griddemo_new: (a: number, b: number, c: number) => [number, number, number];
export const griddemo_policy: (a: number) => [number, number];
export const griddemo_train: (a: number, b: number) => [number, number, number];
export const griddemo_values: (a: number) => [number, number];
export const mountaincardemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const mountaincardemo_returns: (a: number, b: number) => [number, number, number, number];
export const mountaincardemo_steps: (a: number) => number;
export const mountaincardemo_trajectory: (a: number, b: number) => [number, number, number, number];
export const mountaincardemo_weights: (a: number) => [number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
