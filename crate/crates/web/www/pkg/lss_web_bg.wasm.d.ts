/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_weblab_free: (a: number, b: number) => void;
export const cd_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const generate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const weblab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const weblab_occupancy: (a: number) => number;
export const weblab_resolution: (a: number) => number;
export const weblab_signature: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_export_0: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
