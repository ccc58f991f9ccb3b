/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_walker_free: (a: number, b: number) => void;
export const mask_area: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const walker_estimate_view: (a: number) => [number, number, number];
export const walker_frame_count: (a: number) => number;
export const walker_frame_height: (a: number) => number;
export const walker_frame_rgba: (a: number, b: number) => [number, number];
export const walker_frame_width: (a: number) => number;
export const walker_masked_template_rgba: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const walker_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const walker_true_view: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
