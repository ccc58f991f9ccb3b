/* tslint:disable */
/* eslint-disable */

/**
 * One synthetic walking sequence and its gait energy image.
 */
export class Walker {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Estimated view angle in degrees. The estimator is trained on first use.
     */
    estimate_view(): number;
    frame_count(): number;
    frame_height(): number;
    /**
     * RGBA pixels of scene frame `i` (wrapping).
     */
    frame_rgba(i: number): Uint8Array;
    frame_width(): number;
    /**
     * RGBA pixels of the 240x240 GEI with the mask applied.
     */
    masked_template_rgba(s_h: number, s_m: number, s_f: number, w_h: boolean, w_l: boolean, w_r: boolean, w_f: boolean): Uint8Array;
    /**
     * `covariate` is `nm`, `bg` or `cl`; `view` one of 0, 18, ..., 180.
     */
    constructor(subject: number, covariate: string, view: number);
    true_view(): number;
}

/**
 * Fraction of the canvas a mask keeps.
 */
export function mask_area(s_h: number, s_m: number, s_f: number, w_h: boolean, w_l: boolean, w_r: boolean, w_f: boolean): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_walker_free: (a: number, b: number) => void;
    readonly mask_area: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly walker_estimate_view: (a: number) => [number, number, number];
    readonly walker_frame_count: (a: number) => number;
    readonly walker_frame_height: (a: number) => number;
    readonly walker_frame_rgba: (a: number, b: number) => [number, number];
    readonly walker_frame_width: (a: number) => number;
    readonly walker_masked_template_rgba: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly walker_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly walker_true_view: (a: number) => number;
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
