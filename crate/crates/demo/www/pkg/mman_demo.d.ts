/* tslint:disable */
/* eslint-disable */

export class FigureView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    clean(): Uint8Array;
    corrupted(): Uint8Array;
    /**
     * RGBA pixels of the rendered figure.
     */
    image(): Uint8Array;
    readonly extent: number;
    readonly iprClean: number;
    readonly iprCorrupted: number;
    /**
     * mIoU of the corrupted map against the clean one.
     */
    readonly miou: number;
}

export class LowResView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA of the coarse map, upsampled back to the full extent.
     */
    pixels(): Uint8Array;
    /**
     * Fraction of full-resolution pixels that keep their label.
     */
    readonly agreement: number;
    readonly blocks: number;
    readonly extent: number;
}

/**
 * Layer-by-layer shapes of both discriminators for a `classes`-channel map
 * of side `extent`; the macro one scores the map at 1/16.
 */
export function discriminator_shapes(extent: number, classes: number): string;

/**
 * Renders figure `seed`, then punches `holes` discs of `radius` into its
 * label map and optionally swaps the forearms.
 */
export function figure(seed: number, extent: number, holes: number, radius: number, limb_swap: boolean): FigureView;

/**
 * The coarse target the low-resolution head is trained against.
 */
export function low_res_view(seed: number, extent: number, factor: number, majority: boolean): LowResView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_figureview_free: (a: number, b: number) => void;
    readonly __wbg_lowresview_free: (a: number, b: number) => void;
    readonly discriminator_shapes: (a: number, b: number) => [number, number, number, number];
    readonly figure: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly figureview_clean: (a: number) => [number, number];
    readonly figureview_corrupted: (a: number) => [number, number];
    readonly figureview_extent: (a: number) => number;
    readonly figureview_image: (a: number) => [number, number];
    readonly figureview_ipr_clean: (a: number) => number;
    readonly figureview_ipr_corrupted: (a: number) => number;
    readonly figureview_miou: (a: number) => number;
    readonly low_res_view: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly lowresview_agreement: (a: number) => number;
    readonly lowresview_blocks: (a: number) => number;
    readonly lowresview_extent: (a: number) => number;
    readonly lowresview_pixels: (a: number) => [number, number];
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
