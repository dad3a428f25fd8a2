/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_figureview_free: (a: number, b: number) => void;
export const __wbg_lowresview_free: (a: number, b: number) => void;
export const discriminator_shapes: (a: number, b: number) => [number, number, number, number];
export const figure: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const figureview_clean: (a: number) => [number, number];
export const figureview_corrupted: (a: number) => [number, number];
export const figureview_extent: (a: number) => number;
export const figureview_image: (a: number) => [number, number];
export const figureview_ipr_clean: (a: number) => number;
export const figureview_ipr_corrupted: (a: number) => number;
export const figureview_miou: (a: number) => number;
export const low_res_view: (a: number, b: number, c: number, d: number) => [number, number, number];
export const lowresview_agreement: (a: number) => number;
export const lowresview_blocks: (a: number) => number;
export const lowresview_extent: (a: number) => number;
export const lowresview_pixels: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
