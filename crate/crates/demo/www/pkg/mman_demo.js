/* @ts-self-types="./mman_demo.d.ts" */

export class FigureView {
    static __wrap(ptr) {
        const obj = Object.create(FigureView.prototype);
        obj.__wbg_ptr = ptr;
        FigureViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        FigureViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_figureview_free(ptr, 0);
    }
    /**
     * @returns {Uint8Array}
     */
    clean() {
        const ret = wasm.figureview_clean(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {Uint8Array}
     */
    corrupted() {
        const ret = wasm.figureview_corrupted(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    get extent() {
        const ret = wasm.figureview_extent(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * RGBA pixels of the rendered figure.
     * @returns {Uint8Array}
     */
    image() {
        const ret = wasm.figureview_image(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    get iprClean() {
        const ret = wasm.figureview_ipr_clean(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get iprCorrupted() {
        const ret = wasm.figureview_ipr_corrupted(this.__wbg_ptr);
        return ret;
    }
    /**
     * mIoU of the corrupted map against the clean one.
     * @returns {number}
     */
    get miou() {
        const ret = wasm.figureview_miou(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) FigureView.prototype[Symbol.dispose] = FigureView.prototype.free;

export class LowResView {
    static __wrap(ptr) {
        const obj = Object.create(LowResView.prototype);
        obj.__wbg_ptr = ptr;
        LowResViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        LowResViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_lowresview_free(ptr, 0);
    }
    /**
     * Fraction of full-resolution pixels that keep their label.
     * @returns {number}
     */
    get agreement() {
        const ret = wasm.lowresview_agreement(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get blocks() {
        const ret = wasm.lowresview_blocks(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get extent() {
        const ret = wasm.lowresview_extent(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * RGBA of the coarse map, upsampled back to the full extent.
     * @returns {Uint8Array}
     */
    pixels() {
        const ret = wasm.lowresview_pixels(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
}
if (Symbol.dispose) LowResView.prototype[Symbol.dispose] = LowResView.prototype.free;

/**
 * Layer-by-layer shapes of both discriminators for a `classes`-channel map
 * of side `extent`; the macro one scores the map at 1/16.
 * @param {number} extent
 * @param {number} classes
 * @returns {string}
 */
export function discriminator_shapes(extent, classes) {
    let deferred2_0;
    let deferred2_1;
    try {
        const ret = wasm.discriminator_shapes(extent, classes);
        var ptr1 = ret[0];
        var len1 = ret[1];
        if (ret[3]) {
            ptr1 = 0; len1 = 0;
            throw takeFromExternrefTable0(ret[2]);
        }
        deferred2_0 = ptr1;
        deferred2_1 = len1;
        return getStringFromWasm0(ptr1, len1);
    } finally {
        wasm.__wbindgen_free(deferred2_0, deferred2_1, 1);
    }
}

/**
 * Renders figure `seed`, then punches `holes` discs of `radius` into its
 * label map and optionally swaps the forearms.
 * @param {number} seed
 * @param {number} extent
 * @param {number} holes
 * @param {number} radius
 * @param {boolean} limb_swap
 * @returns {FigureView}
 */
export function figure(seed, extent, holes, radius, limb_swap) {
    const ret = wasm.figure(seed, extent, holes, radius, limb_swap);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return FigureView.__wrap(ret[0]);
}

/**
 * The coarse target the low-resolution head is trained against.
 * @param {number} seed
 * @param {number} extent
 * @param {number} factor
 * @param {boolean} majority
 * @returns {LowResView}
 */
export function low_res_view(seed, extent, factor, majority) {
    const ret = wasm.low_res_view(seed, extent, factor, majority);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return LowResView.__wrap(ret[0]);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_generic_0000000000000001: function(arg0, arg1) {
            // Cast intrinsic for `Ref(String) -> Externref`.
            const ret = getStringFromWasm0(arg0, arg1);
            return ret;
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./mman_demo_bg.js": import0,
    };
}

const FigureViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_figureview_free(ptr, 1));
const LowResViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_lowresview_free(ptr, 1));

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('mman_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
