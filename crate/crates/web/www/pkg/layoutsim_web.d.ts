/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    addBox(id: string, parent: string, hx: number, hy: number, hz: number, x: number, z: number): string;
    delete(id: string): string;
    frame(k: number): Float64Array;
    frameCount(): number;
    constructor(name: string);
    /**
     * JSON array of `{id, parent, vertices, edges}`.
     */
    objects(): string;
    optimize(epochs: number): string;
    /**
     * JSON array of the bundled scene names.
     */
    static sceneNames(): string;
    settle(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_addBox: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly demo_delete: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_frame: (a: number, b: number) => [number, number];
    readonly demo_frameCount: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_objects: (a: number) => [number, number, number, number];
    readonly demo_optimize: (a: number, b: number) => [number, number, number, number];
    readonly demo_sceneNames: () => [number, number];
    readonly demo_settle: (a: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
