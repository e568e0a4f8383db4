/* tslint:disable */
/* eslint-disable */

/**
 * Energy trace of a single-replica bipartition anneal.
 */
export function anneal_trace(n: number, radius: number, graph_seed: number, sweeps: number, seed: number): string;

/**
 * Partition a random geometric graph; JSON with positions, edges and labels.
 */
export function partition_graph(n: number, radius: number, graph_seed: number, k: number, epsilon: number, sweeps: number, seed: number): string;

/**
 * Forest-fire scores and the edges kept at `keep_ratio`.
 */
export function sparsify_graph(n: number, radius: number, graph_seed: number, pf: number, walks: number, keep_ratio: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly anneal_trace: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly partition_graph: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly sparsify_graph: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
