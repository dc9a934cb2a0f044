/* tslint:disable */
/* eslint-disable */

/**
 * A discriminator trained on a small synthetic corpus, plus its patterns.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Explains the output neuron of whichever side the model believes is
     * the machine translation. Positive scores are machine evidence.
     */
    explain(source: string, left: string, right: string, method: string): string;
    /**
     * Generates and trains; takes a second or two for a few thousand
     * samples.
     */
    constructor(samples: number, seed: number);
    summary(): string;
}

/**
 * Pearson χ² (1 dof) for a 2×2 table of segment counts: rows human and
 * machine, columns present and absent.
 */
export function chi_squared_table(human_present: number, human_absent: number, machine_present: number, machine_absent: number): string;

/**
 * Applies the selected artifacts to one human translation.
 */
export function inject_artifacts(source: string, human: string, unreduce: boolean, merge: boolean, end_marker: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly chi_squared_table: (a: number, b: number, c: number, d: number) => [number, number];
    readonly demo_explain: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number];
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_summary: (a: number) => [number, number];
    readonly inject_artifacts: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
