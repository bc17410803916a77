/* tslint:disable */
/* eslint-disable */

/**
 * Incrementally trained tabular learner on GridWorld.
 */
export class GridDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Episodes trained so far.
     */
    episodes(): number;
    /**
     * Cells visited by the greedy policy from the start, goal included.
     */
    greedy_path(): Uint32Array;
    /**
     * `algorithm` is `q_learning` or `monte_carlo`.
     */
    constructor(algorithm: string, seed: number);
    /**
     * Greedy action per cell: 0 up, 1 down, 2 left, 3 right.
     */
    policy(): Uint8Array;
    /**
     * Trains `more` additional episodes; returns the new total.
     */
    train(more: number): number;
    /**
     * Greedy state value per cell, row-major.
     */
    values(): Float64Array;
}

/**
 * Multi-objective Q-learning on the discretized Mountain Car.
 */
export class MountainCarDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Trains for `steps` environment steps with weights for the time,
     * reversal and acceleration objectives.
     */
    constructor(time: number, reversals: number, acceleration: number, steps: number, seed: number);
    /**
     * Summed reward per objective along the greedy trajectory.
     */
    returns(limit: number): Float64Array;
    steps(): number;
    /**
     * Car positions along the greedy trajectory, capped at `limit` steps.
     */
    trajectory(limit: number): Float64Array;
    weights(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_griddemo_free: (a: number, b: number) => void;
    readonly __wbg_mountaincardemo_free: (a: number, b: number) => void;
    readonly griddemo_episodes: (a: number) => number;
    readonly griddemo_greedy_path: (a: number) => [number, number, number, number];
    readonly griddemo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly griddemo_policy: (a: number) => [number, number];
    readonly griddemo_train: (a: number, b: number) => [number, number, number];
    readonly griddemo_values: (a: number) => [number, number];
    readonly mountaincardemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly mountaincardemo_returns: (a: number, b: number) => [number, number, number, number];
    readonly mountaincardemo_steps: (a: number) => number;
    readonly mountaincardemo_trajectory: (a: number, b: number) => [number, number, number, number];
    readonly mountaincardemo_weights: (a: number) => [number, number];
    readonly __externref_table_alloc: () => number;
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
