/* tslint:disable */
/* eslint-disable */
/**
 * Samples of a synthetic series. `snr_db` is ignored when not finite.
 */
export function generate(kind: string, length: number, seed: number, snr_db: number): Float64Array;
/**
 * `[cd(1), ..., cd(ed_max), saturated (0/1), label (1 = non-stochastic)]`.
 */
export function cd_curve(kind: string, length: number, seed: number, snr_db: number, ed_max: number, max_points: number): Float64Array;
export class WebLab {
  free(): void;
  resolution(): number;
  constructor(seed: number, length: number, per_kind: number, epochs: number, resolution: number);
  occupancy(): number;
  /**
   * RGBA pixels of the signature; occupancy is kept for [`WebLab::occupancy`].
   */
  signature(kind: string, length: number, seed: number, snr_db: number): Uint8Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
  readonly memory: WebAssembly.Memory;
  readonly __wbg_weblab_free: (a: number, b: number) => void;
  readonly cd_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
  readonly generate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
  readonly weblab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
  readonly weblab_occupancy: (a: number) => number;
  readonly weblab_resolution: (a: number) => number;
  readonly weblab_signature: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
  readonly __wbindgen_export_0: WebAssembly.Table;
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
