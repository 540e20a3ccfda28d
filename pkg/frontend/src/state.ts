// Client-side cockpit state: the latest configuration snapshot, knob
// values with their echoed currents, and bounded rolling buffers for the
// oscilloscope, raster and counters. Rendering reads from here; nothing
// in this module touches the DOM, so it is fully testable off-browser.

import {
  ConfigMsg,
  CountersMsg,
  ParamAppliedMsg,
  RasterFrameMsg,
  ServerMsg,
  TraceFrameMsg,
  resolveBias,
} from "./protocol.js";

export interface KnobState {
  path: string;
  name: string;
  coarse: number;
  fine: number;
  k: number;
  /** Resolved current as echoed by the server (or derived locally from the
   * snapshot until the first echo). */
  current: number;
}

export interface TraceBuffer {
  t: number[]; // microseconds
  v: number[];
}

export interface RasterPoint {
  t_us: number;
  row: number;
}

export const MAX_TRACE_POINTS = 4000;
export const MAX_RASTER_POINTS = 6000;

export type ConnectionState = "connecting" | "connected" | "disconnected";

export class CockpitStore {
  version = -1;
  config: any = null;
  chip = 0;
  core = 0;
  knobs = new Map<string, KnobState>();
  latches = new Map<string, boolean>();
  traces = new Map<string, TraceBuffer>();
  raster: RasterPoint[] = [];
  counters: CountersMsg | null = null;
  connection: ConnectionState = "connecting";
  toast = "";
  simTimeUs = 0;
  dirty = true;

  loadConfig(msg: ConfigMsg): void {
    this.version = msg.version;
    this.config = msg.config;
    this.simTimeUs = msg.t_us;
    const core = msg.config.chips?.[this.chip]?.cores?.[this.core];
    if (!core) return;
    this.knobs.clear();
    for (const name of Object.keys(core.biases ?? {}).sort()) {
      const code = core.biases[name] as number[];
      const [coarse, fine, k = 1.0] = code;
      const path = `chips.${this.chip}.cores.${this.core}.biases.${name}`;
      this.knobs.set(path, {
        path,
        name,
        coarse,
        fine,
        k,
        current: resolveBias(coarse, fine, k),
      });
    }
    this.latches.clear();
    for (const [name, value] of Object.entries(core.latches ?? {})) {
      this.latches.set(`chips.${this.chip}.cores.${this.core}.latches.${name}`, Boolean(value));
    }
    for (const [idx, neuron] of Object.entries<any>(core.neurons ?? {})) {
      for (const [name, value] of Object.entries(neuron.latches ?? {})) {
        this.latches.set(
          `chips.${this.chip}.cores.${this.core}.neurons.${idx}.latches.${name}`,
          Boolean(value),
        );
      }
    }
    this.dirty = true;
  }

  applyEcho(msg: ParamAppliedMsg): void {
    this.version = msg.version;
    this.simTimeUs = msg.t_us;
    const knob = this.knobs.get(msg.path);
    if (knob) {
      knob.coarse = msg.coarse;
      knob.fine = msg.fine;
      knob.current = msg.current;
    }
    this.dirty = true;
  }

  /** Stream frames feed the display buffers; oldest points drop first. */
  applyStream(msg: ServerMsg): void {
    if (msg.type === "trace_frame") {
      this.pushTrace(msg);
    } else if (msg.type === "raster_frame") {
      this.pushRaster(msg);
    } else if (msg.type === "counters") {
      this.counters = msg;
      this.simTimeUs = msg.t_us;
    }
    this.dirty = true;
  }

  private pushTrace(msg: TraceFrameMsg): void {
    const key = String(msg.channel);
    let buf = this.traces.get(key);
    if (!buf) {
      buf = { t: [], v: [] };
      this.traces.set(key, buf);
    }
    buf.t.push(...msg.t_us);
    buf.v.push(...msg.v);
    const excess = buf.t.length - MAX_TRACE_POINTS;
    if (excess > 0) {
      buf.t.splice(0, excess);
      buf.v.splice(0, excess);
    }
  }

  private pushRaster(msg: RasterFrameMsg): void {
    for (const [t_us, _cx, _cy, core, neuron] of msg.events) {
      this.raster.push({ t_us, row: core * 256 + neuron });
    }
    const excess = this.raster.length - MAX_RASTER_POINTS;
    if (excess > 0) this.raster.splice(0, excess);
  }
}

/** Sample gaps wider than this factor times the median interval render as
 * breaks instead of connecting lines: the scope shows only received data. */
export function traceSegments(buf: TraceBuffer, gapFactor = 3): Array<[number, number]> {
  const n = buf.t.length;
  if (n === 0) return [];
  const intervals: number[] = [];
  for (let i = 1; i < n; i++) intervals.push(buf.t[i] - buf.t[i - 1]);
  intervals.sort((a, b) => a - b);
  const median = intervals.length ? intervals[Math.floor(intervals.length / 2)] : 0;
  const segments: Array<[number, number]> = [];
  let start = 0;
  for (let i = 1; i < n; i++) {
    if (median > 0 && buf.t[i] - buf.t[i - 1] > gapFactor * median) {
      segments.push([start, i - 1]);
      start = i;
    }
  }
  segments.push([start, n - 1]);
  return segments;
}
