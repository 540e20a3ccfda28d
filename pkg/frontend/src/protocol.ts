// Wire protocol for the emulator's live socket: newline-delimited JSON over
// TCP or one JSON document per WebSocket text frame. The client serializes
// requests and matches replies FIFO by expected type; stream frames
// (traces, raster, counters) bypass the queue and go to subscribers.

export const COARSE_CURRENTS = [70e-12, 550e-12, 4.45e-9, 35e-9, 0.28e-6, 2.25e-6];
export const FINE_MAX = 255;

/** Resolved DAC output current in amperes; mirrors the engine's bias law. */
export function resolveBias(coarse: number, fine: number, k = 1.0): number {
  if (coarse < 0 || coarse > 5 || !Number.isInteger(coarse)) {
    throw new Error(`coarse code out of range [0, 5]: ${coarse}`);
  }
  if (fine < 0 || fine > FINE_MAX || !Number.isInteger(fine)) {
    throw new Error(`fine code out of range [0, 255]: ${fine}`);
  }
  if (k <= 0) {
    throw new Error(`k must be positive: ${k}`);
  }
  return k * COARSE_CURRENTS[coarse] * (fine / FINE_MAX);
}

const SI_STEPS: Array<[number, string]> = [
  [1e-3, "mA"],
  [1e-6, "uA"],
  [1e-9, "nA"],
  [1e-12, "pA"],
  [1e-15, "fA"],
];

export function formatCurrent(amps: number): string {
  if (amps === 0) return "0 A";
  for (const [scale, unit] of SI_STEPS) {
    if (Math.abs(amps) >= scale) {
      return `${(amps / scale).toPrecision(3)} ${unit}`;
    }
  }
  return `${amps.toExponential(2)} A`;
}

export interface BiasCodeJson extends Array<number> {} // [coarse, fine] or [coarse, fine, k]

export interface ConfigMsg {
  type: "config";
  version: number;
  t_us: number;
  config: any;
}

export interface ParamAppliedMsg {
  type: "param_applied";
  path: string;
  coarse: number;
  fine: number;
  current: number;
  version: number;
  t_us: number;
}

export interface ConflictMsg {
  type: "conflict";
  version: number;
}

export interface TraceFrameMsg {
  type: "trace_frame";
  channel: number | string;
  t_us: number[];
  v: number[];
}

export interface RasterFrameMsg {
  type: "raster_frame";
  events: Array<[number, number, number, number, number]>; // t_us, cx, cy, core, neuron
}

export interface CountersMsg {
  type: "counters";
  t_us: number;
  counters: Record<string, number>;
  energy_pj: number;
  spikes: number;
}

export type ServerMsg =
  | ConfigMsg
  | ParamAppliedMsg
  | ConflictMsg
  | TraceFrameMsg
  | RasterFrameMsg
  | CountersMsg
  | { type: "pong"; t_us: number }
  | { type: "apply_ok"; version: number; changes: number; t_us: number }
  | { type: "latch_applied"; path: string; value: boolean; version: number; t_us: number }
  | { type: "subscribed" }
  | { type: "injected"; count: number; t_us: number }
  | { type: "run_state"; paused: boolean; speed: number }
  | { type: "log"; entries: any[]; t_us: number }
  | { type: "state_hash"; hash: string; t_ns: number }
  | { type: "error"; message: string };

const STREAM_TYPES = new Set(["trace_frame", "raster_frame", "counters"]);

/** Anything that can move text frames: a WebSocket in the browser, a TCP
 * socket in tests. */
export interface Transport {
  send(text: string): void;
  close(): void;
  onMessage(handler: (text: string) => void): void;
  onClose(handler: () => void): void;
}

interface Pending {
  expect: Set<string>;
  resolve: (msg: ServerMsg) => void;
  reject: (err: Error) => void;
}

export class ProtocolClient {
  private pending: Pending[] = [];
  private streamHandlers: Array<(msg: ServerMsg) => void> = [];
  private closed = false;
  readonly sentLog: any[] = [];

  constructor(private transport: Transport) {
    transport.onMessage((text) => this.handleText(text));
    transport.onClose(() => {
      this.closed = true;
      const err = new Error("connection closed");
      for (const p of this.pending.splice(0)) p.reject(err);
    });
  }

  onStream(handler: (msg: ServerMsg) => void): void {
    this.streamHandlers.push(handler);
  }

  private handleText(text: string): void {
    let msg: ServerMsg;
    try {
      msg = JSON.parse(text);
    } catch {
      return; // a malformed frame is dropped, never fatal
    }
    if (STREAM_TYPES.has(msg.type)) {
      for (const handler of this.streamHandlers) handler(msg);
      return;
    }
    const head = this.pending[0];
    if (head && (head.expect.has(msg.type) || msg.type === "error")) {
      this.pending.shift();
      head.resolve(msg);
      return;
    }
    // Unsolicited non-stream frame: surface it to stream handlers so the
    // UI can at least show it.
    for (const handler of this.streamHandlers) handler(msg);
  }

  private request(payload: Record<string, unknown>, expect: string[]): Promise<ServerMsg> {
    if (this.closed) return Promise.reject(new Error("connection closed"));
    this.sentLog.push(payload);
    return new Promise((resolve, reject) => {
      this.pending.push({ expect: new Set(expect), resolve, reject });
      this.transport.send(JSON.stringify(payload));
    });
  }

  ping(): Promise<ServerMsg> {
    return this.request({ type: "ping" }, ["pong"]);
  }

  getConfig(): Promise<ConfigMsg> {
    return this.request({ type: "get_config" }, ["config"]) as Promise<ConfigMsg>;
  }

  paramUpdate(
    path: string,
    coarse: number,
    fine: number,
    k = 1.0,
  ): Promise<ParamAppliedMsg | ConflictMsg | { type: "error"; message: string }> {
    return this.request({ type: "param_update", path, coarse, fine, k }, [
      "param_applied",
      "conflict",
    ]) as Promise<ParamAppliedMsg | ConflictMsg | { type: "error"; message: string }>;
  }

  latchUpdate(path: string, value: boolean): Promise<ServerMsg> {
    return this.request({ type: "latch_update", path, value }, ["latch_applied"]);
  }

  applyConfig(version: number, config: any): Promise<ServerMsg> {
    return this.request({ type: "apply_config", version, config }, ["apply_ok", "conflict"]);
  }

  subscribe(opts: {
    sadc?: number[];
    vmem?: string[];
    raster?: boolean;
    counters?: boolean;
  }): Promise<ServerMsg> {
    return this.request({ type: "subscribe", ...opts }, ["subscribed"]);
  }

  injectEvents(events: Array<[number, string]>): Promise<ServerMsg> {
    return this.request({ type: "inject_events", events }, ["injected"]);
  }

  runControl(action: "pause" | "resume" | "speed", value?: number): Promise<ServerMsg> {
    return this.request({ type: "run_control", action, value }, ["run_state"]);
  }

  getLog(): Promise<{ type: "log"; entries: any[]; t_us: number }> {
    return this.request({ type: "get_log" }, ["log"]) as any;
  }

  getStateHash(): Promise<{ type: "state_hash"; hash: string; t_ns: number }> {
    return this.request({ type: "get_state_hash" }, ["state_hash"]) as any;
  }

  close(): void {
    this.transport.close();
  }
}

/** Knob groups follow the parameter-name prefixes so the panel mirrors the
 * circuit blocks. */
export function groupBiasNames(names: string[]): Map<string, string[]> {
  const groups = new Map<string, string[]>();
  for (const name of names) {
    const prefix = name.split("_")[0];
    if (!groups.has(prefix)) groups.set(prefix, []);
    groups.get(prefix)!.push(name);
  }
  return groups;
}
