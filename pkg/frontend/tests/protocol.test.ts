import { describe, expect, it } from "vitest";

import {
  ProtocolClient,
  Transport,
  formatCurrent,
  groupBiasNames,
  resolveBias,
} from "../src/protocol.js";
import {
  CockpitStore,
  MAX_RASTER_POINTS,
  MAX_TRACE_POINTS,
  traceSegments,
} from "../src/state.js";

describe("resolveBias", () => {
  it("matches the DAC law at full scale", () => {
    expect(resolveBias(5, 255)).toBeCloseTo(2.25e-6, 15);
  });

  it("is exactly zero at fine zero", () => {
    expect(resolveBias(3, 0)).toBe(0);
  });

  it("scales linearly in fine and with k", () => {
    expect(resolveBias(2, 51)).toBeCloseTo(0.89e-9, 15);
    expect(resolveBias(1, 100, 2.5)).toBeCloseTo((2.5 * 550e-12 * 100) / 255, 18);
  });

  it("rejects out-of-range codes", () => {
    expect(() => resolveBias(6, 0)).toThrow();
    expect(() => resolveBias(0, 256)).toThrow();
    expect(() => resolveBias(0, 10, 0)).toThrow();
  });
});

describe("formatCurrent", () => {
  it("picks sensible SI prefixes", () => {
    expect(formatCurrent(2.25e-6)).toBe("2.25 uA");
    expect(formatCurrent(0.89e-9)).toBe("890 pA");
    expect(formatCurrent(1.5e-9)).toBe("1.50 nA");
    expect(formatCurrent(0)).toBe("0 A");
  });
});

describe("groupBiasNames", () => {
  it("groups by circuit prefix preserving order", () => {
    const groups = groupBiasNames(["SOIF_DC", "SOIF_GAIN", "SYAM_W0", "DEAM_ETAU"]);
    expect([...groups.keys()]).toEqual(["SOIF", "SYAM", "DEAM"]);
    expect(groups.get("SOIF")).toEqual(["SOIF_DC", "SOIF_GAIN"]);
  });
});

class FakeTransport implements Transport {
  sent: string[] = [];
  private messageHandler: ((text: string) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  send(text: string): void {
    this.sent.push(text);
  }
  close(): void {
    this.closeHandler?.();
  }
  onMessage(handler: (text: string) => void): void {
    this.messageHandler = handler;
  }
  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
  feed(msg: unknown): void {
    this.messageHandler?.(JSON.stringify(msg));
  }
}

describe("ProtocolClient", () => {
  it("matches replies to requests in order", async () => {
    const transport = new FakeTransport();
    const client = new ProtocolClient(transport);
    const p1 = client.ping();
    const p2 = client.getConfig();
    transport.feed({ type: "pong", t_us: 1 });
    transport.feed({ type: "config", version: 0, t_us: 1, config: {} });
    expect((await p1).type).toBe("pong");
    expect((await p2).version).toBe(0);
    expect(transport.sent.length).toBe(2);
  });

  it("routes stream frames to subscribers, not the request queue", async () => {
    const transport = new FakeTransport();
    const client = new ProtocolClient(transport);
    const frames: string[] = [];
    client.onStream((msg) => frames.push(msg.type));
    const pending = client.ping();
    transport.feed({ type: "trace_frame", channel: 0, t_us: [1], v: [2] });
    transport.feed({ type: "pong", t_us: 5 });
    await pending;
    expect(frames).toEqual(["trace_frame"]);
  });

  it("resolves param updates with conflicts as values", async () => {
    const transport = new FakeTransport();
    const client = new ProtocolClient(transport);
    const pending = client.paramUpdate("chips.0.cores.0.biases.SOIF_DC", 2, 51);
    transport.feed({ type: "conflict", version: 7 });
    const reply = await pending;
    expect(reply.type).toBe("conflict");
  });

  it("rejects in-flight requests when the transport drops", async () => {
    const transport = new FakeTransport();
    const client = new ProtocolClient(transport);
    const pending = client.ping();
    transport.close();
    await expect(pending).rejects.toThrow("connection closed");
  });

  it("records every sent message for session replay", async () => {
    const transport = new FakeTransport();
    const client = new ProtocolClient(transport);
    const pending = client.paramUpdate("p", 1, 2, 1.0);
    transport.feed({ type: "param_applied", path: "p", coarse: 1, fine: 2, current: 0, version: 1, t_us: 0 });
    await pending;
    expect(client.sentLog[0].type).toBe("param_update");
  });
});

describe("CockpitStore", () => {
  const snapshot = {
    type: "config" as const,
    version: 3,
    t_us: 1000,
    config: {
      chips: [
        {
          cores: [
            {
              biases: { SOIF_DC: [2, 51], SOIF_GAIN: [1, 100, 2.0] },
              latches: { DE_MUX: false },
              neurons: { "7": { latches: { SO_DC: true } } },
            },
          ],
        },
      ],
    },
  };

  it("derives knob readouts from the snapshot", () => {
    const store = new CockpitStore();
    store.loadConfig(snapshot);
    const knob = store.knobs.get("chips.0.cores.0.biases.SOIF_DC")!;
    expect(knob.current).toBeCloseTo(resolveBias(2, 51), 18);
    const scaled = store.knobs.get("chips.0.cores.0.biases.SOIF_GAIN")!;
    expect(scaled.k).toBe(2.0);
    expect(store.latches.get("chips.0.cores.0.neurons.7.latches.SO_DC")).toBe(true);
  });

  it("updates the knob from the server echo", () => {
    const store = new CockpitStore();
    store.loadConfig(snapshot);
    store.applyEcho({
      type: "param_applied",
      path: "chips.0.cores.0.biases.SOIF_DC",
      coarse: 3,
      fine: 10,
      current: 1.23e-9,
      version: 4,
      t_us: 2000,
    });
    const knob = store.knobs.get("chips.0.cores.0.biases.SOIF_DC")!;
    expect(knob.coarse).toBe(3);
    expect(knob.current).toBe(1.23e-9);
    expect(store.version).toBe(4);
  });

  it("bounds the trace buffer by dropping oldest points", () => {
    const store = new CockpitStore();
    for (let i = 0; i < 3; i++) {
      store.applyStream({
        type: "trace_frame",
        channel: 0,
        t_us: Array.from({ length: 2000 }, (_, j) => i * 2000 + j),
        v: new Array(2000).fill(i),
      });
    }
    const buf = store.traces.get("0")!;
    expect(buf.t.length).toBe(MAX_TRACE_POINTS);
    expect(buf.t[0]).toBe(2000); // the first frame fell off
  });

  it("bounds the raster buffer", () => {
    const store = new CockpitStore();
    const events = Array.from({ length: MAX_RASTER_POINTS + 500 }, (_, i) => [i, 0, 0, 0, 1]) as Array<
      [number, number, number, number, number]
    >;
    store.applyStream({ type: "raster_frame", events });
    expect(store.raster.length).toBe(MAX_RASTER_POINTS);
    expect(store.raster[0].t_us).toBe(500);
  });

  it("splits traces at sample gaps so gaps render as gaps", () => {
    const buf = { t: [0, 10, 20, 30, 200, 210, 220], v: [1, 1, 1, 1, 2, 2, 2] };
    const segments = traceSegments(buf);
    expect(segments).toEqual([
      [0, 3],
      [4, 6],
    ]);
  });
});
