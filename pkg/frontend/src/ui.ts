// DOM cockpit: knob panel grouped by circuit prefix, latch toggles, a
// rolling oscilloscope, the spike raster and counter meters. Rendering is
// driven by requestAnimationFrame off the store's dirty flag, decoupled
// from message arrival.

import { ProtocolClient, formatCurrent, groupBiasNames } from "./protocol.js";
import { CockpitStore, traceSegments } from "./state.js";

const TRACE_COLORS = ["#4fc3f7", "#ffb74d", "#81c784", "#e57373", "#ba68c8", "#fff176"];
const WINDOW_US = 2_000_000;

export class Cockpit {
  private knobPanel: HTMLElement;
  private latchPanel: HTMLElement;
  private scope: HTMLCanvasElement;
  private raster: HTMLCanvasElement;
  private countersBox: HTMLElement;
  private banner: HTMLElement;
  private toastBox: HTMLElement;
  private client: ProtocolClient | null = null;

  constructor(
    private root: HTMLElement,
    private store: CockpitStore,
  ) {
    root.innerHTML = "";
    this.banner = el("div", "banner");
    const controls = el("div", "controls");
    const pause = button("pause", () => this.client?.runControl("pause"));
    const resume = button("resume", () => this.client?.runControl("resume"));
    controls.append(pause, resume);
    const header = el("header", "");
    header.append(this.banner, controls);

    this.knobPanel = el("div", "knobs");
    this.latchPanel = el("div", "latches");
    const left = el("div", "left");
    left.append(this.knobPanel, this.latchPanel);

    this.scope = canvas(680, 260);
    this.raster = canvas(680, 200);
    this.countersBox = el("pre", "counters");
    this.toastBox = el("div", "toast");
    const right = el("div", "right");
    right.append(
      label("membrane / current oscilloscope"),
      this.scope,
      label("spike raster"),
      this.raster,
      label("counters"),
      this.countersBox,
    );

    const body = el("div", "cols");
    body.append(left, right);
    root.append(header, body, this.toastBox);
    const tick = () => {
      this.render();
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  attach(client: ProtocolClient): void {
    this.client = client;
  }

  setConnection(state: "connecting" | "connected" | "disconnected"): void {
    this.store.connection = state;
    this.store.dirty = true;
  }

  toast(message: string): void {
    this.store.toast = message;
    this.store.dirty = true;
    setTimeout(() => {
      this.store.toast = "";
      this.store.dirty = true;
    }, 4000);
  }

  /** (Re)build the knob and latch panels from the current snapshot. */
  rebuildPanels(): void {
    this.knobPanel.innerHTML = "";
    const names = [...this.store.knobs.values()].map((k) => k.name);
    const groups = groupBiasNames(names);
    for (const [prefix, groupNames] of groups) {
      const details = document.createElement("details");
      details.open = prefix === "SOIF";
      const summary = document.createElement("summary");
      summary.textContent = prefix;
      details.append(summary);
      for (const name of groupNames) {
        const path = `chips.${this.store.chip}.cores.${this.store.core}.biases.${name}`;
        const knob = this.store.knobs.get(path);
        if (knob) details.append(this.knobRow(knob));
      }
      this.knobPanel.append(details);
    }
    this.latchPanel.innerHTML = "";
    const latchDetails = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = "latches";
    latchDetails.append(summary);
    for (const [path, value] of this.store.latches) {
      latchDetails.append(this.latchRow(path, value));
    }
    this.latchPanel.append(latchDetails);
  }

  private knobRow(knob: { path: string; name: string; coarse: number; fine: number; k: number }) {
    const row = el("div", "knob-row");
    const name = el("span", "knob-name");
    name.textContent = knob.name;
    const coarse = document.createElement("select");
    for (let c = 0; c <= 5; c++) {
      const opt = document.createElement("option");
      opt.value = String(c);
      opt.textContent = String(c);
      if (c === knob.coarse) opt.selected = true;
      coarse.append(opt);
    }
    const fine = document.createElement("input");
    fine.type = "range";
    fine.min = "0";
    fine.max = "255";
    fine.step = "1";
    fine.value = String(knob.fine);
    const readout = el("span", "readout");
    readout.dataset.path = knob.path;
    readout.textContent = formatCurrent(this.store.knobs.get(knob.path)?.current ?? 0);
    const send = async () => {
      if (!this.client) return;
      const reply = await this.client.paramUpdate(
        knob.path,
        Number(coarse.value),
        Number(fine.value),
        this.store.knobs.get(knob.path)?.k ?? 1.0,
      );
      if (reply.type === "param_applied") {
        this.store.applyEcho(reply);
        readout.textContent = formatCurrent(reply.current);
      } else if (reply.type === "conflict") {
        this.toast(`version conflict (server at v${reply.version}); reloading`);
        await this.refreshSnapshot();
      } else {
        this.toast(reply.message);
        await this.refreshSnapshot();
      }
    };
    coarse.addEventListener("change", send);
    fine.addEventListener("change", send);
    row.append(name, coarse, fine, readout);
    return row;
  }

  private latchRow(path: string, value: boolean) {
    const row = el("div", "latch-row");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = value;
    const name = el("span", "latch-name");
    name.textContent = path.split(".").slice(-3).join(".");
    box.addEventListener("change", async () => {
      if (!this.client) return;
      const reply = await this.client.latchUpdate(path, box.checked);
      if (reply.type !== "latch_applied") {
        this.toast((reply as any).message ?? "latch update failed");
        box.checked = !box.checked;
      } else {
        this.store.latches.set(path, box.checked);
      }
    });
    row.append(box, name);
    return row;
  }

  async refreshSnapshot(): Promise<void> {
    if (!this.client) return;
    const snap = await this.client.getConfig();
    this.store.loadConfig(snap);
    this.rebuildPanels();
  }

  private render(): void {
    if (!this.store.dirty) return;
    this.store.dirty = false;
    this.banner.textContent =
      this.store.connection === "connected"
        ? `connected  v${this.store.version}  t=${(this.store.simTimeUs / 1e6).toFixed(2)} s`
        : this.store.connection === "connecting"
          ? "connecting..."
          : "disconnected - display frozen, reconnecting";
    this.banner.className = `banner ${this.store.connection}`;
    this.toastBox.textContent = this.store.toast;
    this.toastBox.style.display = this.store.toast ? "block" : "none";
    this.drawScope();
    this.drawRaster();
    if (this.store.counters) {
      const c = this.store.counters;
      const lines = Object.entries(c.counters).map(([k, v]) => `${k} ${v}`);
      lines.push(`spikes ${c.spikes}`, `energy_pj ${c.energy_pj}`);
      this.countersBox.textContent = lines.join("\n");
    }
  }

  private windowBounds(): [number, number] {
    const end = this.store.simTimeUs;
    return [end - WINDOW_US, end];
  }

  private drawScope(): void {
    const ctx = this.scope.getContext("2d")!;
    const { width, height } = this.scope;
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, width, height);
    const [t0, t1] = this.windowBounds();
    let lo = Infinity;
    let hi = -Infinity;
    for (const buf of this.store.traces.values()) {
      for (let i = 0; i < buf.t.length; i++) {
        if (buf.t[i] >= t0 && buf.t[i] <= t1) {
          lo = Math.min(lo, buf.v[i]);
          hi = Math.max(hi, buf.v[i]);
        }
      }
    }
    if (!isFinite(lo)) return;
    if (hi === lo) hi = lo + 1e-15;
    let idx = 0;
    for (const [key, buf] of this.store.traces) {
      const color = TRACE_COLORS[idx++ % TRACE_COLORS.length];
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.2;
      for (const [a, b] of traceSegments(buf)) {
        ctx.beginPath();
        let started = false;
        for (let i = a; i <= b; i++) {
          if (buf.t[i] < t0 || buf.t[i] > t1) continue;
          const x = ((buf.t[i] - t0) / (t1 - t0)) * width;
          const y = height - ((buf.v[i] - lo) / (hi - lo)) * (height - 8) - 4;
          if (started) ctx.lineTo(x, y);
          else {
            ctx.moveTo(x, y);
            started = true;
          }
        }
        ctx.stroke();
      }
      ctx.fillStyle = color;
      ctx.fillText(key, 8, 14 + 14 * (idx - 1));
    }
  }

  private drawRaster(): void {
    const ctx = this.raster.getContext("2d")!;
    const { width, height } = this.raster;
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, width, height);
    const [t0, t1] = this.windowBounds();
    const rows = new Set(this.store.raster.map((p) => p.row));
    const ordered = [...rows].sort((a, b) => a - b);
    const rowIndex = new Map(ordered.map((r, i) => [r, i] as const));
    ctx.fillStyle = "#9ccc65";
    for (const p of this.store.raster) {
      if (p.t_us < t0 || p.t_us > t1) continue;
      const x = ((p.t_us - t0) / (t1 - t0)) * width;
      const y = 6 + (rowIndex.get(p.row)! / Math.max(ordered.length, 1)) * (height - 12);
      ctx.fillRect(x, y, 2, 2);
    }
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function canvas(w: number, h: number): HTMLCanvasElement {
  const node = document.createElement("canvas");
  node.width = w;
  node.height = h;
  return node;
}

function button(text: string, onClick: () => void): HTMLButtonElement {
  const node = document.createElement("button");
  node.textContent = text;
  node.addEventListener("click", onClick);
  return node;
}

function label(text: string): HTMLElement {
  const node = el("div", "label");
  node.textContent = text;
  return node;
}
