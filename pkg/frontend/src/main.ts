// Entry point: connect to the live server over WebSocket, mirror its
// configuration into the knob panel, subscribe to every configured monitor
// channel, and keep reconnecting after drops (leaving the last frames on
// screen while disconnected).

import { ProtocolClient } from "./protocol.js";
import { CockpitStore } from "./state.js";
import { WebSocketTransport } from "./transport_ws.js";
import { Cockpit } from "./ui.js";

const params = new URLSearchParams(location.search);
const wsUrl = params.get("ws") ?? `ws://${location.hostname || "127.0.0.1"}:8482/`;

const store = new CockpitStore();
const cockpit = new Cockpit(document.getElementById("app")!, store);

let reconnectDelay = 1000;

function connect(): void {
  cockpit.setConnection("connecting");
  const transport = new WebSocketTransport(wsUrl, async () => {
    reconnectDelay = 1000;
    cockpit.setConnection("connected");
    const client = new ProtocolClient(transport);
    cockpit.attach(client);
    await cockpit.refreshSnapshot();
    const monitors = store.config?.monitors ?? {};
    const sadc = (monitors.sadc ?? []).map((tap: any) => tap.channel);
    const vmem = (monitors.vmem ?? []).map(
      (tap: any) => `${tap.chip[0]}_${tap.chip[1]}_c${tap.core}_n${tap.neuron}`,
    );
    client.onStream((msg) => store.applyStream(msg));
    await client.subscribe({ sadc, vmem, raster: true, counters: true });
    // Light polling keeps knobs coherent with changes made by other
    // clients; the knob being touched is rebuilt from the echo anyway.
    const poll = setInterval(async () => {
      try {
        const snap = await client.getConfig();
        if (snap.version !== store.version) {
          store.loadConfig(snap);
          cockpit.rebuildPanels();
        }
      } catch {
        clearInterval(poll);
      }
    }, 3000);
  });
  transport.onClose(() => {
    cockpit.setConnection("disconnected");
    setTimeout(connect, reconnectDelay);
    reconnectDelay = Math.min(reconnectDelay * 2, 10_000);
  });
}

connect();
