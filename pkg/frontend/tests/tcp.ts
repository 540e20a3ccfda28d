// Test-side TCP transport (same framing as the WebSocket path: one JSON
// document per newline-delimited frame) plus helpers to spawn a live
// emulator server as a child process.

import { spawn, ChildProcess, execFileSync } from "node:child_process";
import net from "node:net";
import { Transport } from "../src/protocol.js";

export class TcpTransport implements Transport {
  private buffer = "";
  private messageHandlers: Array<(text: string) => void> = [];
  private closeHandlers: Array<() => void> = [];

  constructor(private socket: net.Socket) {
    socket.setEncoding("utf8");
    socket.on("data", (chunk: string) => {
      this.buffer += chunk;
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (line) for (const handler of this.messageHandlers) handler(line);
      }
    });
    socket.on("close", () => {
      for (const handler of this.closeHandlers) handler();
    });
    socket.on("error", () => socket.destroy());
  }

  static connect(port: number, host = "127.0.0.1"): Promise<TcpTransport> {
    return new Promise((resolve, reject) => {
      const socket = net.connect(port, host, () => resolve(new TcpTransport(socket)));
      socket.on("error", reject);
    });
  }

  send(text: string): void {
    this.socket.write(text + "\n");
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }

  onMessage(handler: (text: string) => void): void {
    this.messageHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }
}

export interface LiveServer {
  proc: ChildProcess;
  tcpPort: number;
  wsPort: number;
  stop(): void;
}

let portBase = 19000 + (process.pid % 500) * 4;

export async function startServer(configPath: string, speed = 10000): Promise<LiveServer> {
  const tcpPort = portBase++;
  const wsPort = portBase++;
  const httpPort = portBase++;
  const proc = spawn(
    "python3",
    [
      "-m", "spikesoc.cli", "serve",
      "--config", configPath,
      "--tcp-port", String(tcpPort),
      "--ws-port", String(wsPort),
      "--http-port", String(httpPort),
      "--speed", String(speed),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (d) => (stderr += d));
  // Wait until the TCP port accepts connections.
  for (let attempt = 0; attempt < 100; attempt++) {
    if (proc.exitCode !== null) {
      throw new Error(`server exited early: ${stderr}`);
    }
    try {
      const probe = await TcpTransport.connect(tcpPort);
      probe.close();
      return {
        proc,
        tcpPort,
        wsPort,
        stop: () => {
          proc.kill("SIGKILL");
        },
      };
    } catch {
      await sleep(100);
    }
  }
  proc.kill("SIGKILL");
  throw new Error(`server did not come up: ${stderr}`);
}

export function writeStarterConfig(path: string): void {
  execFileSync("python3", [
    "-m", "spikesoc.cli", "init-config", "--out", path,
  ]);
}

export function replayHash(configPath: string, logPath: string, untilUs: number): string {
  const out = execFileSync("python3", [
    "-m", "spikesoc.cli", "replay",
    "--config", configPath,
    "--log", logPath,
    "--until", `${untilUs}us`,
  ]);
  return out.toString().trim();
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
