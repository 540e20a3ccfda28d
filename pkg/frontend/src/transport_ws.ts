// Browser transport: one WebSocket, one JSON document per text frame.

import { Transport } from "./protocol.js";

export class WebSocketTransport implements Transport {
  private socket: WebSocket;
  private messageHandlers: Array<(text: string) => void> = [];
  private closeHandlers: Array<() => void> = [];

  constructor(url: string, onOpen?: () => void) {
    this.socket = new WebSocket(url);
    this.socket.addEventListener("open", () => onOpen?.());
    this.socket.addEventListener("message", (event) => {
      const text = typeof event.data === "string" ? event.data : "";
      for (const handler of this.messageHandlers) handler(text);
    });
    const closed = () => {
      for (const handler of this.closeHandlers) handler();
    };
    this.socket.addEventListener("close", closed);
    this.socket.addEventListener("error", () => this.socket.close());
  }

  send(text: string): void {
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(text);
    }
  }

  close(): void {
    this.socket.close();
  }

  onMessage(handler: (text: string) => void): void {
    this.messageHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }
}
