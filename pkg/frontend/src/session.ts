/**
 * Connection state machine for a live session.
 *
 * Reconnects with exponential backoff, tracks frame arrival times to flag a
 * lagging stream, and gates outbound frames on an open socket plus an active
 * trial (trial-start frames are the one exception: they are what makes a
 * trial active). The socket and the clock are injectable so the whole
 * machine is testable without a network.
 */

import {
  ClientFrame,
  HelloFrame,
  ServerFrame,
  StateFrame,
  TrialFrame,
  encodeClientFrame,
  parseServerFrame,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory?: SocketFactory;
  now?: () => number; // ms
  schedule?: (fn: () => void, ms: number) => unknown;
  cancel?: (handle: unknown) => void;
  backoffMs?: number[];
  lagThresholdS?: number;
}

export type ConnectionStatus = "idle" | "connecting" | "open" | "reconnecting" | "closed";

export interface SessionHandlers {
  onStatus?: (status: ConnectionStatus) => void;
  onHello?: (frame: HelloFrame) => void;
  onState?: (frame: StateFrame) => void;
  onTrial?: (frame: TrialFrame) => void;
  onScore?: (frame: { kind: string; score: number }) => void;
  onServerError?: (reason: string) => void;
  onLag?: (lagging: boolean) => void;
}

const DEFAULT_BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

export class SessionClient {
  readonly url: string;
  status: ConnectionStatus = "idle";
  hello: HelloFrame | null = null;
  lastState: StateFrame | null = null;
  trialActive = false;

  private readonly handlers: SessionHandlers;
  private readonly makeSocket: SocketFactory;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private readonly cancel: (handle: unknown) => void;
  private readonly backoffMs: number[];
  private readonly lagThresholdS: number;

  private socket: SocketLike | null = null;
  private attempt = 0;
  private reconnectHandle: unknown = null;
  private lastFrameAtMs: number | null = null;
  private lagging = false;
  private closedByUser = false;

  constructor(url: string, handlers: SessionHandlers = {}, options: SessionOptions = {}) {
    this.url = url;
    this.handlers = handlers;
    this.makeSocket =
      options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.now = options.now ?? (() => Date.now());
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = options.cancel ?? ((handle) => clearTimeout(handle as number));
    this.backoffMs = options.backoffMs ?? DEFAULT_BACKOFF_MS;
    this.lagThresholdS = options.lagThresholdS ?? 1.0;
  }

  connect(): void {
    this.closedByUser = false;
    this.open("connecting");
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectHandle !== null) {
      this.cancel(this.reconnectHandle);
      this.reconnectHandle = null;
    }
    this.socket?.close();
    this.setStatus("closed");
  }

  /** Send a frame; returns false when the connection or gating refuses it. */
  send(frame: ClientFrame): boolean {
    if (this.status !== "open" || !this.socket) {
      return false;
    }
    const isStart = frame.type === "trial" && frame.action === "start";
    if (isStart ? this.trialActive : !this.trialActive) {
      return false; // inputs and questionnaires belong to an active trial
    }
    this.socket.send(encodeClientFrame(frame));
    return true;
  }

  /** True when no frame has arrived for longer than the lag threshold. */
  isLagging(): boolean {
    if (this.status !== "open" || this.lastFrameAtMs === null) {
      return false;
    }
    return (this.now() - this.lastFrameAtMs) / 1000 > this.lagThresholdS;
  }

  /** Poll-style lag check; fires the handler on transitions. */
  checkLag(): void {
    const lagging = this.isLagging();
    if (lagging !== this.lagging) {
      this.lagging = lagging;
      this.handlers.onLag?.(lagging);
    }
  }

  private open(status: ConnectionStatus): void {
    this.setStatus(status);
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.setStatus("open");
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onclose = () => this.handleDrop();
    socket.onerror = () => {
      /* the close handler owns recovery */
    };
  }

  private handleDrop(): void {
    this.socket = null;
    this.trialActive = false;
    if (this.closedByUser) {
      return;
    }
    const delay = this.backoffMs[Math.min(this.attempt, this.backoffMs.length - 1)];
    this.attempt += 1;
    this.setStatus("reconnecting");
    this.reconnectHandle = this.schedule(() => {
      this.reconnectHandle = null;
      this.open("reconnecting");
    }, delay);
  }

  private handleMessage(raw: string): void {
    let frame: ServerFrame;
    try {
      frame = parseServerFrame(raw);
    } catch {
      return; // tolerate junk from the wire; the server never relies on it
    }
    this.lastFrameAtMs = this.now();
    this.checkLag();
    switch (frame.type) {
      case "hello":
        this.hello = frame;
        this.handlers.onHello?.(frame);
        break;
      case "state":
        this.lastState = frame;
        this.trialActive = frame.trial_active;
        this.handlers.onState?.(frame);
        break;
      case "trial":
        if (frame.action === "started") {
          this.trialActive = true;
        }
        if (frame.action === "finished") {
          this.trialActive = false;
        }
        this.handlers.onTrial?.(frame);
        break;
      case "score":
        this.handlers.onScore?.(frame);
        break;
      case "error":
        this.handlers.onServerError?.(frame.reason);
        break;
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.handlers.onStatus?.(status);
    }
  }
}
