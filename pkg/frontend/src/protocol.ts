/**
 * Client for the environment wire protocol (see ../protocol.md).
 *
 * Frames are 4-byte big-endian length + payload. Control messages are JSON;
 * a reply with `obs: true` is followed by one binary observation frame.
 */

import * as net from "net";

export interface ObsPair {
  width: number;
  height: number;
  /** RGB8 row-major */
  target: Uint8Array;
  /** RGB8 row-major */
  current: Uint8Array;
}

export interface StepReply {
  ok: boolean;
  env?: number;
  reward?: number;
  done?: boolean;
  error?: string;
  info?: {
    rotation?: [number, number];
    target?: [number, number];
    step: number;
    stop_called: boolean;
    forced_termination: boolean;
    pano?: string;
    difficulty?: string;
  };
  obs?: ObsPair;
}

export interface Handshake {
  ok: boolean;
  version: number;
  n_envs: number;
  obs_shape: [number, number, number, number];
  obs_encoding: string;
  hide_state: boolean;
}

const OBS_MAGIC = "OB01";

export function decodeObservation(buf: Buffer): ObsPair {
  if (buf.subarray(0, 4).toString("latin1") !== OBS_MAGIC) {
    throw new Error("bad observation frame magic");
  }
  const width = buf.readUInt32BE(4);
  const height = buf.readUInt32BE(8);
  const n = width * height * 3;
  if (buf.length !== 12 + 2 * n) {
    throw new Error(`bad observation frame length ${buf.length}`);
  }
  return {
    width,
    height,
    target: new Uint8Array(buf.buffer, buf.byteOffset + 12, n),
    current: new Uint8Array(buf.buffer, buf.byteOffset + 12 + n, n),
  };
}

/** Buffered frame reader over a socket. */
class FrameReader {
  private chunks: Buffer = Buffer.alloc(0);
  private waiters: Array<{ resolve: (b: Buffer | null) => void }> = [];
  private ended = false;

  constructor(socket: net.Socket) {
    socket.on("data", (data: Buffer) => {
      this.chunks = this.chunks.length ? Buffer.concat([this.chunks, data]) : data;
      this.drain();
    });
    const finish = () => {
      this.ended = true;
      this.drain();
    };
    socket.on("end", finish);
    socket.on("close", finish);
    socket.on("error", finish);
  }

  private tryExtract(): Buffer | null {
    if (this.chunks.length < 4) return null;
    const len = this.chunks.readUInt32BE(0);
    if (this.chunks.length < 4 + len) return null;
    const frame = this.chunks.subarray(4, 4 + len);
    this.chunks = this.chunks.subarray(4 + len);
    return Buffer.from(frame);
  }

  private drain(): void {
    while (this.waiters.length) {
      const frame = this.tryExtract();
      if (frame !== null) {
        this.waiters.shift()!.resolve(frame);
      } else if (this.ended) {
        this.waiters.shift()!.resolve(null);
      } else {
        break;
      }
    }
  }

  read(): Promise<Buffer | null> {
    return new Promise((resolve) => {
      this.waiters.push({ resolve });
      this.drain();
    });
  }
}

export class EnvClient {
  private constructor(
    private socket: net.Socket,
    private reader: FrameReader,
  ) {}

  static connect(host: string, port: number): Promise<EnvClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port, noDelay: true });
      socket.once("connect", () => resolve(new EnvClient(socket, new FrameReader(socket))));
      socket.once("error", reject);
    });
  }

  private writeFrame(payload: Buffer): void {
    const header = Buffer.alloc(4);
    header.writeUInt32BE(payload.length, 0);
    this.socket.write(Buffer.concat([header, payload]));
  }

  sendRequest(msg: Record<string, unknown>): void {
    this.writeFrame(Buffer.from(JSON.stringify(msg), "utf-8"));
  }

  async readReply(): Promise<StepReply> {
    const payload = await this.reader.read();
    if (payload === null) throw new Error("server closed the connection");
    const raw = JSON.parse(payload.toString("utf-8")) as Record<string, unknown>;
    const reply = raw as unknown as StepReply;
    if (raw.obs === true) {
      const obsFrame = await this.reader.read();
      if (obsFrame === null) throw new Error("missing observation frame");
      reply.obs = decodeObservation(obsFrame);
    }
    return reply;
  }

  private async call(msg: Record<string, unknown>): Promise<StepReply> {
    this.sendRequest(msg);
    return this.readReply();
  }

  async handshake(): Promise<Handshake> {
    const reply = (await this.call({ op: "handshake", version: 1 })) as unknown as Handshake;
    if (!reply.ok) throw new Error("handshake failed");
    return reply;
  }

  reset(env: number): Promise<StepReply> {
    return this.call({ op: "reset", env });
  }

  step(env: number, action: string): Promise<StepReply> {
    return this.call({ op: "step", env, action });
  }

  /** Pipelined step across many envs; replies come back in request order. */
  async stepAll(actions: Map<number, string>): Promise<Map<number, StepReply>> {
    for (const [env, action] of actions) this.sendRequest({ op: "step", env, action });
    const out = new Map<number, StepReply>();
    for (const [env] of actions) {
      const reply = await this.readReply();
      out.set(reply.env ?? env, reply);
    }
    return out;
  }

  setDifficulties(difficulties: string[]): Promise<StepReply> {
    return this.call({ op: "set_difficulties", difficulties });
  }

  async close(): Promise<void> {
    try {
      this.sendRequest({ op: "close" });
      await this.readReply();
    } catch {
      // already closed
    }
    this.socket.destroy();
  }
}

export const ACTIONS = ["up", "down", "left", "right", "stop"] as const;
export type ActionName = (typeof ACTIONS)[number];
