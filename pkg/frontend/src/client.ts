/** Client for the newline-delimited JSON environment protocol.
 *
 * Requests: {"cmd":"reset","episode":"e01"}, {"cmd":"step","action":...},
 * {"cmd":"info"}. Tensors arrive as {shape, dtype:"f32le", data:base64}.
 */

import * as net from "node:net";

export const ACTION_NAMES =
  ["Stop", "MoveForward", "TurnLeft", "TurnRight"] as const;
export type ActionName = (typeof ACTION_NAMES)[number];

export interface WireTensor {
  shape: number[];
  dtype: string;
  data: string;
}

export interface Tensor {
  shape: number[];
  data: Float64Array;
}

export function decodeTensor(t: WireTensor): Tensor {
  if (t.dtype !== "f32le") throw new Error(`unsupported dtype ${t.dtype}`);
  const raw = Buffer.from(t.data, "base64");
  const expected = t.shape.reduce((a, b) => a * b, 1) * 4;
  if (raw.length !== expected) {
    throw new Error(`tensor payload ${raw.length} bytes, expected ${expected}`);
  }
  const f32 = new Float32Array(raw.buffer, raw.byteOffset, raw.length / 4);
  return { shape: t.shape.slice(), data: Float64Array.from(f32) };
}

export interface StepReply {
  ok: boolean;
  obs: Record<string, Tensor>;
  reward: number;
  done: boolean;
  success: boolean;
  error?: string;
}

export class EnvClient {
  private sock!: net.Socket;
  private buffer = "";
  private pending: Array<{
    resolve: (v: any) => void;
    reject: (e: Error) => void;
  }> = [];

  static async connect(host: string, port: number): Promise<EnvClient> {
    const client = new EnvClient();
    await new Promise<void>((resolve, reject) => {
      client.sock = net.createConnection({ host, port }, resolve);
      client.sock.once("error", reject);
    });
    client.sock.setNoDelay(true);
    client.sock.on("data", (chunk) => client.onData(chunk));
    client.sock.on("close", () => {
      for (const p of client.pending.splice(0)) {
        p.reject(new Error("connection closed"));
      }
    });
    return client;
  }

  private onData(chunk: Buffer): void {
    this.buffer += chunk.toString("utf8");
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      const waiter = this.pending.shift();
      if (!waiter) continue;
      try {
        waiter.resolve(JSON.parse(line));
      } catch (e) {
        waiter.reject(e as Error);
      }
    }
  }

  request(message: object): Promise<any> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.sock.write(JSON.stringify(message) + "\n");
    });
  }

  async info(): Promise<any> {
    return this.request({ cmd: "info" });
  }

  private decodeObs(obs: Record<string, WireTensor>): Record<string, Tensor> {
    const out: Record<string, Tensor> = {};
    for (const [key, value] of Object.entries(obs ?? {})) {
      out[key] = decodeTensor(value);
    }
    return out;
  }

  async reset(episode: string): Promise<Record<string, Tensor>> {
    const reply = await this.request({ cmd: "reset", episode });
    if (!reply.ok) throw new Error(`reset failed: ${reply.error}`);
    return this.decodeObs(reply.obs);
  }

  async step(action: ActionName): Promise<StepReply> {
    const reply = await this.request({ cmd: "step", action });
    if (!reply.ok) throw new Error(`step failed: ${reply.error}`);
    return { ...reply, obs: this.decodeObs(reply.obs) };
  }

  close(): void {
    this.sock.destroy();
  }
}
