/** Recurrent actor-critic policy over audio / visual / goal-vector inputs.
 *
 * Per-modality encoders feed a shared linear layer, a GRU core, and linear
 * actor (4 actions) and critic heads. The recurrent core is a single
 * forward GRU: an online policy cannot condition on future frames, so a
 * bidirectional core is not implementable here and is deliberately not
 * offered.
 */

import { Activation, Adam, activate, activateBackward, Conv2d, ConvShape,
         GruCache, GruCell, Linear, Param, relu, reluBackward,
         softmax } from "./nn.js";
import { Rng } from "./rng.js";

export type BranchName = "audio" | "visual" | "pointgoal";

export interface CnnEncoderConfig {
  kind: "cnn";
  channels: [number, number, number];
  out: number;
}

export interface MlpEncoderConfig {
  kind: "mlp";
  out: number;
}

export type EncoderConfig = CnnEncoderConfig | MlpEncoderConfig;

export interface BranchConfig {
  shape: number[]; // input tensor shape, e.g. [65, 26, 2]
  encoder: EncoderConfig;
  /** Optional elementwise input normalization: (x + shift) * scale. */
  shift?: number;
  scale?: number;
  /** Hidden activation; tanh avoids dead units in small policies. */
  activation?: Activation;
}

export interface PolicyConfig {
  audio?: BranchConfig;
  visual?: BranchConfig;
  pointgoal?: { dim: number };
  gruInput: number;
  gruHidden: number;
  /** Activation after the shared fuse layer (default relu). */
  activation?: Activation;
}

export const NUM_ACTIONS = 4;

/** Reference full-size configuration: audio and visual CNN features of
 * length 512 each plus the 2-vector goal displacement, a 1026-long fused
 * feature, and a 512/512 GRU. */
export function referenceConfig(): PolicyConfig {
  return {
    audio: { shape: [65, 26, 2],
             encoder: { kind: "cnn", channels: [32, 64, 32], out: 512 } },
    visual: { shape: [128, 128, 1],
              encoder: { kind: "cnn", channels: [32, 64, 32], out: 512 } },
    pointgoal: { dim: 2 },
    gruInput: 512,
    gruHidden: 512,
  };
}

interface BranchCache {
  input: Float64Array;
  pre: Float64Array[]; // pre-activation input of each stage
  out: Float64Array;
}

class Encoder {
  readonly name: BranchName;
  readonly outDim: number;
  private readonly convs: Conv2d[] = [];
  private readonly linear: Linear | null = null;
  private readonly shift: number;
  private readonly scale: number;
  private readonly act: Activation;

  constructor(name: BranchName, cfg: BranchConfig, rng: Rng) {
    this.name = name;
    this.shift = cfg.shift ?? 0;
    this.scale = cfg.scale ?? 1;
    this.act = cfg.activation ?? "relu";
    const flat = cfg.shape.reduce((a, b) => a * b, 1);
    if (cfg.encoder.kind === "cnn") {
      if (cfg.shape.length !== 3) {
        throw new Error(`${name}: CNN encoder needs a HxWxC input`);
      }
      let shape: ConvShape =
        { h: cfg.shape[0], w: cfg.shape[1], c: cfg.shape[2] };
      const [c1, c2, c3] = cfg.encoder.channels;
      const specs: [number, number, number, number][] = [
        [c1, 8, 4, 2], [c2, 4, 2, 1], [c3, 3, 1, 1]];
      for (const [oc, k, s, p] of specs) {
        const conv = new Conv2d(shape, oc, k, s, p, rng);
        this.convs.push(conv);
        shape = conv.outShape;
      }
      this.linear = new Linear(shape.h * shape.w * shape.c,
                               cfg.encoder.out, rng);
    } else {
      this.linear = new Linear(flat, cfg.encoder.out, rng);
    }
    this.outDim = cfg.encoder.out;
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const c of this.convs) out.push(...c.params());
    if (this.linear) out.push(...this.linear.params());
    return out;
  }

  forward(input: Float64Array): BranchCache {
    const pre: Float64Array[] = [];
    let x = input;
    if (this.shift !== 0 || this.scale !== 1) {
      x = Float64Array.from(input, (v) => (v + this.shift) * this.scale);
    }
    for (const conv of this.convs) {
      pre.push(x);
      x = activate(this.act, conv.forward(x));
    }
    pre.push(x);
    const out = activate(this.act, this.linear!.forward(x));
    return { input, pre, out };
  }

  backward(cache: BranchCache, dOut: Float64Array): void {
    const linIn = cache.pre[cache.pre.length - 1];
    const linPre = this.linear!.forward(linIn); // recompute pre-activation
    let dx = this.linear!.backward(linIn, activateBackward(this.act, linPre, dOut));
    for (let i = this.convs.length - 1; i >= 0; i--) {
      const convIn = cache.pre[i];
      const convPre = this.convs[i].forward(convIn);
      dx = this.convs[i].backward(convIn, activateBackward(this.act, convPre, dx));
    }
  }
}

export interface ForwardResult {
  logits: Float64Array;
  probs: Float64Array;
  value: number;
  hNext: Float64Array;
  cache: PolicyCache;
}

export interface PolicyCache {
  branches: Partial<Record<BranchName, BranchCache>>;
  fused: Float64Array;
  fusePre: Float64Array;
  gru: GruCache;
}

export type Observation = Partial<Record<BranchName, Float64Array>>;

export class Policy {
  readonly config: PolicyConfig;
  readonly featureDim: number;
  private readonly encoders: Partial<Record<BranchName, Encoder>> = {};
  private readonly pointgoalDim: number;
  private readonly fuse: Linear;
  private readonly fuseAct: Activation;
  readonly gru: GruCell;
  private readonly actor: Linear;
  private readonly critic: Linear;

  constructor(config: PolicyConfig, seed = 0) {
    const rng = new Rng(0x9e3779b9 ^ seed);
    this.config = config;
    let dim = 0;
    if (config.audio) {
      this.encoders.audio = new Encoder("audio", config.audio, rng);
      dim += this.encoders.audio.outDim;
    }
    if (config.visual) {
      this.encoders.visual = new Encoder("visual", config.visual, rng);
      dim += this.encoders.visual.outDim;
    }
    this.pointgoalDim = config.pointgoal ? config.pointgoal.dim : 0;
    dim += this.pointgoalDim;
    if (dim === 0) throw new Error("policy needs at least one input branch");
    this.featureDim = dim;
    this.fuse = new Linear(dim, config.gruInput, rng);
    this.fuseAct = config.activation ?? "relu";
    this.gru = new GruCell(config.gruInput, config.gruHidden, rng);
    this.actor = new Linear(config.gruHidden, NUM_ACTIONS, rng);
    this.critic = new Linear(config.gruHidden, 1, rng);
  }

  hasBranch(name: BranchName): boolean {
    if (name === "pointgoal") return this.pointgoalDim > 0;
    return this.encoders[name] !== undefined;
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const name of ["audio", "visual"] as const) {
      const enc = this.encoders[name];
      if (enc) out.push(...enc.params());
    }
    out.push(...this.fuse.params(), ...this.gru.params(),
             ...this.actor.params(), ...this.critic.params());
    return out;
  }

  initialState(): Float64Array {
    return this.gru.initialState();
  }

  forward(obs: Observation, h: Float64Array): ForwardResult {
    const fused = new Float64Array(this.featureDim);
    const branches: PolicyCache["branches"] = {};
    let off = 0;
    for (const name of ["audio", "visual"] as const) {
      const enc = this.encoders[name];
      if (!enc) continue;
      const input = obs[name];
      if (!input) throw new Error(`missing observation branch '${name}'`);
      const cache = enc.forward(input);
      branches[name] = cache;
      fused.set(cache.out, off);
      off += enc.outDim;
    }
    if (this.pointgoalDim > 0) {
      const pg = obs.pointgoal;
      if (!pg || pg.length !== this.pointgoalDim) {
        throw new Error("missing or mis-sized pointgoal observation");
      }
      fused.set(pg, off);
    }
    const fusePre = this.fuse.forward(fused);
    const gru = this.gru.forward(activate(this.fuseAct, fusePre), h);
    const logits = this.actor.forward(gru.hNext);
    const value = this.critic.forward(gru.hNext)[0];
    return { logits, probs: softmax(logits), value, hNext: gru.hNext,
             cache: { branches, fused, fusePre, gru } };
  }

  /** Accumulate parameter gradients for one sample given gradients at the
   * actor logits and the value output. */
  backward(cache: PolicyCache, dLogits: Float64Array, dValue: number): void {
    const dh = this.actor.backward(cache.gru.hNext, dLogits);
    const dhc = this.critic.backward(cache.gru.hNext,
                                     Float64Array.of(dValue));
    for (let i = 0; i < dh.length; i++) dh[i] += dhc[i];
    const dGruIn = this.gru.backward(cache.gru, dh);
    const dFused = this.fuse.backward(
      cache.fused, activateBackward(this.fuseAct, cache.fusePre, dGruIn));
    let off = 0;
    for (const name of ["audio", "visual"] as const) {
      const enc = this.encoders[name];
      if (!enc) continue;
      enc.backward(cache.branches[name]!,
                   dFused.subarray(off, off + enc.outDim));
      off += enc.outDim;
    }
  }

  serialize(): number[][] {
    return this.params().map((p) => Array.from(p.v));
  }

  loadWeights(weights: number[][]): void {
    const params = this.params();
    if (weights.length !== params.length) {
      throw new Error("checkpoint does not match the policy architecture");
    }
    params.forEach((p, i) => {
      if (weights[i].length !== p.v.length) {
        throw new Error(`parameter ${i} size mismatch`);
      }
      p.v.set(weights[i]);
    });
  }
}

export function adamFor(policy: Policy, lr: number): Adam {
  return new Adam(policy.params(), lr);
}
