/** Minimal neural-network layers with explicit backward passes.
 *
 * Everything runs on Float64Array, sample-at-a-time; gradients accumulate
 * into each Param until an optimizer step consumes them. The hand-written
 * backward passes are verified against central finite differences in the
 * test suite.
 */

import { Rng } from "./rng.js";

export class Param {
  v: Float64Array;
  g: Float64Array;

  constructor(size: number) {
    this.v = new Float64Array(size);
    this.g = new Float64Array(size);
  }

  zeroGrad(): void {
    this.g.fill(0);
  }
}

export interface Layer {
  params(): Param[];
}

function initUniform(p: Param, fanIn: number, rng: Rng): void {
  const bound = 1.0 / Math.sqrt(fanIn);
  for (let i = 0; i < p.v.length; i++) p.v[i] = (2 * rng.next() - 1) * bound;
}

export class Linear implements Layer {
  readonly inDim: number;
  readonly outDim: number;
  w: Param; // row-major [out][in]
  b: Param;

  constructor(inDim: number, outDim: number, rng: Rng) {
    this.inDim = inDim;
    this.outDim = outDim;
    this.w = new Param(outDim * inDim);
    this.b = new Param(outDim);
    initUniform(this.w, inDim, rng);
    initUniform(this.b, inDim, rng);
  }

  params(): Param[] {
    return [this.w, this.b];
  }

  forward(x: Float64Array): Float64Array {
    const y = new Float64Array(this.outDim);
    for (let o = 0; o < this.outDim; o++) {
      let acc = this.b.v[o];
      const row = o * this.inDim;
      for (let i = 0; i < this.inDim; i++) acc += this.w.v[row + i] * x[i];
      y[o] = acc;
    }
    return y;
  }

  backward(x: Float64Array, dy: Float64Array): Float64Array {
    const dx = new Float64Array(this.inDim);
    for (let o = 0; o < this.outDim; o++) {
      const g = dy[o];
      if (g === 0) continue;
      const row = o * this.inDim;
      this.b.g[o] += g;
      for (let i = 0; i < this.inDim; i++) {
        this.w.g[row + i] += g * x[i];
        dx[i] += this.w.v[row + i] * g;
      }
    }
    return dx;
  }
}

export function relu(x: Float64Array): Float64Array {
  const y = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) y[i] = x[i] > 0 ? x[i] : 0;
  return y;
}

export function reluBackward(x: Float64Array, dy: Float64Array): Float64Array {
  const dx = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) dx[i] = x[i] > 0 ? dy[i] : 0;
  return dx;
}

export function tanhVec(x: Float64Array): Float64Array {
  const y = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) y[i] = Math.tanh(x[i]);
  return y;
}

/** Gradient through tanh given the pre-activation ``x``. */
export function tanhBackward(x: Float64Array, dy: Float64Array): Float64Array {
  const dx = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    const t = Math.tanh(x[i]);
    dx[i] = dy[i] * (1 - t * t);
  }
  return dx;
}

export type Activation = "relu" | "tanh";

export function activate(kind: Activation, x: Float64Array): Float64Array {
  return kind === "tanh" ? tanhVec(x) : relu(x);
}

export function activateBackward(kind: Activation, x: Float64Array,
                                 dy: Float64Array): Float64Array {
  return kind === "tanh" ? tanhBackward(x, dy) : reluBackward(x, dy);
}

export function softmax(z: Float64Array): Float64Array {
  let max = -Infinity;
  for (const v of z) max = Math.max(max, v);
  const p = new Float64Array(z.length);
  let sum = 0;
  for (let i = 0; i < z.length; i++) {
    p[i] = Math.exp(z[i] - max);
    sum += p[i];
  }
  for (let i = 0; i < z.length; i++) p[i] /= sum;
  return p;
}

export interface ConvShape {
  h: number;
  w: number;
  c: number;
}

/** 2D convolution over HWC-flattened input. */
export class Conv2d implements Layer {
  readonly inShape: ConvShape;
  readonly outShape: ConvShape;
  readonly k: number;
  readonly stride: number;
  readonly pad: number;
  w: Param; // [outC][k][k][inC]
  b: Param;

  constructor(inShape: ConvShape, outC: number, k: number, stride: number,
              pad: number, rng: Rng) {
    this.inShape = inShape;
    this.k = k;
    this.stride = stride;
    this.pad = pad;
    const oh = Math.floor((inShape.h + 2 * pad - k) / stride) + 1;
    const ow = Math.floor((inShape.w + 2 * pad - k) / stride) + 1;
    if (oh < 1 || ow < 1) {
      throw new Error(
        `convolution output is empty for input ${inShape.h}x${inShape.w}`);
    }
    this.outShape = { h: oh, w: ow, c: outC };
    this.w = new Param(outC * k * k * inShape.c);
    this.b = new Param(outC);
    initUniform(this.w, k * k * inShape.c, rng);
    initUniform(this.b, k * k * inShape.c, rng);
  }

  params(): Param[] {
    return [this.w, this.b];
  }

  forward(x: Float64Array): Float64Array {
    const { h, w, c } = this.inShape;
    const { h: oh, w: ow, c: oc } = this.outShape;
    const y = new Float64Array(oh * ow * oc);
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        for (let f = 0; f < oc; f++) {
          let acc = this.b.v[f];
          const wBase = f * this.k * this.k * c;
          for (let ky = 0; ky < this.k; ky++) {
            const iy = oy * this.stride + ky - this.pad;
            if (iy < 0 || iy >= h) continue;
            for (let kx = 0; kx < this.k; kx++) {
              const ix = ox * this.stride + kx - this.pad;
              if (ix < 0 || ix >= w) continue;
              const xBase = (iy * w + ix) * c;
              const wRow = wBase + (ky * this.k + kx) * c;
              for (let ci = 0; ci < c; ci++) {
                acc += this.w.v[wRow + ci] * x[xBase + ci];
              }
            }
          }
          y[(oy * ow + ox) * oc + f] = acc;
        }
      }
    }
    return y;
  }

  backward(x: Float64Array, dy: Float64Array): Float64Array {
    const { h, w, c } = this.inShape;
    const { h: oh, w: ow, c: oc } = this.outShape;
    const dx = new Float64Array(x.length);
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        for (let f = 0; f < oc; f++) {
          const g = dy[(oy * ow + ox) * oc + f];
          if (g === 0) continue;
          this.b.g[f] += g;
          const wBase = f * this.k * this.k * c;
          for (let ky = 0; ky < this.k; ky++) {
            const iy = oy * this.stride + ky - this.pad;
            if (iy < 0 || iy >= h) continue;
            for (let kx = 0; kx < this.k; kx++) {
              const ix = ox * this.stride + kx - this.pad;
              if (ix < 0 || ix >= w) continue;
              const xBase = (iy * w + ix) * c;
              const wRow = wBase + (ky * this.k + kx) * c;
              for (let ci = 0; ci < c; ci++) {
                this.w.g[wRow + ci] += g * x[xBase + ci];
                dx[xBase + ci] += this.w.v[wRow + ci] * g;
              }
            }
          }
        }
      }
    }
    return dx;
  }
}

export interface GruCache {
  x: Float64Array;
  h: Float64Array;
  r: Float64Array;
  z: Float64Array;
  n: Float64Array;
  hhN: Float64Array; // Whh_n h + bhh_n, needed for the reset-gate gradient
  hNext: Float64Array;
}

/** Single forward GRU cell (gate order: reset, update, candidate). */
export class GruCell implements Layer {
  readonly inDim: number;
  readonly hDim: number;
  wih: Param; // [3H][in]
  whh: Param; // [3H][H]
  bih: Param;
  bhh: Param;

  constructor(inDim: number, hDim: number, rng: Rng) {
    this.inDim = inDim;
    this.hDim = hDim;
    this.wih = new Param(3 * hDim * inDim);
    this.whh = new Param(3 * hDim * hDim);
    this.bih = new Param(3 * hDim);
    this.bhh = new Param(3 * hDim);
    initUniform(this.wih, hDim, rng);
    initUniform(this.whh, hDim, rng);
    initUniform(this.bih, hDim, rng);
    initUniform(this.bhh, hDim, rng);
  }

  params(): Param[] {
    return [this.wih, this.whh, this.bih, this.bhh];
  }

  initialState(): Float64Array {
    return new Float64Array(this.hDim);
  }

  forward(x: Float64Array, h: Float64Array): GruCache {
    const H = this.hDim;
    const ih = new Float64Array(3 * H);
    const hh = new Float64Array(3 * H);
    for (let o = 0; o < 3 * H; o++) {
      let a = this.bih.v[o];
      const row = o * this.inDim;
      for (let i = 0; i < this.inDim; i++) a += this.wih.v[row + i] * x[i];
      ih[o] = a;
      let b = this.bhh.v[o];
      const hrow = o * H;
      for (let i = 0; i < H; i++) b += this.whh.v[hrow + i] * h[i];
      hh[o] = b;
    }
    const r = new Float64Array(H);
    const z = new Float64Array(H);
    const n = new Float64Array(H);
    const hhN = new Float64Array(H);
    const hNext = new Float64Array(H);
    for (let i = 0; i < H; i++) {
      r[i] = 1 / (1 + Math.exp(-(ih[i] + hh[i])));
      z[i] = 1 / (1 + Math.exp(-(ih[H + i] + hh[H + i])));
      hhN[i] = hh[2 * H + i];
      n[i] = Math.tanh(ih[2 * H + i] + r[i] * hhN[i]);
      hNext[i] = (1 - z[i]) * n[i] + z[i] * h[i];
    }
    return { x, h, r, z, n, hhN, hNext };
  }

  /** Backward through one step; returns d(input). Gradients do not flow
   * into the previous hidden state (truncated backpropagation). */
  backward(cache: GruCache, dhNext: Float64Array): Float64Array {
    const H = this.hDim;
    const { x, h, r, z, n, hhN } = cache;
    const dPre = new Float64Array(3 * H); // gradients at gate pre-activations
    for (let i = 0; i < H; i++) {
      const dn = dhNext[i] * (1 - z[i]);
      const dz = dhNext[i] * (h[i] - n[i]);
      const dnPre = dn * (1 - n[i] * n[i]);
      const dr = dnPre * hhN[i];
      dPre[i] = dr * r[i] * (1 - r[i]);
      dPre[H + i] = dz * z[i] * (1 - z[i]);
      dPre[2 * H + i] = dnPre;
    }
    const dx = new Float64Array(this.inDim);
    for (let o = 0; o < 3 * H; o++) {
      const gate = Math.floor(o / H);
      const i0 = o - gate * H;
      // candidate-gate hidden path carries the extra reset factor
      const gIh = dPre[o];
      const gHh = gate === 2 ? dPre[o] * r[i0] : dPre[o];
      if (gIh !== 0) {
        this.bih.g[o] += gIh;
        const row = o * this.inDim;
        for (let i = 0; i < this.inDim; i++) {
          this.wih.g[row + i] += gIh * x[i];
          dx[i] += this.wih.v[row + i] * gIh;
        }
      }
      if (gHh !== 0) {
        this.bhh.g[o] += gHh;
        const hrow = o * H;
        for (let i = 0; i < H; i++) this.whh.g[hrow + i] += gHh * h[i];
      }
    }
    return dx;
  }
}

export class Adam {
  private readonly params: Param[];
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;
  lr: number;
  readonly beta1: number;
  readonly beta2: number;
  readonly eps: number;

  constructor(params: Param[], lr: number, beta1 = 0.9, beta2 = 0.999,
              eps = 1e-8) {
    this.params = params;
    this.lr = lr;
    this.beta1 = beta1;
    this.beta2 = beta2;
    this.eps = eps;
    this.m = params.map((p) => new Float64Array(p.v.length));
    this.v = params.map((p) => new Float64Array(p.v.length));
  }

  /** Apply one update. ``scale`` multiplies all gradients (e.g. 1/batch);
   * when ``maxNorm`` is set the scaled global gradient norm is clipped. */
  step(scale = 1.0, maxNorm?: number): void {
    if (maxNorm !== undefined) {
      let sq = 0;
      for (const p of this.params) {
        for (let i = 0; i < p.g.length; i++) {
          const g = p.g[i] * scale;
          sq += g * g;
        }
      }
      const norm = Math.sqrt(sq);
      if (norm > maxNorm) scale *= maxNorm / norm;
    }
    this.t += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.t);
    const bc2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < p.v.length; i++) {
        const g = p.g[i] * scale;
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        p.v[i] -= this.lr * (m[i] / bc1) / (Math.sqrt(v[i] / bc2) + this.eps);
      }
      p.zeroGrad();
    }
  }
}
