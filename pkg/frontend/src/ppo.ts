/** Proximal Policy Optimization against the remote environment server.
 *
 * Clipped surrogate objective with a value loss and an entropy bonus,
 * generalized advantage estimation, and a recurrent policy whose hidden
 * states are stored during rollout (truncated backpropagation of length
 * one at update time). Desk-scale budgets only.
 */

import { ACTION_NAMES, ActionName, EnvClient } from "./client.js";
import { EpisodeMeta, episodeName } from "./episodes.js";
import { toObservation } from "./features.js";
import { Adam } from "./nn.js";
import { Observation, Policy } from "./policy.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  learningRate: number; // Adam
  gamma: number;        // reward discount
  lambda: number;       // GAE
  clip: number;
  epochs: number;
  rolloutLength: number;
  minibatch: number;
  entropyCoef: number;
  /** Optional final entropy coefficient: linearly annealed from
   * ``entropyCoef`` over ``totalSteps`` (constant when omitted). */
  entropyCoefFinal?: number;
  valueCoef: number;
  totalSteps: number;
  /** Stop early once an evaluation reaches this success rate (optional). */
  targetSuccess?: number;
  evalEvery?: number; // env steps between evaluations
  reservoirSize: number; // observation sample kept for modality averages
  /** Global gradient-norm clip applied at each update. */
  maxGradNorm: number;
}

export function defaultTrainConfig(totalSteps: number): TrainConfig {
  return {
    learningRate: 2.5e-4,
    gamma: 0.99,
    lambda: 0.95,
    clip: 0.2,
    epochs: 4,
    rolloutLength: 128,
    minibatch: 32,
    entropyCoef: 0.01,
    valueCoef: 0.5,
    totalSteps,
    reservoirSize: 10_000,
    maxGradNorm: 0.5,
  };
}

interface Transition {
  obs: Observation;
  h: Float64Array;
  action: number;
  logProb: number;
  value: number;
  reward: number;
  done: boolean;
}

export interface CurvePoint {
  step: number;
  success: number;
  spl: number;
  meanReward: number;
}

export interface TrainResult {
  curve: CurvePoint[];
  steps: number;
  /** Per-branch mean observation over a reservoir sample of training
   * observations, for modality-ablation analysis. */
  averages: Partial<Record<"audio" | "visual" | "pointgoal", Float64Array>>;
}

export interface EvalResultRow {
  episode_id: number;
  success: boolean;
  geodesic_m: number;
  path_m: number;
  steps: number;
  reward: number;
}

export interface EvalResult {
  rows: EvalResultRow[];
  success: number;
  spl: number;
  meanReward: number;
}

export function splOf(rows: EvalResultRow[]): number {
  let total = 0;
  for (const r of rows) {
    if (r.success) total += r.geodesic_m / Math.max(r.geodesic_m, r.path_m);
  }
  return rows.length ? total / rows.length : 0;
}

/** Greedy (or sampled) rollouts over a fixed episode list.
 *
 * Path length counts every MoveForward as one grid cell; the protocol does
 * not reveal collisions, so blocked moves also count, which only lowers
 * the measured SPL and does so identically for every policy compared.
 */
export async function evaluate(
  client: EnvClient, policy: Policy, episodes: EpisodeMeta[],
  opts: { greedy?: boolean; rng?: Rng; maxSteps?: number } = {},
): Promise<EvalResult> {
  const greedy = opts.greedy ?? true;
  const rng = opts.rng ?? new Rng(0);
  const rows: EvalResultRow[] = [];
  for (const ep of episodes) {
    let obs = toObservation(await client.reset(episodeName(ep)));
    let h = policy.initialState();
    let done = false;
    let success = false;
    let steps = 0;
    let forwards = 0;
    let rewardSum = 0;
    while (!done) {
      const out = policy.forward(obs, h);
      const action = greedy
        ? out.probs.indexOf(Math.max(...out.probs))
        : rng.categorical(out.probs);
      const reply = await client.step(ACTION_NAMES[action] as ActionName);
      steps += 1;
      rewardSum += reply.reward;
      if (action === 1) forwards += 1;
      done = reply.done;
      success = reply.success;
      h = out.hNext;
      if (!done) obs = toObservation(reply.obs);
      if (opts.maxSteps && steps >= opts.maxSteps) break;
    }
    rows.push({
      episode_id: ep.episode_id,
      success,
      geodesic_m: ep.geodesic_m,
      path_m: 0.5 * forwards,
      steps,
      reward: rewardSum,
    });
  }
  const success = rows.filter((r) => r.success).length / rows.length;
  const meanReward = rows.reduce((a, r) => a + r.reward, 0) / rows.length;
  return { rows, success, spl: splOf(rows), meanReward };
}

function entropyOf(probs: Float64Array): number {
  let h = 0;
  for (const p of probs) if (p > 0) h -= p * Math.log(p);
  return h;
}

class Reservoir {
  private readonly size: number;
  private readonly rng: Rng;
  private seen = 0;
  readonly samples: Observation[] = [];

  constructor(size: number, rng: Rng) {
    this.size = size;
    this.rng = rng;
  }

  add(obs: Observation): void {
    this.seen += 1;
    if (this.samples.length < this.size) {
      this.samples.push(obs);
    } else {
      const j = this.rng.int(this.seen);
      if (j < this.size) this.samples[j] = obs;
    }
  }

  averages(): TrainResult["averages"] {
    const out: TrainResult["averages"] = {};
    for (const name of ["audio", "visual", "pointgoal"] as const) {
      const present = this.samples.filter((s) => s[name]);
      if (!present.length) continue;
      const mean = new Float64Array(present[0][name]!.length);
      for (const s of present) {
        const v = s[name]!;
        for (let i = 0; i < mean.length; i++) mean[i] += v[i];
      }
      for (let i = 0; i < mean.length; i++) mean[i] /= present.length;
      out[name] = mean;
    }
    return out;
  }
}

export async function trainPpo(
  client: EnvClient, policy: Policy, config: TrainConfig,
  trainEpisodes: EpisodeMeta[], evalEpisodes: EpisodeMeta[], seed: number,
): Promise<TrainResult> {
  const rng = new Rng(0xc0ffee ^ seed);
  const optimizer = new Adam(policy.params(), config.learningRate);
  const reservoir = new Reservoir(config.reservoirSize, rng);
  const curve: CurvePoint[] = [];
  const evalEvery = config.evalEvery ?? Math.max(config.rolloutLength * 8,
                                                 1000);

  let epIndex = 0;
  const nextEpisode = () => {
    const ep = trainEpisodes[epIndex % trainEpisodes.length];
    epIndex += 1;
    return ep;
  };

  let obs = toObservation(await client.reset(episodeName(nextEpisode())));
  let h = policy.initialState();
  let steps = 0;
  let lastEval = 0;
  let best: { success: number; spl: number; params: Float64Array[] }
    | undefined;

  while (steps < config.totalSteps) {
    // ---- rollout -------------------------------------------------------
    const batch: Transition[] = [];
    while (batch.length < config.rolloutLength) {
      const out = policy.forward(obs, h);
      const action = rng.categorical(out.probs);
      const reply = await client.step(ACTION_NAMES[action] as ActionName);
      batch.push({
        obs, h,
        action,
        logProb: Math.log(out.probs[action] + 1e-12),
        value: out.value,
        reward: reply.reward,
        done: reply.done,
      });
      reservoir.add(obs);
      steps += 1;
      if (reply.done) {
        obs = toObservation(await client.reset(episodeName(nextEpisode())));
        h = policy.initialState();
      } else {
        obs = toObservation(reply.obs);
        h = out.hNext;
      }
    }
    // ---- generalized advantage estimation ------------------------------
    const n = batch.length;
    const adv = new Float64Array(n);
    const ret = new Float64Array(n);
    const tailValue = batch[n - 1].done ? 0
      : policy.forward(obs, h).value;
    let gae = 0;
    for (let t = n - 1; t >= 0; t--) {
      const nextValue = batch[t].done ? 0
        : t === n - 1 ? tailValue : batch[t + 1].value;
      const nonTerminal = batch[t].done ? 0 : 1;
      const delta = batch[t].reward + config.gamma * nextValue
        - batch[t].value;
      gae = delta + config.gamma * config.lambda * nonTerminal * gae;
      adv[t] = gae;
      ret[t] = adv[t] + batch[t].value;
    }
    let mean = 0;
    for (const a of adv) mean += a;
    mean /= n;
    let variance = 0;
    for (const a of adv) variance += (a - mean) * (a - mean);
    const std = Math.sqrt(variance / n) + 1e-8;
    for (let t = 0; t < n; t++) adv[t] = (adv[t] - mean) / std;

    // ---- clipped-surrogate updates --------------------------------------
    const frac = Math.min(steps / config.totalSteps, 1);
    const entCoef = config.entropyCoefFinal === undefined
      ? config.entropyCoef
      : config.entropyCoef
        + frac * (config.entropyCoefFinal - config.entropyCoef);
    const order = Array.from({ length: n }, (_, i) => i);
    for (let epoch = 0; epoch < config.epochs; epoch++) {
      rng.shuffle(order);
      for (let start = 0; start < n; start += config.minibatch) {
        const idx = order.slice(start, start + config.minibatch);
        for (const t of idx) {
          const tr = batch[t];
          const out = policy.forward(tr.obs, tr.h);
          const logProb = Math.log(out.probs[tr.action] + 1e-12);
          const ratio = Math.exp(logProb - tr.logProb);
          const clipped = Math.min(Math.max(ratio, 1 - config.clip),
                                   1 + config.clip);
          // gradient of -min(r*A, clip(r)*A) wrt logProb
          const useUnclipped = ratio * adv[t] <= clipped * adv[t];
          const dLogProb = useUnclipped ? -ratio * adv[t] : 0;
          const entropy = entropyOf(out.probs);
          const dLogits = new Float64Array(out.probs.length);
          for (let a = 0; a < dLogits.length; a++) {
            const onehot = a === tr.action ? 1 : 0;
            dLogits[a] = dLogProb * (onehot - out.probs[a]);
            // d(-c*H)/dlogit_a  = c * p_a * (log p_a + H)
            dLogits[a] += entCoef * out.probs[a]
              * (Math.log(out.probs[a] + 1e-12) + entropy);
          }
          const dValue = config.valueCoef * (out.value - ret[t]);
          policy.backward(out.cache, dLogits, dValue);
        }
        optimizer.step(1 / idx.length, config.maxGradNorm);
      }
    }
    // ---- periodic evaluation --------------------------------------------
    if (steps - lastEval >= evalEvery || steps >= config.totalSteps) {
      lastEval = steps;
      const ev = await evaluate(client, policy, evalEpisodes);
      curve.push({ step: steps, success: ev.success, spl: ev.spl,
                   meanReward: ev.meanReward });
      // keep the best-scoring parameters seen so far; training continues
      // from the current (not the best) parameters
      if (best === undefined || ev.success > best.success
          || (ev.success === best.success && ev.spl > best.spl)) {
        best = { success: ev.success, spl: ev.spl,
                 params: policy.params().map((p) => p.v.slice()) };
      }
      if (config.targetSuccess !== undefined
          && ev.success >= config.targetSuccess) {
        break;
      }
      // evaluation consumed the session's episode state; restart training
      obs = toObservation(await client.reset(episodeName(nextEpisode())));
      h = policy.initialState();
    }
  }
  // restore the best evaluated parameters (early stopping on peak churn)
  if (best !== undefined) {
    const params = policy.params();
    for (let i = 0; i < params.length; i++) {
      params[i].v.set(best.params[i]);
    }
  }
  return { curve, steps, averages: reservoir.averages() };
}
