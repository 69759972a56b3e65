/** Modality-impact analysis.
 *
 * For a trained multimodal policy, the impact of a modality at a decision
 * point is how much the log-probability of the chosen action moves when the
 * modality's input is replaced by its average over a sample of training
 * observations. Impacts are normalized per step so that they sum to one.
 */

import { Observation, Policy } from "./policy.js";

export type Modality = "audio" | "visual";

export interface ImpactResult {
  audio: number;
  visual: number;
}

/** Normalized impact of the audio and visual branches on one decision.
 *
 * `averages` holds the per-branch mean observation used as the ablation
 * stand-in. Throws when the policy does not carry both branches, since a
 * single-modality policy has no meaningful split.
 */
export function modalityImpact(
  policy: Policy, obs: Observation, h: Float64Array,
  averages: Partial<Record<Modality, Float64Array>>,
): ImpactResult {
  if (!policy.hasBranch("audio") || !policy.hasBranch("visual")) {
    throw new Error("modality impact requires both audio and visual branches");
  }
  const base = policy.forward(obs, h);
  const action = base.probs.indexOf(Math.max(...base.probs));
  const baseLog = Math.log(base.probs[action] + 1e-12);

  const raw: Record<Modality, number> = { audio: 0, visual: 0 };
  for (const name of ["audio", "visual"] as const) {
    const stand = averages[name];
    if (!stand) throw new Error(`missing average observation for ${name}`);
    const ablated: Observation = { ...obs, [name]: stand };
    const out = policy.forward(ablated, h);
    raw[name] = Math.abs(baseLog - Math.log(out.probs[action] + 1e-12));
  }
  const total = raw.audio + raw.visual;
  if (total === 0) return { audio: 0.5, visual: 0.5 };
  return { audio: raw.audio / total, visual: raw.visual / total };
}

/** Mean impact over a list of decision points. Each entry supplies the
 * observation and the recurrent state the policy held when acting. */
export function meanModalityImpact(
  policy: Policy,
  points: { obs: Observation; h: Float64Array }[],
  averages: Partial<Record<Modality, Float64Array>>,
): ImpactResult {
  let audio = 0;
  let visual = 0;
  for (const p of points) {
    const r = modalityImpact(policy, p.obs, p.h, averages);
    audio += r.audio;
    visual += r.visual;
  }
  const n = Math.max(points.length, 1);
  return { audio: audio / n, visual: visual / n };
}
