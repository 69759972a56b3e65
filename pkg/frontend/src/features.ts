/** Mapping from wire observations to policy input branches. */

import { Tensor } from "./client.js";
import { Observation } from "./policy.js";

export function toObservation(obs: Record<string, Tensor>): Observation {
  const out: Observation = {};
  const audio = obs["audio"] ?? obs["intensity"];
  if (audio) out.audio = audio.data;
  const visual = obs["depth"] ?? obs["rgb"];
  if (visual) out.visual = visual.data;
  if (obs["delta"]) out.pointgoal = obs["delta"].data;
  return out;
}
