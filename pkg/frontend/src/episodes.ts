/** Episode metadata files (JSON lines) and the sound-split manifest. */

import * as fs from "node:fs";

export interface EpisodeMeta {
  episode_id: number;
  start_node: number;
  start_heading: number;
  goal_node: number;
  sound_index: number;
  geodesic_m: number;
}

export function loadEpisodes(path: string): EpisodeMeta[] {
  return fs
    .readFileSync(path, "utf8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as EpisodeMeta);
}

export function episodeName(ep: EpisodeMeta): string {
  return `e${String(ep.episode_id).padStart(2, "0")}`;
}

export interface SoundManifest {
  train: number[];
  val: number[];
  test: number[];
}

export function loadManifest(path: string): SoundManifest {
  const manifest = JSON.parse(fs.readFileSync(path, "utf8")) as SoundManifest;
  for (const split of ["train", "val", "test"] as const) {
    if (!Array.isArray(manifest[split])) {
      throw new Error(`manifest is missing the '${split}' split`);
    }
  }
  return manifest;
}

/** Enforce the heard/unheard protocol: every training episode uses a
 * training-split waveform, every held-out episode a test-split waveform,
 * and the two sets are disjoint. */
export function assertHeardUnheardSplit(
  trainEps: EpisodeMeta[], testEps: EpisodeMeta[],
  manifest: SoundManifest): void {
  const trainSet = new Set(manifest.train);
  const testSet = new Set(manifest.test);
  for (const id of trainSet) {
    if (testSet.has(id)) throw new Error(`sound ${id} is in both splits`);
  }
  for (const ep of trainEps) {
    if (!trainSet.has(ep.sound_index)) {
      throw new Error(
        `training episode ${ep.episode_id} uses non-train sound ` +
        `${ep.sound_index}`);
    }
  }
  for (const ep of testEps) {
    if (!testSet.has(ep.sound_index)) {
      throw new Error(
        `held-out episode ${ep.episode_id} uses non-test sound ` +
        `${ep.sound_index}`);
    }
  }
}
