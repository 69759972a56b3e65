"""Build the small scenes, graphs, impulse-response containers, episode
lists, and sound manifest that the TypeScript test suite needs.

Everything is desk-scale: a three-node corridor and a shrunken two-room
scene, simulated at 16 kHz with reduced ray budgets. Outputs land in
frontend/tests/fixtures and are skipped when already present.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from echonav.acoustics import AcousticScene, SimParams, precompute_grid
from echonav.audio import sound_split, write_sound_manifest
from echonav.env import Episode, save_episodes
from echonav.fixtures import corridor, two_room
from echonav.bvh import AccelStructure
from echonav.geometry import save_scene
from echonav.grid import build_nav_graph, place_candidates, prune
from echonav.materials import load_material_db, uniform_db
from echonav.storage import IRWriter

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

PARAMS = SimParams(rays_per_source=1500, rays_per_listener=400,
                   max_bounces=40, sample_rate=16000, duration_s=0.4,
                   rng_seed=11)


def geodesics(graph) -> np.ndarray:
    n = len(graph.nodes)
    if len(graph.edges):
        e = np.asarray(graph.edges)
        w = np.linalg.norm(graph.nodes[e[:, 0]] - graph.nodes[e[:, 1]],
                           axis=1)
        mat = coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
    else:
        mat = coo_matrix((n, n))
    return dijkstra(mat, directed=False)


def build_scene(name: str, scene, materials=None) -> tuple[Path, object]:
    scene_path = FIXTURES / f"{name}.scene.json"
    graph_path = FIXTURES / f"{name}.graph.json"
    save_scene(scene, scene_path)
    accel = AccelStructure(scene)
    graph = build_nav_graph(prune(place_candidates(scene), accel), accel)
    graph.save(graph_path)
    rir_path = FIXTURES / f"{name}.ssir"
    if not rir_path.exists():
        writer = IRWriter(rir_path, PARAMS.sample_rate)
        ascene = AcousticScene(scene, materials or load_material_db(None))
        precompute_grid(ascene, graph, PARAMS, writer)
        writer.close()
    return graph_path, graph


def corridor_episodes(graph) -> None:
    """Start at one end of the corridor, goal at the other."""
    dist = geodesics(graph)
    order = np.argsort(graph.nodes[:, 0])
    left, right = int(order[0]), int(order[-1])
    train_sounds = sound_split("train")
    test_sounds = sound_split("test")

    train, evals, unheard = [], [], []
    eid = 0
    # cover every (direction, heading, waveform) combination so sound
    # identity carries no information about where the goal is and the
    # evaluation episodes come from the training distribution
    for sound in train_sounds[:4]:
        for start, goal in ((left, right), (right, left)):
            for heading in range(4):
                train.append(Episode(eid, start, heading, goal,
                                     sound, float(dist[start, goal])))
                eid += 1
    for i, (start, goal, heading) in enumerate(
            ((left, right, 0), (right, left, 2),
             (left, right, 1), (right, left, 3))):
        evals.append(Episode(eid, start, heading, goal,
                             train_sounds[i], float(dist[start, goal])))
        eid += 1
    for i, (start, goal, heading) in enumerate(
            ((left, right, 0), (right, left, 2),
             (left, right, 3), (right, left, 1))):
        unheard.append(Episode(eid, start, heading, goal,
                               test_sounds[i], float(dist[start, goal])))
        eid += 1
    save_episodes(FIXTURES / "corridor.train.jsonl", train)
    save_episodes(FIXTURES / "corridor.eval.jsonl", evals)
    save_episodes(FIXTURES / "corridor.unheard.jsonl", unheard)
    save_episodes(FIXTURES / "corridor.all.jsonl", train + evals + unheard)


def two_room_episodes(graph) -> None:
    """Start/goal pairs at least three hops apart, spread by a fixed rng."""
    dist = geodesics(graph)
    rng = np.random.default_rng(23)
    train_sounds = sound_split("train")
    pairs = np.argwhere(dist >= 1.5)
    rng.shuffle(pairs)
    train, evals = [], []
    for eid, (start, goal) in enumerate(map(tuple, pairs[:44])):
        ep = Episode(eid, int(start), int(rng.integers(4)), int(goal),
                     train_sounds[eid % len(train_sounds)],
                     float(dist[start, goal]))
        (train if eid < 28 else evals).append(ep)
    save_episodes(FIXTURES / "tworoom.train.jsonl", train)
    save_episodes(FIXTURES / "tworoom.eval.jsonl", evals)
    save_episodes(FIXTURES / "tworoom.all.jsonl", train + evals)


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    marker = FIXTURES / "manifest.json"
    if (marker.exists()
            and (FIXTURES / "corridor.ssir").exists()
            and (FIXTURES / "tworoom.ssir").exists()):
        print("fixtures already present, skipping")
        return 0

    write_sound_manifest(FIXTURES / "sounds.json")

    # the corridor is deliberately dry (strongly absorptive walls): the
    # direct-path level and interaural contrast then identify the agent
    # pose almost uniquely, keeping the learning fixture easy to solve
    _, cg = build_scene("corridor", corridor(length=2.0, width=1.0,
                                             height=2.5),
                        materials=uniform_db(0.8, 0.2))
    print(f"corridor: {len(cg.nodes)} nodes, {len(cg.edges)} edges")
    corridor_episodes(cg)

    _, tg = build_scene("tworoom", two_room(room=(2.0, 1.5, 2.5),
                                            door_width=0.8,
                                            door_height=2.0))
    print(f"tworoom: {len(tg.nodes)} nodes, {len(tg.edges)} edges")
    two_room_episodes(tg)

    marker.write_text(json.dumps({
        "corridor_nodes": len(cg.nodes),
        "tworoom_nodes": len(tg.nodes),
    }))
    print("fixtures written to", FIXTURES)
    return 0


if __name__ == "__main__":
    sys.exit(main())
