"""A 1-D two-lane ring road, hop-limited proximity clustering and a lossy link."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError

ROAD_LENGTH_M = 1000.0
SPEED_RANGE_MS = (10.0, 35.0)


@dataclass(frozen=True)
class World:
    positions: np.ndarray  # metres along the loop, in [0, road_length)
    speeds: np.ndarray     # m/s, constant per vehicle
    lanes: np.ndarray      # 0 or 1
    road_length: float = ROAD_LENGTH_M

    @property
    def num_vehicles(self) -> int:
        return len(self.positions)


def make_world(num_vehicles: int, rng: np.random.Generator,
               road_length: float = ROAD_LENGTH_M) -> World:
    if num_vehicles < 1:
        raise InvalidInputError("need at least one vehicle")
    positions = rng.uniform(0.0, road_length, num_vehicles)
    speeds = rng.uniform(*SPEED_RANGE_MS, num_vehicles)
    lanes = rng.integers(0, 2, num_vehicles)
    return World(positions, speeds, lanes, road_length)


def step_mobility(world: World, dt: float) -> World:
    if not dt > 0:
        raise InvalidInputError("dt must be > 0")
    positions = np.mod(world.positions + world.speeds * dt, world.road_length)
    return replace(world, positions=positions)


def loop_distance(world: World) -> np.ndarray:
    """Pairwise distance along the ring (lane offset ignored)."""
    d = np.abs(world.positions[:, None] - world.positions[None, :])
    return np.minimum(d, world.road_length - d)


def adjacency(world: World, tx_range: float) -> list[list[int]]:
    dist = loop_distance(world)
    n = world.num_vehicles
    return [[j for j in range(n) if j != i and dist[i, j] <= tx_range] for i in range(n)]


@dataclass(frozen=True)
class ClusterView:
    ch_id: int
    member_ids: frozenset[int]
    hop_limit: int

    @property
    def all_ids(self) -> list[int]:
        return sorted(self.member_ids | {self.ch_id})


def form_clusters(world: World, tx_range: float, hop_limit: int,
                  ineligible_heads=frozenset()) -> list[ClusterView]:
    """Degree-ranked head election with greedy BFS claiming.

    Candidates are visited by descending neighbour count (lowest id on ties).
    An unclaimed candidate becomes a head and claims every unclaimed vehicle
    it reaches within ``hop_limit`` hops, relaying only through its own
    cluster.  Vehicles in ``ineligible_heads`` are passed over as heads while
    any eligible vehicle is still unclaimed; they always end up somewhere.
    """
    if not tx_range > 0:
        raise InvalidInputError("tx_range must be > 0")
    if hop_limit < 1:
        raise InvalidInputError("hop_limit must be >= 1")
    adj = adjacency(world, tx_range)
    n = world.num_vehicles
    order = sorted(range(n), key=lambda v: (-len(adj[v]), v))
    order = ([v for v in order if v not in ineligible_heads]
             + [v for v in order if v in ineligible_heads])
    owner = [-1] * n
    clusters = []
    for head in order:
        if owner[head] != -1:
            continue
        owner[head] = head
        members = []
        frontier = deque([(head, 0)])
        while frontier:
            v, depth = frontier.popleft()
            if depth == hop_limit:
                continue
            for u in adj[v]:
                if owner[u] == -1:
                    owner[u] = head
                    members.append(u)
                    frontier.append((u, depth + 1))
        clusters.append(ClusterView(head, frozenset(members), hop_limit))
    clusters.sort(key=lambda c: c.ch_id)
    return clusters


def hop_distances(world: World, tx_range: float, source: int, allowed) -> dict[int, int]:
    """BFS hop counts from ``source`` through vehicles in ``allowed``."""
    adj = adjacency(world, tx_range)
    allowed = set(allowed)
    dist = {source: 0}
    frontier = deque([source])
    while frontier:
        v = frontier.popleft()
        for u in adj[v]:
            if u in allowed and u not in dist:
                dist[u] = dist[v] + 1
                frontier.append(u)
    return dist


def link_delivers(rng: np.random.Generator, loss_prob: float) -> bool:
    if not 0 <= loss_prob < 1:
        raise InvalidInputError("loss_prob must be in [0, 1)")
    if loss_prob == 0:
        return True
    return bool(rng.random() >= loss_prob)
