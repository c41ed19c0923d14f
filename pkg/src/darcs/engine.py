"""Round orchestration: cluster-head defense, EPC defense, convergence.

One round is: mobility step, re-clustering, one cluster-head pass per
cluster, one EPC pass over the cluster heads, broadcast of the new global
model and evaluation on the shared validation set.

Every vehicle keeps two reliability records, one for the member role
(scored by its cluster head) and one for the head role (scored by the EPC).
Both are keyed by vehicle id and survive re-clustering; the block state is
shared between roles.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import detection as det
from .adversary import AttackProfile, apply_profile, choose_attackers
from .aggregation import WeightedUpdate, ch_step, clamp_weight, weighted_mean
from .config import RunConfig
from .datasets import LabeledDataset, PartitionPlan, generate_synthetic, load_idx, partition
from .numerics import ModelSpec, evaluate_accuracy, init_params, local_train
from .reliability import (BlockState, ReliabilityMetrics, ReliabilityWeights, historical_accuracy,
                          reliability_score, select_clients, tick_block)
from .topology import ClusterView, World, form_clusters, link_delivers, make_world, step_mobility

INF = "inf"


@dataclass(frozen=True)
class DefenseMode:
    """Which pipeline stages run.  Benchmarks keep thresholds at their initial values."""
    variant: str
    zscore: bool
    cosine: bool
    reliability: bool
    adaptive: bool
    cross_cluster: bool
    blocking: bool

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "DefenseMode":
        v = cfg.defense
        if v == "none":
            return cls(v, False, False, False, False, False, False)
        if v == "cosine_only":
            return cls(v, False, True, False, False, False, False)
        if v == "zscore_only":
            return cls(v, True, False, False, False, False, False)
        if v == "zscore_plus_cosine":
            return cls(v, True, True, False, False, False, False)
        return cls(v, True, True, True, cfg.adaptive_threshold, cfg.cross_cluster_check, True)


@dataclass
class RoleState:
    """Reliability record, cosine-drift threshold and memory for one role."""
    metrics: ReliabilityMetrics = field(default_factory=ReliabilityMetrics)
    threshold: det.AdaptiveThreshold = field(default_factory=det.AdaptiveThreshold)
    memory: np.ndarray | None = None
    memory_round: int = 0
    memory_base: np.ndarray | None = None  # global model the remembered update started from
    last_cos: float | None = None
    threshold_history: list = field(default_factory=list)


@dataclass
class Vehicle:
    vid: int
    shard: LabeledDataset
    is_attacker: bool
    train_rng: np.random.Generator
    attack_rng: np.random.Generator
    link_rng: np.random.Generator
    member: RoleState
    head: RoleState
    block: BlockState
    eligible: bool = True


class ConvergenceTracker:
    """Converged at the first round whose last ``window`` accuracy changes are all below epsilon.

    Accuracy is a count over a finite validation set, so changes are compared
    with a 1e-9 slack to keep a one-sample step of exactly epsilon from
    counting as "below epsilon" through float rounding.
    """

    def __init__(self, epsilon: float, window: int = 3):
        self.epsilon = epsilon
        self.window = window
        self.history: list[float] = []
        self.converged_at: int | None = None

    def update(self, accuracy: float) -> bool:
        self.history.append(accuracy)
        r = len(self.history)
        if self.converged_at is None and r > self.window:
            recent = np.diff(self.history[-(self.window + 1):])
            if np.all(np.abs(recent) < self.epsilon - 1e-9):
                self.converged_at = r
        return self.converged_at is not None


def convergence_round(accuracies, epsilon: float, window: int = 3):
    tracker = ConvergenceTracker(epsilon, window)
    for a in accuracies:
        if tracker.update(a):
            return tracker.converged_at
    return None


@dataclass
class ClusterOutcome:
    ch_id: int
    members: list[int]
    selected: list[int]
    dropped: list[int]
    zscore_flagged: list[int]
    reset: list[int]
    accepted: list[int]
    skipped: bool
    theta_out: np.ndarray | None
    cosines: dict = field(default_factory=dict)
    zscores: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)


@dataclass
class RoundReport:
    round: int
    global_accuracy: float
    clusters: list[dict]
    epc: dict
    newly_blocked: list[dict]
    blocked: list[int]
    converged: bool
    global_skipped: bool
    wall_time: float = 0.0

    def to_record(self) -> dict:
        """Serializable view in fixed key order (wall time excluded: it is not reproducible)."""
        return {
            "round": self.round,
            "global_accuracy": self.global_accuracy,
            "converged": self.converged,
            "global_skipped": self.global_skipped,
            "blocked": self.blocked,
            "newly_blocked": self.newly_blocked,
            "epc": self.epc,
            "clusters": self.clusters,
        }


def _member_update(v: Vehicle, theta_global, spec, profile, round_index):
    """Honest local training, then the attack transform on the resulting update."""
    _, update = local_train(theta_global, v.shard, spec, v.train_rng)
    return apply_profile(update, profile, v.is_attacker, v.attack_rng, round_index)


class Simulation:
    """Holds the whole mutable world for one run; ``step()`` advances one round."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.mode = DefenseMode.from_config(cfg)
        self.weights = ReliabilityWeights(cfg.accuracy_weight, cfg.frequency_weight, cfg.anomaly_weight)
        self.profile = AttackProfile(cfg.attack, cfg.noise_mean, cfg.noise_var, cfg.attacker_fraction,
                                     cfg.seed, cfg.attack_onset_round)

        if cfg.dataset_source == "idx":
            data = load_idx(cfg.idx_images, cfg.idx_labels)
            num_classes = int(data.labels.max()) + 1
            input_dim = data.input_dim
        else:
            data = generate_synthetic(cfg.num_samples, cfg.input_dim, cfg.num_classes, cfg.seed)
            num_classes, input_dim = cfg.num_classes, cfg.input_dim
        self.spec = ModelSpec(input_dim, num_classes, cfg.hidden_dim, cfg.learning_rate,
                              cfg.local_epochs, cfg.batch_size)
        shards, self.validation = partition(
            data, cfg.num_vehicles, PartitionPlan(cfg.classes_per_vehicle, cfg.seed))

        self.attackers = (choose_attackers(cfg.num_vehicles, cfg.attacker_fraction, cfg.seed)
                          if cfg.attack != "none" else frozenset())
        self.vehicles = [
            Vehicle(
                vid=k, shard=shards[k], is_attacker=k in self.attackers,
                train_rng=np.random.default_rng([cfg.seed, 2, k]),
                attack_rng=np.random.default_rng([cfg.seed, 3, k]),
                link_rng=np.random.default_rng([cfg.seed, 4, k]),
                member=self._fresh_role(), head=self._fresh_role(),
                block=BlockState(unblock_time=cfg.unblock_time),
            )
            for k in range(cfg.num_vehicles)
        ]
        self.world: World = make_world(cfg.num_vehicles, np.random.default_rng([cfg.seed, 1]))
        self.selection_rng = np.random.default_rng([cfg.seed, 5])
        self.theta_global = init_params(self.spec, np.random.default_rng([cfg.seed, 6]))
        self.round = 0
        self.tracker = ConvergenceTracker(cfg.epsilon)
        self.clusters: list[ClusterView] = []
        # per-vehicle outcome per round, replayable for counter checks
        self.event_log: list[dict] = []
        self.blocked_rounds = np.zeros(cfg.num_vehicles, dtype=np.int64)
        self.first_block_round: dict[int, int] = {}

    def _fresh_role(self) -> RoleState:
        c = self.cfg
        return RoleState(threshold=det.AdaptiveThreshold(
            c.cosine_adaptive_init, c.high_threshold_down, c.delta, c.high_threshold_up))

    # ------------------------------------------------------------------ helpers

    def _score(self, role: RoleState) -> float:
        return reliability_score(role.metrics, self.weights)

    def _block(self, v: Vehicle, cause: str, events: list) -> None:
        v.block = v.block.blocked()
        v.eligible = False
        events.append({"id": v.vid, "cause": cause})
        self.first_block_round.setdefault(v.vid, self.round)

    def _select(self, ids: list[int]) -> list[int]:
        eligible = [v for v in ids if self.vehicles[v].eligible]
        if self.mode.reliability:
            recs = [(v, self._score(self.vehicles[v].member), True) for v in eligible]
            return sorted(select_clients(recs, self.cfg.select_fraction))
        k = int(np.ceil(self.cfg.select_fraction * len(eligible) - 1e-9))
        if k == 0:
            return []
        return sorted(int(x) for x in self.selection_rng.choice(eligible, size=k, replace=False))

    def _zscore_cohorts(self, delivered: dict[int, dict[int, np.ndarray]]) -> dict[int, dict[int, float]]:
        """Z-score per (cluster, vehicle).  Network scope pools every delivered member update."""
        out: dict[int, dict[int, float]] = {}
        if self.cfg.zscore_scope == "network":
            keys = [(c, v) for c in sorted(delivered) for v in sorted(delivered[c])]
            if keys:
                zs = det.zscores([np.linalg.norm(delivered[c][v]) for c, v in keys])
                for (c, v), z in zip(keys, zs):
                    out.setdefault(c, {})[v] = float(z)
            return out
        for c in sorted(delivered):
            ids = sorted(delivered[c])
            if ids:
                zs = det.zscores([np.linalg.norm(delivered[c][v]) for v in ids])
                out[c] = {v: float(z) for v, z in zip(ids, zs)}
        return out

    def _cosine_gate(self, role: RoleState, cos: det.Cosine, cohort_size: int,
                     member: bool = True, peer_seed: float | None = None) -> str:
        """'accept' or 'reset' for one update that survived the z-score stage."""
        cfg = self.cfg
        if not self.mode.cosine or cos.degenerate or cohort_size < cfg.cosine_min_cohort:
            return "accept"
        if member and cfg.cosine_raw_reject and cos.value < cfg.cosine_reject_below:
            return "reset"
        previous = role.last_cos
        if previous is None and member:
            if cfg.cosine_first_round == "seed":
                previous = cfg.cosine_seed_value
            elif cfg.cosine_first_round in ("cohort_mean", "cohort_min"):
                previous = peer_seed
        if previous is not None and role.threshold.breached(previous, cos.value):
            return "reset"
        return "accept"

    def _peer_seed(self, vid: int, survivors: list[int], cosines: dict) -> float | None:
        """Stand-in previous cosine for an untracked member, drawn from its cohort peers."""
        cfg = self.cfg
        peers = [cosines[u].value for u in survivors if u != vid and not cosines[u].degenerate
                 and not (cfg.cosine_raw_reject and cosines[u].value < cfg.cosine_reject_below)]
        if not peers:
            return None
        return float(np.mean(peers)) if cfg.cosine_first_round == "cohort_mean" else float(min(peers))

    def _after_gate(self, v: Vehicle, role: RoleState, verdict: str, cos, params, events):
        """Memory, reliability and threshold bookkeeping for one gated update."""
        if verdict == "accept":
            if self.mode.reliability:
                role.metrics.record_contribution(self._accuracy(params))
            if cos is not None and not cos.degenerate:
                role.last_cos = cos.value
            role.memory = params
            role.memory_round = self.round
            role.memory_base = self.theta_global
        elif verdict == "reset" and self.mode.reliability:
            if self.cfg.cosine_breach_blocks:
                role.metrics.record_anomaly()
                self._block(v, "cosine_delta", events)
            elif self.cfg.reset_counts_as_anomaly:
                role.metrics.record_anomaly()
        if self.mode.adaptive:
            role.threshold = det.tighten(role.threshold, historical_accuracy(role.metrics))
        role.threshold_history.append(role.threshold.value)

    # ------------------------------------------------------------------ cluster head

    def run_ch_round(self, cluster: ClusterView, updates: dict[int, np.ndarray],
                     selected: list[int], dropped: list[int], zs: dict[int, float],
                     events: list) -> ClusterOutcome:
        cfg, mode = self.cfg, self.mode
        theta_prev = self.theta_global
        out = ClusterOutcome(cluster.ch_id, cluster.all_ids, selected, dropped, [], [], [], False, None)

        survivors = []
        for vid in sorted(updates):
            out.zscores[vid] = zs.get(vid, 0.0)
            if mode.zscore and det.is_outlier(zs.get(vid, 0.0), cfg.z_threshold):
                out.zscore_flagged.append(vid)
                v = self.vehicles[vid]
                if mode.blocking:
                    v.member.metrics.record_anomaly()
                    self._block(v, "zscore", events)
            else:
                survivors.append(vid)

        mean = det.mean_gradient([updates[v] for v in survivors])
        # a cohort too small to define a consensus leaves its members untracked this round
        mean_degenerate = (mean is None or float(np.linalg.norm(mean)) < det.DEGENERATE_EPS
                           or len(survivors) < cfg.cosine_min_cohort)
        cosines = {vid: det.cosine(updates[vid], mean) if not mean_degenerate else det.Cosine(0.0, True)
                   for vid in survivors}
        for vid in survivors:
            v = self.vehicles[vid]
            cos = cosines[vid]
            out.cosines[vid] = cos.value
            verdict = self._cosine_gate(v.member, cos, len(survivors),
                                        peer_seed=self._peer_seed(vid, survivors, cosines))
            (out.accepted if verdict == "accept" else out.reset).append(vid)
            self._after_gate(v, v.member, verdict, cos, theta_prev + updates[vid], events)

        if not out.accepted:
            out.skipped = True
            return out
        items = []
        for vid in out.accepted:
            w = clamp_weight(self._score(self.vehicles[vid].member)) if mode.reliability else 1.0
            out.weights[vid] = w
            items.append(WeightedUpdate(updates[vid], w))
        G = weighted_mean(items)
        if G is None:
            out.skipped = True
            return out
        # updates are descent deltas already, so the step adds them
        # an attacking head poisons its own local update above; the aggregation itself is honest
        out.theta_out = ch_step(theta_prev, -G, cfg.eta_agg)
        return out

    # ------------------------------------------------------------------ EPC

    def run_epc_round(self, outcomes: list[ClusterOutcome], events: list) -> tuple[np.ndarray, dict]:
        cfg, mode = self.cfg, self.mode
        theta_prev = self.theta_global
        report = {"cohort": [], "zscore_blocked": [], "reset": [], "cross_blocked": [],
                  "accepted": [], "weights": {}, "cross_avg": {}, "skipped": False}
        cohort = [o for o in outcomes if o.theta_out is not None and self.vehicles[o.ch_id].eligible]
        report["cohort"] = [o.ch_id for o in cohort]
        if not cohort:
            report["skipped"] = True
            return theta_prev, report

        deltas = {o.ch_id: o.theta_out - theta_prev for o in cohort}
        thetas = {o.ch_id: o.theta_out for o in cohort}
        ids = [o.ch_id for o in cohort]

        survivors = ids
        if mode.zscore:
            zs = det.zscores([det.ch_norm(thetas[c], theta_prev) for c in ids])
            survivors = []
            for c, z in zip(ids, zs):
                if det.is_outlier(z, cfg.z_threshold):
                    report["zscore_blocked"].append(c)
                    if mode.blocking:
                        self.vehicles[c].head.metrics.record_anomaly()
                        self._block(self.vehicles[c], "zscore", events)
                else:
                    survivors.append(c)

        gated, verdicts, cosines = [], {}, {}
        for c in survivors:
            head = self.vehicles[c].head
            cosines[c] = self._ch_temporal_cosine(head, deltas[c])
            verdicts[c] = self._cosine_gate(head, cosines[c], len(survivors), member=False)
            if verdicts[c] == "reset":
                report["reset"].append(c)
            else:
                gated.append(c)

        accepted = gated
        if mode.cross_cluster and len(gated) >= 2:
            sims = det.pairwise_cosines([deltas[c] for c in gated])
            accepted = []
            for p, c in enumerate(gated):
                avg = det.avg_cross_cluster(sims, p)
                report["cross_avg"][c] = avg
                if avg < cfg.cross_threshold:
                    report["cross_blocked"].append(c)
                    verdicts[c] = "blocked"
                    self.vehicles[c].head.metrics.record_anomaly()
                    self._block(self.vehicles[c], "cross_cluster", events)
                else:
                    accepted.append(c)

        for c in survivors:
            head = self.vehicles[c].head
            if verdicts[c] == "blocked":
                # anomaly already recorded; the threshold still gets its per-round look
                if mode.adaptive:
                    head.threshold = det.tighten(head.threshold, historical_accuracy(head.metrics))
                head.threshold_history.append(head.threshold.value)
                continue
            self._after_gate(self.vehicles[c], head, verdicts[c], cosines[c], thetas[c], events)

        report["accepted"] = accepted
        if not accepted:
            report["skipped"] = True
            return theta_prev, report
        items = []
        for c in accepted:
            w = clamp_weight(self._score(self.vehicles[c].head)) if mode.reliability else 1.0
            report["weights"][c] = w
            items.append(WeightedUpdate(thetas[c], w))
        theta = weighted_mean(items)
        if theta is None:
            report["skipped"] = True
            return theta_prev, report
        return theta, report

    def _ch_temporal_cosine(self, head: RoleState, delta: np.ndarray) -> det.Cosine:
        """Temporal consistency of a CH's update; degenerate (skipped) without a round i-1 record."""
        if head.memory is None or head.memory_round != self.round - 1:
            return det.Cosine(0.0, True)
        if self.cfg.ch_temporal_reference == "previous_update":
            return det.cosine(delta, head.memory - head.memory_base)
        return det.cosine(delta, head.memory - self.theta_global)

    def _accuracy(self, params: np.ndarray) -> float:
        return evaluate_accuracy(params, self.validation, self.spec)

    # ------------------------------------------------------------------ round driver

    def step(self) -> RoundReport:
        t0 = time.perf_counter()
        cfg = self.cfg
        self.round += 1
        i = self.round
        events: list[dict] = []

        self.world = step_mobility(self.world, cfg.round_seconds)
        for v in self.vehicles:
            v.member.metrics.rounds_elapsed = i
            v.head.metrics.rounds_elapsed = i
            v.block, v.eligible = tick_block(v.block)
            if not v.eligible:
                self.blocked_rounds[v.vid] += 1
        ineligible = frozenset(v.vid for v in self.vehicles if not v.eligible)
        self.clusters = form_clusters(self.world, cfg.tx_range_m, cfg.hop_limit,
                                      ineligible if self.mode.blocking else frozenset())

        # local training and delivery for every cluster first, so the
        # network-wide z-score cohort can be pooled
        selections, deliveries, drops = {}, {}, {}
        for cl in self.clusters:
            selected = self._select(cl.all_ids)
            updates, dropped = {}, []
            for vid in selected:
                v = self.vehicles[vid]
                u = _member_update(v, self.theta_global, self.spec, self.profile, i)
                if vid != cl.ch_id and not link_delivers(v.link_rng, cfg.loss_prob):
                    dropped.append(vid)
                    continue
                updates[vid] = u
            selections[cl.ch_id], deliveries[cl.ch_id], drops[cl.ch_id] = selected, updates, dropped
        zs = self._zscore_cohorts(deliveries)

        outcomes = [self.run_ch_round(cl, deliveries[cl.ch_id], selections[cl.ch_id], drops[cl.ch_id],
                                      zs.get(cl.ch_id, {}), events)
                    for cl in self.clusters]
        theta, epc = self.run_epc_round(outcomes, events)
        self.theta_global = theta

        newly = {e["id"] for e in events}
        for vid in newly:
            self.blocked_rounds[vid] += 1
        acc = self._accuracy(self.theta_global)
        converged = self.tracker.update(acc)
        self._log_events(outcomes, epc, ineligible)

        clusters_rec = [{
            "ch_id": o.ch_id, "members": o.members, "selected": o.selected, "dropped": o.dropped,
            "zscore_flagged": o.zscore_flagged, "reset": o.reset,
            "accepted": o.accepted, "skipped": o.skipped,
        } for o in outcomes]
        epc_rec = {k: epc[k] for k in ("cohort", "zscore_blocked", "reset", "cross_blocked",
                                       "accepted", "skipped")}
        return RoundReport(
            round=i, global_accuracy=acc, clusters=clusters_rec, epc=epc_rec,
            newly_blocked=sorted(events, key=lambda e: e["id"]),
            blocked=sorted(v.vid for v in self.vehicles if v.block.flag),
            converged=converged, global_skipped=epc["skipped"],
            wall_time=time.perf_counter() - t0,
        )

    def _log_events(self, outcomes: list[ClusterOutcome], epc: dict, ineligible: frozenset) -> None:
        """One status per vehicle and role; ``ineligible`` is the block set at the start of the round."""
        for o in outcomes:
            for vid in o.members:
                if vid not in o.selected:
                    status = "blocked" if vid in ineligible else "unselected"
                elif vid in o.dropped:
                    status = "dropped"
                elif vid in o.zscore_flagged:
                    status = "anomaly"
                elif vid in o.reset:
                    status = "reset"
                else:
                    status = "contributed"
                self.event_log.append({"round": self.round, "id": vid, "role": "member", "status": status})
        for c in epc["cohort"]:
            if c in epc["accepted"]:
                status = "contributed"
            elif c in epc["zscore_blocked"] or c in epc["cross_blocked"]:
                status = "anomaly"
            else:
                status = "reset"
            self.event_log.append({"round": self.round, "id": c, "role": "head", "status": status})

    def run(self) -> Iterator[RoundReport]:
        while self.round < self.cfg.max_rounds:
            report = self.step()
            yield report
            if report.converged and self.cfg.stop_at_convergence:
                break

    def summary(self, reports: list[RoundReport]) -> dict:
        benign = [v.vid for v in self.vehicles if not v.is_attacker]
        rounds = len(reports)
        benign_blocked = int(sum(self.blocked_rounds[v] for v in benign))
        return {
            "convergence_round": self.tracker.converged_at if self.tracker.converged_at is not None else INF,
            "final_accuracy": reports[-1].global_accuracy if reports else None,
            "rounds_run": rounds,
            "attackers": sorted(self.attackers),
            "attacker_first_block_round": {str(a): self.first_block_round.get(a) for a in sorted(self.attackers)},
            "attacker_blocked_rounds": {str(a): int(self.blocked_rounds[a]) for a in sorted(self.attackers)},
            "benign_blocked_rounds": benign_blocked,
            "benign_false_block_rate": benign_blocked / (len(benign) * rounds) if rounds and benign else 0.0,
            "benign_ever_blocked": sorted(v for v in benign if v in self.first_block_round),
        }


def run_experiment(cfg: RunConfig) -> tuple[list[RoundReport], dict]:
    sim = Simulation(cfg)
    reports = list(sim.run())
    return reports, sim.summary(reports)
