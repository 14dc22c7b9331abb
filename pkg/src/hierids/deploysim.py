"""Deterministic tick simulation of the tiered deployment: vehicles run the
root classifier, RSUs the level-2 one, near-edge nodes level 3, and the
cloud pushes model updates on a fixed period.

Only message counts, bytes, and per-instance compute time are modelled;
links carry no latency. Time advances in exact multiples of the packet
interval so event ordering never depends on float accumulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (
    BENIGN,
    DOS,
    SPOOFING_GAS,
    SPOOFING_RPM,
    SPOOFING_SPEED,
    SPOOFING_STEERING_WHEEL,
)
from .hierarchy import HierModel, route_batch
from .seeds import substream

# Traffic mix matching the reference dataset's class shares.
DEFAULT_TRAFFIC_MIX = {
    BENIGN: 1048575 / 1233057,
    DOS: 74663 / 1233057,
    SPOOFING_GAS: 9991 / 1233057,
    SPOOFING_RPM: 54900 / 1233057,
    SPOOFING_SPEED: 24951 / 1233057,
    SPOOFING_STEERING_WHEEL: 19977 / 1233057,
}

_HEADER_BYTES = 16


@dataclass(frozen=True)
class SimConfig:
    road_length_km: float = 1.0
    density_veh_per_km: float = 180.0
    min_distance_m: float = 2.0
    packet_interval_s: float = 1.0
    response_time_s: float = 1.5
    model_size_kb: float = 13.0
    update_period_s: float = 3600.0
    testing_time_s: float = 0.002
    attack_mix: dict = field(default_factory=lambda: dict(DEFAULT_TRAFFIC_MIX))
    feature_count: int = 152
    duration_s: float = 60.0
    seed: int = 0

    def __post_init__(self):
        positive = (
            "road_length_km", "density_veh_per_km", "min_distance_m",
            "packet_interval_s", "response_time_s", "model_size_kb",
            "update_period_s", "testing_time_s",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.duration_s < 0:
            raise ValueError("duration must be non-negative")
        if self.feature_count < 1:
            raise ValueError("feature_count must be >= 1")
        total = sum(self.attack_mix.values())
        if abs(total - 1.0) > 1e-9 or any(p < 0 for p in self.attack_mix.values()):
            raise ValueError("attack mix must be non-negative and sum to 1")
        if 1000.0 / self.density_veh_per_km < self.min_distance_m:
            raise ValueError(
                f"density {self.density_veh_per_km}/km cannot honour the "
                f"{self.min_distance_m} m minimum spacing"
            )

    def to_jsonable(self) -> dict:
        return {
            "road_length_km": self.road_length_km,
            "density_veh_per_km": self.density_veh_per_km,
            "min_distance_m": self.min_distance_m,
            "packet_interval_s": self.packet_interval_s,
            "response_time_s": self.response_time_s,
            "model_size_kb": self.model_size_kb,
            "update_period_s": self.update_period_s,
            "testing_time_s": self.testing_time_s,
            "attack_mix": {k: float(v) for k, v in self.attack_mix.items()},
            "feature_count": self.feature_count,
            "duration_s": self.duration_s,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TierTopology:
    vehicles_per_rsu: int = 30
    rsus_per_edge: int = 3

    def __post_init__(self):
        if self.vehicles_per_rsu < 1 or self.rsus_per_edge < 1:
            raise ValueError("tier fan-in counts must be >= 1")


@dataclass(frozen=True, eq=False)
class SimState:
    config: SimConfig
    topo: TierTopology
    n_vehicles: int
    n_rsus: int
    n_edges: int
    rsu_of_vehicle: np.ndarray
    edge_of_rsu: np.ndarray


def build_topology(config: SimConfig, topo: TierTopology = TierTopology()) -> SimState:
    """Vehicle count = density x road length; vehicles joined to RSUs (and
    RSUs to near-edge nodes) round-robin."""
    n_vehicles = int(round(config.density_veh_per_km * config.road_length_km))
    if n_vehicles < 1:
        raise ValueError("configuration yields zero vehicles")
    n_rsus = math.ceil(n_vehicles / topo.vehicles_per_rsu)
    n_edges = math.ceil(n_rsus / topo.rsus_per_edge)
    return SimState(
        config=config,
        topo=topo,
        n_vehicles=n_vehicles,
        n_rsus=n_rsus,
        n_edges=n_edges,
        rsu_of_vehicle=np.arange(n_vehicles) % n_rsus,
        edge_of_rsu=np.arange(n_rsus) % n_edges,
    )


class MixPerfectStub:
    """Draws each packet's true class from the traffic mix and classifies it
    perfectly, so forwarding rates mirror the mix itself."""

    def __init__(self, mix: dict | None = None):
        mix = dict(DEFAULT_TRAFFIC_MIX if mix is None else mix)
        self.labels = np.array(list(mix.keys()), dtype=object)
        self.probs = np.array(list(mix.values()), dtype=np.float64)
        spoof = {SPOOFING_GAS, SPOOFING_RPM, SPOOFING_SPEED, SPOOFING_STEERING_WHEEL}
        self._is_attack = np.array([lab != BENIGN for lab in self.labels])
        self._is_spoof = np.array([lab in spoof for lab in self.labels])

    def verdicts(self, n: int, rng: np.random.Generator):
        drawn = rng.choice(len(self.labels), size=n, p=self.probs)
        return self._is_attack[drawn], self._is_spoof[drawn]


class RateStub:
    """Per-level verdict probabilities: attack at the vehicle, spoofing among
    forwarded records at the RSU."""

    def __init__(self, attack_rate: float, spoof_rate: float = 0.5):
        if not 0.0 <= attack_rate <= 1.0 or not 0.0 <= spoof_rate <= 1.0:
            raise ValueError("rates must lie in [0, 1]")
        self.attack_rate = attack_rate
        self.spoof_rate = spoof_rate

    def verdicts(self, n: int, rng: np.random.Generator):
        attack = rng.random(n) < self.attack_rate
        spoof = np.zeros(n, dtype=bool)
        idx = np.flatnonzero(attack)
        spoof[idx] = rng.random(idx.size) < self.spoof_rate
        return attack, spoof


class ModelClassifier:
    """Routes records sampled from a dataset through a trained cascade."""

    def __init__(self, model: HierModel, records: np.ndarray):
        self.model = model
        self.records = np.asarray(records, dtype=np.float64)
        if self.records.ndim != 2 or self.records.shape[0] == 0:
            raise ValueError("need a non-empty record pool")

    def verdicts(self, n: int, rng: np.random.Generator):
        rows = rng.integers(0, self.records.shape[0], size=n)
        routed = route_batch(self.model, self.records[rows], mode="routed")
        return routed["reached"] >= 2, routed["reached"] >= 3


@dataclass(frozen=True, eq=False)
class OverheadReport:
    config: SimConfig
    n_vehicles: int
    n_rsus: int
    n_edges: int
    duration_s: float
    ticks: int
    packets: int
    forwarded_to_rsu: int
    forwarded_to_edge: int
    reported_to_cloud: int
    record_bytes: int
    update_pushes_per_node: int
    compute_s: dict

    @property
    def per_vehicle_memory_kb(self) -> float:
        return self.config.model_size_kb

    @property
    def response_overhead_pct(self) -> float:
        return self.config.testing_time_s / self.config.response_time_s * 100.0

    @property
    def update_kb_per_s_per_node(self) -> float:
        return self.config.model_size_kb / self.config.update_period_s

    def _rate(self, count: float) -> float:
        return count / self.duration_s if self.duration_s > 0 else 0.0

    def to_jsonable(self) -> dict:
        n_nodes = self.n_vehicles + self.n_rsus + self.n_edges
        return {
            "config": self.config.to_jsonable(),
            "topology": {
                "vehicles": self.n_vehicles,
                "rsus": self.n_rsus,
                "near_edge_nodes": self.n_edges,
            },
            "per_vehicle_memory_kb": self.per_vehicle_memory_kb,
            "response_overhead_pct": self.response_overhead_pct,
            "events": {
                "ticks": self.ticks,
                "packets": self.packets,
                "forwarded_to_rsu": self.forwarded_to_rsu,
                "forwarded_to_edge": self.forwarded_to_edge,
                "reported_to_cloud": self.reported_to_cloud,
                "update_pushes_per_node": self.update_pushes_per_node,
            },
            "traffic": {
                "record_bytes": self.record_bytes,
                "to_rsu_msgs_per_s": self._rate(self.forwarded_to_rsu),
                "to_rsu_kb_per_s": self._rate(self.forwarded_to_rsu * self.record_bytes / 1024.0),
                "to_edge_msgs_per_s": self._rate(self.forwarded_to_edge),
                "to_edge_kb_per_s": self._rate(self.forwarded_to_edge * self.record_bytes / 1024.0),
                "to_cloud_msgs_per_s": self._rate(self.reported_to_cloud),
                "to_cloud_kb_per_s": self._rate(self.reported_to_cloud * _HEADER_BYTES / 1024.0),
                "update_kb_per_s_per_node": self.update_kb_per_s_per_node,
                "update_kb_per_s_aggregate": self._rate(
                    self.update_pushes_per_node * n_nodes * self.config.model_size_kb
                ),
            },
            "compute_s": {k: float(v) for k, v in self.compute_s.items()},
        }

    def csv_row(self) -> dict:
        doc = self.to_jsonable()
        return {
            "density_veh_per_km": self.config.density_veh_per_km,
            "duration_s": self.duration_s,
            "vehicles": self.n_vehicles,
            "rsus": self.n_rsus,
            "near_edge_nodes": self.n_edges,
            "packets": self.packets,
            "forwarded_to_rsu": self.forwarded_to_rsu,
            "forwarded_to_edge": self.forwarded_to_edge,
            "reported_to_cloud": self.reported_to_cloud,
            "to_rsu_kb_per_s": doc["traffic"]["to_rsu_kb_per_s"],
            "to_edge_kb_per_s": doc["traffic"]["to_edge_kb_per_s"],
            "to_cloud_kb_per_s": doc["traffic"]["to_cloud_kb_per_s"],
            "update_kb_per_s_aggregate": doc["traffic"]["update_kb_per_s_aggregate"],
            "response_overhead_pct": self.response_overhead_pct,
            "per_vehicle_memory_kb": self.per_vehicle_memory_kb,
        }


def record_wire_bytes(feature_count: int) -> int:
    """One bit per binary feature, byte-aligned, plus a fixed header."""
    return math.ceil(feature_count / 8) + _HEADER_BYTES


def run_sim(state: SimState, classifier=None, duration: float | None = None) -> OverheadReport:
    """Tick loop: every vehicle emits one record per packet interval; attack
    verdicts travel to the RSU, spoofing verdicts on to the near edge, and
    near-edge results are reported to the cloud. Model updates fan out from
    the cloud to every node once per update period."""
    config = state.config
    if classifier is None:
        classifier = MixPerfectStub(config.attack_mix)
    dur = config.duration_s if duration is None else float(duration)
    if dur < 0:
        raise ValueError("duration must be non-negative")
    ticks = int(dur // config.packet_interval_s + 1e-9)
    rng = substream(config.seed, "deploy-sim")
    n = state.n_vehicles

    packets = 0
    to_rsu = 0
    to_edge = 0
    to_cloud = 0
    for _ in range(ticks):
        attack, spoof = classifier.verdicts(n, rng)
        packets += n
        n_attack = int(attack.sum())
        n_spoof = int(spoof.sum())
        to_rsu += n_attack
        to_edge += n_spoof
        to_cloud += n_spoof

    pushes = int(dur // config.update_period_s + 1e-9)
    compute = {
        "vehicle": packets * config.testing_time_s,
        "rsu": to_rsu * config.testing_time_s,
        "near_edge": to_edge * config.testing_time_s,
    }
    return OverheadReport(
        config=config,
        n_vehicles=state.n_vehicles,
        n_rsus=state.n_rsus,
        n_edges=state.n_edges,
        duration_s=dur,
        ticks=ticks,
        packets=packets,
        forwarded_to_rsu=to_rsu,
        forwarded_to_edge=to_edge,
        reported_to_cloud=to_cloud,
        record_bytes=record_wire_bytes(config.feature_count),
        update_pushes_per_node=pushes,
        compute_s=compute,
    )


def sweep(base_config: SimConfig, topo: TierTopology = TierTopology(),
          densities=None, durations=None, classifier_factory=None) -> list[OverheadReport]:
    """Cartesian sweep over density and duration; one report per point."""
    densities = list(densities) if densities else [base_config.density_veh_per_km]
    durations = list(durations) if durations else [base_config.duration_s]
    if not densities or not durations:
        raise ValueError("sweep ranges must be non-empty")
    reports = []
    for density in densities:
        for dur in durations:
            config = replace(base_config, density_veh_per_km=float(density),
                             duration_s=float(dur))
            state = build_topology(config, topo)
            classifier = classifier_factory(config) if classifier_factory else None
            reports.append(run_sim(state, classifier))
    return reports


def sweep_csv_rows(reports: list[OverheadReport]) -> list[list[str]]:
    if not reports:
        return []
    keys = list(reports[0].csv_row().keys())
    rows = [keys]
    for rep in reports:
        row = rep.csv_row()
        rows.append([repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys])
    return rows
