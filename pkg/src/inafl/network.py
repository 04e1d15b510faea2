"""Topology, capacities and the uplink/downlink latency and traffic model.

Association and rate matrices are indexed by *column*. Columns are the edge
nodes, preceded by a direct-to-cloud column 0 when the topology allows it.
That column has the cloud's uplink capacity as its fronthaul and no
backhaul leg (its backhaul capacity is stored as +inf).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleInstanceError, InfeasibleRateError, InvalidInputError

GBPS = 1e9
BITS_PER_MB = 8e6  # 1 MB = 10**6 bytes


@dataclass(frozen=True)
class ModelSize:
    bits: float

    def __post_init__(self):
        if not self.bits > 0:
            raise InvalidInputError("model size must be positive")

    @classmethod
    def from_megabytes(cls, mb):
        return cls(float(mb) * BITS_PER_MB)

    @property
    def megabytes(self):
        return self.bits / BITS_PER_MB

    @property
    def nbytes(self):
        return self.bits / 8.0


@dataclass(frozen=True, eq=False)
class Topology:
    fronthaul: np.ndarray  # (M,) bits/s
    backhaul: np.ndarray  # (M,) bits/s
    downlink: float  # cloud broadcast capacity, bits/s
    uplink: float  # cloud direct uplink capacity, bits/s
    reachable: np.ndarray  # (K, M) bool
    edge_xy: np.ndarray = field(default=None)  # (M, 2) meters
    user_xy: np.ndarray = field(default=None)  # (K, 2) meters
    allow_direct_cloud: bool = False

    def __post_init__(self):
        fr = np.asarray(self.fronthaul, dtype=np.float64).ravel()
        bk = np.asarray(self.backhaul, dtype=np.float64).ravel()
        reach = np.asarray(self.reachable, dtype=bool)
        if reach.ndim != 2 or reach.shape[1] != fr.size or bk.size != fr.size:
            raise InvalidInputError("capacity vectors and reachability disagree on M")
        if np.any(fr <= 0) or np.any(bk <= 0) or self.downlink <= 0 or self.uplink <= 0:
            raise InvalidInputError("all capacities must be positive")
        object.__setattr__(self, "fronthaul", fr)
        object.__setattr__(self, "backhaul", bk)
        object.__setattr__(self, "reachable", reach)
        object.__setattr__(self, "downlink", float(self.downlink))
        object.__setattr__(self, "uplink", float(self.uplink))
        for name in ("edge_xy", "user_xy"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=np.float64))

    @property
    def n_edges(self):
        return self.fronthaul.size

    @property
    def n_users(self):
        return self.reachable.shape[0]

    @property
    def n_columns(self):
        return self.n_edges + int(self.allow_direct_cloud)

    @property
    def cloud_column(self):
        return 0 if self.allow_direct_cloud else None

    @property
    def edge_offset(self):
        return int(self.allow_direct_cloud)

    def column_fronthaul(self):
        if self.allow_direct_cloud:
            return np.concatenate([[self.uplink], self.fronthaul])
        return self.fronthaul.copy()

    def column_backhaul(self):
        if self.allow_direct_cloud:
            return np.concatenate([[np.inf], self.backhaul])
        return self.backhaul.copy()

    def column_reachable(self):
        if self.allow_direct_cloud:
            return np.hstack([np.ones((self.n_users, 1), dtype=bool), self.reachable])
        return self.reachable.copy()

    def column_labels(self):
        labels = [f"edge{m}" for m in range(self.n_edges)]
        return (["cloud"] + labels) if self.allow_direct_cloud else labels

    def with_direct_cloud(self, allow=True):
        return replace(self, allow_direct_cloud=bool(allow))

    def subset(self, users):
        users = np.asarray(users, dtype=np.int64)
        return replace(self, reachable=self.reachable[users],
                       user_xy=None if self.user_xy is None else self.user_xy[users])

    def check_reachability(self):
        """Raise InfeasibleInstanceError naming the first user with no allowed column."""
        if self.allow_direct_cloud:
            return
        dead = np.flatnonzero(~self.reachable.any(axis=1))
        if dead.size:
            raise InfeasibleInstanceError(
                f"user {int(dead[0])} cannot reach any edge node"
                + (f" ({dead.size} such users)" if dead.size > 1 else ""))


@dataclass(frozen=True, eq=False)
class LatencyReport:
    fronthaul: np.ndarray  # per column, seconds
    backhaul: np.ndarray  # per column, seconds (gamma or gamma')
    per_column: np.ndarray  # fronthaul + backhaul
    total: float
    cloud_rx_bytes: int
    cloud_aggregation_inputs: int
    ina_enabled: bool


def association_from_assignment(assign, n_columns):
    assign = np.asarray(assign, dtype=np.int64)
    A = np.zeros((assign.size, n_columns), dtype=bool)
    A[np.arange(assign.size), assign] = True
    return A


def validate_association(A, topo):
    """Check row-stochasticity (one column per user) and reachability."""
    A = np.asarray(A)
    if A.shape != (topo.n_users, topo.n_columns):
        raise InvalidInputError(
            f"association shape {A.shape} != ({topo.n_users}, {topo.n_columns})")
    if not np.all((A == 0) | (A == 1)):
        raise InvalidInputError("association matrix must be binary")
    A = A.astype(bool)
    bad = np.flatnonzero(A.sum(axis=1) != 1)
    if bad.size:
        raise InvalidInputError(f"user {int(bad[0])} is not associated with exactly one node")
    if np.any(A & ~topo.column_reachable()):
        k = int(np.flatnonzero((A & ~topo.column_reachable()).any(axis=1))[0])
        raise InvalidInputError(f"user {k} is associated with an unreachable node")
    return A


def column_loads(A):
    return np.asarray(A, dtype=bool).sum(axis=0).astype(np.int64)


def broadcast_latency(size, topo):
    return size.bits / topo.downlink


def fronthaul_latency(m, A, R, size):
    """Slowest associated user's upload time on column ``m``; 0 for an empty column."""
    users = np.flatnonzero(np.asarray(A)[:, m])
    if users.size == 0:
        return 0.0
    r = np.asarray(R, dtype=np.float64)[users, m]
    if np.any(r <= 0):
        k = int(users[np.flatnonzero(r <= 0)[0]])
        raise InfeasibleRateError(f"user {k} is associated with column {m} at zero rate")
    return float(np.max(size.bits / r))


def backhaul_latency_plain(m, A, size, topo):
    """Edge-to-cloud time when the edge forwards every model it received."""
    s = int(np.asarray(A, dtype=bool)[:, m].sum())
    return size.bits * s / topo.column_backhaul()[m]


def backhaul_latency_ina(m, A, size, topo):
    """Edge-to-cloud time when the edge forwards one aggregated model."""
    s = int(np.asarray(A, dtype=bool)[:, m].sum())
    if s == 0:
        return 0.0
    bk = topo.column_backhaul()[m]
    return min(size.bits / bk, size.bits * s / bk)


def cloud_overhead(A, size, ina_enabled):
    """Bytes received and models combined at the cloud in one round.

    Without aggregation every user model reaches the cloud. With it, each
    nonempty column delivers one aggregated model (the direct-cloud group is
    combined at the macro node like any edge group).
    """
    A = np.asarray(A, dtype=bool)
    if ina_enabled:
        inputs = int(np.count_nonzero(A.any(axis=0))) if A.size else 0
    else:
        inputs = int(A.sum())
    return int(round(inputs * size.nbytes)), inputs


def total_latency(A, R, size, topo, ina_enabled):
    A = validate_association(A, topo)
    R = np.asarray(R, dtype=np.float64)
    if R.shape != A.shape:
        raise InvalidInputError("rate matrix shape differs from the association matrix")
    if np.any(R < 0):
        raise InfeasibleRateError("rates must be nonnegative")
    fr_cap = topo.column_fronthaul()
    over = np.flatnonzero(R.sum(axis=0) > fr_cap * (1 + 1e-12))
    if over.size:
        raise InfeasibleRateError(f"column {int(over[0])} exceeds its fronthaul capacity")
    ncol = topo.n_columns
    back = backhaul_latency_ina if ina_enabled else backhaul_latency_plain
    fr = np.array([fronthaul_latency(m, A, R, size) for m in range(ncol)])
    bk = np.array([back(m, A, size, topo) for m in range(ncol)])
    per = fr + bk
    nbytes, inputs = cloud_overhead(A, size, ina_enabled)
    return LatencyReport(
        fronthaul=fr, backhaul=bk, per_column=per,
        total=float(per.max()) if ncol else 0.0,
        cloud_rx_bytes=nbytes, cloud_aggregation_inputs=inputs,
        ina_enabled=bool(ina_enabled))
