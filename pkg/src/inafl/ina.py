"""In-network aggregation: local and edge messages, edge-side and cloud-side
combining, and the binary wire format.

Wire layout (little-endian)::

    offset  size  field
    0       1     version (1)
    1       1     kind (0 = local, 1 = edge)
    2       4     dimension d, uint32
    6       8     sample count, uint64
    14      8*d   parameters, IEEE-754 float64
"""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, MalformedMessageError
from .flcore import as_params, global_aggregate_star, local_epoch, weighted_mean

WIRE_VERSION = 1
KIND_LOCAL = 0
KIND_EDGE = 1
_HEADER = struct.Struct("<BBIQ")
HEADER_SIZE = _HEADER.size  # 14


@dataclass(frozen=True, eq=False)
class LocalMessage:
    count: int
    params: np.ndarray

    kind = KIND_LOCAL

    def __post_init__(self):
        _check_count(self.count)
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "params", as_params(self.params))

    def __eq__(self, other):
        return _same(self, other)

    @property
    def dim(self):
        return self.params.size


@dataclass(frozen=True, eq=False)
class EdgeMessage:
    count: int
    params: np.ndarray

    kind = KIND_EDGE

    def __post_init__(self):
        _check_count(self.count)
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "params", as_params(self.params))

    def __eq__(self, other):
        return _same(self, other)

    @property
    def dim(self):
        return self.params.size


def _check_count(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidInputError(f"message count must be a positive integer, got {n!r}")


def _same(a, b):
    # bitwise comparison, so -0.0 != 0.0 and the round trip is checked exactly
    return (type(a) is type(b) and a.count == b.count
            and a.params.shape == b.params.shape
            and a.params.tobytes() == b.params.tobytes())


def make_local_message(dataset_count, w):
    return LocalMessage(dataset_count, w)


def _combine(messages):
    d = messages[0].dim
    if any(m.dim != d for m in messages):
        raise InvalidInputError("messages disagree on dimension")
    counts = [m.count for m in messages]
    params = np.vstack([m.params for m in messages])
    return sum(counts), weighted_mean(counts, params)


def edge_aggregate(members):
    """Aggregate the local messages of one edge node into an EdgeMessage."""
    if len(members) == 0:
        raise InvalidInputError("an edge with no users sends no message")
    count, chi = _combine(members)
    return EdgeMessage(count, chi)


def cloud_aggregate(edges):
    """Global model from the messages of the nonempty edge nodes."""
    if len(edges) == 0:
        raise InvalidInputError("cloud received no edge messages")
    return _combine(edges)[1]


def aggregate_partition(messages, groups):
    """Run edge aggregation for every nonempty group, then the cloud combine.

    ``groups[k]`` is the edge index of ``messages[k]``. Returns the global
    model and the list of edge messages the cloud received.
    """
    by_edge = {}
    for msg, g in zip(messages, groups):
        by_edge.setdefault(int(g), []).append(msg)
    edge_msgs = [edge_aggregate(by_edge[g]) for g in sorted(by_edge)]
    return cloud_aggregate(edge_msgs), edge_msgs


def encode_message(m):
    if not isinstance(m, (LocalMessage, EdgeMessage)):
        raise InvalidInputError(f"cannot encode {type(m).__name__}")
    payload = np.ascontiguousarray(m.params, dtype="<f8").tobytes()
    return _HEADER.pack(WIRE_VERSION, m.kind, m.dim, m.count) + payload


def decode_message(buf):
    buf = bytes(buf)
    if len(buf) < HEADER_SIZE:
        raise MalformedMessageError(f"buffer of {len(buf)} bytes is shorter than the header")
    version, kind, d, count = _HEADER.unpack_from(buf)
    if version != WIRE_VERSION:
        raise MalformedMessageError(f"unsupported version {version}")
    if kind not in (KIND_LOCAL, KIND_EDGE):
        raise MalformedMessageError(f"unknown message kind {kind}")
    if len(buf) != HEADER_SIZE + 8 * d:
        raise MalformedMessageError(
            f"payload is {len(buf) - HEADER_SIZE} bytes, header says {8 * d}")
    if count < 1:
        raise MalformedMessageError("count must be at least 1")
    params = np.frombuffer(buf, dtype="<f8", offset=HEADER_SIZE).astype(np.float64)
    if not np.all(np.isfinite(params)):
        raise MalformedMessageError("non-finite parameter in payload")
    cls = LocalMessage if kind == KIND_LOCAL else EdgeMessage
    return cls(count, params)


def encoded_size(d):
    return HEADER_SIZE + 8 * d


def simulate_rounds(psi, datasets, spec, rounds, groups=None):
    """Run ``rounds`` learning iterations and return the global-model trajectory.

    Each user runs one local epoch from the current global model. With
    ``groups`` (edge index per user) aggregation goes through the edges;
    without it every local model goes straight to the server.
    """
    traj = [as_params(psi)]
    for _ in range(rounds):
        cur = traj[-1]
        locals_ = [(ds.count, local_epoch(cur, ds, spec)) for ds in datasets]
        if groups is None:
            nxt = global_aggregate_star(locals_)
        else:
            msgs = [make_local_message(n, w) for n, w in locals_]
            nxt, _ = aggregate_partition(msgs, groups)
        traj.append(nxt)
    return np.vstack(traj)
