"""System-level model: sparse activation, slotted-Aloha contention, signalling overhead."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
from typing import Dict, List, Tuple

import numpy as np
from scipy.stats import binom

from .errors import DomainError
from .phy import collision_probability
from .rng import generator


@dataclass
class TrafficModel:
    device_count: int
    activation_prob: float
    payload_bits: int = 100

    def __post_init__(self):
        if self.device_count < 0:
            raise DomainError("device_count must be nonnegative")
        if not 0.0 <= self.activation_prob <= 1.0:
            raise DomainError(f"activation probability must lie in [0, 1], got {self.activation_prob}")
        if self.payload_bits <= 0:
            raise DomainError("payload_bits must be positive")


@dataclass
class SlotReport:
    slot: int
    active: Tuple[int, ...]
    signatures: Tuple[int, ...]
    collision_count: int  # devices whose signature is shared with another device
    outcomes: Tuple[str, ...]

    @property
    def collided(self) -> bool:
        return self.collision_count > 0


def activate(traffic: TrafficModel, slot: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of the devices active in ``slot`` (i.i.d. Bernoulli per device)."""
    return np.flatnonzero(rng.random(traffic.device_count) < traffic.activation_prob)


def _mark(slot, active, picks) -> SlotReport:
    _, inverse, counts = np.unique(picks, return_inverse=True, return_counts=True)
    shared = counts[inverse] > 1 if len(picks) else np.zeros(0, bool)
    outcomes = tuple("signature-collision" if s else "clean" for s in shared)
    return SlotReport(slot, tuple(int(a) for a in active), tuple(int(p) for p in picks),
                      int(shared.sum()), outcomes)


def _slot(traffic, pool_size, seed, s):
    rng = generator(seed, s)
    active = activate(traffic, s, rng)
    picks = rng.integers(0, pool_size, size=active.size)
    return _mark(s, active, picks)


def run_aloha_frame(traffic: TrafficModel, pool_size: int, slots: int,
                    seed: int = 0, threads: int = 1) -> List[SlotReport]:
    """Slotted-Aloha frame: each active device picks a signature uniformly.

    Slot ``s`` uses its own substream ``(seed, s)``.  Collided packets are lost;
    there are no retransmissions.
    """
    if pool_size < 1:
        raise DomainError("pool size must be >= 1")

    def run(s):
        return _slot(traffic, pool_size, seed, s)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(run, range(slots)))
    return [run(s) for s in range(slots)]


def expected_collision_rate(traffic: TrafficModel, pool_size: int) -> float:
    """Per-slot collision probability, averaged over the binomial active count."""
    N, p = traffic.device_count, traffic.activation_prob
    ks = np.arange(N + 1)
    pmf = binom.pmf(ks, N, p)
    return float(sum(w * collision_probability(int(k), pool_size) for k, w in zip(ks, pmf)))


def aloha_summary(reports: List[SlotReport], traffic: TrafficModel, pool_size: int) -> dict:
    n = len(reports)
    active = np.array([len(r.active) for r in reports])
    coll = np.array([r.collided for r in reports])
    lost = sum(r.collision_count for r in reports)
    p = coll.mean() if n else 0.0
    return {
        "slots": n,
        "transmissions": int(active.sum()),
        "mean_active": float(active.mean()) if n else 0.0,
        "collided_slots": int(coll.sum()),
        "collision_rate": float(p),
        "collision_rate_se": float(np.sqrt(p * (1 - p) / n)) if n else 0.0,
        "expected_collision_rate": expected_collision_rate(traffic, pool_size),
        "collided_packets": int(lost),
        "delivered_packets": int(active.sum() - lost),
    }


@dataclass
class ControlMessage:
    name: str
    direction: str
    bits: int


@dataclass
class OverheadProfile:
    name: str
    messages: List[ControlMessage] = field(default_factory=list)
    pilot_bits: int = 0
    assumed: bool = False

    def __post_init__(self):
        for m in self.messages:
            if m.bits < 0:
                raise DomainError(f"message {m.name!r} has negative size")
            if m.direction not in ("DL", "UL"):
                raise DomainError(f"message {m.name!r} direction must be DL or UL")
        if self.pilot_bits < 0:
            raise DomainError("pilot_bits must be nonnegative")

    @property
    def control_bits(self) -> int:
        return sum(m.bits for m in self.messages)

    def to_dict(self) -> dict:
        return {"name": self.name, "pilot_bits": self.pilot_bits, "assumed": self.assumed,
                "messages": [vars(m).copy() for m in self.messages]}

    @classmethod
    def from_dict(cls, d: dict) -> "OverheadProfile":
        msgs = [ControlMessage(m["name"], m["direction"], int(m["bits"]))
                for m in d.get("messages", [])]
        return cls(d["name"], msgs, int(d.get("pilot_bits", 0)), bool(d.get("assumed", False)))


# Sizes are placeholders; only their sum being "hundreds of bits" is grounded.
GRANT_BASED_MESSAGES = [
    ("random access request", "UL"),
    ("random access response", "DL"),
    ("user ID report / connection setup", "UL"),
    ("scheduling request", "UL"),
    ("UL scheduling grant", "DL"),
]


def default_profiles(pilot_bits: int = 24, message_bits: int = 60):
    gb = OverheadProfile(
        "grant-based",
        [ControlMessage(n, d, message_bits) for n, d in GRANT_BASED_MESSAGES],
        pilot_bits, assumed=True)
    gf = OverheadProfile("grant-free", [], pilot_bits, assumed=True)
    return gb, gf


def load_profiles(path) -> Dict[str, OverheadProfile]:
    with open(path) as fh:
        data = json.load(fh)
    items = data["profiles"] if isinstance(data, dict) else data
    return {p.name: p for p in map(OverheadProfile.from_dict, items)}


def overhead_compare(profile_grant_based: OverheadProfile,
                     profile_grant_free: OverheadProfile, payload_bits: int) -> dict:
    """Total bits and ``(total - payload) / payload`` for both access modes."""
    if payload_bits <= 0:
        raise DomainError("payload must be positive")
    out = {}
    for key, prof in (("grant_based", profile_grant_based), ("grant_free", profile_grant_free)):
        total = prof.control_bits + prof.pilot_bits + payload_bits
        out[key] = {
            "profile": prof.name,
            "control_bits": prof.control_bits,
            "pilot_bits": prof.pilot_bits,
            "payload_bits": payload_bits,
            "total_bits": total,
            "overhead_ratio": (total - payload_bits) / payload_bits,
            "pre_data_exchanges": len(prof.messages),
            "sizes": "assumed" if prof.assumed else "configured",
        }
    return out
