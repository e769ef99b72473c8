"""Monte Carlo click-stream simulator for the two-analyzer coincidence setup.

Pairs are emitted as a Poisson process.  Each pair is sampled *jointly* from
the quantum outcome distribution of the two analyzers rather than as two
independent classical photons: the phase-dependent interference lives only
in the both-detected central class, the side classes are flat, and the
single-sided marginals stay phase-independent (no single-photon fringes).
Per emitted pair the six outcome classes carry

    central coincidence      1/8 (1 + V cos phi)     shared ss/ll path label
    side, Alice early        1/16                    Alice short, Bob long
    side, Alice late         1/16                    Alice long, Bob short
    Alice-side only          1/8 (2 - V cos phi)     Bob photon unmonitored
    Bob-side only            1/8 (2 - V cos phi)     Alice photon unmonitored
    neither                  1/8 (2 + V cos phi)

which sums to one and reproduces the 1/2 monitored-port marginal on each
side for every phi.  Arm transmission, the transfer-stage success, and
detector quantum efficiency are applied as independent Bernoulli thinning
per photon; dark counts are added per detector, uniformly for free-running
detectors and inside partner-triggered gates for gated ones.

Everything is drawn from one numpy PCG64 generator in a fixed documented
order, so a stream is a deterministic function of (config, seed), and all
photon-related draws happen before any dark-count draws: changing dark
rates never perturbs the photon events.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chain import ChainConfig

__all__ = [
    "DETECTORS",
    "ORIGINS",
    "ConfigMismatchError",
    "DetectionEvent",
    "EventStream",
    "InvalidConfigError",
    "SimConfig",
    "apply_transfer_thinning",
    "config_hash",
    "merge",
    "read_events",
    "simulate",
    "write_events",
]

DETECTORS = ("alice", "bob")
ORIGINS = ("photon", "dark")

_FORMAT_LINE = "# photonlink-events 1"


class InvalidConfigError(ValueError):
    """Simulation configuration is internally inconsistent."""


class ConfigMismatchError(ValueError):
    """Streams with different configurations (or clashing seeds) cannot merge."""


@dataclass(frozen=True)
class SimConfig:
    """Everything simulate() needs: the chain, the state, and the run window."""

    chain: ChainConfig = field(default_factory=ChainConfig)
    visibility: float = 0.97
    duration_s: float = 1.0
    seed: int = 0
    phase_averaged: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidConfigError(f"visibility must lie in [0, 1], got {self.visibility!r}")
        if self.duration_s <= 0.0:
            raise InvalidConfigError(f"duration_s must be positive, got {self.duration_s!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfigError(f"seed must fit an unsigned 64-bit integer, got {self.seed!r}")
        if (
            self.chain.alice_detector.role == "gated"
            and self.chain.bob_detector.role == "gated"
        ):
            raise InvalidConfigError("both detectors gated: each would wait for the other's click")


def config_hash(config: SimConfig) -> str:
    """SHA-256 over the canonical JSON form of the configuration.

    The seed is excluded: it identifies a shard, not a physical setup, and
    streams that differ only in seed are exactly the ones merge() accepts.
    """
    record = dataclasses.asdict(config)
    record.pop("seed", None)
    payload = json.dumps(record, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DetectionEvent:
    """One click: timestamp in ns, which detector, and the ground-truth origin.

    The origin tag exists for simulation diagnostics only; analysis code
    never reads it, exactly like a real counter card.
    """

    time_ns: float
    detector: str
    origin: str


class EventStream:
    """Time-ordered click record held as columnar numpy arrays.

    ``times_ns`` is float64, ``detectors`` and ``origins`` are uint8 codes
    into DETECTORS / ORIGINS.  Iteration yields DetectionEvent objects for
    convenience; bulk consumers should read the arrays directly.
    """

    def __init__(
        self,
        times_ns: np.ndarray,
        detectors: np.ndarray,
        origins: np.ndarray,
        *,
        duration_ns: float,
        seeds: tuple[int, ...],
        config: SimConfig | None = None,
        config_digest: str | None = None,
    ) -> None:
        times = np.asarray(times_ns, dtype=np.float64)
        dets = np.asarray(detectors, dtype=np.uint8)
        origs = np.asarray(origins, dtype=np.uint8)
        if not (times.shape == dets.shape == origs.shape) or times.ndim != 1:
            raise ValueError("times, detectors, and origins must be equal-length 1-d arrays")
        if times.size and (times[0] < 0.0 or times[-1] >= duration_ns):
            raise ValueError("event times must lie in [0, duration)")
        if times.size and np.any(np.diff(times) < 0.0):
            raise ValueError("event times must be sorted ascending")
        if dets.size and dets.max() >= len(DETECTORS):
            raise ValueError("detector code out of range")
        if origs.size and origs.max() >= len(ORIGINS):
            raise ValueError("origin code out of range")
        self.times_ns = times
        self.detectors = dets
        self.origins = origs
        self.duration_ns = float(duration_ns)
        self.seeds = tuple(int(s) for s in seeds)
        self.config = config
        if config is not None:
            self.config_digest = config_hash(config)
        else:
            self.config_digest = config_digest or ""

    def __len__(self) -> int:
        return int(self.times_ns.size)

    def __iter__(self):
        for t, d, o in zip(self.times_ns, self.detectors, self.origins):
            yield DetectionEvent(float(t), DETECTORS[d], ORIGINS[o])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            np.array_equal(self.times_ns, other.times_ns)
            and np.array_equal(self.detectors, other.detectors)
            and np.array_equal(self.origins, other.origins)
            and self.duration_ns == other.duration_ns
            and self.seeds == other.seeds
            and self.config_digest == other.config_digest
        )

    def detector_times(self, name: str, origin: str | None = None) -> np.ndarray:
        """Timestamps of one detector, optionally restricted to one origin."""
        mask = self.detectors == DETECTORS.index(name)
        if origin is not None:
            mask &= self.origins == ORIGINS.index(origin)
        return self.times_ns[mask]


def apply_transfer_thinning(p_transfer: float) -> float:
    """Survival multiplier the transfer stage applies on Bob's arm.

    The stage either converts a photon (it survives at the new wavelength)
    or the photon is lost; there is no partial outcome.  simulate() folds
    the returned factor into Bob's Bernoulli keep probability.
    """
    p = float(p_transfer)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"transfer probability must lie in [0, 1], got {p_transfer!r}")
    return p


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _gated_dark_times(
    rng: np.random.Generator,
    trigger_times: np.ndarray,
    dark_prob_per_ns: float,
    gate_width_ns: float,
) -> np.ndarray:
    """Dark clicks of a gated detector, uniform inside partner-centered gates.

    The gate is centered on the trigger click (the cable delays of the real
    setup align the gate with the coincidence window), so gated darks form
    a flat background across the time-difference range the gate covers.
    """
    n_gates = trigger_times.size
    if n_gates == 0 or dark_prob_per_ns <= 0.0:
        return np.empty(0, dtype=np.float64)
    n_darks = rng.poisson(dark_prob_per_ns * gate_width_ns * n_gates)
    if n_darks == 0:
        return np.empty(0, dtype=np.float64)
    gate_idx = rng.integers(0, n_gates, size=n_darks)
    offsets = (rng.random(n_darks) - 0.5) * gate_width_ns
    return trigger_times[gate_idx] + offsets


def simulate(config: SimConfig) -> EventStream:
    """Generate the click stream for one run.

    Draw order is fixed: pair count, emission times, per-pair phases (only
    when phase-averaging), outcome class, shared path bit, Alice thinning,
    Bob thinning, Alice jitter, Bob jitter, then free-running darks (Alice
    before Bob) and finally gated darks.  Photon draws are consumed
    unconditionally so the photon record depends only on the source,
    analyzer, transfer, and detector-efficiency parameters.
    """
    chain = config.chain
    rng = np.random.default_rng(config.seed)
    duration_ns = config.duration_s * 1e9

    p_transfer = apply_transfer_thinning(chain.transfer_probability())
    keep_alice = chain.alice_interferometer.transmission * chain.alice_detector.quantum_efficiency
    keep_bob = (
        chain.bob_interferometer.transmission
        * p_transfer
        * chain.bob_detector.quantum_efficiency
    )
    delay_alice = chain.alice_interferometer.delay_ns()
    delay_bob = chain.bob_interferometer.delay_ns()

    n_pairs = int(rng.poisson(chain.source.pair_rate_per_s * config.duration_s))
    emission = rng.random(n_pairs) * duration_ns

    if config.phase_averaged:
        phi = rng.random(n_pairs) * (2.0 * math.pi)
    else:
        phi = np.full(
            n_pairs,
            chain.alice_interferometer.phase_rad + chain.bob_interferometer.phase_rad,
        )

    # outcome classes 0..5, cumulative thresholds per pair
    v_cos = config.visibility * np.cos(phi)
    p_central = 0.125 * (1.0 + v_cos)
    p_side = 0.0625
    p_single = 0.125 * (2.0 - v_cos)  # same weight for Alice-only and Bob-only
    u = rng.random(n_pairs)
    c0 = p_central
    c1 = c0 + p_side
    c2 = c1 + p_side
    c3 = c2 + p_single
    c4 = c3 + p_single
    category = (
        (u >= c0).astype(np.int8)
        + (u >= c1)
        + (u >= c2)
        + (u >= c3)
        + (u >= c4)
    )

    # Shared path bit: ss/ll label for central-class pairs (the two paths
    # are indistinguishable, the label only places absolute timestamps) and
    # the unobservable short/long choice for one-sided classes.
    path_bit = rng.integers(0, 2, size=n_pairs).astype(np.float64)

    thin_a = rng.random(n_pairs)
    thin_b = rng.random(n_pairs)
    jitter_a = rng.normal(0.0, 1.0, n_pairs)
    jitter_b = rng.normal(0.0, 1.0, n_pairs)

    alice_offset = np.select(
        [category == 0, category == 1, category == 2, category == 3],
        [path_bit * delay_alice, 0.0, delay_alice, path_bit * delay_alice],
        default=0.0,
    )
    bob_offset = np.select(
        [category == 0, category == 1, category == 2, category == 4],
        [path_bit * delay_bob, delay_bob, 0.0, path_bit * delay_bob],
        default=0.0,
    )

    alice_reaches = np.isin(category, (0, 1, 2, 3))
    bob_reaches = np.isin(category, (0, 1, 2, 4))
    alice_kept = alice_reaches & (thin_a < keep_alice)
    bob_kept = bob_reaches & (thin_b < keep_bob)

    sigma = chain.jitter_ns
    alice_photon_times = emission[alice_kept] + alice_offset[alice_kept]
    alice_photon_times = alice_photon_times + jitter_a[alice_kept] * sigma
    bob_photon_times = emission[bob_kept] + bob_offset[bob_kept]
    bob_photon_times = bob_photon_times + jitter_b[bob_kept] * sigma

    # ---- dark counts -------------------------------------------------
    dark_times: dict[str, np.ndarray] = {}
    for name in DETECTORS:  # free-running first, fixed alice -> bob order
        det = chain.detector(name)
        if det.role == "free_running" and det.dark_prob_per_ns > 0.0:
            n_dark = rng.poisson(det.dark_prob_per_ns * duration_ns)
            dark_times[name] = rng.random(n_dark) * duration_ns
        elif det.role == "free_running":
            dark_times[name] = np.empty(0, dtype=np.float64)

    photon_times = {"alice": alice_photon_times, "bob": bob_photon_times}
    for name, partner in (("alice", "bob"), ("bob", "alice")):
        det = chain.detector(name)
        if det.role != "gated":
            continue
        triggers = np.concatenate([photon_times[partner], dark_times[partner]])
        dark_times[name] = _gated_dark_times(
            rng, triggers, det.dark_prob_per_ns, det.gate_width_ns
        )

    # ---- assemble the stream -----------------------------------------
    parts_t = [
        alice_photon_times,
        bob_photon_times,
        dark_times["alice"],
        dark_times["bob"],
    ]
    parts_d = [
        np.zeros(alice_photon_times.size, dtype=np.uint8),
        np.ones(bob_photon_times.size, dtype=np.uint8),
        np.zeros(dark_times["alice"].size, dtype=np.uint8),
        np.ones(dark_times["bob"].size, dtype=np.uint8),
    ]
    parts_o = [
        np.zeros(alice_photon_times.size, dtype=np.uint8),
        np.zeros(bob_photon_times.size, dtype=np.uint8),
        np.ones(dark_times["alice"].size, dtype=np.uint8),
        np.ones(dark_times["bob"].size, dtype=np.uint8),
    ]
    times = np.concatenate(parts_t)
    dets = np.concatenate(parts_d)
    origs = np.concatenate(parts_o)

    inside = (times >= 0.0) & (times < duration_ns)
    times, dets, origs = times[inside], dets[inside], origs[inside]
    order = np.argsort(times, kind="stable")
    return EventStream(
        times[order],
        dets[order],
        origs[order],
        duration_ns=duration_ns,
        seeds=(config.seed,),
        config=config,
    )


# ---------------------------------------------------------------------------
# merging and serialization
# ---------------------------------------------------------------------------


def merge(a: EventStream, b: EventStream) -> EventStream:
    """Time-ordered union of two streams of the same configuration.

    Streams must share their configuration and must not share a seed (the
    same seed would duplicate every event).  Note first-stop histogram
    pairing is exactly additive over a merge only when the two streams do
    not interleave within the histogram range; for sparse independent-seed
    shards the difference vanishes.
    """
    if a.config_digest != b.config_digest:
        raise ConfigMismatchError("streams come from different configurations")
    if set(a.seeds) & set(b.seeds):
        raise ConfigMismatchError(f"streams share seeds {set(a.seeds) & set(b.seeds)}")
    times = np.concatenate([a.times_ns, b.times_ns])
    dets = np.concatenate([a.detectors, b.detectors])
    origs = np.concatenate([a.origins, b.origins])
    order = np.argsort(times, kind="stable")
    return EventStream(
        times[order],
        dets[order],
        origs[order],
        duration_ns=max(a.duration_ns, b.duration_ns),
        seeds=tuple(sorted(set(a.seeds) | set(b.seeds))),
        config=a.config if a.config is not None else b.config,
        config_digest=a.config_digest,
    )


def write_events(stream: EventStream, path: str | Path) -> None:
    """Write the line-oriented text form: header comments, then one event
    per line as time_ns<TAB>detector<TAB>origin with round-trip floats."""
    lines = [
        _FORMAT_LINE,
        f"# config_hash={stream.config_digest or '-'}",
        "# seeds=" + ",".join(str(s) for s in stream.seeds),
        f"# duration_ns={stream.duration_ns!r}",
    ]
    for t, d, o in zip(stream.times_ns, stream.detectors, stream.origins):
        lines.append(f"{float(t)!r}\t{DETECTORS[d]}\t{ORIGINS[o]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_events(path: str | Path) -> EventStream:
    """Parse a file written by write_events; write(read(p)) is byte-identical."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _FORMAT_LINE:
        raise ValueError(f"{path}: not a photonlink event file")
    digest = ""
    seeds: tuple[int, ...] = ()
    duration_ns = 0.0
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        body_start = i + 1
        if line.startswith("# config_hash="):
            value = line.split("=", 1)[1]
            digest = "" if value == "-" else value
        elif line.startswith("# seeds="):
            value = line.split("=", 1)[1]
            seeds = tuple(int(s) for s in value.split(",") if s)
        elif line.startswith("# duration_ns="):
            duration_ns = float(line.split("=", 1)[1])
    times = []
    dets = []
    origs = []
    for line in lines[body_start:]:
        t_str, d_str, o_str = line.split("\t")
        times.append(float(t_str))
        dets.append(DETECTORS.index(d_str))
        origs.append(ORIGINS.index(o_str))
    return EventStream(
        np.array(times, dtype=np.float64),
        np.array(dets, dtype=np.uint8),
        np.array(origs, dtype=np.uint8),
        duration_ns=duration_ns,
        seeds=seeds,
        config=None,
        config_digest=digest,
    )
