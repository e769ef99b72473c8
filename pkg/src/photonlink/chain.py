"""Analytic optics-chain calculus: coherence budgets, transfer budget, rates.

This module holds the classical bookkeeping around the quantum algebra: the
experimental parameter records, the coherence-length arithmetic that decides
whether two-photon interference is observable at all, the power budget of
the sum-frequency transfer stage, and back-of-envelope singles/coincidence
rates used to sanity-check simulation output.

Wavelengths and bandwidths are in nanometers, lengths in meters, rates in
inverse seconds, and time windows in nanoseconds throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

__all__ = [
    "SPEED_OF_LIGHT_M_PER_S",
    "ChainConfig",
    "DetectorParams",
    "FransonCheck",
    "FransonReport",
    "InterferometerParams",
    "RateReport",
    "ReservoirCheck",
    "SaturationWarning",
    "SfgParams",
    "SourceParams",
    "ZeroBandwidthError",
    "coherence_length",
    "expected_rates",
    "franson_validity",
    "reservoir_coherence_ok",
    "sfg_acceptance",
    "sfg_transfer_probability",
]

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0


class ZeroBandwidthError(ValueError):
    """Coherence length requested for a non-positive bandwidth."""


class SaturationWarning(UserWarning):
    """Transfer probability left the small-coupling regime sin^2|g| ~ |g|^2."""


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceParams:
    """Down-conversion source emitting wavelength-correlated photon pairs.

    ``pair_rate_per_s`` is the effective pair rate entering the analyzers,
    i.e. already folded with filter and fiber-coupling losses upstream of
    the interferometers.
    """

    pump_wavelength_nm: float = 711.6
    pump_coherence_length_m: float = 300.0
    signal_wavelength_nm: float = 1555.0  # travels to Alice
    idler_wavelength_nm: float = 1312.0  # travels to Bob / the transfer stage
    raw_bandwidth_nm: float = 15.0
    alice_filter_bandwidth_nm: float = 15.0
    pair_rate_per_s: float = 2000.0

    def __post_init__(self) -> None:
        for name in (
            "pump_wavelength_nm",
            "pump_coherence_length_m",
            "signal_wavelength_nm",
            "idler_wavelength_nm",
            "raw_bandwidth_nm",
            "alice_filter_bandwidth_nm",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.pair_rate_per_s < 0.0:
            raise ValueError(f"pair_rate_per_s must be >= 0, got {self.pair_rate_per_s!r}")
        if self.alice_filter_bandwidth_nm > self.raw_bandwidth_nm:
            raise ValueError("alice_filter_bandwidth_nm cannot exceed raw_bandwidth_nm")

    def alice_coherence_length_m(self) -> float:
        """Single-photon coherence length on Alice's (possibly filtered) arm."""
        return coherence_length(self.signal_wavelength_nm, self.alice_filter_bandwidth_nm)

    def bob_coherence_length_m(self) -> float:
        return coherence_length(self.idler_wavelength_nm, self.raw_bandwidth_nm)


@dataclass(frozen=True)
class InterferometerParams:
    """Unbalanced analyzer; the imbalance is the optical path difference."""

    path_imbalance_m: float = 0.20
    phase_rad: float = 0.0
    transmission: float = 0.7  # excess transmission, port splitting excluded

    def __post_init__(self) -> None:
        if self.path_imbalance_m <= 0.0:
            raise ValueError(f"path_imbalance_m must be positive, got {self.path_imbalance_m!r}")
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission!r}")

    def delay_ns(self) -> float:
        """Long-minus-short arrival-time difference in nanoseconds."""
        return self.path_imbalance_m / SPEED_OF_LIGHT_M_PER_S * 1e9


@dataclass(frozen=True)
class SfgParams:
    """Sum-frequency transfer stage pumped by a strong coherent reservoir."""

    efficiency_per_watt: float = 0.80
    reservoir_power_w: float = 0.7
    coupling_qubit: float = 0.4
    coupling_reservoir: float = 0.4
    input_wavelength_nm: float = 1312.0
    output_wavelength_nm: float = 712.4
    reservoir_coherence_length_m: float = 1000.0
    acceptance_halving_nm: float = 1.0

    def __post_init__(self) -> None:
        for name in (
            "efficiency_per_watt",
            "reservoir_power_w",
            "input_wavelength_nm",
            "output_wavelength_nm",
            "reservoir_coherence_length_m",
            "acceptance_halving_nm",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("coupling_qubit", "coupling_reservoir"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {getattr(self, name)!r}")


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector; gated detectors suppress darks outside gates.

    A gated detector opens a gate centered on each click of the partner
    detector (the trigger wiring of the real setup); dark counts then occur
    only inside gates, while photon detection itself is not gated, standing
    in for an electronics delay that keeps the gate aligned with the photon.
    """

    quantum_efficiency: float = 0.10
    dark_prob_per_ns: float = 3.0e-5
    role: str = "free_running"  # or "gated"
    gate_width_ns: float = 2.5

    def __post_init__(self) -> None:
        if not 0.0 < self.quantum_efficiency <= 1.0:
            raise ValueError(
                f"quantum_efficiency must lie in (0, 1], got {self.quantum_efficiency!r}"
            )
        if self.dark_prob_per_ns < 0.0:
            raise ValueError(f"dark_prob_per_ns must be >= 0, got {self.dark_prob_per_ns!r}")
        if self.role not in ("free_running", "gated"):
            raise ValueError(f"role must be 'free_running' or 'gated', got {self.role!r}")
        if self.role == "gated" and self.gate_width_ns <= 0.0:
            raise ValueError(f"gated detector needs gate_width_ns > 0, got {self.gate_width_ns!r}")


@dataclass(frozen=True)
class ChainConfig:
    """Full experimental parameter set from source to detectors.

    ``sfg`` is None for the direct (no transfer) configuration.  The timing
    fields below the detector records are shared by the rate budget and by
    the event simulator: one Gaussian timestamp jitter sigma, the nominal
    central coincidence window used for budgeting, which detector starts and
    which stops the time-difference converter, and the histogram defaults.
    """

    source: SourceParams = field(default_factory=SourceParams)
    alice_interferometer: InterferometerParams = field(default_factory=InterferometerParams)
    bob_interferometer: InterferometerParams = field(default_factory=InterferometerParams)
    alice_detector: DetectorParams = field(
        default_factory=lambda: DetectorParams(
            quantum_efficiency=0.14, dark_prob_per_ns=1.0e-5, role="gated"
        )
    )
    bob_detector: DetectorParams = field(default_factory=DetectorParams)
    sfg: SfgParams | None = None
    jitter_ns: float = 0.1
    coincidence_window_ns: float = 0.6
    start_detector: str = "bob"
    stop_detector: str = "alice"
    histogram_bin_ns: float = 0.05
    histogram_half_range_ns: float = 3.0

    def __post_init__(self) -> None:
        if self.jitter_ns < 0.0:
            raise ValueError(f"jitter_ns must be >= 0, got {self.jitter_ns!r}")
        if self.coincidence_window_ns <= 0.0:
            raise ValueError(
                f"coincidence_window_ns must be positive, got {self.coincidence_window_ns!r}"
            )
        if self.histogram_bin_ns <= 0.0 or self.histogram_half_range_ns <= 0.0:
            raise ValueError("histogram_bin_ns and histogram_half_range_ns must be positive")
        names = {self.start_detector, self.stop_detector}
        if names != {"alice", "bob"}:
            raise ValueError(
                "start_detector/stop_detector must name 'alice' and 'bob', got "
                f"{self.start_detector!r}/{self.stop_detector!r}"
            )

    def transfer_probability(self) -> float:
        """Per-photon transfer probability of the SFG stage, 1.0 when absent."""
        if self.sfg is None:
            return 1.0
        return sfg_transfer_probability(self.sfg)

    def detector(self, name: str) -> DetectorParams:
        if name == "alice":
            return self.alice_detector
        if name == "bob":
            return self.bob_detector
        raise ValueError(f"unknown detector {name!r}")


# ---------------------------------------------------------------------------
# coherence-length calculus
# ---------------------------------------------------------------------------


def coherence_length(wavelength_nm: float, bandwidth_nm: float) -> float:
    """Coherence length lambda^2 / (delta lambda) in meters.

    For the pair photons at 1555 nm with the raw 15 nm bandwidth this gives
    about 161 micrometers, the scale every imbalance comparison runs against.
    """
    if bandwidth_nm <= 0.0:
        raise ZeroBandwidthError(f"bandwidth must be positive, got {bandwidth_nm!r}")
    if wavelength_nm <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm!r}")
    return wavelength_nm**2 / bandwidth_nm * 1e-9


@dataclass(frozen=True)
class FransonCheck:
    """One named validity condition with its pass margin.

    ``margin`` is the ratio of the actual quantity to the threshold it must
    clear, so margin >= 1 means the check passes with that factor to spare.
    A margin of infinity (perfectly matched analyzers) is reported as-is.
    """

    name: str
    passed: bool
    margin: float
    detail: str


@dataclass(frozen=True)
class FransonReport:
    no_single_photon_interference: FransonCheck
    analyzers_matched: FransonCheck
    within_pump_coherence: FransonCheck

    @property
    def checks(self) -> tuple[FransonCheck, FransonCheck, FransonCheck]:
        return (
            self.no_single_photon_interference,
            self.analyzers_matched,
            self.within_pump_coherence,
        )

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def franson_validity(
    source: SourceParams,
    alice: InterferometerParams,
    bob: InterferometerParams,
) -> FransonReport:
    """Check the three imbalance hierarchies required for two-photon fringes.

    (i)   Each analyzer imbalance exceeds 10x its photon's coherence length,
          killing single-photon interference.
    (ii)  The two imbalances agree within the shorter single-photon
          coherence length, so short-short and long-long stay unresolvable.
    (iii) The larger imbalance stays below a tenth of the pump coherence
          length, so the pair inherits a well-defined emission-time
          superposition.
    """
    l_alice = source.alice_coherence_length_m()
    l_bob = source.bob_coherence_length_m()

    margin_a = alice.path_imbalance_m / (10.0 * l_alice)
    margin_b = bob.path_imbalance_m / (10.0 * l_bob)
    margin_i = min(margin_a, margin_b)
    check_i = FransonCheck(
        name="no_single_photon_interference",
        passed=margin_i >= 1.0,
        margin=margin_i,
        detail=(
            f"imbalances ({alice.path_imbalance_m:.4g} m, {bob.path_imbalance_m:.4g} m) vs "
            f"10x coherence lengths ({10 * l_alice:.4g} m, {10 * l_bob:.4g} m)"
        ),
    )

    mismatch = abs(alice.path_imbalance_m - bob.path_imbalance_m)
    l_short = min(l_alice, l_bob)
    margin_ii = math.inf if mismatch == 0.0 else l_short / mismatch
    check_ii = FransonCheck(
        name="analyzers_matched",
        passed=mismatch <= l_short,
        margin=margin_ii,
        detail=f"|dL_A - dL_B| = {mismatch:.4g} m vs coherence length {l_short:.4g} m",
    )

    biggest = max(alice.path_imbalance_m, bob.path_imbalance_m)
    margin_iii = (source.pump_coherence_length_m / 10.0) / biggest
    check_iii = FransonCheck(
        name="within_pump_coherence",
        passed=margin_iii >= 1.0,
        margin=margin_iii,
        detail=(
            f"max imbalance {biggest:.4g} m vs pump coherence / 10 = "
            f"{source.pump_coherence_length_m / 10.0:.4g} m"
        ),
    )

    return FransonReport(check_i, check_ii, check_iii)


# ---------------------------------------------------------------------------
# transfer-stage budget
# ---------------------------------------------------------------------------


def sfg_transfer_probability(p: SfgParams) -> float:
    """Success probability of the wavelength transfer from the power budget.

    efficiency/W x reservoir power x both coupling efficiencies x the
    photon-number-to-energy conversion ratio lambda_out / lambda_in.  The
    nominal numbers (0.80/W, 0.7 W, 0.4, 0.4, 1312 -> 712 nm) land at about
    0.0486, the few-percent operating point.  Beyond 0.5 the linear budget
    stops being trustworthy (sin^2 saturates), so that region warns.
    """
    prob = (
        p.efficiency_per_watt
        * p.reservoir_power_w
        * p.coupling_qubit
        * p.coupling_reservoir
        * (p.output_wavelength_nm / p.input_wavelength_nm)
    )
    if prob > 0.5:
        warnings.warn(
            f"transfer probability {prob:.3f} exceeds 0.5; the linear power "
            "budget is outside its validity range",
            SaturationWarning,
            stacklevel=2,
        )
    return prob


def sfg_acceptance(detuning_nm: float, halving_nm: float) -> float:
    """Spectral acceptance 2^(-(detuning/halving)^2), halving at +-1 unit."""
    if halving_nm <= 0.0:
        raise ValueError(f"halving_nm must be positive, got {halving_nm!r}")
    return 2.0 ** (-((detuning_nm / halving_nm) ** 2))


@dataclass(frozen=True)
class ReservoirCheck:
    ok: bool
    margin: float
    detail: str


def reservoir_coherence_ok(p: SfgParams, bob: InterferometerParams) -> ReservoirCheck:
    """Require the reservoir coherence length to dwarf Bob's imbalance.

    The transferred photon keeps the pair coherence only if the reservoir
    is phase-stable over both analyzer arms; the criterion used here is a
    factor 10 over the imbalance, reported with the actual ratio as margin.
    """
    margin = p.reservoir_coherence_length_m / bob.path_imbalance_m
    return ReservoirCheck(
        ok=margin >= 10.0,
        margin=margin,
        detail=(
            f"reservoir coherence {p.reservoir_coherence_length_m:.4g} m vs "
            f"imbalance {bob.path_imbalance_m:.4g} m (need >= 10x)"
        ),
    )


# ---------------------------------------------------------------------------
# expected rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    """Analytic singles, coincidence, and accidental rates (all per second).

    ``accidental_rate_uncorrelated`` is the textbook R_start x R_stop x
    window product; ``accidental_rate_gated_darks`` adds the dark counts a
    gated detector fires inside the very gates its partner's clicks opened,
    which land flat across the coincidence window and dominate when the
    free-running partner is dark-count heavy.  The predicted raw/net
    visibility ratio is 1 - accidental fraction.
    """

    alice_singles_per_s: float
    bob_singles_per_s: float
    alice_photon_rate_per_s: float
    bob_photon_rate_per_s: float
    alice_dark_rate_per_s: float
    bob_dark_rate_per_s: float
    true_coincidence_rate_per_s: float
    accidental_rate_uncorrelated_per_s: float
    accidental_rate_gated_darks_per_s: float
    accidental_fraction: float
    predicted_raw_over_net: float

    @property
    def accidental_rate_total_per_s(self) -> float:
        return self.accidental_rate_uncorrelated_per_s + self.accidental_rate_gated_darks_per_s


def _photon_singles(chain: ChainConfig, name: str) -> float:
    """Photon click rate of one detector: pair rate x port x losses x QE."""
    src_rate = chain.source.pair_rate_per_s
    if name == "alice":
        arm = chain.alice_interferometer.transmission
        det = chain.alice_detector.quantum_efficiency
        transfer = 1.0
    else:
        arm = chain.bob_interferometer.transmission
        det = chain.bob_detector.quantum_efficiency
        transfer = chain.transfer_probability()
    # 0.5 is the monitored-output-port probability of the analyzer.
    return src_rate * 0.5 * arm * transfer * det


def _dark_singles(chain: ChainConfig, name: str, partner_singles: float) -> float:
    det = chain.detector(name)
    if det.role == "free_running":
        return det.dark_prob_per_ns * 1e9
    # gated: one gate per partner click
    return partner_singles * det.dark_prob_per_ns * det.gate_width_ns


def expected_rates(chain: ChainConfig) -> RateReport:
    """Closed-form rate budget for the configured chain.

    True coincidences use the phase-averaged central-peak factor 1/8 and
    both arms' survival; accidentals combine the uncorrelated start/stop
    product over the coincidence window with the gated-dark floor.  These
    are design-level estimates, the event simulator is the ground truth.
    """
    alice_photon = _photon_singles(chain, "alice")
    bob_photon = _photon_singles(chain, "bob")

    # Free-running dark rates do not depend on the partner; gated ones do.
    # Resolve free-running detectors first so a gated partner sees the full
    # trigger rate.
    if chain.alice_detector.role == "gated" and chain.bob_detector.role == "gated":
        raise ValueError("both detectors gated: no free-running trigger available")
    if chain.bob_detector.role == "free_running":
        bob_dark = _dark_singles(chain, "bob", 0.0)
        bob_singles = bob_photon + bob_dark
        alice_dark = _dark_singles(chain, "alice", bob_singles)
        alice_singles = alice_photon + alice_dark
    else:
        alice_dark = _dark_singles(chain, "alice", 0.0)
        alice_singles = alice_photon + alice_dark
        bob_dark = _dark_singles(chain, "bob", alice_singles)
        bob_singles = bob_photon + bob_dark

    start_singles = bob_singles if chain.start_detector == "bob" else alice_singles
    stop_singles = alice_singles if chain.stop_detector == "alice" else bob_singles

    window_ns = chain.coincidence_window_ns
    accidental_uncorr = start_singles * stop_singles * window_ns * 1e-9

    stop_det = chain.detector(chain.stop_detector)
    if stop_det.role == "gated":
        # Darks inside the gate opened by the start click itself: flat in
        # the time difference, so the central window collects its share.
        accidental_gated = start_singles * stop_det.dark_prob_per_ns * window_ns
    else:
        accidental_gated = 0.0

    # Phase-averaged central-peak weight is 1/8 per pair.
    joint_survival = (
        chain.alice_interferometer.transmission
        * chain.alice_detector.quantum_efficiency
        * chain.bob_interferometer.transmission
        * chain.bob_detector.quantum_efficiency
        * chain.transfer_probability()
    )
    true_rate = chain.source.pair_rate_per_s * 0.125 * joint_survival

    accidental_total = accidental_uncorr + accidental_gated
    denominator = accidental_total + true_rate
    fraction = accidental_total / denominator if denominator > 0.0 else 0.0

    return RateReport(
        alice_singles_per_s=alice_singles,
        bob_singles_per_s=bob_singles,
        alice_photon_rate_per_s=alice_photon,
        bob_photon_rate_per_s=bob_photon,
        alice_dark_rate_per_s=alice_dark,
        bob_dark_rate_per_s=bob_dark,
        true_coincidence_rate_per_s=true_rate,
        accidental_rate_uncorrelated_per_s=accidental_uncorr,
        accidental_rate_gated_darks_per_s=accidental_gated,
        accidental_fraction=fraction,
        predicted_raw_over_net=1.0 - fraction,
    )
