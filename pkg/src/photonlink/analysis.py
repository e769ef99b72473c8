"""Coincidence analysis for start-stop click streams.

This module turns raw detector clicks into the quantities an experimenter
actually reports: a start-stop coincidence histogram, the three-peak window
structure of an unbalanced-interferometer pair measurement, an accidental
(background) estimate taken from off-peak bins, and a sinusoidal fringe fit
yielding raw and net visibilities plus the derived fidelity and Bell
parameter.

Pairing convention: for every start click we take the first stop click whose
time difference falls at or above the histogram range minimum, exactly like
a time-to-digital converter armed by the start channel.  This choice (rather
than correlating all pairs) matters for accidental statistics at high rates
and is therefore fixed here rather than configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import curve_fit

from .events import EventStream
from .quantum import VisibilityRangeError

__all__ = [
    "AnalysisError",
    "PeaksNotFound",
    "OutOfRange",
    "NoBackground",
    "InsufficientData",
    "NonConvergence",
    "BELL_THRESHOLD_VISIBILITY",
    "CoincidenceHistogram",
    "PeakWindows",
    "FringePoint",
    "FringeFit",
    "BellResult",
    "build_histogram",
    "locate_peaks",
    "count_window",
    "estimate_accidentals",
    "fit_fringe",
    "fidelity_from_visibility",
    "bell_parameter",
    "write_histogram_csv",
    "write_fringe_csv",
    "fit_to_dict",
    "format_fit_report",
]

# A sinusoidal two-photon fringe violates the CHSH bound S = 2 exactly when
# its visibility exceeds 1/sqrt(2).
BELL_THRESHOLD_VISIBILITY = 1.0 / math.sqrt(2.0)

_EDGE_TOL_NS = 1e-9


class AnalysisError(ValueError):
    """Base class for analysis failures."""


class PeaksNotFound(AnalysisError):
    """The histogram does not show three significant, locatable peaks."""


class OutOfRange(AnalysisError):
    """A requested window extends beyond the histogram range."""


class NoBackground(AnalysisError):
    """No off-peak bins are available to estimate accidentals from."""


class InsufficientData(AnalysisError):
    """Too few fringe points, or the phase span is under one period."""


class NonConvergence(AnalysisError):
    """The fringe fit failed to converge; the message carries diagnostics."""


# ---------------------------------------------------------------------------
# histogram
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Start-stop time-difference histogram with a uniform bin grid.

    Bin edges are exact integer multiples of ``bin_width_ns`` so that
    histograms from different runs of the same configuration share their
    grid and can be added bin-wise.
    """

    bin_width_ns: float
    range_min_ns: float
    range_max_ns: float
    counts: np.ndarray
    start_detector: str
    stop_detector: str

    def __post_init__(self) -> None:
        if not self.bin_width_ns > 0.0:
            raise ValueError(f"bin width must be positive, got {self.bin_width_ns!r}")
        if not self.range_min_ns < self.range_max_ns:
            raise ValueError("histogram range must have range_min < range_max")
        for name, value in (("range_min_ns", self.range_min_ns), ("range_max_ns", self.range_max_ns)):
            k = round(value / self.bin_width_ns)
            if abs(k * self.bin_width_ns - value) > _EDGE_TOL_NS:
                raise ValueError(
                    f"{name}={value!r} is not an integer multiple of the bin width"
                )
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size != self.n_bins:
            raise ValueError(
                f"counts must be a 1-d array of length {self.n_bins}, got shape {counts.shape}"
            )
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        if self.start_detector == self.stop_detector:
            raise ValueError("start and stop detectors must differ")

    @property
    def n_bins(self) -> int:
        return int(round((self.range_max_ns - self.range_min_ns) / self.bin_width_ns))

    @property
    def edges_ns(self) -> np.ndarray:
        return self.range_min_ns + self.bin_width_ns * np.arange(self.n_bins + 1)

    @property
    def centers_ns(self) -> np.ndarray:
        return self.range_min_ns + self.bin_width_ns * (np.arange(self.n_bins) + 0.5)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoincidenceHistogram):
            return NotImplemented
        return (
            self.bin_width_ns == other.bin_width_ns
            and self.range_min_ns == other.range_min_ns
            and self.range_max_ns == other.range_max_ns
            and self.start_detector == other.start_detector
            and self.stop_detector == other.stop_detector
            and np.array_equal(self.counts, other.counts)
        )

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if not isinstance(other, CoincidenceHistogram):
            return NotImplemented
        same_axis = (
            self.bin_width_ns == other.bin_width_ns
            and self.range_min_ns == other.range_min_ns
            and self.range_max_ns == other.range_max_ns
            and self.start_detector == other.start_detector
            and self.stop_detector == other.stop_detector
        )
        if not same_axis:
            raise ValueError("cannot add histograms with different grids or detector roles")
        return CoincidenceHistogram(
            bin_width_ns=self.bin_width_ns,
            range_min_ns=self.range_min_ns,
            range_max_ns=self.range_max_ns,
            counts=self.counts + other.counts,
            start_detector=self.start_detector,
            stop_detector=self.stop_detector,
        )


def build_histogram(
    events: EventStream,
    start_detector: str = "bob",
    stop_detector: str = "alice",
    bin_width_ns: float = 0.05,
    range_ns: tuple[float, float] = (-3.0, 3.0),
) -> CoincidenceHistogram:
    """Histogram of (stop - start) time differences, first-stop pairing.

    For each start click the first stop click with difference >= range
    minimum is taken; it contributes one count if the difference is below
    the range maximum, otherwise the start records nothing.  An empty
    stream yields an all-zero histogram.
    """
    lo, hi = float(range_ns[0]), float(range_ns[1])
    if not bin_width_ns > 0.0:
        raise ValueError(f"bin width must be positive, got {bin_width_ns!r}")
    hist = CoincidenceHistogram(
        bin_width_ns=float(bin_width_ns),
        range_min_ns=lo,
        range_max_ns=hi,
        counts=np.zeros(max(int(round((hi - lo) / bin_width_ns)), 1), dtype=np.int64),
        start_detector=start_detector,
        stop_detector=stop_detector,
    )
    starts = events.detector_times(start_detector)
    stops = events.detector_times(stop_detector)
    if starts.size == 0 or stops.size == 0:
        return hist
    first = np.searchsorted(stops, starts + lo, side="left")
    valid = first < stops.size
    tau = stops[first[valid]] - starts[valid]
    tau = tau[tau < hi]
    indices = np.floor((tau - lo) / hist.bin_width_ns).astype(np.int64)
    indices = np.minimum(indices, hist.n_bins - 1)  # guard float roundoff at hi
    counts = np.bincount(indices, minlength=hist.n_bins)
    return CoincidenceHistogram(
        bin_width_ns=hist.bin_width_ns,
        range_min_ns=lo,
        range_max_ns=hi,
        counts=counts,
        start_detector=start_detector,
        stop_detector=stop_detector,
    )


# ---------------------------------------------------------------------------
# peak windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeakWindows:
    """Three disjoint peak windows plus the off-peak background intervals.

    All intervals are (low, high) in ns on the histogram's time-difference
    axis.  The three peak windows share one half-width, so per-window
    background estimates are directly comparable.
    """

    side_early: tuple[float, float]
    central: tuple[float, float]
    side_late: tuple[float, float]
    background: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ordered = (self.side_early, self.central, self.side_late)
        for lo, hi in ordered + tuple(self.background):
            if not lo < hi:
                raise ValueError(f"degenerate interval ({lo!r}, {hi!r})")
        if not (self.side_early[1] <= self.central[0] and self.central[1] <= self.side_late[0]):
            raise ValueError("peak windows must be disjoint and time-ordered")

    @property
    def peak_windows(self) -> tuple[tuple[float, float], ...]:
        return (self.side_early, self.central, self.side_late)


def _bin_slice(hist: CoincidenceHistogram, lo: float, hi: float) -> tuple[int, int]:
    """Index range [i, j) of bins lying fully inside [lo, hi]."""
    i = math.ceil((lo - hist.range_min_ns) / hist.bin_width_ns - 1e-9)
    j = math.floor((hi - hist.range_min_ns) / hist.bin_width_ns + 1e-9)
    i = max(i, 0)
    j = min(j, hist.n_bins)
    return i, max(j, i)


def locate_peaks(
    hist: CoincidenceHistogram,
    expected_spacing_ns: float,
    window_half_ns: float | None = None,
) -> PeakWindows:
    """Find the three coincidence peaks near 0 and +-expected_spacing_ns.

    Each peak is the largest bin within a quarter spacing of its expected
    position.  The shared window half-width defaults to 3 sigma of the
    central peak (second moment above baseline), capped at 0.45 spacing so
    the three windows stay disjoint even for wide peaks.  Background
    intervals are everything at least two window-widths away from every
    peak center.  A peak counts as significant when its maximum bin holds
    at least five times the mean background bin content (and at least five
    counts when the background is empty of counts).
    """
    spacing = float(expected_spacing_ns)
    if not spacing > 0.0:
        raise ValueError(f"expected spacing must be positive, got {expected_spacing_ns!r}")
    if hist.total == 0:
        raise PeaksNotFound("histogram is empty")
    if hist.range_min_ns > -1.25 * spacing or hist.range_max_ns < 1.25 * spacing:
        raise PeaksNotFound(
            f"histogram range ({hist.range_min_ns}, {hist.range_max_ns}) ns cannot "
            f"contain peaks at 0 and +-{spacing} ns with search margins"
        )

    centers = hist.centers_ns
    counts = hist.counts
    peak_centers: list[float] = []
    peak_heights: list[int] = []
    for target in (-spacing, 0.0, spacing):
        sel = np.abs(centers - target) <= 0.25 * spacing
        local = np.flatnonzero(sel)
        best = local[np.argmax(counts[local])]
        peak_centers.append(float(centers[best]))
        peak_heights.append(int(counts[best]))

    # The found maxima can sit a bin or two off the nominal positions, so
    # disjointness is judged against the actual gap between neighbours.
    gap = min(peak_centers[1] - peak_centers[0], peak_centers[2] - peak_centers[1])
    if gap <= hist.bin_width_ns:
        raise PeaksNotFound("located peak maxima are not separated")
    if window_half_ns is None:
        # Width of the central peak from its background-subtracted second
        # moment; the baseline is the median bin, which sits in the flat
        # background for any peaked histogram.
        c0 = peak_centers[1]
        sel = np.abs(centers - c0) <= 0.45 * spacing
        weights = counts[sel].astype(float) - float(np.median(counts))
        weights = np.clip(weights, 0.0, None)
        if weights.sum() > 0.0:
            mu = np.average(centers[sel], weights=weights)
            sigma = math.sqrt(float(np.average((centers[sel] - mu) ** 2, weights=weights)))
        else:
            sigma = hist.bin_width_ns
        half = min(3.0 * sigma, 0.45 * spacing, 0.49 * gap)
        half = max(half, hist.bin_width_ns)
    else:
        half = float(window_half_ns)
        if not 0.0 < half < 0.5 * spacing:
            raise ValueError("window half-width must lie in (0, spacing/2)")
        if half >= 0.5 * gap:
            raise ValueError(
                f"window half-width {half} ns overlaps neighbouring peaks "
                f"located {gap:.4f} ns apart"
            )

    windows = [
        (max(c - half, hist.range_min_ns), min(c + half, hist.range_max_ns))
        for c in peak_centers
    ]

    # Background: complement of +-(2 window widths) = +-(4 half) exclusion
    # zones around each peak center, clipped to the histogram range.
    exclusion = 4.0 * half
    cuts = sorted((c - exclusion, c + exclusion) for c in peak_centers)
    background: list[tuple[float, float]] = []
    cursor = hist.range_min_ns
    for lo, hi in cuts:
        if lo > cursor:
            background.append((cursor, min(lo, hist.range_max_ns)))
        cursor = max(cursor, hi)
    if cursor < hist.range_max_ns:
        background.append((cursor, hist.range_max_ns))
    background = [
        (lo, hi) for lo, hi in background if _bin_slice(hist, lo, hi)[1] > _bin_slice(hist, lo, hi)[0]
    ]
    if not background:
        raise PeaksNotFound(
            "no off-peak background bins remain to judge peak significance; "
            "widen the histogram range or narrow the windows"
        )

    n_bg_bins = 0
    bg_total = 0
    for lo, hi in background:
        i, j = _bin_slice(hist, lo, hi)
        n_bg_bins += j - i
        bg_total += int(counts[i:j].sum())
    bg_mean = bg_total / n_bg_bins
    threshold = max(5.0 * bg_mean, 5.0)
    weak = [
        f"peak near {target:+.3f} ns: max bin {height} < {threshold:.1f}"
        for target, height in zip((-spacing, 0.0, spacing), peak_heights)
        if height < threshold
    ]
    if weak:
        raise PeaksNotFound(
            "fewer than three significant peaks (background mean "
            f"{bg_mean:.2f}/bin): " + "; ".join(weak)
        )

    return PeakWindows(
        side_early=windows[0],
        central=windows[1],
        side_late=windows[2],
        background=tuple(background),
    )


def count_window(hist: CoincidenceHistogram, window: tuple[float, float]) -> int:
    """Total counts in bins lying fully inside the window."""
    lo, hi = float(window[0]), float(window[1])
    if lo > hi:
        raise ValueError(f"window ({lo!r}, {hi!r}) is reversed")
    if lo < hist.range_min_ns - _EDGE_TOL_NS or hi > hist.range_max_ns + _EDGE_TOL_NS:
        raise OutOfRange(
            f"window ({lo}, {hi}) ns exceeds histogram range "
            f"({hist.range_min_ns}, {hist.range_max_ns}) ns"
        )
    i, j = _bin_slice(hist, lo, hi)
    return int(hist.counts[i:j].sum())


def estimate_accidentals(hist: CoincidenceHistogram, windows: PeakWindows) -> float:
    """Expected accidental counts inside the central window.

    The off-peak background intervals give a mean count per ns, which is
    scaled by the central window's width.  Because all three peak windows
    share one width, the same number applies to the side windows.
    """
    n_bins = 0
    total = 0
    for lo, hi in windows.background:
        i, j = _bin_slice(hist, lo, hi)
        n_bins += j - i
        total += int(hist.counts[i:j].sum())
    if n_bins == 0:
        raise NoBackground("background intervals contain no complete bins")
    per_ns = total / (n_bins * hist.bin_width_ns)
    width = windows.central[1] - windows.central[0]
    return per_ns * width


# ---------------------------------------------------------------------------
# fringe fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FringePoint:
    """One phase setting of a fringe scan: counts collected over a duration.

    The count is real-valued so that exact synthetic fringes (fit oracles)
    can be represented; measured scans put integers here.
    """

    combined_phase_rad: float
    coincidences: float
    duration_s: float

    def __post_init__(self) -> None:
        if not self.coincidences >= 0.0:
            raise ValueError(f"coincidence count cannot be negative, got {self.coincidences!r}")
        if not self.duration_s > 0.0:
            raise ValueError(f"duration must be positive, got {self.duration_s!r}")


@dataclass(frozen=True)
class FringeFit:
    """Result of fitting R(phi) = A (1 + v cos(phi - phi0)) to a scan.

    Levels are rates in counts per second so that points of unequal
    duration combine consistently.  ``v_net`` comes from refitting after
    the accidental rate is subtracted from every point; uncertainties are
    square roots of the fit covariance diagonal.
    """

    v_raw: float
    v_net: float
    v_raw_err: float
    v_net_err: float
    phase_offset_rad: float
    mean_level_per_s: float
    accidental_level_per_s: float
    residual_rms: float

    def __post_init__(self) -> None:
        for name in ("v_raw", "v_net"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1]")
        if self.accidental_level_per_s < 0.0:
            raise ValueError("accidental level cannot be negative")


@dataclass(frozen=True)
class BellResult:
    """CHSH parameter implied by a fringe visibility."""

    s_value: float
    violation: bool


def _fit_sinusoid(
    phases: np.ndarray, rates: np.ndarray, label: str
) -> tuple[float, float, float, float]:
    """Least-squares A(1 + v cos(phi - phi0)); returns (a, v, phi0, v_err)."""
    a0 = float(np.mean(rates))
    if a0 <= 0.0:
        # An all-zero (or negative after subtraction) scan carries no fringe.
        return 0.0, 0.0, 0.0, 0.0
    # Seed the phase from the first Fourier component at the sweep frequency
    # and the visibility from its magnitude; this keeps the optimizer away
    # from the v = 0 saddle.
    z = np.sum((rates - a0) * np.exp(-1j * phases))
    phi0_seed = float(np.angle(z)) if abs(z) > 0.0 else 0.0
    v_seed = float(np.clip(2.0 * abs(z) / (rates.size * a0), 1e-6, 0.999))

    def model(phi, a, v, phi0):
        return a * (1.0 + v * np.cos(phi - phi0))

    try:
        popt, pcov = curve_fit(
            model,
            phases,
            rates,
            p0=[a0, v_seed, phi0_seed],
            bounds=([0.0, 0.0, -2.0 * math.pi], [np.inf, 1.0, 2.0 * math.pi]),
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
            maxfev=20000,
        )
    except RuntimeError as exc:
        raise NonConvergence(
            f"{label} fringe fit did not converge over {rates.size} points "
            f"(mean rate {a0:.4g}/s): {exc}"
        ) from exc
    a, v, phi0 = (float(x) for x in popt)
    var = float(pcov[1, 1]) if np.isfinite(pcov[1, 1]) else math.inf
    v_err = math.sqrt(max(var, 0.0))
    # Report the offset on the principal branch.
    phi0 = math.atan2(math.sin(phi0), math.cos(phi0))
    return a, v, phi0, v_err


def fit_fringe(points, accidental_rate_per_s: float = 0.0) -> FringeFit:
    """Fit raw and net visibilities to a phase scan.

    Needs at least five points spanning a full period.  The net fit
    subtracts the flat accidental rate from every point before refitting;
    with a zero accidental rate the two fits are identical by construction.
    """
    pts = list(points)
    if len(pts) < 5:
        raise InsufficientData(f"need at least 5 fringe points, got {len(pts)}")
    phases = np.array([p.combined_phase_rad for p in pts], dtype=float)
    span = float(phases.max() - phases.min())
    if span < 2.0 * math.pi - 1e-9:
        raise InsufficientData(
            f"phase span {span:.4f} rad is less than one full period"
        )
    acc = float(accidental_rate_per_s)
    if acc < 0.0:
        raise ValueError(f"accidental rate cannot be negative, got {accidental_rate_per_s!r}")
    rates = np.array([p.coincidences / p.duration_s for p in pts], dtype=float)

    a_raw, v_raw, phi0, v_raw_err = _fit_sinusoid(phases, rates, "raw")
    if acc > 0.0:
        _, v_net, _, v_net_err = _fit_sinusoid(phases, rates - acc, "net")
    else:
        v_net, v_net_err = v_raw, v_raw_err

    def model(phi):
        return a_raw * (1.0 + v_raw * np.cos(phi - phi0))

    residual = float(np.sqrt(np.mean((rates - model(phases)) ** 2)))
    return FringeFit(
        v_raw=v_raw,
        v_net=v_net,
        v_raw_err=v_raw_err,
        v_net_err=v_net_err,
        phase_offset_rad=phi0,
        mean_level_per_s=a_raw,
        accidental_level_per_s=acc,
        residual_rms=residual,
    )


# ---------------------------------------------------------------------------
# derived figures of merit
# ---------------------------------------------------------------------------


def fidelity_from_visibility(v_net: float) -> float:
    """Entanglement fidelity (1 + v) / 2 implied by a net visibility."""
    v = float(v_net)
    if not 0.0 <= v <= 1.0:
        raise VisibilityRangeError(f"visibility must lie in [0, 1], got {v_net!r}")
    return 0.5 * (1.0 + v)


def bell_parameter(v: float) -> BellResult:
    """CHSH S = 2 sqrt(2) v; a violation needs v above 1/sqrt(2)."""
    value = float(v)
    if not 0.0 <= value <= 1.0:
        raise VisibilityRangeError(f"visibility must lie in [0, 1], got {v!r}")
    s = 2.0 * math.sqrt(2.0) * value
    return BellResult(s_value=s, violation=value > BELL_THRESHOLD_VISIBILITY)


# ---------------------------------------------------------------------------
# output formats
# ---------------------------------------------------------------------------


def write_histogram_csv(hist: CoincidenceHistogram, path) -> None:
    lines = ["bin_center_ns,counts"]
    for center, count in zip(hist.centers_ns, hist.counts):
        lines.append(f"{center!r},{int(count)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fringe_csv(points, path) -> None:
    lines = ["phase_rad,coincidences,duration_s"]
    for p in points:
        lines.append(f"{p.combined_phase_rad!r},{p.coincidences},{p.duration_s!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def fit_to_dict(fit: FringeFit) -> dict:
    return {f.name: getattr(fit, f.name) for f in fields(fit)}


def format_fit_report(fit: FringeFit) -> str:
    """Flat key=value rendering of a fit, one field per line."""
    return "\n".join(f"{k}={v!r}" for k, v in fit_to_dict(fit).items()) + "\n"
