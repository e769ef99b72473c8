"""Tests for histogramming, peak windows, accidentals, and fringe fitting."""

import dataclasses
import math

import numpy as np
import pytest

from photonlink import analysis as an
from photonlink import chain as ch
from photonlink import events as ev


DETECTOR_CODE = {name: i for i, name in enumerate(ev.DETECTORS)}


def hand_stream(clicks, duration_ns=1e6, seeds=(1,)):
    """Build a stream from (time_ns, detector) tuples, photons only."""
    clicks = sorted(clicks)
    times = np.array([t for t, _ in clicks], dtype=float)
    dets = np.array([DETECTOR_CODE[d] for _, d in clicks], dtype=np.uint8)
    origs = np.zeros(len(clicks), dtype=np.uint8)
    return ev.EventStream(times, dets, origs, duration_ns=duration_ns, seeds=seeds)


def synthetic_three_peak(
    side=10_000, central=20_000, background_per_bin=5, sigma_ns=0.1414, spacing=0.66713
):
    """Histogram with Gaussian peaks at 0 and +-spacing over a flat floor."""
    bw = 0.05
    edges = np.arange(-60, 61) * bw
    centers = 0.5 * (edges[:-1] + edges[1:])
    density = np.zeros_like(centers)
    for area, mu in ((side, -spacing), (central, 0.0), (side, spacing)):
        density += area * np.exp(-0.5 * ((centers - mu) / sigma_ns) ** 2) * (
            bw / (sigma_ns * math.sqrt(2 * math.pi))
        )
    counts = np.round(density).astype(np.int64) + background_per_bin
    return an.CoincidenceHistogram(
        bin_width_ns=bw,
        range_min_ns=-3.0,
        range_max_ns=3.0,
        counts=counts,
        start_detector="bob",
        stop_detector="alice",
    )


# ---------------------------------------------------------------------------
# histogram construction
# ---------------------------------------------------------------------------


def test_single_pair_lands_in_correct_bin():
    stream = hand_stream([(10.0, "bob"), (10.5, "alice")])
    hist = an.build_histogram(stream)
    assert hist.total == 1
    index = int(np.flatnonzero(hist.counts)[0])
    lo, hi = hist.edges_ns[index], hist.edges_ns[index + 1]
    assert lo <= 0.5 < hi


def test_empty_stream_gives_zero_histogram():
    stream = hand_stream([])
    hist = an.build_histogram(stream)
    assert hist.total == 0
    assert hist.n_bins == 120


def test_first_stop_pairing_takes_earliest_in_range():
    # Two stops follow one start: only the earlier one within range counts.
    stream = hand_stream([(100.0, "bob"), (100.2, "alice"), (100.4, "alice")])
    hist = an.build_histogram(stream)
    assert hist.total == 1
    center = float(hist.centers_ns[np.flatnonzero(hist.counts)[0]])
    assert center == pytest.approx(0.225, abs=1e-9)
    # A stop before the range minimum is skipped, not paired.
    stream2 = hand_stream([(100.0, "bob"), (90.0, "alice"), (100.2, "alice")])
    hist2 = an.build_histogram(stream2)
    assert hist2.total == 1
    center2 = float(hist2.centers_ns[np.flatnonzero(hist2.counts)[0]])
    assert center2 == pytest.approx(0.225, abs=1e-9)


def test_stop_beyond_range_records_nothing():
    stream = hand_stream([(100.0, "bob"), (104.0, "alice")])
    assert an.build_histogram(stream).total == 0


def test_histogram_grid_must_align_with_bin_width():
    stream = hand_stream([])
    with pytest.raises(ValueError):
        an.build_histogram(stream, range_ns=(-3.01, 3.0))
    with pytest.raises(ValueError):
        an.build_histogram(stream, bin_width_ns=0.0)
    with pytest.raises(ValueError):
        an.build_histogram(stream, start_detector="bob", stop_detector="bob")


def test_histogram_addition_matches_merge_for_disjoint_streams():
    # Streams occupying disjoint time spans cannot steal each other's
    # first stop, so the histogram of the merge equals the bin-wise sum.
    rng = np.random.default_rng(9)

    def shard(offset_ns, seed):
        clicks = []
        for k in range(200):
            t = offset_ns + 1000.0 * k + rng.uniform(0, 500)
            clicks.append((t, "bob"))
            clicks.append((t + rng.uniform(-2.5, 2.5), "alice"))
        return hand_stream(clicks, duration_ns=1e9, seeds=(seed,))

    a = shard(0.0, 1)
    b = shard(5e5, 2)
    merged = ev.merge(a, b)
    assert an.build_histogram(merged) == an.build_histogram(a) + an.build_histogram(b)


def test_histogram_addition_rejects_different_grids():
    stream = hand_stream([])
    h1 = an.build_histogram(stream)
    h2 = an.build_histogram(stream, bin_width_ns=0.1)
    with pytest.raises(ValueError):
        h1 + h2


# ---------------------------------------------------------------------------
# peak location and windows
# ---------------------------------------------------------------------------


def test_locate_peaks_on_synthetic_triple():
    hist = synthetic_three_peak()
    windows = an.locate_peaks(hist, 0.66713)
    for (lo, hi), target in zip(windows.peak_windows, (-0.66713, 0.0, 0.66713)):
        assert 0.5 * (lo + hi) == pytest.approx(target, abs=hist.bin_width_ns)
    # Wide jittered peaks hit the disjointness cap of 0.45 spacing.
    half = 0.5 * (windows.central[1] - windows.central[0])
    assert half == pytest.approx(0.45 * 0.66713, abs=0.02)
    assert windows.side_early[1] <= windows.central[0]
    assert windows.central[1] <= windows.side_late[0]
    assert len(windows.background) == 2


def test_locate_peaks_flat_histogram_fails():
    hist = an.CoincidenceHistogram(
        bin_width_ns=0.05,
        range_min_ns=-3.0,
        range_max_ns=3.0,
        counts=np.full(120, 7, dtype=np.int64),
        start_detector="bob",
        stop_detector="alice",
    )
    with pytest.raises(an.PeaksNotFound):
        an.locate_peaks(hist, 0.66713)


def test_locate_peaks_empty_histogram_fails():
    hist = an.build_histogram(hand_stream([]))
    with pytest.raises(an.PeaksNotFound):
        an.locate_peaks(hist, 0.66713)


def test_locate_peaks_needs_range_covering_sides():
    hist = an.build_histogram(hand_stream([(10.0, "bob"), (10.1, "alice")]), range_ns=(-0.5, 0.5))
    with pytest.raises(an.PeaksNotFound):
        an.locate_peaks(hist, 0.66713)


def test_locate_peaks_explicit_half_width():
    hist = synthetic_three_peak()
    windows = an.locate_peaks(hist, 0.66713, window_half_ns=0.2)
    assert windows.central[1] - windows.central[0] == pytest.approx(0.4)
    with pytest.raises(ValueError):
        an.locate_peaks(hist, 0.66713, window_half_ns=0.4)  # >= spacing/2


def test_phase_averaged_simulation_shows_one_two_one_areas():
    chain_cfg = ch.ChainConfig(
        source=ch.SourceParams(pair_rate_per_s=200_000.0),
        alice_interferometer=ch.InterferometerParams(transmission=1.0),
        bob_interferometer=ch.InterferometerParams(transmission=1.0),
        alice_detector=ch.DetectorParams(quantum_efficiency=1.0, dark_prob_per_ns=0.0),
        bob_detector=ch.DetectorParams(quantum_efficiency=1.0, dark_prob_per_ns=0.0),
        jitter_ns=0.1,
    )
    cfg = ev.SimConfig(chain=chain_cfg, visibility=1.0, duration_s=1.0, seed=77, phase_averaged=True)
    hist = an.build_histogram(ev.simulate(cfg))
    windows = an.locate_peaks(hist, chain_cfg.bob_interferometer.delay_ns())
    central = an.count_window(hist, windows.central)
    early = an.count_window(hist, windows.side_early)
    late = an.count_window(hist, windows.side_late)
    assert central >= 10_000
    assert central / early == pytest.approx(2.0, rel=0.05)
    assert central / late == pytest.approx(2.0, rel=0.05)


# ---------------------------------------------------------------------------
# window counting and accidentals
# ---------------------------------------------------------------------------


def test_count_window_whole_range_and_empty_window():
    hist = synthetic_three_peak()
    assert an.count_window(hist, (-3.0, 3.0)) == hist.total
    assert an.count_window(hist, (0.1, 0.1)) == 0


def test_count_window_only_full_bins():
    hist = synthetic_three_peak(background_per_bin=10)
    # A window narrower than one bin, straddling no full bin, counts zero.
    assert an.count_window(hist, (0.02, 0.08)) == 0
    # Shifting to cover exactly one full bin picks up that bin alone.
    assert an.count_window(hist, (2.50, 2.55)) == 10


def test_count_window_out_of_range():
    hist = synthetic_three_peak()
    with pytest.raises(an.OutOfRange):
        an.count_window(hist, (-3.5, 0.0))
    with pytest.raises(an.OutOfRange):
        an.count_window(hist, (0.0, 3.2))


def test_estimate_accidentals_uniform_floor():
    counts = np.full(120, 5, dtype=np.int64)
    hist = an.CoincidenceHistogram(
        bin_width_ns=0.05,
        range_min_ns=-3.0,
        range_max_ns=3.0,
        counts=counts,
        start_detector="bob",
        stop_detector="alice",
    )
    windows = an.PeakWindows(
        side_early=(-0.95, -0.45),
        central=(-0.25, 0.25),  # ten bins wide
        side_late=(0.45, 0.95),
        background=((-3.0, -2.0), (2.0, 3.0)),
    )
    assert an.estimate_accidentals(hist, windows) == pytest.approx(50.0)


def test_estimate_accidentals_zero_dark_run_is_zero():
    chain_cfg = ch.ChainConfig(
        source=ch.SourceParams(pair_rate_per_s=100_000.0),
        alice_interferometer=ch.InterferometerParams(transmission=1.0),
        bob_interferometer=ch.InterferometerParams(transmission=1.0),
        alice_detector=ch.DetectorParams(quantum_efficiency=1.0, dark_prob_per_ns=0.0),
        bob_detector=ch.DetectorParams(quantum_efficiency=1.0, dark_prob_per_ns=0.0),
        jitter_ns=0.1,
    )
    cfg = ev.SimConfig(chain=chain_cfg, visibility=1.0, duration_s=0.5, seed=78, phase_averaged=True)
    hist = an.build_histogram(ev.simulate(cfg))
    windows = an.locate_peaks(hist, chain_cfg.bob_interferometer.delay_ns())
    # Without darks the only background is foreign-pair pile-up, a fraction
    # of a permille of the central peak at this rate.
    central = an.count_window(hist, windows.central)
    assert an.estimate_accidentals(hist, windows) < 1e-3 * central


def test_estimate_accidentals_requires_background_bins():
    hist = synthetic_three_peak()
    windows = an.PeakWindows(
        side_early=(-0.95, -0.45),
        central=(-0.25, 0.25),
        side_late=(0.45, 0.95),
        background=((-2.999, -2.998),),  # narrower than one bin
    )
    with pytest.raises(an.NoBackground):
        an.estimate_accidentals(hist, windows)


# ---------------------------------------------------------------------------
# fringe fitting
# ---------------------------------------------------------------------------


def synthetic_fringe(v, amplitude=100.0, phi0=0.0, n=21, accidental=0.0):
    phis = np.linspace(0.0, 2.0 * math.pi, n)
    return [
        an.FringePoint(
            combined_phase_rad=float(p),
            coincidences=float(amplitude * (1.0 + v * math.cos(p - phi0)) + accidental),
            duration_s=1.0,
        )
        for p in phis
    ]


def test_fit_oracle_noiseless_exact():
    for v in (0.0, 0.25, 0.5, 0.87, 0.97, 1.0):
        fit = an.fit_fringe(synthetic_fringe(v, phi0=0.7))
        assert abs(fit.v_raw - v) < 1e-9
        assert abs(fit.v_net - v) < 1e-9
        if v > 0.0:
            assert abs(fit.phase_offset_rad - 0.7) < 1e-9
        assert fit.residual_rms < 1e-7


def test_fit_with_flat_accidental_floor():
    # Net fringe 901(1 + 0.97 cos) over a floor of 99: raw visibility is
    # diluted to 0.97 * 901/1000 while the net fit recovers 0.97 exactly.
    points = synthetic_fringe(0.97, amplitude=901.0, accidental=99.0)
    fit = an.fit_fringe(points, accidental_rate_per_s=99.0)
    assert fit.v_raw == pytest.approx(0.87397, abs=1e-6)
    assert fit.v_net == pytest.approx(0.97, abs=1e-9)
    assert fit.v_net >= fit.v_raw
    assert fit.mean_level_per_s == pytest.approx(1000.0, rel=1e-9)
    assert fit.accidental_level_per_s == 99.0


def test_fit_zero_accidentals_net_equals_raw():
    fit = an.fit_fringe(synthetic_fringe(0.9))
    assert fit.v_net == fit.v_raw
    assert fit.v_net_err == fit.v_raw_err


def test_fit_rejects_insufficient_data():
    with pytest.raises(an.InsufficientData):
        an.fit_fringe(synthetic_fringe(0.9, n=4))
    phis = np.linspace(0.0, math.pi, 11)  # half a period
    points = [
        an.FringePoint(float(p), 100.0 * (1 + 0.9 * math.cos(p)), 1.0) for p in phis
    ]
    with pytest.raises(an.InsufficientData):
        an.fit_fringe(points)


def test_fit_rejects_negative_accidentals():
    with pytest.raises(ValueError):
        an.fit_fringe(synthetic_fringe(0.9), accidental_rate_per_s=-1.0)


def test_fit_poisson_noise_recovers_visibility():
    rng = np.random.default_rng(5)
    truth = 0.9
    phis = np.linspace(0.0, 2.0 * math.pi, 21)
    points = [
        an.FringePoint(
            float(p),
            int(rng.poisson(2000.0 * (1.0 + truth * math.cos(p)))),
            1.0,
        )
        for p in phis
    ]
    fit = an.fit_fringe(points)
    assert fit.v_raw == pytest.approx(truth, abs=5.0 * max(fit.v_raw_err, 1e-3))


def test_fringe_point_validation():
    with pytest.raises(ValueError):
        an.FringePoint(0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        an.FringePoint(0.0, 10.0, 0.0)


# ---------------------------------------------------------------------------
# figures of merit
# ---------------------------------------------------------------------------


def test_fidelity_from_visibility():
    assert an.fidelity_from_visibility(1.0) == 1.0
    assert an.fidelity_from_visibility(0.970) == pytest.approx(0.985)
    assert an.fidelity_from_visibility(0.962) == pytest.approx(0.981)
    with pytest.raises(ValueError):
        an.fidelity_from_visibility(1.2)
    with pytest.raises(ValueError):
        an.fidelity_from_visibility(-0.1)


def test_bell_parameter_values_and_threshold():
    top = an.bell_parameter(1.0)
    assert top.s_value == pytest.approx(2.0 * math.sqrt(2.0))
    assert top.violation
    at = an.bell_parameter(an.BELL_THRESHOLD_VISIBILITY)
    assert at.s_value == pytest.approx(2.0, abs=1e-12)
    assert not at.violation  # no violation at equality
    assert not an.bell_parameter(0.70710).violation
    assert an.bell_parameter(0.70712).violation
    paper_like = an.bell_parameter(0.970)
    assert paper_like.s_value == pytest.approx(2.744, abs=1e-3)
    assert paper_like.violation
    with pytest.raises(ValueError):
        an.bell_parameter(1.01)


def test_monotone_functions():
    grid = np.linspace(0.0, 1.0, 11)
    fids = [an.fidelity_from_visibility(v) for v in grid]
    svals = [an.bell_parameter(v).s_value for v in grid]
    assert all(b > a for a, b in zip(fids, fids[1:]))
    assert all(b > a for a, b in zip(svals, svals[1:]))


# ---------------------------------------------------------------------------
# end-to-end degradation behaviour
# ---------------------------------------------------------------------------


def run_small_sweep(alice_dark_per_ns, seed0):
    """Nine-phase mini sweep returning the FringeFit of the pipeline."""
    chain_cfg = ch.ChainConfig(
        source=ch.SourceParams(pair_rate_per_s=50_000.0),
        alice_interferometer=ch.InterferometerParams(transmission=1.0),
        bob_interferometer=ch.InterferometerParams(transmission=1.0),
        alice_detector=ch.DetectorParams(
            quantum_efficiency=1.0,
            dark_prob_per_ns=alice_dark_per_ns,
            role="gated",
            gate_width_ns=8.0,
        ),
        bob_detector=ch.DetectorParams(quantum_efficiency=1.0, dark_prob_per_ns=0.0),
        jitter_ns=0.1,
    )
    phis = np.linspace(0.0, 2.0 * math.pi, 9)
    duration = 0.8
    total = None
    per_point = []
    for i, phi in enumerate(phis):
        cfg = ev.SimConfig(
            chain=dataclasses.replace(
                chain_cfg,
                alice_interferometer=dataclasses.replace(
                    chain_cfg.alice_interferometer, phase_rad=float(phi)
                ),
            ),
            visibility=0.97,
            duration_s=duration,
            seed=seed0 + i,
        )
        hist = an.build_histogram(ev.simulate(cfg))
        per_point.append(hist)
        total = hist if total is None else total + hist
    windows = an.locate_peaks(total, chain_cfg.bob_interferometer.delay_ns())
    acc_rate = an.estimate_accidentals(total, windows) / (len(phis) * duration)
    points = [
        an.FringePoint(float(phi), an.count_window(h, windows.central), duration)
        for phi, h in zip(phis, per_point)
    ]
    return an.fit_fringe(points, accidental_rate_per_s=acc_rate)


def test_dark_counts_degrade_raw_but_not_net_visibility():
    fits = [run_small_sweep(d, seed0=900 + int(d * 1e6)) for d in (0.0, 0.01, 0.04)]
    raws = [f.v_raw for f in fits]
    assert raws[0] > raws[1] > raws[2]
    assert raws[0] - raws[2] > 0.05
    for fit in fits:
        assert fit.v_net == pytest.approx(0.97, abs=0.03)
