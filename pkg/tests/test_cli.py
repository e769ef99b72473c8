"""CLI behaviour: exit codes, output files, determinism, env overrides.

Commands run in-process through cli.main(argv) with small configurations,
so the suite stays fast; the heavy preset sweeps belong to the acceptance
tests.
"""

import json

import pytest

from photonlink import cli


def fast_chain(pair_rate=20_000.0, visibility=0.95, phase_averaged=False, darks=False):
    """Small, clean config document for quick CLI runs."""
    return {
        "visibility": visibility,
        "duration_s": 0.5,
        "seed": 404,
        "phase_averaged": phase_averaged,
        "chain": {
            "source": {"pair_rate_per_s": pair_rate},
            "alice_interferometer": {"transmission": 1.0},
            "bob_interferometer": {"transmission": 1.0},
            "alice_detector": {
                "quantum_efficiency": 1.0,
                "dark_prob_per_ns": 1e-5 if darks else 0.0,
            },
            "bob_detector": {
                "quantum_efficiency": 1.0,
                "dark_prob_per_ns": 3e-5 if darks else 0.0,
            },
            "jitter_ns": 0.1,
        },
    }


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for var in ("PHOTONLINK_PRESET", "PHOTONLINK_CONFIG", "PHOTONLINK_SEED",
                "PHOTONLINK_DURATION", "PHOTONLINK_OUT"):
        monkeypatch.delenv(var, raising=False)


# ---------------------------------------------------------------------------
# budget
# ---------------------------------------------------------------------------


def test_budget_baseline_preset_passes(tmp_path, capsys):
    code = cli.main(["budget", "--preset", "fig2-baseline", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("PASS") == 3
    doc = json.loads((tmp_path / "budget.json").read_text())
    assert doc["transfer_probability"] is None
    assert doc["franson_passed"] is True


def test_budget_transfer_preset_reports_conversion(tmp_path):
    code = cli.main(["budget", "--preset", "fig3-transfer", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "budget.json").read_text())
    assert doc["transfer_probability"] == pytest.approx(0.0486, abs=1e-4)
    assert doc["reservoir"]["ok"] is True


def test_budget_short_pump_coherence_fails_validity(tmp_path, capsys):
    doc = fast_chain()
    doc["chain"]["source"]["pump_coherence_length_m"] = 1.0
    code = cli.main(["budget", "--config", write_config(tmp_path, doc)])
    assert code == 3
    assert "FAIL" in capsys.readouterr().out


def test_budget_requires_some_configuration(capsys):
    assert cli.main(["budget"]) == 2
    assert "config" in capsys.readouterr().err


def test_budget_rejects_config_plus_preset(tmp_path):
    path = write_config(tmp_path, fast_chain())
    assert cli.main(["budget", "--config", path, "--preset", "fig2-baseline"]) == 2


def test_budget_unknown_preset(capsys):
    assert cli.main(["budget", "--preset", "bogus"]) == 2
    assert "available" in capsys.readouterr().err


def test_budget_preset_from_environment(monkeypatch):
    monkeypatch.setenv("PHOTONLINK_PRESET", "fig2-baseline")
    assert cli.main(["budget"]) == 0


def test_bad_seed_environment_variable(monkeypatch, capsys):
    monkeypatch.setenv("PHOTONLINK_SEED", "not-a-number")
    assert cli.main(["budget", "--preset", "fig2-baseline"]) == 2
    assert "PHOTONLINK_SEED" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_writes_fringe_and_fit(tmp_path, capsys):
    cfg = write_config(tmp_path, fast_chain())
    out = tmp_path / "run"
    code = cli.main(["sweep", "--config", cfg, "--phases", "9", "--out", str(out)])
    assert code == 0
    lines = (out / "fringe.csv").read_text().splitlines()
    assert lines[0] == "phase_rad,coincidences,duration_s"
    assert len(lines) == 10
    doc = json.loads((out / "fit.json").read_text())
    assert doc["fit"]["v_net"] == pytest.approx(0.95, abs=0.05)
    assert doc["n_phases"] == 9
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["outputs"]) == ["fit.json", "fringe.csv", "manifest.json"]
    assert manifest["seed"] == 404
    assert "v_net" in capsys.readouterr().out


def test_sweep_is_reproducible_byte_for_byte(tmp_path):
    cfg = write_config(tmp_path, fast_chain())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", cfg, "--phases", "7", "--out", str(out1)]) == 0
    assert cli.main(["sweep", "--config", cfg, "--phases", "7", "--out", str(out2)]) == 0
    for name in ("fringe.csv", "fit.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("wall_clock_s")
    m2.pop("wall_clock_s")
    assert m1 == m2


def test_sweep_seed_flag_changes_outputs(tmp_path):
    cfg = write_config(tmp_path, fast_chain())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.main(["sweep", "--config", cfg, "--phases", "7", "--out", str(out1)])
    cli.main(["sweep", "--config", cfg, "--phases", "7", "--seed", "9", "--out", str(out2)])
    assert (out1 / "fringe.csv").read_bytes() != (out2 / "fringe.csv").read_bytes()
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 9


def test_sweep_flat_fringe_for_zero_visibility(tmp_path):
    cfg = write_config(tmp_path, fast_chain(visibility=0.0))
    out = tmp_path / "run"
    assert cli.main(["sweep", "--config", cfg, "--phases", "9", "--out", str(out)]) == 0
    doc = json.loads((out / "fit.json").read_text())
    assert doc["fit"]["v_raw"] < 0.05


def test_sweep_needs_five_phase_points(tmp_path):
    cfg = write_config(tmp_path, fast_chain())
    assert cli.main(["sweep", "--config", cfg, "--phases", "4"]) == 2


# ---------------------------------------------------------------------------
# histogram
# ---------------------------------------------------------------------------


def test_histogram_phase_averaged_ratio(tmp_path, capsys):
    doc = fast_chain(pair_rate=200_000.0, visibility=1.0, phase_averaged=True)
    doc["duration_s"] = 1.0
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "run"
    code = cli.main(["histogram", "--config", cfg, "--out", str(out)])
    assert code == 0
    peaks = json.loads((out / "peaks.json").read_text())
    assert peaks["area_ratio_central_to_side"] == pytest.approx(2.0, rel=0.05)
    header, *rows = (out / "histogram.csv").read_text().splitlines()
    assert header == "bin_center_ns,counts"
    assert len(rows) == 120


def test_histogram_pure_darks_exits_with_physics_code(tmp_path, capsys):
    doc = fast_chain(darks=True)
    doc["chain"]["source"]["pair_rate_per_s"] = 0.0
    doc["duration_s"] = 0.05
    cfg = write_config(tmp_path, doc)
    code = cli.main(["histogram", "--config", cfg])
    assert code == 3
    assert "physics" in capsys.readouterr().err


def test_histogram_duration_flag_is_applied(tmp_path):
    cfg = write_config(tmp_path, fast_chain(pair_rate=200_000.0, phase_averaged=True))
    out = tmp_path / "run"
    code = cli.main(
        ["histogram", "--config", cfg, "--duration", "0.25", "--out", str(out)]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["duration_s"] == 0.25


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def run_small_pipeline(tmp_path):
    cfg = write_config(tmp_path, fast_chain())
    out = tmp_path / "run"
    assert cli.main(["sweep", "--config", cfg, "--phases", "9", "--out", str(out)]) == 0
    return out


def test_report_passes_on_consistent_outputs(tmp_path, capsys):
    out = run_small_pipeline(tmp_path)
    code = cli.main(["report", str(out / "fit.json"), "--out", str(out)])
    output = capsys.readouterr().out
    assert code == 0
    assert "PASS" in output and "FAIL" not in output
    doc = json.loads((out / "report.json").read_text())
    assert doc["passed"] is True


def test_report_fails_on_doctored_visibility(tmp_path, capsys):
    out = run_small_pipeline(tmp_path)
    doc = json.loads((out / "fit.json").read_text())
    doc["fit"]["v_net"] = 0.5
    doc["fidelity"] = 0.75
    (out / "fit.json").write_text(json.dumps(doc))
    code = cli.main(["report", str(out / "fit.json")])
    assert code == 4
    assert "FAIL" in capsys.readouterr().out


def test_report_reads_budget_and_peaks_documents(tmp_path):
    budget_dir = tmp_path / "budget"
    assert cli.main(["budget", "--preset", "fig3-transfer", "--out", str(budget_dir)]) == 0
    hist_doc = fast_chain(pair_rate=200_000.0, visibility=1.0, phase_averaged=True)
    hist_doc["duration_s"] = 1.0
    hist_dir = tmp_path / "hist"
    cfg = write_config(tmp_path, hist_doc)
    assert cli.main(["histogram", "--config", cfg, "--out", str(hist_dir)]) == 0
    code = cli.main(
        ["report", str(budget_dir / "budget.json"), str(hist_dir / "peaks.json")]
    )
    assert code == 0


def test_report_missing_input(capsys):
    assert cli.main(["report", "/nonexistent/fit.json"]) == 2
    assert "does not exist" in capsys.readouterr().err


def test_report_unrecognized_document(tmp_path):
    path = tmp_path / "odd.json"
    path.write_text('{"x": 1}')
    assert cli.main(["report", str(path)]) == 2


def test_report_requires_inputs():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["report"])
    assert excinfo.value.code == 2
