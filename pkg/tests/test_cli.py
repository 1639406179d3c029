import json
import os

import numpy as np
import pytest

from pvalmix import cli, formats


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def test_extract_fixture(tmp_path, fixture_path, epoch):
    out = tmp_path / "rec.csv"
    assert run("extract", fixture_path("abstracts.jsonl"), "-o", out) == 0
    records = formats.read_records(out.read_text(encoding="utf-8"))
    truth = load(fixture_path("abstracts_truth.json"))
    assert len(records) == len(truth)
    assert [r.raw_span for r in records] == [t["raw_span"] for t in truth]
    diag = load(f"{out}.diagnostics.json")
    assert diag["records"] == len(truth) and diag["unparseable_phrases"] == 1
    manifest = load(f"{out}.manifest.json")
    assert manifest["subcommand"] == "extract" and manifest["outputs"][0] == str(out)
    assert manifest["timestamp"] == "2023-11-14T22:13:20Z"
    first = [read_bytes(p) for p in (out, f"{out}.diagnostics.json", f"{out}.manifest.json")]
    assert run("extract", fixture_path("abstracts.jsonl"), "-o", out) == 0
    assert first == [read_bytes(p) for p in (out, f"{out}.diagnostics.json", f"{out}.manifest.json")]


def test_extract_empty(tmp_path):
    src = tmp_path / "empty.jsonl"
    src.write_text("")
    out = tmp_path / "rec.csv"
    assert run("extract", src, "-o", out) == 0
    assert out.read_text().splitlines() == ["# pvalmix records v1", ",".join(formats.RECORD_FIELDS)]
    diag = load(f"{out}.diagnostics.json")
    assert diag["documents"] == 0 and diag["records"] == 0 and diag["schema_version"] == 1


def test_simulate_round_trips_through_records(tmp_path):
    out = tmp_path / "sim.csv"
    assert run("simulate", "-o", out, "--n", 3000, "--pi0", 0.3, "--censor-frac", 0.2,
               "--round-frac", 0.2, "--seed", 4) == 0
    from pvalmix.model import MixtureParams
    from pvalmix.parser import classify
    from pvalmix.simulate import SimConfig, simulate_observations
    expected, _, _ = simulate_observations(SimConfig(3000, MixtureParams.make(0.3, 0.5, 25), 0.2, 0.2, 4))
    got = [classify(r) for r in formats.read_records(out.read_text())]
    assert got == expected


def test_estimate_recovers_simulated_pi0(tmp_path):
    sim = tmp_path / "sim.csv"
    assert run("simulate", "-o", sim, "--n", 5000, "--pi0", 0.14, "--seed", 0) == 0
    assert run("estimate", sim, "-o", tmp_path / "est.json") == 0
    est = load(tmp_path / "est.json")
    print("estimated pi0:", est["pi0"])
    assert abs(est["pi0"] - 0.14) <= 0.03


def test_estimate_deterministic_with_parallel_bootstrap(tmp_path, epoch):
    sim = tmp_path / "sim.csv"
    assert run("simulate", "-o", sim, "--n", 400, "--pi0", 0.3, "--journal", "A", "--seed", 1) == 0
    outs = []
    for jobs in (1, 2, 1):
        d = tmp_path / f"run{len(outs)}"
        d.mkdir()
        args = ["estimate", sim, "-o", d / "est.json", "--bootstrap", 6, "--seed", 5,
                "--max-iters", 300, "--emit-hist", d / "hist.csv", "--jobs", jobs]
        assert run(*args) == 0
        outs.append((read_bytes(d / "est.json"), read_bytes(d / "hist.csv")))
    assert outs[0] == outs[1] == outs[2]
    est = json.loads(outs[0][0])
    assert est["sd"] > 0 and est["bootstrap"]["B"] == 6
    hist = formats._rows(outs[0][1].decode())
    rows = list(hist)
    assert len(rows) == 20 and sum(int(r["exact"]) for r in rows) == 400


def test_estimate_uninformative(tmp_path, capsys):
    recs = tmp_path / "rec.csv"
    recs.write_text(formats.records_csv(
        formats.PValueRecord(f"d{i}", "J", 2000, "less", 0.05, "P<0.05") for i in range(50)))
    assert run("estimate", recs, "-o", tmp_path / "e.json") == 2
    assert "censored at the threshold" in capsys.readouterr().err
    assert not (tmp_path / "e.json").exists()


def test_failed_run_leaves_no_outputs(tmp_path):
    sim = tmp_path / "sim.csv"
    assert run("simulate", "-o", sim, "--n", 200, "--pi0", 0.3) == 0
    code = run("estimate", sim, "-o", tmp_path / "e.json", "--strata-out", tmp_path / "s.csv",
               "--emit-hist", tmp_path / "h.csv")
    assert code == 2
    leftover = sorted(p.name for p in tmp_path.iterdir())
    assert leftover == ["sim.csv", "sim.csv.manifest.json"]


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PVALMIX_SEED", "77")
    out = tmp_path / "sim.csv"
    assert run("simulate", "-o", out, "--n", 20, "--pi0", 0.5) == 0
    assert load(f"{out}.manifest.json")["seed"] == 77


def _panel_records(path, seed, journals=("A", "B", "C"), years=range(2000, 2004), n=200):
    rng = np.random.default_rng(seed)
    lines = []
    for j in journals:
        for y in years:
            p = rng.uniform(0, 0.05, n)
            lines.extend(formats.PValueRecord(f"{j}{y}-{i}", j, y, "equals", float(v), f"P={v!r}")
                         for i, v in enumerate(p) if v > 0)
    path.write_text(formats.records_csv(lines))


def test_estimate_by_stratum_and_trend(tmp_path):
    recs = tmp_path / "rec.csv"
    _panel_records(recs, 1)
    assert run("estimate", recs, "-o", tmp_path / "e.json", "--by", "journal,year",
               "--strata-out", tmp_path / "strata.csv", "--max-iters", 200) == 0
    est = load(tmp_path / "e.json")
    assert len(est["strata"]) == 12
    assert run("trend", tmp_path / "strata.csv", "-o", tmp_path / "t.json") == 0
    trend = load(tmp_path / "t.json")
    assert trend["n_groups"] == 3 and trend["n_obs"] == 12
    plot = list(formats._rows((tmp_path / "t.json.plot.csv").read_text()))
    assert len(plot) == 12


def test_trend_single_journal_is_ols(tmp_path):
    rng = np.random.default_rng(2)
    years = np.arange(2000, 2010)
    y = 0.2 + 0.004 * (years - 2000) + rng.normal(0, 0.01, len(years))
    strata = tmp_path / "strata.csv"
    strata.write_text(formats.strata_csv(
        formats.StratumEstimate("A", int(t), float(v), None, 100) for t, v in zip(years, y)))
    assert run("trend", strata, "-o", tmp_path / "t.json") == 0
    fit = load(tmp_path / "t.json")
    slope, intercept = np.polyfit(years.astype(float), y, 1)
    assert fit["slope"] == pytest.approx(slope, abs=1e-6)
    assert fit["intercept"] == pytest.approx(intercept, abs=1e-6)


def test_trend_known_slope_panel(tmp_path):
    rng = np.random.default_rng(3)
    rows = []
    for j in range(5):
        u = rng.normal(0, 0.02)
        for t in range(2000, 2011):
            rows.append(formats.StratumEstimate(f"J{j}", t, 0.15 + 0.005 * (t - 2000) + u + rng.normal(0, 0.02), None, 100))
    strata = tmp_path / "strata.csv"
    strata.write_text(formats.strata_csv(rows))
    assert run("trend", strata, "-o", tmp_path / "t.json") == 0
    fit = load(tmp_path / "t.json")
    assert abs(fit["slope"] - 0.005) <= 2 * fit["slope_se"]


def test_trend_missing_submissions(tmp_path, capsys):
    strata = tmp_path / "strata.csv"
    strata.write_text(formats.strata_csv(
        formats.StratumEstimate(j, y, 0.1, None, 50) for j in "AB" for y in (2001, 2002)))
    subs = tmp_path / "subs.csv"
    subs.write_text("journal,year,submissions\nA,2001,100\nA,2002,120\nB,2001,90\n")
    assert run("trend", strata, "-o", tmp_path / "t.json", "--predictor", "submissions",
               "--submissions", subs) == 2
    assert "(B, 2002)" in capsys.readouterr().err
    assert run("trend", strata, "-o", tmp_path / "t.json", "--predictor", "submissions") == 2


@pytest.mark.parametrize("prior,expected", [(0.01, 0.861), (1.0, 0.0), (0.5, 0.0588)])
def test_ppv(tmp_path, prior, expected):
    out = tmp_path / "ppv.json"
    assert run("ppv", "--prior", prior, "--alpha", 0.05, "--power", 0.8, "-o", out) == 0
    assert load(out)["swfdr"] == pytest.approx(expected, abs=1e-3 if prior == 0.01 else 1e-4)
    assert os.path.exists(f"{out}.manifest.json")


def test_ppv_stdout(capsys):
    assert run("ppv", "--prior", 0.5) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "ppv"


@pytest.mark.parametrize("argv", [[], ["bogus"], ["simulate", "-o", "x.csv"], ["estimate"],
                                  ["estimate", "x.csv", "-o", "y.json", "--by", "month"],
                                  ["simulate", "-o", "x.csv", "--n", "5", "--pi0", "0.5", "--seed", "-3"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 1


def test_invalid_values_exit_1(tmp_path):
    assert run("simulate", "-o", tmp_path / "x.csv", "--n", 10, "--pi0", 0.5, "--censor-frac", 0.9,
               "--round-frac", 0.9) == 1
    assert run("ppv", "--prior", 2.0) == 1


def test_missing_input_exit_2(tmp_path):
    assert run("estimate", tmp_path / "nope.csv", "-o", tmp_path / "e.json") == 2
