"""Configuration handling and the file-backed pipeline stages."""

import json
from pathlib import Path

import numpy as np
import pytest

from redflow import cli
from redflow.cli import RunConfig, config_from_dict, load_config, main
from redflow.errors import ConfigError


TINY = {
    "config_version": 1,
    "seed": 5,
    "scenario": {"n_subjects": 2, "n_trials": 4, "n_samples": 600, "n_channels": 6},
    "lag_window_ms": [0, 125],
    "lambda_grid": [1.0, 100.0],
    "embed": {"source_history": 4, "target_history": 4, "delay": 1},
}


def write_config(tmp_path, doc=TINY, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_nonmeta_lines(path):
    return [l for l in Path(path).read_text().splitlines() if not l.startswith("# meta ")]


def strip_timestamp(path):
    """File content with the generated_at value blanked, for byte comparisons."""
    text = Path(path).read_text()
    out = []
    for line in text.splitlines():
        if line.startswith("# meta "):
            doc = json.loads(line[len("# meta "):])
            doc.pop("generated_at", None)
            line = "# meta " + json.dumps(doc, sort_keys=True)
        out.append(line)
    return "\n".join(out)


class TestConfig:
    def test_defaults_are_valid(self):
        cfg = RunConfig()
        assert cfg.lag_window().tau_max == 16
        assert cfg.channel_subset == ("FT7", "T7", "TP7", "CP5", "FC5", "C5")
        assert len(cfg.lambda_grid) == 13

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"nope": 1})

    def test_bad_version(self):
        with pytest.raises(ConfigError):
            config_from_dict({"config_version": 7})

    def test_bad_fit_mode(self):
        with pytest.raises(ConfigError):
            config_from_dict({"fit_on": "splines"})

    def test_surrogate_hook_is_disabled(self):
        with pytest.raises(ConfigError):
            config_from_dict({"time_shift_surrogates": True})

    def test_hash_depends_on_values(self):
        a = config_from_dict(TINY)
        b = config_from_dict({**TINY, "seed": 6})
        assert a.config_hash() != b.config_hash()
        assert a.config_hash() == config_from_dict(dict(TINY)).config_hash()

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path)
        cfg = load_config(path, seed_override=99)
        assert cfg.seed == 99

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(path)


@pytest.fixture(scope="module")
def run_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg_path = write_config(root)
    data, out = root / "data", root / "out"
    for command in ("simulate", "train", "rates", "report"):
        code = main([command, "--config", str(cfg_path), "--data", str(data), "--out", str(out)])
        assert code == 0, command
    return root, cfg_path, data, out


class TestPipeline:
    def test_dataset_layout(self, run_dirs):
        _, _, data, _ = run_dirs
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["subjects"] == ["s01", "s02"]
        assert manifest["rng"] == "philox4x64-10"
        files = sorted(p.name for p in (data / "s01").iterdir())
        assert "t001_eeg.csv" in files and "t001_att.csv" in files and "t001_dst.csv" in files
        assert "t001_eeg.json" in files

    def test_decoders_written(self, run_dirs):
        _, _, _, out = run_dirs
        for subject in ("s01", "s02"):
            for cond in ("attended", "distractor"):
                doc = json.loads((out / "decoders" / f"{subject}_{cond}.json").read_text())
                assert doc["format_version"] == 1
                assert doc["lambda"] in (1.0, 100.0)
                assert len(doc["meta"]["cv_mean_rho"]) == 2

    def test_rates_records(self, run_dirs):
        _, _, _, out = run_dirs
        lines = read_nonmeta_lines(out / "rates.ndjson")
        assert len(lines) == 2 * 4 * 2  # subjects x trials x conditions
        for line in lines:
            rec = json.loads(line)
            assert rec["r_min"] == min(rec["r_s_to_shat"], rec["r_e_to_shat"], rec["r_s_to_e"])
            assert rec["r_min"] >= 0.0

    def test_rd_points_per_kind(self, run_dirs):
        _, _, _, out = run_dirs
        lines = read_nonmeta_lines(out / "rd_points.ndjson")
        assert len(lines) == 2 * 4 * 2 * 4  # ... x rate kinds
        kinds = {json.loads(l)["rate_kind"] for l in lines}
        assert kinds == {"S_to_Shat", "E_to_Shat", "S_to_E", "Rmin"}

    def test_fits_has_eight_cells(self, run_dirs):
        _, _, _, out = run_dirs
        doc = json.loads((out / "fits.json").read_text())
        fits = doc["fits"]
        assert set(fits) == {"S_to_Shat", "E_to_Shat", "S_to_E", "Rmin"}
        cells = [fits[k][c] for k in fits for c in ("attended", "distractor")]
        assert len(cells) == 8
        for cell in cells:
            assert ("slope" in cell) or ("error" in cell)

    def test_config_hash_embedded_everywhere(self, run_dirs):
        root, cfg_path, data, out = run_dirs
        expected = load_config(cfg_path).config_hash()
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["config_hash"] == expected
        sidecar = json.loads((data / "s01" / "t001_eeg.json").read_text())
        assert sidecar["config_hash"] == expected
        for cond in ("attended", "distractor"):
            dec = json.loads((out / "decoders" / f"s01_{cond}.json").read_text())
            assert dec["meta"]["config_hash"] == expected
        for name in ("rates.ndjson", "rd_points.ndjson", "pdf.csv", "rd_curve.csv"):
            meta = json.loads(
                (out / name).read_text().splitlines()[0][len("# meta "):]
            )
            assert meta["config_hash"] == expected
        assert json.loads((out / "fits.json").read_text())["meta"]["config_hash"] == expected

    def test_report_refuses_other_config(self, run_dirs, tmp_path):
        root, cfg_path, data, out = run_dirs
        other = write_config(tmp_path, doc={**TINY, "seed": 123}, name="other.json")
        code = main(["report", "--config", str(other), "--data", str(data), "--out", str(out)])
        assert code == 3

    def test_stage_idempotent(self, run_dirs):
        root, cfg_path, data, out = run_dirs
        before = strip_timestamp(out / "rates.ndjson")
        code = main(["rates", "--config", str(cfg_path), "--data", str(data), "--out", str(out)])
        assert code == 0
        assert strip_timestamp(out / "rates.ndjson") == before


class TestPipelineVariants:
    def test_condition_filter(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data, out = tmp_path / "data", tmp_path / "out"
        for command in ("simulate", "train", "rates", "report"):
            code = main([
                command, "--config", str(cfg_path), "--data", str(data),
                "--out", str(out), "--condition", "attended",
            ])
            assert code == 0
        lines = read_nonmeta_lines(out / "rates.ndjson")
        assert all(json.loads(l)["condition"] == "attended" for l in lines)
        fits = json.loads((out / "fits.json").read_text())["fits"]
        assert set(fits["S_to_Shat"]) == {"attended"}

    def test_rate_kind_filter(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data, out = tmp_path / "data", tmp_path / "out"
        for command in ("simulate", "train", "rates"):
            assert main([command, "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
        assert main([
            "report", "--config", str(cfg_path), "--data", str(data),
            "--out", str(out), "--rate-kind", "Rmin",
        ]) == 0
        fits = json.loads((out / "fits.json").read_text())["fits"]
        assert set(fits) == {"Rmin"}

    def test_missing_dataset_is_data_error(self, tmp_path):
        cfg_path = write_config(tmp_path)
        code = main(["train", "--config", str(cfg_path), "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "out")])
        assert code == 3

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"lambda_grid": []}))
        assert main(["simulate", "--config", str(path), "--data", str(tmp_path / "d")]) == 2

    def test_unknown_channel_is_data_error(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data, out = tmp_path / "data", tmp_path / "out"
        assert main(["simulate", "--config", str(cfg_path), "--data", str(data)]) == 0
        bad = write_config(tmp_path, doc={**TINY, "channel_subset": ["XX"]}, name="bad.json")
        assert main(["train", "--config", str(bad), "--data", str(data), "--out", str(out)]) == 3

    def test_constant_stimulus_is_numerical_error(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data, out = tmp_path / "data", tmp_path / "out"
        assert main(["simulate", "--config", str(cfg_path), "--data", str(data)]) == 0
        # tamper one stimulus file into a constant signal
        target = data / "s01" / "t001_att.csv"
        lines = target.read_text().splitlines()
        header = lines[0]
        n = len(lines) - 1
        target.write_text("\n".join([header] + [f"{i / 64.0},1.0" for i in range(n)]) + "\n")
        assert main(["train", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 4

    def test_all_runs_end_to_end(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data, out = tmp_path / "data", tmp_path / "out"
        assert main(["all", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
        assert (out / "fits.json").exists()

    def test_empty_dataset_yields_no_points(self, tmp_path):
        cfg_path = write_config(tmp_path)
        data = tmp_path / "data"
        data.mkdir()
        (data / "manifest.json").write_text(json.dumps({
            "schema_version": 1, "config_hash": "x", "seed": 0, "rng": "philox4x64-10",
            "rate_hz": 64.0, "subjects": [], "trials_per_subject": 0, "n_samples": 0,
        }))
        code = main(["rates", "--config", str(cfg_path), "--data", str(data), "--out", str(tmp_path / "out")])
        assert code == 3  # NoPoints

    def test_train_reaches_noise_ceiling(self, tmp_path):
        # planted-decoder dataset written in the pipeline's own format; the
        # generative snr fixes the reachable correlation at sqrt(snr/(1+snr))
        from redflow import decoder as dec_mod
        from redflow import signals as sig_mod
        from redflow.signals import LagWindow, MultichannelRecording, TimeSeries, lag_valid_slice

        rng = np.random.default_rng(123)
        n, snr, window = 2000, 4.0, LagWindow(0, 8)
        labels = ("FT7", "T7", "TP7", "CP5", "FC5", "C5")
        g_true = 0.1 * rng.standard_normal(len(labels) * window.n_lags)
        data = tmp_path / "data"
        for subject in ("s01", "s02"):
            (data / subject).mkdir(parents=True)
            for t in range(1, 5):
                chans = tuple(
                    TimeSeries(lab, 64.0, rng.standard_normal(n)) for lab in labels
                )
                eeg = MultichannelRecording(
                    channels=chans, subject_id=subject, trial_id=f"t{t:03d}",
                )
                design = dec_mod.build_design(eeg, window)
                signal = design @ g_true
                noise_sd = float(np.std(signal)) / np.sqrt(snr)
                stim = np.zeros(n)
                stim[lag_valid_slice(n, window)] = (
                    signal + noise_sd * rng.standard_normal(signal.size)
                )
                base = data / subject / f"t{t:03d}"
                sig_mod.write_recording(eeg, Path(str(base) + "_eeg.csv"))
                for cond, suffix in (("attended", "att"), ("distractor", "dst")):
                    rec = MultichannelRecording(
                        channels=(TimeSeries("envelope", 64.0, stim),),
                        subject_id=subject, trial_id=f"t{t:03d}", condition=cond,
                    )
                    sig_mod.write_recording(rec, Path(str(base) + f"_{suffix}.csv"))
        (data / "manifest.json").write_text(json.dumps({
            "schema_version": 1, "config_hash": "planted", "seed": 0,
            "rng": "philox4x64-10", "rate_hz": 64.0, "subjects": ["s01", "s02"],
            "trials_per_subject": 4, "n_samples": n,
        }))
        doc = {**TINY, "lag_window_ms": [0, 125], "lambda_grid": [10.0**k for k in range(-4, 5)]}
        cfg_path = write_config(tmp_path, doc=doc)
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg_path), "--data", str(data),
                     "--out", str(out), "--condition", "attended"]) == 0
        ceiling = np.sqrt(snr / (1.0 + snr))
        for subject in ("s01", "s02"):
            meta = json.loads((out / "decoders" / f"{subject}_attended.json").read_text())["meta"]
            assert max(meta["cv_mean_rho"]) >= 0.8 * ceiling

    def test_attended_rate_exceeds_distractor_on_asymmetric_coupling(self, tmp_path):
        doc = {
            **TINY,
            "seed": 7,
            "scenario": {"n_subjects": 2, "n_trials": 6, "n_samples": 3200,
                         "attended_coupling": 0.12, "distractor_coupling": 0.03},
        }
        config = config_from_dict(doc)
        from redflow import synth

        trials = synth.make_aad_scenario(config.scenario(), rate_hz=config.rate_hz)
        decs = cli.train_decoders(config, trials, ("attended", "distractor"))
        records, _ = cli.compute_rates(config, trials, decs, ("attended", "distractor"))
        att = np.median([r["r_s_to_shat"] for r in records if r["condition"] == "attended"])
        dst = np.median([r["r_s_to_shat"] for r in records if r["condition"] == "distractor"])
        assert att > dst

    def test_report_null_p_values_uniform(self):
        # exchangeable null: rates and distortions drawn independently; the
        # report's significance test must hold its nominal level (the binned
        # display curve is unaffected). 300 seeds, default (raw) fit mode.
        from redflow.analysis import RateDistortionPoint

        config = RunConfig()
        hits = 0
        pvals = []
        n_seeds = 300
        for seed in range(n_seeds):
            rng = np.random.default_rng(seed)
            pts = [
                RateDistortionPoint(
                    rate=r, distortion=d, condition="attended",
                    subject_id="s", trial_id=f"t{i}", rate_kind="S_to_Shat",
                )
                for i, (r, d) in enumerate(
                    zip(rng.uniform(0.0, 0.05, 120), rng.uniform(0.2, 0.9, 120))
                )
            ]
            _, _, fits = cli.build_report(config, pts, ("attended",), ("S_to_Shat",))
            p = fits["S_to_Shat"]["attended"]["p_value"]
            pvals.append(p)
            hits += p < 0.05
        assert abs(hits / n_seeds - 0.05) < 0.04
        ks = float(np.max(np.abs(np.sort(pvals) - (np.arange(n_seeds) + 1) / n_seeds)))
        assert ks < 0.1

    def test_in_memory_matches_file_pipeline(self, tmp_path):
        # the analyze_scenario shortcut must agree with the file-backed run
        cfg_path = write_config(tmp_path)
        config = load_config(cfg_path)
        data, out = tmp_path / "data", tmp_path / "out"
        assert main(["all", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
        file_fits = json.loads((out / "fits.json").read_text())["fits"]
        mem_fits = cli.analyze_scenario(config)
        for kind in file_fits:
            for cond in file_fits[kind]:
                a, b = file_fits[kind][cond], mem_fits[kind][cond]
                if "error" in a:
                    assert a["error"] == b["error"]
                else:
                    assert a["slope"] == pytest.approx(b["slope"], rel=1e-12)
                    assert a["p_value"] == pytest.approx(b["p_value"], rel=1e-9)
