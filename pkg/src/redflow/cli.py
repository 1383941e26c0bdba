"""Pipeline orchestration and command-line entry point.

Stages (each resumable from the previous stage's files):

* ``simulate``  config -> dataset directory (per-trial CSV + JSON sidecars)
* ``train``     dataset -> one decoder JSON per (subject, condition)
* ``rates``     dataset + decoders -> rates.ndjson + rd_points.ndjson
* ``report``    rd_points -> pdf.csv, rd_curve.csv, fits.json
* ``all``       the four in sequence

The computations are pure functions of in-memory trials
(:func:`train_decoders`, :func:`compute_rates`, :func:`build_report`); the
stages wrap them with CSV/JSON input and output. ``analyze_scenario`` runs
the whole chain in memory for a simulated scenario.

Every output embeds the hash of the canonical run configuration; ``report``
refuses inputs whose hash differs from its own configuration. Outputs are
deterministic for a given config and seed except for one ``generated_at``
timestamp inside each file's metadata line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, decoder, signals, synth
from .errors import (
    ConfigError,
    DataError,
    DegenerateCovariance,
    DegenerateX,
    NonpositiveDistortion,
    NoPoints,
    OutOfRange,
    RedflowError,
    SingularSystem,
    TooFewSamples,
    UnstableModel,
    ZeroVarianceSignal,
)
from .infotheory import EmbedSpec, plug_in_bias
from .redundancy import directed_redundancy_bound
from .signals import LEFT_TEMPORAL_LABELS, LagWindow

CONFIG_VERSION = 1
SCHEMA_VERSION = 1

DEFAULT_LAMBDA_GRID = tuple(10.0**k for k in range(-6, 7))

_NUMERICAL_ERRORS = (
    DegenerateCovariance,
    SingularSystem,
    ZeroVarianceSignal,
    UnstableModel,
    DegenerateX,
    OutOfRange,
    NonpositiveDistortion,
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration; see README for the file schema."""

    seed: int = 0
    rate_hz: float = 64.0
    channel_subset: tuple = LEFT_TEMPORAL_LABELS
    lag_window_ms: tuple = (0.0, 250.0)
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    embed_source_history: int = 16
    embed_target_history: int = 16
    embed_delay: int = 1
    kde_level: float = 0.01
    bin_width_bits: float = 0.005
    bin_stride_bits: float = 0.0025
    fit_on: str = "raw"
    time_shift_surrogates: bool = False
    n_subjects: int = 3
    n_trials: int = 10
    n_samples: int = 3200
    n_channels: int = 6
    attended_coupling: float = 0.12
    distractor_coupling: float = 0.03
    observation_noise: float = 1.0

    def __post_init__(self):
        if self.fit_on not in ("binned", "raw"):
            raise ConfigError(f"fit_on must be 'binned' or 'raw', got {self.fit_on!r}")
        if self.time_shift_surrogates:
            raise ConfigError(
                "time_shift_surrogates is a reserved hook; this build ships it disabled"
            )
        if self.kde_level < 0:
            raise ConfigError("kde_level must be >= 0")
        if self.bin_width_bits <= 0 or self.bin_stride_bits <= 0:
            raise ConfigError("bin widths must be > 0")
        if not self.lambda_grid:
            raise ConfigError("lambda_grid must be non-empty")
        if any(v < 0 for v in self.lambda_grid):
            raise ConfigError("lambda_grid values must be >= 0")
        if len(self.lag_window_ms) != 2 or self.lag_window_ms[0] > self.lag_window_ms[1]:
            raise ConfigError(f"lag_window_ms must be (lo, hi), got {self.lag_window_ms}")
        try:
            self.embed()
            self.lag_window()
            self.scenario()
        except RedflowError as exc:
            raise ConfigError(str(exc)) from exc

    def embed(self) -> EmbedSpec:
        return EmbedSpec(
            source_history=self.embed_source_history,
            target_history=self.embed_target_history,
            delay=self.embed_delay,
        )

    def lag_window(self) -> LagWindow:
        lo = int(round(self.lag_window_ms[0] * self.rate_hz / 1000.0))
        hi = int(round(self.lag_window_ms[1] * self.rate_hz / 1000.0))
        return LagWindow(lo, hi)

    def scenario(self) -> synth.AadScenario:
        return synth.AadScenario(
            n_samples=self.n_samples,
            n_trials=self.n_trials,
            n_subjects=self.n_subjects,
            n_channels=self.n_channels,
            attended_coupling=self.attended_coupling,
            distractor_coupling=self.distractor_coupling,
            observation_noise=self.observation_noise,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "rate_hz": self.rate_hz,
            "channel_subset": list(self.channel_subset),
            "lag_window_ms": list(self.lag_window_ms),
            "lambda_grid": list(self.lambda_grid),
            "embed": self.embed().to_dict(),
            "kde_level": self.kde_level,
            "bin_width_bits": self.bin_width_bits,
            "bin_stride_bits": self.bin_stride_bits,
            "fit_on": self.fit_on,
            "time_shift_surrogates": self.time_shift_surrogates,
            "scenario": {
                "n_subjects": self.n_subjects,
                "n_trials": self.n_trials,
                "n_samples": self.n_samples,
                "n_channels": self.n_channels,
                "attended_coupling": self.attended_coupling,
                "distractor_coupling": self.distractor_coupling,
                "observation_noise": self.observation_noise,
            },
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


_TOP_KEYS = {
    "config_version", "seed", "rate_hz", "channel_subset", "lag_window_ms",
    "lambda_grid", "embed", "kde_level", "bin_width_bits", "bin_stride_bits",
    "fit_on", "time_shift_surrogates", "scenario",
}
_EMBED_KEYS = {"source_history", "target_history", "delay"}
_SCENARIO_KEYS = {
    "n_subjects", "n_trials", "n_samples", "n_channels",
    "attended_coupling", "distractor_coupling", "observation_noise",
}
_SCENARIO_FLOAT_KEYS = {"attended_coupling", "distractor_coupling", "observation_noise"}


def config_from_dict(doc: dict) -> RunConfig:
    """Build a RunConfig from a parsed config file, applying defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    version = doc.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version!r}")
    embed = doc.get("embed", {})
    if not isinstance(embed, dict) or set(embed) - _EMBED_KEYS:
        raise ConfigError(f"embed must be an object with keys in {sorted(_EMBED_KEYS)}")
    scenario = doc.get("scenario", {})
    if not isinstance(scenario, dict) or set(scenario) - _SCENARIO_KEYS:
        raise ConfigError(f"scenario must be an object with keys in {sorted(_SCENARIO_KEYS)}")
    kwargs = {}
    try:
        if "seed" in doc:
            kwargs["seed"] = int(doc["seed"])
        if "rate_hz" in doc:
            kwargs["rate_hz"] = float(doc["rate_hz"])
        if "channel_subset" in doc:
            kwargs["channel_subset"] = tuple(str(c) for c in doc["channel_subset"])
        if "lag_window_ms" in doc:
            kwargs["lag_window_ms"] = tuple(float(v) for v in doc["lag_window_ms"])
        if "lambda_grid" in doc:
            kwargs["lambda_grid"] = tuple(float(v) for v in doc["lambda_grid"])
        for key in _EMBED_KEYS & set(embed):
            kwargs[f"embed_{key}"] = int(embed[key])
        for key in ("kde_level", "bin_width_bits", "bin_stride_bits"):
            if key in doc:
                kwargs[key] = float(doc[key])
        if "fit_on" in doc:
            kwargs["fit_on"] = str(doc["fit_on"])
        if "time_shift_surrogates" in doc:
            kwargs["time_shift_surrogates"] = bool(doc["time_shift_surrogates"])
        for key in _SCENARIO_KEYS & set(scenario):
            value = scenario[key]
            kwargs[key] = float(value) if key in _SCENARIO_FLOAT_KEYS else int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    return RunConfig(**kwargs)


def load_config(path, seed_override: int | None = None) -> RunConfig:
    """Load a JSON config file; ``seed_override`` replaces its seed."""
    if path is None:
        doc = {}
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if seed_override is not None:
        doc = dict(doc)
        doc["seed"] = seed_override
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# In-memory pipeline core
# ---------------------------------------------------------------------------

_STIM_SUFFIX = {"attended": "att", "distractor": "dst"}


def _prep_eeg(config: RunConfig, eeg: signals.MultichannelRecording):
    """Channel subset in configured order, each channel normalized."""
    eeg = signals.select_channels(eeg, config.channel_subset)
    return signals.MultichannelRecording(
        channels=tuple(signals.normalize(ch) for ch in eeg.channels),
        subject_id=eeg.subject_id,
        trial_id=eeg.trial_id,
        condition=eeg.condition,
    )


def _stimulus(trial: synth.TrialData, condition: str) -> signals.TimeSeries:
    return trial.attended if condition == "attended" else trial.distractor


def _by_subject(trials) -> dict:
    grouped = {}
    for t in trials:
        grouped.setdefault(t.subject_id, []).append(t)
    return {
        s: sorted(ts, key=lambda t: t.trial_id) for s, ts in sorted(grouped.items())
    }


def train_decoders(config: RunConfig, trials, conditions) -> dict:
    """Cross-validated decoder per (subject, condition).

    Returns ``{(subject, condition): (Decoder, per-lambda mean rho)}``. The
    per-trial design matrices are built once per trial and shared across
    conditions.
    """
    window = config.lag_window()
    out = {}
    for subject, subject_trials in _by_subject(trials).items():
        per_cond = {c: [] for c in conditions}
        labels = None
        for trial in subject_trials:
            eeg = _prep_eeg(config, trial.eeg)
            labels = eeg.labels
            design = decoder.build_design(eeg, window)
            gram = design.T @ design
            valid = signals.lag_valid_slice(eeg.n_samples, window)
            for condition in conditions:
                stim = signals.normalize(_stimulus(trial, condition))
                if len(stim) != eeg.n_samples:
                    raise DataError(
                        f"{subject}/{trial.trial_id}: stimulus length mismatch"
                    )
                target = stim.samples[valid]
                per_cond[condition].append(
                    decoder.TrialStats(gram, design.T @ target, design, target)
                )
        for condition in conditions:
            best_lam, mean_rho = decoder.cross_validate_stats(
                per_cond[condition], config.lambda_grid
            )
            fitted = decoder.train_pooled_stats(
                per_cond[condition], window, best_lam, labels, config.rate_hz
            )
            out[(subject, condition)] = (fitted, mean_rho)
    return out


def compute_rates(config: RunConfig, trials, decoders: dict, conditions) -> tuple[list, list]:
    """Rate bundle and distortion-rate points per (trial, condition).

    Returns (records, points) ordered by subject, trial, then condition.
    ``decoders`` maps (subject, condition) to a Decoder or to a
    (Decoder, cv_curve) pair as produced by :func:`train_decoders`.
    """
    trials = list(trials)
    if not trials:
        raise NoPoints("no trials to rate")
    window = config.lag_window()
    embed = config.embed()
    records, points = [], []
    for subject, subject_trials in _by_subject(trials).items():
        for condition in conditions:
            if (subject, condition) not in decoders:
                raise DataError(f"no decoder for subject {subject}, {condition}")
        for trial in subject_trials:
            eeg = _prep_eeg(config, trial.eeg)
            valid = signals.lag_valid_slice(eeg.n_samples, window)
            electrodes = signals.MultichannelRecording(
                channels=tuple(ch.with_samples(ch.samples[valid]) for ch in eeg.channels),
                subject_id=subject,
                trial_id=trial.trial_id,
                condition=eeg.condition,
            )
            for condition in conditions:
                entry = decoders[(subject, condition)]
                dec = entry[0] if isinstance(entry, tuple) else entry
                try:
                    record, trial_points = _rate_one_trial(
                        config, trial, condition, dec, eeg, electrodes, valid, embed
                    )
                except RedflowError as exc:
                    raise type(exc)(
                        f"subject {subject}, trial {trial.trial_id}, {condition}: {exc}"
                    ) from exc
                records.append(record)
                points.extend(trial_points)
    return records, points


def _rate_one_trial(config, trial, condition, dec, eeg, electrodes, valid, embed):
    shat = signals.normalize(decoder.reconstruct(dec, eeg))
    stim = signals.normalize(_stimulus(trial, condition))
    stim_valid = signals.normalize(stim.with_samples(stim.samples[valid]))
    rho = decoder.pearson(shat, stim_valid)
    dist = analysis.distortion(rho)
    bundle = directed_redundancy_bound(
        stim_valid, electrodes, shat, embed,
        condition=condition, subject_id=trial.subject_id, trial_id=trial.trial_id,
    )
    n_te_rows = len(shat) - max(embed.delay + embed.source_history - 1, embed.target_history)
    record = bundle.to_dict()
    record["rho"] = rho
    record["distortion"] = dist
    record["lambda"] = dec.lam
    record["plug_in_bias_bits"] = plug_in_bias(n_te_rows, embed.source_history)
    rates = {
        "S_to_Shat": bundle.r_s_to_shat,
        "E_to_Shat": bundle.r_e_to_shat,
        "S_to_E": bundle.r_s_to_e,
        "Rmin": bundle.r_min,
    }
    trial_points = [
        analysis.RateDistortionPoint(
            rate=rates[kind],
            distortion=dist,
            condition=condition,
            subject_id=trial.subject_id,
            trial_id=trial.trial_id,
            rate_kind=kind,
        )
        for kind in analysis.RATE_KINDS
    ]
    return record, trial_points


def build_report(config: RunConfig, points, conditions, rate_kinds=analysis.RATE_KINDS):
    """Per-cell density, support-thresholded curve, and linear fit.

    Returns (pdf_rows, curve_rows, fits). A failing cell (for example too
    few points) is recorded as an ``error`` entry without aborting the
    other cells.
    """
    pdf_rows = ["rate_kind,condition,rate_bits,density"]
    curve_rows = ["rate_kind,condition,center_bits,mean_distortion_db,count"]
    fits = {}
    for kind in rate_kinds:
        fits[kind] = {}
        for condition in conditions:
            cell_points = [
                p for p in points if p.rate_kind == kind and p.condition == condition
            ]
            fits[kind][condition] = _report_cell(
                config, kind, condition, cell_points, pdf_rows, curve_rows
            )
    return pdf_rows, curve_rows, fits


def _report_cell(config, kind, condition, cell_points, pdf_rows, curve_rows):
    try:
        rates = np.array([p.rate for p in cell_points])
        if rates.size < 5:
            raise TooFewSamples(f"{kind}/{condition}: need >= 5 points, got {rates.size}")
        grid = analysis.default_grid(rates)
        density = analysis.kde_pdf(rates, grid)
        pdf_rows.extend(
            f"{kind},{condition},{g!r},{d!r}"
            for g, d in zip(grid.tolist(), density.tolist())
        )
        threshold = analysis.support_threshold(grid, density, config.kde_level)
        in_support = [p for p in cell_points if p.rate <= threshold]
        curve = analysis.bin_rd(in_support, config.bin_width_bits, config.bin_stride_bits)
        curve_rows.extend(f"{kind},{condition},{c!r},{m!r},{n}" for c, m, n in curve)
        if config.fit_on == "binned":
            fit = analysis.fit_linear([c for c, _, _ in curve], [m for _, m, _ in curve])
        else:
            usable = [p for p in in_support if p.distortion_db is not None]
            fit = analysis.fit_linear(
                [p.rate for p in usable], [p.distortion_db for p in usable]
            )
        cell = fit.to_dict()
        cell.update(
            support_threshold=threshold,
            n_points_total=len(cell_points),
            n_points_in_support=len(in_support),
            n_zero_distortion=sum(1 for p in cell_points if p.distortion == 0.0),
        )
        return cell
    except RedflowError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def analyze_scenario(config: RunConfig, conditions=("attended", "distractor")):
    """Simulate, train, rate, and fit entirely in memory.

    Returns the same fits structure ``report`` writes to ``fits.json``.
    """
    trials = synth.make_aad_scenario(config.scenario(), rate_hz=config.rate_hz)
    decoders = train_decoders(config, trials, conditions)
    _, points = compute_rates(config, trials, decoders, conditions)
    _, _, fits = build_report(config, points, conditions)
    return fits


# ---------------------------------------------------------------------------
# File-backed stages
# ---------------------------------------------------------------------------

def _run_meta(config: RunConfig) -> dict:
    return {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "embed": config.embed().to_dict(),
        "lag_window": [config.lag_window().tau_min, config.lag_window().tau_max],
        "lambda_grid": list(config.lambda_grid),
        "rng": synth.RNG_ALGORITHM,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _write_with_meta(path: Path, meta: dict, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
        for line in lines:
            fh.write(line + "\n")


def _read_meta_line(path: Path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# meta "):
        raise DataError(f"{path}: missing metadata header line")
    return json.loads(first[len("# meta "):])


def cmd_simulate(config: RunConfig, data_dir) -> None:
    """Generate the synthetic dataset and write it as CSV/JSON per trial."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    trials = synth.make_aad_scenario(config.scenario(), rate_hz=config.rate_hz)
    subjects = sorted({t.subject_id for t in trials})
    stamp = {"config_hash": config.config_hash()}
    for trial in trials:
        subject_dir = data_dir / trial.subject_id
        subject_dir.mkdir(parents=True, exist_ok=True)
        base = subject_dir / trial.trial_id
        signals.write_recording(trial.eeg, Path(str(base) + "_eeg.csv"), extra_meta=stamp)
        for condition in ("attended", "distractor"):
            rec = signals.MultichannelRecording(
                channels=(_stimulus(trial, condition),),
                subject_id=trial.subject_id,
                trial_id=trial.trial_id,
                condition=condition,
            )
            suffix = _STIM_SUFFIX[condition]
            signals.write_recording(rec, Path(f"{base}_{suffix}.csv"), extra_meta=stamp)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "rng": synth.RNG_ALGORITHM,
        "rate_hz": config.rate_hz,
        "subjects": subjects,
        "trials_per_subject": config.n_trials,
        "n_samples": config.n_samples,
    }
    with open(data_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_manifest(data_dir: Path) -> dict:
    path = data_dir / "manifest.json"
    if not path.exists():
        raise DataError(f"dataset manifest not found: {path}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema_version")
    return manifest


def load_trials(data_dir) -> list:
    """Read every trial of a dataset directory into memory."""
    data_dir = Path(data_dir)
    manifest = _load_manifest(data_dir)
    trials = []
    for subject in manifest["subjects"]:
        subject_dir = data_dir / subject
        if not subject_dir.is_dir():
            raise DataError(f"missing subject directory: {subject_dir}")
        trial_ids = sorted(
            p.name[: -len("_eeg.csv")] for p in subject_dir.glob("*_eeg.csv")
        )
        if not trial_ids:
            raise DataError(f"no trials found under {subject_dir}")
        for trial_id in trial_ids:
            base = subject_dir / trial_id
            eeg = signals.read_recording(Path(str(base) + "_eeg.csv"))
            att = signals.read_recording(Path(str(base) + "_att.csv"))
            dst = signals.read_recording(Path(str(base) + "_dst.csv"))
            trials.append(
                synth.TrialData(
                    attended=att.channels[0],
                    distractor=dst.channels[0],
                    eeg=eeg,
                )
            )
    return trials


def _decoder_path(out_dir: Path, subject: str, condition: str) -> Path:
    return out_dir / "decoders" / f"{subject}_{condition}.json"


def cmd_train(config: RunConfig, data_dir, out_dir, conditions=("attended", "distractor")) -> None:
    """Cross-validate lambda and fit one decoder per (subject, condition)."""
    out_dir = Path(out_dir)
    trials = load_trials(data_dir)
    fitted = train_decoders(config, trials, conditions)
    (out_dir / "decoders").mkdir(parents=True, exist_ok=True)
    for (subject, condition), (dec, mean_rho) in sorted(fitted.items()):
        decoder.save_decoder(
            dec,
            _decoder_path(out_dir, subject, condition),
            extra_meta={
                "config_hash": config.config_hash(),
                "subject_id": subject,
                "condition": condition,
                "cv_lambdas": list(config.lambda_grid),
                "cv_mean_rho": mean_rho,
            },
        )


def cmd_rates(config: RunConfig, data_dir, out_dir, conditions=("attended", "distractor")) -> None:
    """Reconstruct, correlate, and compute the rate bundle per trial."""
    out_dir = Path(out_dir)
    trials = load_trials(data_dir)
    decoders = {}
    for subject in sorted({t.subject_id for t in trials}):
        for condition in conditions:
            decoders[(subject, condition)] = decoder.load_decoder(
                _decoder_path(out_dir, subject, condition)
            )
    records, points = compute_rates(config, trials, decoders, conditions)
    meta = _run_meta(config)
    _write_with_meta(
        out_dir / "rates.ndjson", meta,
        [json.dumps(r, sort_keys=True) for r in records],
    )
    _write_with_meta(
        out_dir / "rd_points.ndjson", meta,
        [json.dumps(p.to_dict(), sort_keys=True) for p in points],
    )


def read_rd_points(path) -> tuple[dict, list]:
    """Read an rd_points.ndjson file; returns (meta, points)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"rate-distortion points not found: {path}")
    meta = _read_meta_line(path)
    points = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            doc = json.loads(line)
            points.append(
                analysis.RateDistortionPoint(
                    rate=float(doc["rate"]),
                    distortion=float(doc["distortion"]),
                    condition=doc["condition"],
                    subject_id=doc["subject_id"],
                    trial_id=doc["trial_id"],
                    rate_kind=doc["rate_kind"],
                )
            )
    return meta, points


def cmd_report(
    config: RunConfig,
    out_dir,
    conditions=("attended", "distractor"),
    rate_kinds=analysis.RATE_KINDS,
) -> None:
    """Write pdf.csv, rd_curve.csv, and fits.json from the rate-distortion points."""
    out_dir = Path(out_dir)
    in_meta, points = read_rd_points(out_dir / "rd_points.ndjson")
    if in_meta.get("config_hash") != config.config_hash():
        raise DataError(
            f"config hash mismatch: rd_points carries {in_meta.get('config_hash')!r}, "
            f"current config is {config.config_hash()!r}"
        )
    pdf_rows, curve_rows, fits = build_report(config, points, conditions, rate_kinds)
    meta = _run_meta(config)
    _write_with_meta(out_dir / "pdf.csv", meta, pdf_rows)
    _write_with_meta(out_dir / "rd_curve.csv", meta, curve_rows)
    with open(out_dir / "fits.json", "w") as fh:
        json.dump({"meta": meta, "fits": fits}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_all(config: RunConfig, data_dir, out_dir, conditions=("attended", "distractor")) -> None:
    cmd_simulate(config, data_dir)
    cmd_train(config, data_dir, out_dir, conditions)
    cmd_rates(config, data_dir, out_dir, conditions)
    cmd_report(config, out_dir, conditions)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _conditions(which: str) -> tuple:
    if which == "both":
        return ("attended", "distractor")
    return (which,)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redflow",
        description="Simulate, decode, and analyze redundant information flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "train", "rates", "report", "all"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON run configuration")
        p.add_argument("--data", default="data", help="dataset directory")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--condition",
            choices=("attended", "distractor", "both"),
            default="both",
        )
        if name == "report":
            p.add_argument(
                "--rate-kind",
                choices=analysis.RATE_KINDS,
                default=None,
                help="restrict the report to one rate kind",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed)
        conditions = _conditions(args.condition)
        if args.command == "simulate":
            cmd_simulate(config, args.data)
        elif args.command == "train":
            cmd_train(config, args.data, args.out, conditions)
        elif args.command == "rates":
            cmd_rates(config, args.data, args.out, conditions)
        elif args.command == "report":
            kinds = analysis.RATE_KINDS if args.rate_kind is None else (args.rate_kind,)
            cmd_report(config, args.out, conditions, kinds)
        elif args.command == "all":
            cmd_all(config, args.data, args.out, conditions)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except (RedflowError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
