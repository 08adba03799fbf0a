"""Command-line pipelines over a single JSON config.

Subcommands cover the individual stages (simulate, fit-margins, transform,
fit-angular, predict, baseline krige|ikrige, score) and the two end-to-end
studies (`run sim-study`, `run application`).  Every stage re-derives the
jitter and the train/test split deterministically from (input, config,
seed), so the stages compose through files without hidden state, and every
output directory carries a manifest with input hashes, versions and the
seed.  Outputs contain no wall-clock timestamps: two runs from the same
inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .angular import LogisticModel, model_from_dict, load_model, save_model
from .baselines import estimate_moments, indicator_krige, simple_krige
from .dataio import jitter, load_csv, split, synthetic_dates, write_csv, MultivariateSeries
from .fitting import fit as fit_angular_model, radial_threshold
from .margins import fit_margin, load_margins, save_margins
from .predict import back_transform, conditional_density
from .scoring import pit_histogram, score_method, write_flat_csv
from .simulate import exact_conditional_oracle, sample_logistic

SUMMARY_QUANTILES = (0.5, 0.75, 0.9, 0.95, 0.99)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Single-document configuration; defaults reproduce the study setup."""

    input: str | None = None
    out_dir: str = "out"
    seed: int = 0
    jitter_half_width: float = 0.5
    every_kth: int = 3
    margin_quantile: float = 0.93
    radial_quantile: float = 0.93
    family: str = "pairwise_beta"
    hidden_column: str | None = None
    fit_starts: int = 5
    quadrature: dict = field(
        default_factory=lambda: {
            "n_nodes": 2049,
            "eps": 1e-8,
            "rel_tol": 1e-6,
            "grid_points": 1025,
        }
    )
    report_quantiles: tuple = (0.99, 0.95, 0.90, 0.75, 0.50)
    indicator_u_grid: dict = field(
        default_factory=lambda: {"start": 10.0, "stop": 105.0, "step": 0.25}
    )
    weight_threshold: float = 0.85
    sim_study: dict = field(
        default_factory=lambda: {"n": 5000, "d": 3, "beta": 0.3, "top": 1000}
    )

    def __post_init__(self):
        for q in (self.margin_quantile, self.radial_quantile, *self.report_quantiles):
            if not 0.0 < q < 1.0:
                raise ConfigError(f"quantile {q} outside (0, 1)")
        if self.family not in ("logistic", "pairwise_beta"):
            raise ConfigError(f"unknown model family {self.family!r}")
        self.report_quantiles = tuple(self.report_quantiles)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as f:
            doc = json.load(f)
        doc.update({k: v for k, v in overrides.items() if v is not None})
        known = {f_.name for f_ in cls.__dataclass_fields__.values()}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def u_grid(self):
        g = self.indicator_u_grid
        return np.arange(g["start"], g["stop"] + g["step"] / 2.0, g["step"])

    def quad_kwargs(self):
        return dict(self.quadrature)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config, inputs, outputs):
    """Provenance record: hashes of inputs and outputs, versions, seed."""
    import scipy

    doc = {
        "tailpred_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "seed": config.seed,
        "config": asdict(config),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(Path(p).relative_to(out_dir)): _sha256(p) for p in outputs},
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
    return path


def _prepared_series(config):
    """Load, validate the hidden column, jitter, and split."""
    if not config.input:
        raise ConfigError("config requires an input CSV path")
    series = load_csv(config.input)
    if config.hidden_column is None:
        raise ConfigError("config requires hidden_column")
    if config.hidden_column not in series.column_names:
        raise ConfigError(
            f"hidden column {config.hidden_column!r} not among {series.column_names}"
        )
    jittered = jitter(series, half_width=config.jitter_half_width, seed=config.seed)
    return jittered, split(jittered, every_kth=config.every_kth)


def fit_margins_cmd(config):
    """Fit one margin per column on the training rows; write margins.json."""
    series, idx = _prepared_series(config)
    train = series.values[idx.train_rows]
    margins = [
        fit_margin(train[:, j], threshold_quantile=config.margin_quantile, name=name)
        for j, name in enumerate(series.column_names)
    ]
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "margins.json"
    save_margins(margins, path)
    return {"margins": path, "series": series, "split": idx, "models": margins}


def transform_cmd(config):
    """Map the jittered series to the unit Frechet scale; write frechet.csv."""
    series, idx = _prepared_series(config)
    path = Path(config.out_dir) / "margins.json"
    if not path.exists():
        raise ConfigError(f"margins file {path} missing; run fit-margins first")
    margins = load_margins(path)
    z = np.column_stack(
        [m.to_frechet(series.values[:, j]) for j, m in enumerate(margins)]
    )
    frechet = MultivariateSeries(
        timestamps=series.timestamps, values=z, column_names=series.column_names
    )
    out = Path(config.out_dir) / "frechet.csv"
    write_csv(frechet, out)
    return {"frechet": out, "z": z, "series": series, "split": idx, "margins": margins}


def fit_angular_cmd(config):
    """Fit the angular model on the training rows of the transformed data."""
    t = transform_cmd(config)
    z_train = t["z"][t["split"].train_rows]
    sample = radial_threshold(z_train, quantile=config.radial_quantile)
    fitted = fit_angular_model(
        sample,
        config.family,
        starts=config.fit_starts,
        seed=config.seed,
        quantile=config.radial_quantile,
    )
    out_dir = Path(config.out_dir)
    report = out_dir / "angular_fit.json"
    fitted.save(report)
    model_path = out_dir / "model.json"
    save_model(fitted.model, model_path)
    return {**t, "fit": fitted, "report": report, "model_path": model_path}


def _select_test_rows(z, observed_cols, test_rows, quantile):
    """Test rows whose observed-column radial sum exceeds its quantile."""
    sums = z[test_rows][:, observed_cols].sum(axis=1)
    r_star = float(np.quantile(sums, quantile))
    keep = sums > r_star
    return test_rows[keep], r_star


def _write_prediction(method_dir, i, rows, summary):
    """Per-observation artifacts: long-format density CSV plus a summary."""
    cpath = method_dir / f"obs_{i:04d}.csv"
    with open(cpath, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scale", "grid", "density"])
        for scale, grid, dens in rows:
            for gv, dv in zip(grid, dens):
                writer.writerow([scale, repr(float(gv)), repr(float(dv))])
    jpath = method_dir / f"obs_{i:04d}.json"
    with open(jpath, "w") as f:
        json.dump(summary, f, indent=2)
    return [cpath, jpath]


def _write_index(method_dir, entries):
    path = method_dir / "index.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["obs", "row", "date", "realized"])
        for e in entries:
            writer.writerow(e)
    return path


def _summary(dist, realized, normalizer=None):
    return {
        "quantiles": {str(q): float(dist.quantile(q)) for q in SUMMARY_QUANTILES},
        "pit": float(dist.pit(realized)),
        "normalizer": normalizer,
    }


def predict_cmd(config):
    """Angular-measure predictions for the large test observations."""
    t = transform_cmd(config)
    model_path = Path(config.out_dir) / "model.json"
    if not model_path.exists():
        raise ConfigError(f"model file {model_path} missing; run fit-angular first")
    model = load_model(model_path)
    series, idx, z, margins = t["series"], t["split"], t["z"], t["margins"]
    hidden = series.column_names.index(config.hidden_column)
    observed = [j for j in range(series.d) if j != hidden]
    rows, r_star = _select_test_rows(z, observed, idx.test_rows, config.radial_quantile)
    method_dir = Path(config.out_dir) / "predictions" / "angular"
    method_dir.mkdir(parents=True, exist_ok=True)
    outputs, entries, dists = [], [], []
    for i, row in enumerate(rows):
        cd = conditional_density(
            z[row, observed], model, r_star=r_star, **config.quad_kwargs()
        )
        od = back_transform(cd, margins[hidden])
        realized = series.values[row, hidden]
        summary = _summary(od, realized, normalizer=cd.normalizer)
        outputs += _write_prediction(
            method_dir,
            i,
            [("frechet", cd.grid, cd.density), ("original", od.grid, od.density)],
            summary,
        )
        entries.append(
            (i, int(row), series.timestamps[row].isoformat(), repr(float(realized)))
        )
        dists.append(od)
    outputs.append(_write_index(method_dir, entries))
    return {
        **t,
        "rows": rows,
        "r_star": r_star,
        "dists": dists,
        "outputs": outputs,
        "method_dir": method_dir,
    }


def baseline_cmd(config, which):
    """Kriging baselines on the same selected test rows as predict."""
    t = transform_cmd(config)
    series, idx, z = t["series"], t["split"], t["z"]
    hidden = series.column_names.index(config.hidden_column)
    observed = [j for j in range(series.d) if j != hidden]
    rows, r_star = _select_test_rows(z, observed, idx.test_rows, config.radial_quantile)
    train_vals = series.values[idx.train_rows]
    method_dir = Path(config.out_dir) / "predictions" / which
    method_dir.mkdir(parents=True, exist_ok=True)
    outputs, entries, dists = [], [], []
    if which == "krige":
        mean, cov = estimate_moments(train_vals)
    u_grid = config.u_grid()
    for i, row in enumerate(rows):
        obs = series.values[row, observed]
        if which == "krige":
            dist = simple_krige(obs, mean, cov, hidden=hidden).to_grid()
        else:
            dist = indicator_krige(obs, train_vals, u_grid, hidden=hidden).to_grid()
        realized = series.values[row, hidden]
        summary = _summary(dist, realized)
        outputs += _write_prediction(
            method_dir, i, [("original", dist.grid, dist.density)], summary
        )
        entries.append(
            (i, int(row), series.timestamps[row].isoformat(), repr(float(realized)))
        )
        dists.append(dist)
    outputs.append(_write_index(method_dir, entries))
    return {
        **t,
        "rows": rows,
        "dists": dists,
        "outputs": outputs,
        "method_dir": method_dir,
    }


def _load_predictions(method_dir):
    """Rebuild original-scale grid densities and realized values from files."""
    from .predict import GridDensity

    index_path = Path(method_dir) / "index.csv"
    realized, dists = [], []
    with open(index_path, newline="") as f:
        for rec in csv.DictReader(f):
            realized.append(float(rec["realized"]))
            cpath = Path(method_dir) / f"obs_{int(rec['obs']):04d}.csv"
            grid, dens = [], []
            with open(cpath, newline="") as g:
                for row in csv.DictReader(g):
                    if row["scale"] == "original":
                        grid.append(float(row["grid"]))
                        dens.append(float(row["density"]))
            dists.append(GridDensity(grid=np.array(grid), density=np.array(dens)))
    return np.array(realized), dists


def score_cmd(config, methods=("angular", "krige", "ikrige")):
    """Score every emitted method under the same verification pass."""
    out_dir = Path(config.out_dir)
    reports, outputs = [], []
    scores_dir = out_dir / "scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    for method in methods:
        method_dir = out_dir / "predictions" / method
        if not (method_dir / "index.csv").exists():
            continue
        realized, dists = _load_predictions(method_dir)
        rep = score_method(
            realized,
            dists,
            method=method,
            taus=config.report_quantiles,
            weight_threshold=config.weight_threshold,
        )
        rpath = scores_dir / f"{method}_report.json"
        rep.save_json(rpath)
        outputs.append(rpath)
        reports.append(rep)
    if not reports:
        raise ConfigError("no prediction directories found to score")
    flat = scores_dir / "flat.csv"
    write_flat_csv(reports, flat)
    outputs.append(flat)
    return {"reports": reports, "outputs": outputs}


def simulate_cmd(config):
    """Write a simulated logistic series in load_csv-compatible form."""
    ss = config.sim_study
    sample = sample_logistic(ss["n"], ss["d"], ss["beta"], seed=config.seed)
    names = tuple(f"z{j + 1}" for j in range(ss["d"]))
    series = MultivariateSeries(
        timestamps=synthetic_dates(ss["n"]), values=sample.values, column_names=names
    )
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "simulated.csv"
    write_csv(series, path)
    return {"path": path, "series": series}


def run_sim_study(config):
    """Calibration experiment: simulate, predict the hidden component for
    the largest conditioning sums, and report the PIT histogram with
    binomial bands plus exact-vs-approximate density tables."""
    ss = config.sim_study
    n, d, beta, top = ss["n"], ss["d"], ss["beta"], ss["top"]
    if d not in (2, 3):
        raise ConfigError("simulation study needs d = 2 or 3 (closed-form oracle)")
    sample = sample_logistic(n, d, beta, seed=config.seed)
    z = sample.values
    sums = z[:, :-1].sum(axis=1)
    order = np.argsort(sums)[::-1][:top]
    cutoff = float(sums[order].min())
    model = LogisticModel(beta=beta, d=d)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    pits = np.empty(order.size)
    for i, row in enumerate(order):
        cd = conditional_density(z[row, :-1], model, **config.quad_kwargs())
        pits[i] = cd.pit(z[row, -1])
    hist = pit_histogram(pits)
    hpath = out_dir / "pit_histogram.json"
    with open(hpath, "w") as f:
        json.dump({"cutoff": cutoff, **hist.to_dict()}, f, indent=2)
    outputs.append(hpath)
    ppath = out_dir / "pit_values.csv"
    with open(ppath, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "conditioning_sum", "pit"])
        for row, p in zip(order, pits):
            writer.writerow([int(row), repr(float(sums[row])), repr(float(p))])
    outputs.append(ppath)

    # exact vs approximate densities at three conditioning magnitudes
    ranked = order[np.argsort(sums[order])]
    picks = {
        "small": ranked[0],
        "medium": ranked[ranked.size // 2],
        "large": ranked[-1],
    }
    for label, row in picks.items():
        cd = conditional_density(z[row, :-1], model, **config.quad_kwargs())
        exact = exact_conditional_oracle(z[row, :-1], beta, cd.grid)
        dpath = out_dir / f"density_comparison_{label}.csv"
        with open(dpath, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["grid", "approx_density", "exact_density"])
            for gv, av, ev in zip(cd.grid, cd.density, exact):
                writer.writerow([repr(float(gv)), repr(float(av)), repr(float(ev))])
        outputs.append(dpath)

    manifest = write_manifest(out_dir, config, inputs=[], outputs=outputs)
    return {
        "cutoff": cutoff,
        "pits": pits,
        "histogram": hist,
        "outputs": outputs + [manifest],
    }


def run_application(config):
    """Full application pipeline: jitter, split, margins, transform, angular
    fit, predictions for the large test rows by all three methods, scores."""
    margins_out = fit_margins_cmd(config)
    fitted = fit_angular_cmd(config)
    pred = predict_cmd(config)
    krige = baseline_cmd(config, "krige")
    ikrige = baseline_cmd(config, "ikrige")
    scored = score_cmd(config)
    outputs = [
        margins_out["margins"],
        fitted["frechet"],
        fitted["report"],
        fitted["model_path"],
    ]
    outputs += pred["outputs"] + krige["outputs"] + ikrige["outputs"] + scored["outputs"]
    manifest = write_manifest(
        Path(config.out_dir), config, inputs=[config.input], outputs=outputs
    )
    return {
        "n_predicted": len(pred["rows"]),
        "r_star": pred["r_star"],
        "fit": fitted["fit"],
        "reports": scored["reports"],
        "outputs": outputs + [manifest],
    }


def _add_common(parser):
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out-dir", default=None, help="override output directory")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tailpred",
        description="conditional density prediction for heavy-tailed data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit-margins", "transform", "fit-angular", "predict"):
        _add_common(sub.add_parser(name))
    p_score = sub.add_parser("score")
    _add_common(p_score)
    p_score.add_argument(
        "--weights",
        default=None,
        help="weighted-CRPS indicator threshold, e.g. 'p>0.85'",
    )
    p_base = sub.add_parser("baseline")
    p_base.add_argument("which", choices=["krige", "ikrige"])
    _add_common(p_base)
    p_run = sub.add_parser("run")
    p_run.add_argument("study", choices=["sim-study", "application"])
    _add_common(p_run)

    args = parser.parse_args(argv)
    overrides = {"seed": args.seed, "out_dir": args.out_dir}
    config = RunConfig.from_file(args.config, **overrides)
    if getattr(args, "weights", None):
        spec = args.weights.replace(" ", "")
        if not spec.startswith("p>"):
            raise ConfigError(f"cannot parse weight spec {args.weights!r}")
        config.weight_threshold = float(spec[2:])

    if args.command == "simulate":
        out = simulate_cmd(config)
        print(f"wrote {out['path']}")
    elif args.command == "fit-margins":
        out = fit_margins_cmd(config)
        print(f"wrote {out['margins']}")
    elif args.command == "transform":
        out = transform_cmd(config)
        print(f"wrote {out['frechet']}")
    elif args.command == "fit-angular":
        out = fit_angular_cmd(config)
        print(f"wrote {out['report']} (nll {out['fit'].neg_log_lik:.3f})")
    elif args.command == "predict":
        out = predict_cmd(config)
        print(f"predicted {len(out['rows'])} observations above r* = {out['r_star']:.4g}")
    elif args.command == "baseline":
        out = baseline_cmd(config, args.which)
        print(f"{args.which}: predicted {len(out['rows'])} observations")
    elif args.command == "score":
        out = score_cmd(config)
        for rep in out["reports"]:
            print(
                f"{rep.method}: mean log score {rep.mean_log_score:.4g}, "
                f"mean CRPS {rep.mean_crps:.4g}, "
                f"weighted CRPS {rep.mean_weighted_crps:.4g}"
            )
    elif args.command == "run" and args.study == "sim-study":
        out = run_sim_study(config)
        print(f"conditioning cutoff: {out['cutoff']:.4g}")
        print(f"PIT bin counts: {list(out['histogram'].bin_counts)}")
    elif args.command == "run" and args.study == "application":
        out = run_application(config)
        print(f"predicted {out['n_predicted']} test observations")
        for rep in out["reports"]:
            print(
                f"{rep.method}: mean log score {rep.mean_log_score:.4g}, "
                f"mean CRPS {rep.mean_crps:.4g}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
