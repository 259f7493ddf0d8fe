"""Command-line entry point: dataset generation, fitting, effect curves,
experiments and hyperparameter sweeps.

Every invocation writes its primary outputs plus a ``<out>.meta.json``
sidecar carrying the full run configuration and library version; model
artifacts embed both directly. Errors leave a machine-readable JSON
object on stderr and a nonzero exit code.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, baselines, evaluation, kpv, pmmr, synthdata
from .data import Dataset, DoCurve
from .kernels import KernelSpec, KernelSpecs

FIT_METHODS = ("kpv", "pmmr", "pmmr-nystrom", "ridge", "ridge-w",
               "ridge-wz", "linear2s")


def _fail(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def _cli_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except BaseException as exc:  # noqa: BLE001 - single CLI boundary
            if isinstance(exc, (KeyboardInterrupt, SystemExit)):
                raise
            _fail(exc)
    return wrapper


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_meta(out_path, config: dict) -> None:
    meta = {"proxilearn_version": __version__, "config": config}
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, indent=2))


def _parse_a_grid(text: str) -> np.ndarray:
    """Parse 'min:max:count' into an equispaced grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--a-grid expects min:max:count, got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError("--a-grid count must be at least 1")
    return np.linspace(lo, hi, count)


def _parse_grid(text: str) -> np.ndarray:
    values = np.array([float(v) for v in text.split(",") if v.strip()])
    if values.size == 0:
        raise ValueError("--lambda-grid is empty")
    return values


def _parse_bandwidth(text: str, data: Dataset) -> KernelSpecs:
    """'median' or a comma list covering the A, X, Z, W columns in order."""
    if text == "median":
        return KernelSpecs.from_data(data)
    values = [float(v) for v in text.split(",") if v.strip()]
    dims = [data.a.shape[1], data.x.shape[1], data.z.shape[1],
            data.w.shape[1]]
    if len(values) != sum(dims):
        raise ValueError(
            f"--bandwidth needs {sum(dims)} values "
            f"(A:{dims[0]} X:{dims[1]} Z:{dims[2]} W:{dims[3]}), "
            f"got {len(values)}"
        )
    out = []
    offset = 0
    for d in dims:
        out.append(KernelSpec(np.array(values[offset:offset + d])))
        offset += d
    return KernelSpecs(a=out[0], x=out[1], z=out[2], w=out[3])


def _write_curve(path, curve: DoCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if curve.truth is None:
            writer.writerow(["a", "estimate"])
            for a, est in zip(curve.grid, curve.estimate):
                writer.writerow([repr(float(a)), repr(float(est))])
        else:
            writer.writerow(["a", "estimate", "truth"])
            for a, est, tr in zip(curve.grid, curve.estimate, curve.truth):
                writer.writerow([repr(float(a)), repr(float(est)),
                                 repr(float(tr))])


@click.group()
@click.version_option(__version__)
def main():
    """Proximal causal learning with kernel estimators."""


@main.command()
@click.option("--n", type=int, required=True, help="Number of rows.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_cli_errors
def gen(n, seed, out):
    """Generate a synthetic dataset CSV."""
    draw = synthdata.gen_main(n, seed=seed)
    draw.data.to_csv(out)
    _write_meta(out, {"command": "gen", "n": n, "seed": seed,
                      "out": str(out)})
    click.echo(f"wrote {n} rows to {out}")


def _default_grid_for(data: Dataset) -> np.ndarray:
    lo, hi = np.quantile(data.a[:, 0], [0.05, 0.95])
    return np.linspace(lo, hi, evaluation.GRID_POINTS)


def _fit_model(method, data, specs, lambda1, lambda2, lam_grid, rank, seed):
    """Fit one method; returns (payload-dict, curve-callable)."""
    if method == "kpv":
        model = kpv.fit_kpv(data, specs=specs, lam1=lambda1, lam2=lambda2,
                            split_seed=seed)
        payload = {
            "lambdas": {"lambda1": model.stage1.lam1, "lambda2": model.lam2},
            "split_seed": seed,
            "coefficients": {"alpha": model.alpha.tolist()},
        }
        return payload, lambda grid: kpv.kpv_ate(model, grid, data.x, data.w)
    if method in ("pmmr", "pmmr-nystrom"):
        use_rank = (max(1, data.n // 2) if rank is None else rank) \
            if method == "pmmr-nystrom" else None
        if lam_grid is None:
            lam_grid = pmmr.DEFAULT_LAMBDA_GRID
        model = pmmr.fit_pmmr(data, specs=specs, lam=lambda1,
                              lam_grid=lam_grid, rank=use_rank,
                              split_seed=seed, landmark_seed=seed)
        payload = {
            "lambdas": {"lambda": model.lam},
            "rank": use_rank,
            "coefficients": {"alpha": model.alpha.tolist()},
        }
        return payload, lambda grid: pmmr.pmmr_ate(model, grid, data.x,
                                                   data.w)
    if method in ("ridge", "ridge-w", "ridge-wz"):
        adjust = {"ridge": "", "ridge-w": "w", "ridge-wz": "wz"}[method]
        model, adjustment = baselines.fit_ridge_baseline(
            data, adjust, lam=lambda1,
            lam_grid=lam_grid if lam_grid is not None
            else baselines.DEFAULT_RIDGE_GRID)
        payload = {
            "lambdas": {"lambda": model.lam},
            "adjust": adjust,
            "bandwidths_joint": model.spec.bandwidths.tolist(),
            "coefficients": {"beta": model.beta.tolist()},
        }
        return payload, lambda grid: baselines.adjusted_ate(model, grid,
                                                            adjustment)
    if method == "linear2s":
        return {"lambdas": {}, "coefficients": {}}, \
            lambda grid: baselines.linear_two_stage(data, grid)
    raise ValueError(f"unknown method {method!r}")


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True)
@click.option("--method", type=click.Choice(FIT_METHODS), required=True)
@click.option("--lambda1", type=float, default=None,
              help="Stage-1 ridge (kpv) or fixed ridge (pmmr/ridge).")
@click.option("--lambda2", type=float, default=None,
              help="Stage-2 ridge (kpv only).")
@click.option("--lambda-grid", "lambda_grid", type=str, default=None,
              help="Comma-separated ridge grid (pmmr/ridge selection).")
@click.option("--bandwidth", type=str, default="median", show_default=True,
              help="'median' or comma list over A,X,Z,W columns.")
@click.option("--rank", type=int, default=None,
              help="Nystrom landmark count (pmmr-nystrom).")
@click.option("--a-grid", "a_grid_text", type=str, default=None,
              help="min:max:count evaluation grid.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True,
              help="Model JSON path; the curve CSV gets .curve.csv.")
@_cli_errors
def fit(data_path, method, lambda1, lambda2, lambda_grid, bandwidth, rank,
        a_grid_text, seed, out):
    """Fit an estimator and write the model plus its effect curve."""
    data = Dataset.from_csv(data_path)
    specs = _parse_bandwidth(bandwidth, data)
    lam_grid = _parse_grid(lambda_grid) if lambda_grid else None
    a_grid = (_parse_a_grid(a_grid_text) if a_grid_text
              else _default_grid_for(data))
    config = {
        "command": "fit", "method": method, "data": str(data_path),
        "lambda1": lambda1, "lambda2": lambda2,
        "lambda_grid": None if lam_grid is None else lam_grid.tolist(),
        "bandwidth": bandwidth, "rank": rank, "seed": seed,
        "a_grid": a_grid.tolist(), "out": str(out),
    }
    payload, curve_fn = _fit_model(method, data, specs, lambda1, lambda2,
                                   lam_grid, rank, seed)
    curve = curve_fn(a_grid)
    artifact = {
        "proxilearn_version": __version__,
        "config": config,
        "method": method,
        "training_data": {"path": str(data_path),
                          "sha256": _sha256(data_path)},
        "bandwidths": {
            "a": specs.a.bandwidths.tolist(),
            "x": specs.x.bandwidths.tolist(),
            "z": specs.z.bandwidths.tolist(),
            "w": specs.w.bandwidths.tolist(),
        },
        **payload,
    }
    Path(out).write_text(json.dumps(artifact, indent=2))
    curve_path = str(out) + ".curve.csv"
    _write_curve(curve_path, curve)
    _write_meta(out, config)
    click.echo(f"wrote model to {out} and curve to {curve_path}")


def _specs_from_artifact(artifact) -> KernelSpecs:
    bw = artifact["bandwidths"]
    return KernelSpecs(a=KernelSpec(np.array(bw["a"])),
                       x=KernelSpec(np.array(bw["x"])),
                       z=KernelSpec(np.array(bw["z"])),
                       w=KernelSpec(np.array(bw["w"])))


def _curve_from_artifact(artifact, data: Dataset, adjust: Dataset,
                         a_grid: np.ndarray) -> DoCurve:
    method = artifact["method"]
    specs = _specs_from_artifact(artifact)
    if method == "kpv":
        split_seed = artifact["split_seed"]
        sample1, sample2 = data.split_half(split_seed)
        fit1 = kpv.stage1_fit(sample1, specs,
                              artifact["lambdas"]["lambda1"])
        model = kpv.KpvModel(
            stage1=fit1, sample2=sample2,
            alpha=np.array(artifact["coefficients"]["alpha"]),
            lam2=artifact["lambdas"]["lambda2"])
        return kpv.kpv_ate(model, a_grid, adjust.x, adjust.w)
    if method in ("pmmr", "pmmr-nystrom"):
        model = pmmr.PmmrModel(
            sample=data, specs=specs,
            alpha=np.array(artifact["coefficients"]["alpha"]),
            lam=artifact["lambdas"]["lambda"])
        return pmmr.pmmr_ate(model, a_grid, adjust.x, adjust.w)
    if method in ("ridge", "ridge-w", "ridge-wz"):
        adjust_kind = artifact["adjust"]
        blocks = [data.a]
        adjust_blocks = []
        if "w" in adjust_kind:
            blocks.append(data.w)
            adjust_blocks.append(adjust.w)
        if "z" in adjust_kind:
            blocks.append(data.z)
            adjust_blocks.append(adjust.z)
        model = baselines.RidgeModel(
            inputs=np.column_stack(blocks),
            spec=KernelSpec(np.array(artifact["bandwidths_joint"])),
            lam=artifact["lambdas"]["lambda"],
            beta=np.array(artifact["coefficients"]["beta"]))
        adjustment = (np.column_stack(adjust_blocks) if adjust_blocks
                      else np.empty((1, 0)))
        return baselines.adjusted_ate(model, a_grid, adjustment)
    if method == "linear2s":
        return baselines.linear_two_stage(data, a_grid)
    raise ValueError(f"unknown method {method!r}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="The training CSV (hash-checked).")
@click.option("--adjust", "adjust_path", type=click.Path(exists=True),
              default=None, help="Adjustment sample CSV (default: --data).")
@click.option("--a-grid", "a_grid_text", type=str, default=None)
@click.option("--out", type=click.Path(), required=True)
@_cli_errors
def ate(model_path, data_path, adjust_path, a_grid_text, out):
    """Evaluate a fitted model's effect curve on a treatment grid."""
    artifact = json.loads(Path(model_path).read_text())
    recorded = artifact["training_data"]["sha256"]
    actual = _sha256(data_path)
    if recorded != actual:
        raise ValueError(
            f"training data hash mismatch: model was fit on sha256 "
            f"{recorded[:12]}..., got {actual[:12]}..."
        )
    data = Dataset.from_csv(data_path)
    adjust = Dataset.from_csv(adjust_path) if adjust_path else data
    a_grid = (_parse_a_grid(a_grid_text) if a_grid_text
              else np.array(artifact["config"]["a_grid"]))
    curve = _curve_from_artifact(artifact, data, adjust, a_grid)
    _write_curve(out, curve)
    _write_meta(out, {"command": "ate", "model": str(model_path),
                      "data": str(data_path),
                      "adjust": adjust_path and str(adjust_path),
                      "a_grid": a_grid.tolist(), "out": str(out)})
    click.echo(f"wrote curve to {out}")


@main.command()
@click.option("--n", "n_values", type=int, multiple=True,
              default=(500,), show_default=True)
@click.option("--seeds", type=int, default=20, show_default=True,
              help="Number of seeds (0..seeds-1).")
@click.option("--methods", type=str,
              default="kpv,pmmr,ridge,ridge-w,ridge-wz,linear2s",
              show_default=True)
@click.option("--out", type=click.Path(), required=True,
              help="Output prefix; writes <out>.csv and <out>.json.")
@_cli_errors
def experiment(n_values, seeds, methods, out):
    """Reproduce the multi-seed synthetic comparison."""
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    rows = []
    summaries = {}
    for n in n_values:
        result = evaluation.run_table(n, n_seeds=seeds, methods=method_list)
        summaries[str(n)] = result.summary()
        for m in method_list:
            rows.append((m, n, result.mean(m), result.std(m)))
    csv_path = str(out) + ".csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "cmae_mean", "cmae_std"])
        for row in rows:
            writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    json_path = str(out) + ".json"
    config = {"command": "experiment", "n": list(n_values), "seeds": seeds,
              "methods": method_list, "out": str(out)}
    Path(json_path).write_text(json.dumps(
        {"proxilearn_version": __version__, "config": config,
         "results": summaries}, indent=2))
    _write_meta(out, config)
    click.echo(f"wrote {csv_path} and {json_path}")
    for m, n, mean, std in rows:
        click.echo(f"  {m:12s} n={n:5d}  c-MAE {mean:.3f} +- {std:.3f}")


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True)
@click.option("--method", type=click.Choice(("kpv", "pmmr")), required=True)
@click.option("--lambda-grid", "lambda_grid", type=str, default=None)
@click.option("--bandwidth", type=str, default="median", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_cli_errors
def sweep(data_path, method, lambda_grid, bandwidth, seed, out):
    """Write the hyperparameter score curves used for selection."""
    data = Dataset.from_csv(data_path)
    specs = _parse_bandwidth(bandwidth, data)
    rows = []
    if method == "kpv":
        grid1 = (_parse_grid(lambda_grid) if lambda_grid
                 else kpv.DEFAULT_LAMBDA1_GRID)
        grid2 = (_parse_grid(lambda_grid) if lambda_grid
                 else kpv.DEFAULT_LAMBDA2_GRID)
        sample1, sample2 = data.split_half(seed)
        scores1 = kpv.stage1_loo_scores(sample1, specs, grid1)
        lam1 = grid1[int(np.argmin(scores1))]
        fit1 = kpv.stage1_fit(sample1, specs, lam1)
        scores2 = kpv.stage2_loo_scores(fit1, sample2, grid2)
        rows += [("stage1", lam, s) for lam, s in zip(grid1, scores1)]
        rows += [("stage2", lam, s) for lam, s in zip(grid2, scores2)]
    else:
        grid = (_parse_grid(lambda_grid) if lambda_grid
                else pmmr.DEFAULT_LAMBDA_GRID)
        train, validate = data.split_half(seed)
        scores = pmmr.pmmr_validation_scores(train, validate, specs, grid)
        rows += [("validation", lam, s) for lam, s in zip(grid, scores)]
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "lambda", "score"])
        for stage, lam, score in rows:
            writer.writerow([stage, repr(float(lam)), repr(float(score))])
    _write_meta(out, {"command": "sweep", "method": method,
                      "data": str(data_path), "bandwidth": bandwidth,
                      "lambda_grid": lambda_grid, "seed": seed,
                      "out": str(out)})
    click.echo(f"wrote score curves to {out}")


if __name__ == "__main__":
    main()
