"""CSV / SVG / JSON output of convergence studies.

Numbers are written with ``repr`` so a re-read CSV reproduces every value
bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from ..errors import UsageError
from ..rng import NORMAL_METHOD
from .config import to_ini
from .plotting import convergence_figure, save_svg
from .study import ConvergenceReport, TrialRow

TRIALS_HEADER = ["method", "K", "n", "trial", "value", "std_err", "seed"]
AGGREGATE_HEADER = ["method", "K", "n", "mean", "spread", "ref", "ref_err"]
ERRORS_HEADER = ["method", "k", "n", "error", "combined_se", "in_fit"]
FITS_HEADER = ["method", "k", "slope", "used_n", "excluded_n", "note"]


def _num(v) -> str:
    return repr(float(v))


def _write(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def trial_rows(report: ConvergenceReport):
    return [
        [r.method, _num(r.K), r.n, r.trial, _num(r.value), _num(r.std_err), r.seed]
        for r in report.rows
    ]


def aggregate_rows_out(report: ConvergenceReport):
    out = []
    for (method, K, n), a in report.aggregates().items():
        ref, ref_err = report.refs.get(K, (float("nan"), float("nan")))
        out.append([method, _num(K), n, _num(a.mean), _num(a.spread), _num(ref), _num(ref_err)])
    return out


def fit_summary(report: ConvergenceReport):
    """Per-method error series and order fits; methods whose fit is not
    possible carry ``slope = nan`` and the reason in ``note``."""
    series, fits = [], []
    for method in report.methods:
        try:
            s = report.errors(method)
        except UsageError as exc:
            fits.append([method, "nan", "nan", "", "", str(exc)])
            continue
        series.append(s)
        try:
            f = report.fit(method)
            fits.append([method, _num(s.k), _num(f.slope), " ".join(map(str, f.used)),
                         " ".join(map(str, f.excluded)), f.note])
        except UsageError as exc:
            fits.append([method, _num(s.k), "nan", "", "", str(exc)])
    return series, fits


def emit(report: ConvergenceReport, fmt: str, path) -> list:
    """Write ``fmt`` output.  ``csv``: ``path`` is a directory receiving
    trials.csv, aggregate.csv, errors.csv and fits.csv.  ``svg``: ``path``
    is the figure file.  ``json``: run metadata file.  Returns written paths."""
    path = Path(path)
    if fmt == "csv":
        path.mkdir(parents=True, exist_ok=True)
        _write(path / "trials.csv", TRIALS_HEADER, trial_rows(report))
        _write(path / "aggregate.csv", AGGREGATE_HEADER, aggregate_rows_out(report))
        series, fits = fit_summary(report)
        err_rows = []
        fit_by_method = {f[0]: f for f in fits}
        for s in series:
            used = set(fit_by_method[s.method][3].split())
            for n, e, se in zip(s.n, s.error, s.se):
                err_rows.append([s.method, _num(s.k), n, _num(e), _num(se), str(n) in used])
        _write(path / "errors.csv", ERRORS_HEADER, err_rows)
        _write(path / "fits.csv", FITS_HEADER, fits)
        return [path / f for f in ("trials.csv", "aggregate.csv", "errors.csv", "fits.csv")]
    if fmt == "svg":
        series, _ = fit_summary(report)
        cfg = report.config
        title = f"d={cfg.d}, {cfg.payoff}, T={cfg.T:g}, trials={cfg.trials}"
        save_svg(convergence_figure(series, title=title), path)
        return [path]
    if fmt == "json":
        meta = {
            "seed": report.config.seed,
            "normals": NORMAL_METHOD,
            "argmax_tie_break": "smallest K",
            "complete": report.complete,
            "failures": report.failures,
            "config": to_ini(report.config),
        }
        try:
            path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from None
        return [path]
    raise UsageError(f"unknown output format {fmt!r}; use csv, svg or json")


def read_trials_csv(path) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != TRIALS_HEADER:
            raise UsageError(f"unexpected trials header {header}")
        return [
            TrialRow(m, float(K), int(n), int(t), float(v), float(se), int(seed))
            for m, K, n, t, v, se, seed in rd
        ]


def read_aggregate_csv(path) -> dict:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != AGGREGATE_HEADER:
            raise UsageError(f"unexpected aggregate header {header}")
        return {
            (m, float(K), int(n)): tuple(float(v) for v in rest)
            for m, K, n, *rest in rd
        }
