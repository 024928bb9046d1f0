"""Aggregate ledger CSVs into mean +- stderr regret curves and log-log slope tables."""

from __future__ import annotations

import re
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

_HEADER = re.compile(r"#\s*config_hash=(\S*)\s+seed=(\S*)")


def read_ledger(path) -> tuple[dict, dict]:
    """Return ``(meta, columns)`` of a ledger CSV written by ``RunLedger.to_csv``."""
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    m = _HEADER.match(first)
    if not m:
        raise ConfigurationError(f"{path} is not a ledger file (missing header)")
    data = np.genfromtxt(path, delimiter=",", skip_header=1, names=True, dtype=float)
    data = np.atleast_1d(data)
    cols = {name: np.asarray(data[name]) for name in data.dtype.names}
    if "cum_regret" not in cols:
        raise ConfigurationError(f"{path} has no cum_regret column")
    return {"config_hash": m.group(1), "seed": m.group(2), "path": str(path)}, cols


def fit_loglog(K, regret) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of ``log regret`` on ``log K``."""
    K = np.asarray(K, float)
    y = np.asarray(regret, float)
    ok = (K > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    x, y = np.log(K[ok]), np.log(y[ok])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def aggregate(paths) -> tuple[list, list]:
    """Curve rows and slope rows for a collection of ledgers."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise ConfigurationError("no ledger files given")
    groups = defaultdict(list)
    for p in sorted(paths):
        meta, cols = read_ledger(p)
        groups[(meta["config_hash"], len(cols["cum_regret"]))].append(cols["cum_regret"])
    curve_rows, finals = [], defaultdict(list)
    for (h, K), runs in sorted(groups.items()):
        R = np.vstack(runs)
        mean = R.mean(axis=0)
        n = R.shape[0]
        stderr = R.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(R.shape[1])
        for e in range(R.shape[1]):
            curve_rows.append((h, K, e, mean[e], stderr[e], n))
        finals[h].append((K, mean[-1]))
    slope_rows = []
    for h, pts in sorted(finals.items()):
        Ks, regs = zip(*pts)
        slope, intercept, r2 = fit_loglog(Ks, regs)
        slope_rows.append((h, len(Ks), slope, intercept, r2))
    return curve_rows, slope_rows


def emit_plot_data(paths, out_dir) -> tuple[Path, Path]:
    """Write ``curves.csv`` and ``slopes.csv`` into ``out_dir``."""
    curve_rows, slope_rows = aggregate(paths)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves, slopes = out / "curves.csv", out / "slopes.csv"
    with open(curves, "w") as fh:
        fh.write("config_hash,K,episode,mean_cum_regret,stderr_cum_regret,n_runs\n")
        for h, K, e, m, s, n in curve_rows:
            fh.write(f"{h},{K},{e},{m:.12g},{s:.12g},{n}\n")
    with open(slopes, "w") as fh:
        fh.write("config_hash,n_K,slope,intercept,r2\n")
        for h, nK, sl, ic, r2 in slope_rows:
            fh.write(f"{h},{nK},{sl:.6g},{ic:.6g},{r2:.6g}\n")
    return curves, slopes


def collect_ledgers(inputs) -> list[Path]:
    """Expand files and directories into the ledger CSVs they contain."""
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out.extend(q for q in sorted(p.glob("*.csv")) if _is_ledger(q))
        elif p.is_file():
            out.append(p)
        else:
            raise ConfigurationError(f"no such ledger file or directory: {p}")
    return out


def _is_ledger(path: Path) -> bool:
    """Regret ledgers only (reward-free gap tables share the header line)."""
    with open(path) as fh:
        return bool(_HEADER.match(fh.readline())) and "cum_regret" in fh.readline()
