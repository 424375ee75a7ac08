"""JSON artifacts for fitted paths, bands, hazard fits, and reports.

JSON is the audit format: floats are written with Python's shortest
round-trip representation, so reading an artifact back reproduces every
value bitwise (NaN entries included, using the non-strict JSON extension).
Plot exports are CSV with one row per (threshold, covariate) cell.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .cox import PhFit
from .errors import SchemaError
from .fit import DrCoefficientPath, ThresholdGrid
from .inference import AdmeBand


def write_json(obj: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def path_to_dict(path: DrCoefficientPath, columns: dict | None = None) -> dict:
    m = path.theta.shape[1]
    records = []
    for j, t in enumerate(path.grid.thresholds):
        records.append({
            "t": float(t),
            "theta": path.theta[j].tolist(),
            "converged": bool(path.converged[j]),
            "grad_norm": float(path.grad_norm[j]),
            "iterations": int(path.iterations[j]),
            "clamp_count": int(path.clamp_count[j]),
            "skipped": bool(path.skipped[j]),
            "hessian": path.hessian[j].reshape(m * m).tolist(),
            "fisher": path.fisher[j].reshape(m * m).tolist(),
        })
    out = {"link": path.link_kind, "k": path.k, "path": records}
    if columns is not None:
        out["columns"] = columns
    return out


def path_from_dict(data: dict) -> DrCoefficientPath:
    try:
        records = data["path"]
        link_kind = data["link"]
        k = int(data["k"])
    except KeyError as exc:
        raise SchemaError(f"fit artifact is missing field {exc}") from None
    m = k + 1
    p = len(records)
    theta = np.empty((p, m))
    hessian = np.empty((p, m, m))
    fisher = np.empty((p, m, m))
    ts = np.empty(p)
    iterations = np.empty(p, dtype=np.int64)
    grad_norm = np.empty(p)
    converged = np.empty(p, dtype=bool)
    clamp_count = np.empty(p, dtype=np.int64)
    skipped = np.empty(p, dtype=bool)
    for j, rec in enumerate(records):
        ts[j] = rec["t"]
        theta[j] = rec["theta"]
        hessian[j] = np.asarray(rec["hessian"], dtype=float).reshape(m, m)
        fisher[j] = np.asarray(rec["fisher"], dtype=float).reshape(m, m)
        iterations[j] = rec["iterations"]
        grad_norm[j] = rec["grad_norm"]
        converged[j] = rec["converged"]
        clamp_count[j] = rec["clamp_count"]
        skipped[j] = rec["skipped"]
    return DrCoefficientPath(
        link_kind=link_kind, grid=ThresholdGrid(thresholds=ts), theta=theta,
        hessian=hessian, fisher=fisher, iterations=iterations, grad_norm=grad_norm,
        converged=converged, clamp_count=clamp_count, skipped=skipped,
    )


def band_rows(band: AdmeBand) -> list[dict]:
    rows = []
    p, k = band.adme.shape
    for j in range(p):
        for c in range(k):
            rows.append({
                "t": float(band.grid.thresholds[j]),
                "covariate": c,
                "adme": float(band.adme[j, c]),
                "pw_lo": float(band.pointwise_lo[j, c]),
                "pw_hi": float(band.pointwise_hi[j, c]),
                "sim_lo": float(band.simultaneous_lo[j, c]),
                "sim_hi": float(band.simultaneous_hi[j, c]),
            })
    return rows


def band_to_dict(band: AdmeBand) -> dict:
    return {
        "alpha": band.alpha,
        "n_boot": band.n_boot,
        "seed": band.seed,
        "c_hat": band.c_hat,
        "bands": band_rows(band),
    }


def write_band_csv(band: AdmeBand, path: str) -> None:
    fields = ["t", "covariate", "adme", "pw_lo", "pw_hi", "sim_lo", "sim_hi"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in band_rows(band):
            writer.writerow({f: repr(row[f]) if isinstance(row[f], float) else row[f]
                             for f in fields})


def ph_to_dict(fit: PhFit) -> dict:
    return {
        "beta": fit.beta.tolist(),
        "baseline": [[t, j] for t, j in fit.baseline],
        "converged": fit.converged,
        "iterations": fit.iterations,
        "grad_norm": fit.grad_norm,
    }
