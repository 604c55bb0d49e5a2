"""Result emission: delimited tables, JSON summaries and rendered figures.

Every output file is self-describing (config and seed embedded) and
byte-stable: floats are written with shortest round-trip repr, JSON keys
are sorted, and figures carry no timestamps, so re-running an experiment
with the same seed and config reproduces the files exactly.
"""
from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .experiments import ExperimentReport


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_table_csv(path: str, table: dict, header_lines=()):
    """Columnar CSV with a commented provenance header."""
    cols = list(table.keys())
    n = len(np.atleast_1d(table[cols[0]]))
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(np.atleast_1d(table[c])[i]) for c in cols) + "\n")


def write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _header_lines(report: ExperimentReport):
    cfg = " ".join(f"{k}={v}" for k, v in sorted(report.config.items()))
    return [
        f"taeblp {__version__} experiment={report.name} tag={report.check_tag}",
        f"seed={report.seed} replicas={report.replicas} contaminated={report.contaminated}",
        f"config: {cfg}",
    ]


def _save(fig, path):
    fig.savefig(path, dpi=130, metadata={"Software": None})
    plt.close(fig)


def _figure_shock(report, path):
    t = report.tables["histogram"]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(t["k"], t["empirical"], width=0.8, alpha=0.6, label="empirical")
    ax.plot(t["k"], t["oracle"], "k.-", lw=1, ms=4, label="random-walk law")
    ax.set_xlabel("defect displacement k")
    ax.set_ylabel("probability")
    ax.set_title(
        f"shock defect law, TV={report.estimates['tv_distance']:.4f} "
        f"(n={report.replicas - report.contaminated})"
    )
    ax.legend()
    _save(fig, path)


def _figure_characteristic(report, path):
    t = report.tables["identity"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    x = np.arange(len(t["site"]))
    axes[0].bar(x - 0.17, t["var_h"], width=0.34, yerr=3 * np.asarray(t["var_h_se"]),
                label="Var h_i(t)", capsize=3)
    axes[0].bar(x + 0.17, t["identity_rhs"], width=0.34,
                yerr=3 * np.asarray(t["mean_absdist_se"]) * report.estimates["var_omega"],
                label="Var(w) E|Q-i|", capsize=3)
    axes[0].set_xticks(x, [str(s) for s in t["site"]])
    axes[0].set_xlabel("site i")
    axes[0].legend()
    axes[0].set_title("variance/defect identity")
    h = report.tables["q_histogram"]
    axes[1].bar(h["k"], h["empirical"], width=0.8, alpha=0.7)
    axes[1].axvline(report.estimates["target_mean_q"], color="k", ls="--",
                    label=f"V t = {report.estimates['target_mean_q']:.2f}")
    axes[1].set_xlabel("Q(t)")
    axes[1].legend()
    axes[1].set_title("defect displacement")
    _save(fig, path)


def _figure_convexity(report, path):
    t = report.tables["tails"]
    q = report.tables["qlaw"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    axes[0].semilogy(t["m"], t["geometric_bound"], "k--", label="geometric bound")
    axes[0].semilogy(t["m"], np.maximum(t["tail_z"], 1e-8), "o-", ms=4, label="P(z >= m)")
    axes[0].semilogy(t["m"], np.maximum(t["tail_neg_y"], 1e-8), "s-", ms=4, label="P(-y >= m)")
    axes[0].set_xlabel("m")
    axes[0].legend()
    axes[0].set_title("tagged-label tails")
    axes[1].bar(q["k"] - 0.2, q["construction"], width=0.4, label="construction")
    axes[1].bar(q["k"] + 0.2, q["direct"], width=0.4, label="direct pair")
    axes[1].set_xlabel("carrier position")
    axes[1].set_title(f"defect law, TV={report.estimates['tv_qlaw']:.4f}")
    axes[1].legend()
    _save(fig, path)


def _figure_covariance(report, path):
    t = report.tables["profile"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    axes[0].plot(t["site"], t["cov"], ".-", ms=3)
    axes[0].set_xlabel("site n")
    axes[0].set_ylabel("Cov(omega_n(t), omega_0(0))")
    axes[0].set_title("covariance profile")
    axes[1].semilogy(t["site"], np.maximum(np.abs(t["cov"]), 1e-8), ".-", ms=3)
    axes[1].set_xlabel("site n")
    axes[1].set_title(
        f"|cov| decay; Var h = {report.estimates['var_h']:.3f}, "
        f"sum = {report.estimates['cov_sum']:.3f}"
    )
    _save(fig, path)


def _figure_scaling(report, path):
    g = report.tables["variance_growth"]
    o = report.tables["off_characteristic"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    axes[0].errorbar(g["t"], g["var_h"], yerr=3 * np.asarray(g["var_h_se"]), fmt="o-", capsize=3)
    axes[0].set_xscale("log")
    axes[0].set_yscale("log")
    ts = np.asarray(g["t"], dtype=float)
    anchor = g["var_h"][0]
    axes[0].plot(ts, anchor * (ts / ts[0]) ** (2 / 3), "k--", label="slope 2/3")
    axes[0].plot(ts, anchor * (ts / ts[0]), "k:", label="slope 1")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("Var h at characteristic")
    axes[0].set_title(f"fitted slope {report.estimates['loglog_slope']:.3f}")
    axes[0].legend()
    x = np.arange(len(o["v"]))
    axes[1].bar(x - 0.17, o["var_over_t"], width=0.34, label="Var/t")
    axes[1].bar(x + 0.17, o["target_d"], width=0.34, label="Var(w)|V-V_char|")
    axes[1].set_xticks(x, [f"V={v:.2f}" for v in o["v"]])
    axes[1].legend()
    axes[1].set_title("off-characteristic constant")
    _save(fig, path)


_FIGURES = {
    "shock_rw": _figure_shock,
    "characteristic_q": _figure_characteristic,
    "convexity_labels": _figure_convexity,
    "covariance_identity": _figure_covariance,
    "scaling_scan": _figure_scaling,
}

_PRIMARY_TABLE = {
    "shock_rw": "histogram",
    "characteristic_q": "identity",
    "convexity_labels": "tails",
    "covariance_identity": "profile",
    "scaling_scan": "variance_growth",
}


def write_report(report: ExperimentReport, outdir: str) -> dict:
    """Emit CSV table(s), the JSON summary and the rendered figure.

    Returns a dict of the written paths.
    """
    os.makedirs(outdir, exist_ok=True)
    paths = {}
    header = _header_lines(report)
    primary = _PRIMARY_TABLE[report.name]
    for tname, table in report.tables.items():
        suffix = "" if tname == primary else f"_{tname}"
        path = os.path.join(outdir, f"{report.name}{suffix}.csv")
        write_table_csv(path, table, header)
        paths[f"csv:{tname}"] = path
    jpath = os.path.join(outdir, f"{report.name}.json")
    write_json(jpath, report.summary_dict())
    paths["json"] = jpath
    fig_fn = _FIGURES.get(report.name)
    if fig_fn is not None:
        fpath = os.path.join(outdir, f"{report.name}.png")
        fig_fn(report, fpath)
        paths["figure"] = fpath
    return paths
