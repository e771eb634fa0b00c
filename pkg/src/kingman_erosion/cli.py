"""Command-line driver: one subcommand per experiment, JSON or CSV output.

Every experiment draws from streams derived from ``--seed`` and the
experiment name, so rerunning a command reproduces its report exactly
(apart from ``wall_time_s``).  The exit status is 1 when an embedded check
fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import branching, bridges, diffusions, erosion, immigration, partitions
from .stats import (
    EmpiricalPmf,
    chi_square_gof,
    chi_square_two_sample,
    ks_two_sample,
    mean_and_stderr,
    split_rng,
    tv_distance,
    wasserstein1,
)

ALPHA_ORACLE = 0.001
ALPHA = 0.01
TRUNC_K = 12
SCALING_MIN_N = 10_000
ANCESTRAL_MIN_REPLICATES = 100_000
DIFFUSION_MIN_REPLICATES = 10_000


@dataclass
class ExperimentConfig:
    experiment: str
    n: int | None = None
    d: float | None = None
    replicates: int | None = None
    seed: int = 0
    dt: float | None = None
    horizon: float | None = None
    K: int | None = None
    out: str | None = None
    format: str = "json"


@dataclass
class Report:
    experiment: str
    params: dict
    seed: int
    results: dict
    tests: list = field(default_factory=list)
    table: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def check(self, name: str, statistic: float, p_value: float | None, passed: bool) -> None:
        self.tests.append(
            {"name": name, "statistic": _num(statistic), "p_value": _num(p_value), "pass": bool(passed)}
        )

    @property
    def ok(self) -> bool:
        return all(t["pass"] for t in self.tests)

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
            "results": self.results,
            "tests": self.tests,
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.table:
            w = csv.DictWriter(buf, fieldnames=list(self.table[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(self.table)
        return buf.getvalue()


def _num(x):
    """JSON-safe number: infinities and NaN become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _pmf_rows(name: str, pmf_obs, pmf_ref=None) -> list[dict]:
    rows = []
    for k, p in enumerate(pmf_obs):
        row = {"k": k + 1, name: float(p)}
        if pmf_ref is not None:
            row["reference"] = float(pmf_ref[k]) if k < len(pmf_ref) else 0.0
        rows.append(row)
    return rows


def _with_tail(p: np.ndarray, k: int) -> np.ndarray:
    """First ``k`` entries plus the remaining mass in one extra cell."""
    p = np.asarray(p, dtype=float)
    head = np.zeros(k)
    head[: min(k, p.size)] = p[:k]
    return np.append(head, max(0.0, 1.0 - head.sum()))


def _rng(cfg: ExperimentConfig, *stream) -> np.random.Generator:
    return split_rng(cfg.seed, cfg.experiment, *stream)


# --------------------------------------------------------------------------
# experiments


def _erosion_stationary(cfg, rep):
    p = erosion.ErosionParams(cfg.n, cfg.d)
    labels = erosion.sample_stationary_labels(p, cfg.replicates, _rng(cfg))
    m = partitions.block_counts(labels)
    mean, se = mean_and_stderr(m)
    counts = np.bincount(m, minlength=cfg.n + 1)[1:]
    rep.results.update(
        mean_block_count=mean,
        stderr=se,
        mean_over_sqrt_n=mean / math.sqrt(cfg.n),
        sqrt_2d=math.sqrt(2 * cfg.d),
        block_count_pmf=(counts / counts.sum()).tolist(),
    )
    rep.table = _pmf_rows("block_count_freq", counts / counts.sum())


def _oracle_check(cfg, rep):
    p = erosion.ErosionParams(cfg.n, cfg.d)
    pi = erosion.stationary_pmf_small_n(p)
    samplers = {
        "coupling": lambda rng: erosion.sample_stationary_labels(p, cfg.replicates, rng),
        "flow": lambda rng: bridges.sample_flow_labels(cfg.n, cfg.d, cfg.replicates, rng),
    }
    rows = {str(q): {"partition": q.to_json(), "oracle": w} for q, w in pi.items()}
    for name, draw in samplers.items():
        e = EmpiricalPmf(partitions.partition_counts(draw(_rng(cfg, name))))
        res = chi_square_gof(e, pi)
        rep.results[f"{name}_tv"] = tv_distance(e.pmf(), pi)
        rep.check(f"{name} vs generator oracle (chi-square)", res.statistic, res.p_value, res.p_value > ALPHA_ORACLE)
        for q in pi:
            rows[str(q)][name] = e[q] / e.total
    rep.table = sorted(rows.values(), key=lambda r: r["partition"])


def _block_size_dist(cfg, rep):
    p = erosion.ErosionParams(cfg.n, cfg.d)
    labels = erosion.sample_stationary_labels(p, cfg.replicates, _rng(cfg))
    hist = partitions.pooled_block_sizes(labels)[1:]
    mu = hist / hist.sum()
    ref = branching.total_progeny_pmf_array(max(TRUNC_K, mu.size))
    tv = tv_distance(_with_tail(mu, TRUNC_K), _with_tail(ref, TRUNC_K))
    rep.results.update(
        blocks_observed=int(hist.sum()),
        max_block_size=int(np.flatnonzero(hist).max() + 1),
        block_size_freq=mu[:TRUNC_K].tolist(),
        progeny_pmf=ref[:TRUNC_K].tolist(),
        tv_truncated=tv,
    )
    if cfg.n >= SCALING_MIN_N:
        rep.check(f"TV to total-progeny law (k<={TRUNC_K}) < 0.02", tv, None, tv < 0.02)
    rep.table = _pmf_rows("block_size_freq", mu, ref)


def _block_count_scaling(cfg, rep):
    target = math.sqrt(2 * cfg.d)
    labels = erosion.sample_stationary_labels(erosion.ErosionParams(cfg.n, cfg.d), cfg.replicates, _rng(cfg, "erosion"))
    m, se = mean_and_stderr(partitions.block_counts(labels) / math.sqrt(cfg.n))
    (row,) = immigration.rescaled_block_count_check([cfg.n], cfg.d, cfg.replicates, _rng(cfg, "immigration"))
    rep.results.update(
        target=target,
        erosion_mean_over_sqrt_n=m,
        erosion_stderr=se,
        immigration_mean_over_sqrt_n=row.mean_scaled,
        immigration_stderr=row.stderr,
    )
    rep.table = [
        {"sampler": "erosion", "n": cfg.n, "d": cfg.d, "mean_over_sqrt_n": m, "stderr": se, "target": target},
        {"sampler": "immigration", "n": cfg.n, "d": cfg.d, "mean_over_sqrt_n": row.mean_scaled, "stderr": row.stderr, "target": target},
    ]
    if cfg.n >= SCALING_MIN_N:
        for name, v in (("erosion", m), ("immigration", row.mean_scaled)):
            rel = abs(v / target - 1)
            rep.check(f"{name} mean/sqrt(n) within 5% of sqrt(2d)", rel, None, rel < 0.05)


def _immigration_stationary(cfg, rep):
    path = immigration.simulate_block_count(cfg.d, cfg.horizon, 1, _rng(cfg))
    nu = immigration.block_count_stationary_pmf(cfg.d)
    occ = path.occupancy(max(nu.size, int(path.values.max())))
    ref = np.zeros(occ.size)
    ref[: nu.size] = nu
    ref /= ref.sum()
    tv = tv_distance(occ / occ.sum(), ref)
    db = immigration.detailed_balance_error(cfg.d, 50)
    rep.results.update(jumps=len(path.times) - 1, tv_occupancy=tv, detailed_balance_max_rel_error=db)
    rep.check("occupancy TV to closed-form law < 0.02", tv, None, tv < 0.02)
    rep.check("detailed balance to 1e-12 (k<=50)", db, None, db < 1e-12)
    rep.table = _pmf_rows("occupancy", occ, ref)


def _ancestral_progeny(cfg, rep):
    d_imm = cfg.n * cfg.d
    batch = immigration.simulate_ancestral_batch(2, d_imm, cfg.replicates, _rng(cfg))
    s1, s2 = batch.sizes(0), batch.sizes(1)
    counts = np.bincount(np.minimum(s1, TRUNC_K + 1).astype(np.int64), minlength=TRUNC_K + 2)[1:]
    emp = counts / counts.sum()
    ref = _with_tail(branching.total_progeny_pmf_array(TRUNC_K), TRUNC_K)
    tv = tv_distance(emp, ref)
    finite = np.isfinite(s1) & np.isfinite(s2)
    rho = float(np.corrcoef(s1[finite], s2[finite])[0, 1]) if finite.sum() > 2 else math.nan
    rep.results.update(
        d_imm=d_imm,
        immortal_fraction=float(np.mean(~np.isfinite(s1))),
        excluded_fraction=batch.excluded_fraction,
        initial_rejection_rate=batch.rejection_rate,
        tv_truncated=tv,
        correlation_finite_pairs=_num(rho),
    )
    rep.table = _pmf_rows("type1_size_freq", emp, ref)
    if cfg.n >= SCALING_MIN_N and cfg.replicates >= ANCESTRAL_MIN_REPLICATES:
        rep.check(f"type-1 size TV to total-progeny law (k<={TRUNC_K}) < 0.03", tv, None, tv < 0.03)
        rep.check("|correlation of two block sizes| < 0.02", abs(rho), None, abs(rho) < 0.02)
        ex = batch.excluded_fraction
        rep.check("runs over the event budget < 0.5%", ex, None, ex < 0.005)


def _frequencies_diffusion(cfg, rep):
    z = diffusions.sample_unsorted_frequencies(cfg.K, cfg.d, cfg.replicates, _rng(cfg), cfg.dt, cfg.horizon)
    zs = -np.sort(-z, axis=1)
    m1, se1 = mean_and_stderr(z[:, 0])
    target = 1.0 / (cfg.d + 1.0)
    missing = 1.0 - z.sum(axis=1)
    rep.results.update(
        mean_unsorted_z1=m1,
        stderr_unsorted_z1=se1,
        target_z1=target,
        mean_sorted=zs.mean(axis=0)[: min(cfg.K, 10)].tolist(),
        mean_missing_mass=float(missing.mean()),
    )
    rep.table = [{"rank": i + 1, "mean_sorted_z": float(v)} for i, v in enumerate(zs.mean(axis=0))]
    if cfg.replicates >= DIFFUSION_MIN_REPLICATES:
        dev = abs(m1 - target)
        rep.check("mean unsorted z_1 within 0.01 of 1/(d+1)", dev, None, dev < 0.01)


def _frequencies_bridges(cfg, rep):
    labels = bridges.sample_flow_labels(cfg.n, cfg.d, cfg.replicates, _rng(cfg))
    top = partitions.top_frequencies(labels, 10)
    m = partitions.block_counts(labels)
    rep.results.update(mean_block_count=float(m.mean()), mean_sorted_frequencies=top.mean(axis=0).tolist())
    rep.table = [{"rank": i + 1, "mean_frequency": float(v)} for i, v in enumerate(top.mean(axis=0))]
    if cfg.n <= erosion.ORACLE_MAX_N:
        pi = erosion.stationary_pmf_small_n(erosion.ErosionParams(cfg.n, cfg.d))
        e = EmpiricalPmf(partitions.partition_counts(labels))
        res = chi_square_gof(e, pi)
        rep.check("flow vs generator oracle (chi-square)", res.statistic, res.p_value, res.p_value > ALPHA_ORACLE)


def _cross_validate(cfg, rep):
    p = erosion.ErosionParams(cfg.n, cfg.d)
    a = erosion.sample_stationary_labels(p, cfg.replicates, _rng(cfg, "coupling"))
    b = bridges.sample_flow_labels(cfg.n, cfg.d, cfg.replicates, _rng(cfg, "flow"))

    def joint(lab):
        return EmpiricalPmf.from_samples(
            zip(partitions.block_counts(lab).tolist(), partitions.size_of_block_containing_first(lab).tolist())
        )

    ja, jb = joint(a), joint(b)
    res = chi_square_two_sample(ja, jb)
    rep.results.update(
        coupling_mean_blocks=float(partitions.block_counts(a).mean()),
        flow_mean_blocks=float(partitions.block_counts(b).mean()),
        dof=res.dof,
    )
    rep.check("joint (blocks, size of block of 1): two-sample chi-square", res.statistic, res.p_value, res.p_value > ALPHA)
    keys = sorted(set(ja.counts) | set(jb.counts))
    rep.table = [
        {"block_count": k[0], "size_of_first": k[1], "coupling": ja[k] / ja.total, "flow": jb[k] / jb.total}
        for k in keys
    ]


def _theorem1_compare(cfg, rep):
    zu = diffusions.sample_unsorted_frequencies(cfg.K, cfg.d, cfg.replicates, _rng(cfg, "hierarchy"), cfg.dt, cfg.horizon)
    z = -np.sort(-zu, axis=1)
    m1, se1 = mean_and_stderr(zu[:, 0])
    labels = erosion.sample_stationary_labels(erosion.ErosionParams(cfg.n, cfg.d), cfg.replicates, _rng(cfg, "coupling"))
    f = partitions.top_frequencies(labels, 2)
    ks1, p1 = ks_two_sample(z[:, 0], f[:, 0])
    ks2, p2 = ks_two_sample(z[:, 1], f[:, 1])
    w1 = wasserstein1(z[:, 0], f[:, 0])
    rep.results.update(
        hierarchy_mean_largest=float(z[:, 0].mean()),
        erosion_mean_largest=float(f[:, 0].mean()),
        hierarchy_mean_second=float(z[:, 1].mean()),
        erosion_mean_second=float(f[:, 1].mean()),
        wasserstein1_largest=w1,
        mean_unsorted_z1=m1,
        stderr_unsorted_z1=se1,
        target_z1=1.0 / (cfg.d + 1.0),
    )
    rep.check("largest frequency KS", ks1, p1, p1 > ALPHA)
    rep.check("second largest frequency KS", ks2, p2, p2 > ALPHA)
    rep.check("largest frequency Wasserstein-1 < 0.02", w1, None, w1 < 0.02)
    if cfg.replicates >= DIFFUSION_MIN_REPLICATES:
        dev = abs(m1 - 1.0 / (cfg.d + 1.0))
        rep.check("mean unsorted z_1 within 0.01 of 1/(d+1)", dev, None, dev < 0.01)
    qs = np.linspace(0.0, 1.0, 101)
    rep.table = [
        {"quantile": float(q), "hierarchy_largest": float(a), "erosion_largest": float(b)}
        for q, a, b in zip(qs, np.quantile(z[:, 0], qs), np.quantile(f[:, 0], qs))
    ]


@dataclass(frozen=True)
class Experiment:
    run: Callable
    defaults: dict
    uses: tuple


EXPERIMENTS: dict[str, Experiment] = {
    "erosion-stationary": Experiment(_erosion_stationary, dict(n=100, d=1.0, replicates=1000), ("n", "d", "replicates")),
    "oracle-check": Experiment(_oracle_check, dict(n=3, d=1.0, replicates=100_000), ("n", "d", "replicates")),
    "block-size-dist": Experiment(_block_size_dist, dict(n=20_000, d=1.0, replicates=500), ("n", "d", "replicates")),
    "block-count-scaling": Experiment(_block_count_scaling, dict(n=10_000, d=1.0, replicates=200), ("n", "d", "replicates")),
    "immigration-stationary": Experiment(_immigration_stationary, dict(d=1.0, horizon=1e5), ("d", "horizon")),
    "ancestral-progeny": Experiment(_ancestral_progeny, dict(n=10_000, d=1.0, replicates=100_000), ("n", "d", "replicates")),
    "frequencies-diffusion": Experiment(
        _frequencies_diffusion, dict(d=1.0, replicates=10_000, dt=1e-3, K=30), ("d", "replicates", "dt", "horizon", "K")
    ),
    "frequencies-bridges": Experiment(_frequencies_bridges, dict(n=50, d=1.0, replicates=10_000), ("n", "d", "replicates")),
    "cross-validate-samplers": Experiment(_cross_validate, dict(n=50, d=1.0, replicates=10_000), ("n", "d", "replicates")),
    "theorem1-compare": Experiment(
        _theorem1_compare,
        dict(n=5000, d=1.0, replicates=10_000, dt=1e-3, K=30),
        ("n", "d", "replicates", "dt", "horizon", "K"),
    ),
}


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill unset parameters with the experiment's defaults and validate them."""
    if cfg.experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}")
    exp = EXPERIMENTS[cfg.experiment]
    vals = asdict(cfg)
    for k, v in exp.defaults.items():
        if vals[k] is None:
            vals[k] = v
    if "horizon" in exp.uses and vals["horizon"] is None:
        vals["horizon"] = diffusions.default_horizon(vals["d"])
    out = ExperimentConfig(**vals)
    if out.n is not None and out.n < 1:
        raise ValueError("--n must be positive")
    if out.d is not None and not out.d > 0:
        raise ValueError("--d must be positive")
    if out.replicates is not None and out.replicates < 1:
        raise ValueError("--replicates must be positive")
    if out.K is not None and out.K < 1:
        raise ValueError("--K must be positive")
    if out.dt is not None and not out.dt > 0:
        raise ValueError("--dt must be positive")
    if out.format not in ("json", "csv"):
        raise ValueError("--format must be json or csv")
    return out


def run(cfg: ExperimentConfig) -> Report:
    cfg = resolve(cfg)
    exp = EXPERIMENTS[cfg.experiment]
    params = {k: getattr(cfg, k) for k in exp.uses}
    rep = Report(cfg.experiment, params, int(cfg.seed), {})
    t0 = time.perf_counter()
    exp.run(cfg, rep)
    rep.wall_time_s = round(time.perf_counter() - t0, 3)
    return rep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kingman-erosion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=float)
        p.add_argument("--replicates", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--K", type=int)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(**vars(args))
    try:
        rep = run(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = rep.to_json() if cfg.format == "json" else rep.to_csv()
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    for t in rep.tests:
        if not t["pass"]:
            print(f"check failed: {t['name']} (statistic {t['statistic']})", file=sys.stderr)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
