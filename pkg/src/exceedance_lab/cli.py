"""Experiment driver.

Subcommands map one-to-one onto library operations:

    simulate        one series replication -> series.csv
    pattern         finite-n exceedance pattern -> pattern.csv / pattern.json
    tail            tail-path ensemble -> tail_paths.csv
    cluster         conditioned cluster ensemble -> clusters.csv + summary
    theta           analytic + Monte Carlo extremal index -> theta.json
    limit-sample    limit-process draws -> limit_pattern.csv
    laplace-compare four-route Laplace comparison -> laplace_compare.*
    lemma1-check    conditional block identity, both sides -> lemma1.*
    diag-M          mixing-condition report -> condition_M.*
    diag-AC         anti-clustering report -> condition_AC.*

Every run writes a manifest.json (config hash, seed, backend, version,
wall time). Exit codes: 0 success, 2 configuration/validation error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as configmod
from . import diagnostics, io, laplace, limit, models, pointproc, risk as riskmod
from . import seeding, tailproc
from ._backend import active_backend
from .config import ConfigError

_CMD_STREAM = {
    "simulate": 1, "pattern": 2, "tail": 3, "cluster": 4, "theta": 5,
    "limit-sample": 6, "laplace-compare": 7, "lemma1-check": 8,
    "diag-M": 9, "diag-AC": 10,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep exit-code contract: usage errors are 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="exceedance-lab",
                description="simulation laboratory for spatio-temporal "
                            "exceedance point processes")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--model", help="inline model spec, e.g. a=0.5,alpha=1")
        sp.add_argument("--risk", choices=["sup-norm", "coordinate", "argmax"])
        sp.add_argument("--mark", choices=["none", "same-as-risk",
                                           "affected-fraction"])
        sp.add_argument("--u", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--window", type=int, help="lag window m (0 = auto)")
        return sp

    sp = add("simulate", "simulate one series replication")
    sp.add_argument("--replication", type=int)
    sp = add("pattern", "build the finite-n exceedance pattern")
    sp.add_argument("--replication", type=int)
    sp.add_argument("--scaling", choices=["analytic", "empirical"])
    sp = add("tail", "sample tail / spectral-tail paths")
    sp.add_argument("--normalization", choices=["tail", "spectral"])
    add("cluster", "sample conditioned clusters by rejection")
    sp = add("theta", "extremal index: analytic and Monte Carlo")
    sp.add_argument("--with-blocks", action="store_true",
                    help="also run the finite-n blocks estimator")
    sp.add_argument("--r-exponent", type=float)
    sp = add("limit-sample", "draw the compound-Poisson limit process")
    sp.add_argument("--samples", type=int)
    sp = add("laplace-compare", "empirical / tail / spectral / superposition")
    sp.add_argument("--test-functions", help="comma-separated names")
    sp = add("lemma1-check", "conditional block identity, both sides")
    sp.add_argument("--r-exponent", type=float)
    sp.add_argument("--v-scales", help="comma-separated scales in (0,1]")
    sp.add_argument("--t-nodes", help="comma-separated times in [0,1]")
    sp.add_argument("--test-functions", help="comma-separated names (first used)")
    sp = add("diag-M", "mixing condition report")
    sp.add_argument("--n-grid", help="comma-separated series lengths")
    sp.add_argument("--r-exponent", type=float)
    sp.add_argument("--test-functions", help="comma-separated names (first used)")
    sp = add("diag-AC", "anti-clustering condition report")
    sp.add_argument("--n-grid", help="comma-separated series lengths")
    sp.add_argument("--m-grid", help="comma-separated lag gaps")
    sp.add_argument("--r-exponent", type=float)
    sp.add_argument("--verdict-tol", type=float)
    return p


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _overrides_from_args(args) -> dict:
    ov = {}
    for key in ("out", "seed", "risk", "mark", "u", "n", "reps", "workers",
                "scaling", "normalization", "replication", "samples"):
        v = getattr(args, key, None)
        if v is not None:
            ov["out_dir" if key == "out" else key] = v
    if getattr(args, "model", None):
        ov["model"] = configmod.parse_model_flag(args.model)
    if getattr(args, "window", None) is not None:
        ov["window"] = args.window
    if getattr(args, "r_exponent", None) is not None:
        ov["r_exponent"] = args.r_exponent
    if getattr(args, "test_functions", None):
        ov["test_functions"] = [s.strip() for s in args.test_functions.split(",")]
    if getattr(args, "n_grid", None):
        ov["n_grid"] = _int_list(args.n_grid)
    if getattr(args, "m_grid", None):
        ov["m_grid"] = _int_list(args.m_grid)
    if getattr(args, "v_scales", None):
        ov["v_scales"] = _float_list(args.v_scales)
    if getattr(args, "t_nodes", None):
        ov["t_nodes"] = _float_list(args.t_nodes)
    return ov


def _window(exp) -> int:
    w = exp.raw.get("window", 0)
    return w if w else tailproc.default_window(exp.model)


def _certify_u(exp):
    cert = riskmod.certify_risk_bound(
        exp.risk, exp.u, probes=4096,
        rng=seeding.philox_stream(exp.seed, seeding.DOMAIN_GENERIC, 0xCE),
        n_sites=exp.model.n_sites)
    if not cert.satisfied:
        raise ConfigError(
            f"u={exp.u} fails the risk bound r^(s)(x) <= u ||x|| "
            f"(worst probed ratio {cert.u_min:.4g}); raise u")
    return cert


def _rng(exp, command: str):
    return seeding.philox_stream(exp.seed, seeding.DOMAIN_GENERIC,
                                 _CMD_STREAM[command])


# --------------------------------------------------------------------------
# subcommand bodies: each returns (outputs, summary)

def _run_simulate(exp, rng):
    series = models.simulate_series(exp.model, exp.n, exp.replication)
    rows = ([i + 1] + [repr(float(v)) for v in series.values[i]]
            for i in range(len(series)))
    out = io.write_csv(exp.out_dir / "series.csv",
                       ["j"] + [f"x_{s}" for s in exp.model.sites], rows,
                       config_hash=exp.config_hash())
    return [out], {"n": exp.n, "burn_in_discarded": series.burn_in_discarded}


def _run_pattern(exp, rng):
    _certify_u(exp)
    series = models.simulate_series(exp.model, exp.n, exp.replication)
    a_n = pointproc.compute_a_n(exp.model, exp.n, exp.scaling)
    pat = pointproc.build_exceedance_pattern(series, exp.risk, exp.u, a_n,
                                             mark=exp.mark)
    h = exp.config_hash()
    out_csv = pat.write_csv(exp.out_dir / "pattern.csv", config_hash=h)
    out_json = pat.write_json(exp.out_dir / "pattern.json", config_hash=h)
    return [out_csv, out_json], {"points": len(pat), "a_n": a_n}


def _path_csv_rows(lags, values, site, sites):
    # lag-major: outer loop over lags for plotting lag profiles
    R = values.shape[0]
    for k, lag in enumerate(lags):
        for r in range(R):
            vec = np.zeros(len(sites))
            vec[site[r]] = values[r, k]
            yield ([int(lag), r] + [repr(float(v)) for v in vec]
                   + [repr(float(values[r, k]))])


def _run_tail(exp, rng):
    m = _window(exp)
    ens = tailproc.sample_path_ensemble(exp.model, m, exp.reps, rng,
                                        exp.normalization)
    cols = ["lag", "path"] + [f"x_{s}" for s in exp.model.sites] + ["norm"]
    out = io.write_csv(exp.out_dir / "tail_paths.csv", cols,
                       _path_csv_rows(ens.lags, ens.values, ens.site,
                                      exp.model.sites),
                       config_hash=exp.config_hash())
    return [out], {"window": m, "normalization": exp.normalization,
                   "paths": exp.reps}


def _run_cluster(exp, rng):
    m = _window(exp)
    ens, labels, tries = tailproc.cluster_ensemble(exp.model, m, exp.reps, rng)
    cols = ["lag", "path"] + [f"x_{s}" for s in exp.model.sites] + ["norm"]
    out = io.write_csv(exp.out_dir / "clusters.csv", cols,
                       _path_csv_rows(ens.lags, ens.values, ens.site,
                                      exp.model.sites),
                       config_hash=exp.config_hash())
    summary = {
        "acceptance_rate": exp.reps / tries,
        "tries": tries,
        "reps": exp.reps,
        "theta_analytic": models.analytic_extremal_index(exp.model),
        "window": m,
        "config_hash": exp.config_hash(),
    }
    out_json = io.write_json(exp.out_dir / "cluster_summary.json", summary)
    return [out, out_json], summary


def _run_theta(exp, rng):
    m = _window(exp)
    est = tailproc.extremal_index_mc(exp.model, reps=exp.reps, rng=rng, m=m)
    payload = {
        "theta_analytic": models.analytic_extremal_index(exp.model),
        "theta_mc": est.value,
        "se": est.std_error,
        "reps": est.reps,
        "window": est.window,
        "config_hash": exp.config_hash(),
    }
    if exp.raw.get("with_blocks"):
        r_n = diagnostics.r_n_schedule(exp.n, exp.r_exponent)
        a_n = pointproc.compute_a_n(exp.model, exp.n)
        blocks = tailproc.extremal_index_blocks(
            models.SeriesEnsemble(exp.model, exp.n,
                                  exp.raw.get("reps_blocks", 200)),
            r_n, a_n)
        payload.update({"theta_blocks": blocks.value,
                        "blocks_se": blocks.std_error,
                        "blocks_numerator": blocks.numerator_count,
                        "blocks_denominator": blocks.denominator_count,
                        "r_n": r_n})
    out = io.write_json(exp.out_dir / "theta.json", payload)
    return [out], payload


def _run_limit_sample(exp, rng):
    _certify_u(exp)
    m = _window(exp)
    cols = (["sample", "t", "site"] + [f"x_{s}" for s in exp.model.sites]
            + (["mark"] if exp.mark is not None else []) + ["cluster"])
    rows = []
    total_points = 0
    for k in range(exp.samples):
        samp = limit.sample_limit_process(exp.model, exp.risk, exp.u, rng,
                                          mark=exp.mark, m=m)
        total_points += len(samp)
        for i in range(len(samp)):
            row = [k, repr(float(samp.point_times[i])),
                   exp.model.sites[int(samp.point_sites[i])]]
            row += [repr(float(v)) for v in samp.point_values[i]]
            if exp.mark is not None:
                row.append(repr(float(samp.point_marks[i])))
            row.append(int(samp.point_cluster[i]))
            rows.append(row)
    out = io.write_csv(exp.out_dir / "limit_pattern.csv", cols, rows,
                       config_hash=exp.config_hash())
    return [out], {"samples": exp.samples, "points": total_points,
                   "window": m}


def _run_laplace_compare(exp, rng):
    _certify_u(exp)
    m = _window(exp)
    records = []
    comparisons = []
    for tf in exp.test_functions:
        routes = [
            laplace.empirical_laplace(exp.model, tf, exp.risk, exp.u,
                                      exp.n, exp.reps,
                                      workers=exp.workers),
            laplace.limit_laplace_tail(exp.model, tf, exp.risk, exp.u,
                                       exp.reps, rng, m=m,
                                       quad_points=exp.quad_points),
            laplace.limit_laplace_spectral(exp.model, tf, exp.risk, exp.u,
                                           exp.reps, rng, m=m,
                                           quad_points=exp.quad_points),
            laplace.superposition_laplace(exp.model, tf, exp.risk, exp.u,
                                          exp.reps, rng, m=m),
        ]
        records.extend(r.to_json_obj(exp.config_hash()) | {"g": tf.name}
                       for r in routes)
        for i in range(len(routes)):
            for j in range(i + 1, len(routes)):
                comb = laplace.combined_se(routes[i], routes[j])
                comparisons.append({
                    "g": tf.name,
                    "pair": f"{routes[i].provenance}|{routes[j].provenance}",
                    "diff": routes[i].value - routes[j].value,
                    "combined_se": comb,
                    "within_3se": bool(abs(routes[i].value - routes[j].value)
                                       <= 3 * comb + 1e-15),
                })
    out_json = io.write_json(exp.out_dir / "laplace_compare.json",
                             {"records": records, "comparisons": comparisons,
                              "config_hash": exp.config_hash()})
    cols = ["g", "provenance", "value", "se", "reps"]
    out_csv = io.write_csv(
        exp.out_dir / "laplace_compare.csv", cols,
        ([r["g"], r["provenance"], repr(r["value"]), repr(r["se"]), r["reps"]]
         for r in records),
        config_hash=exp.config_hash())
    ok = all(c["within_3se"] for c in comparisons)
    return [out_json, out_csv], {"all_within_3se": ok,
                                 "comparisons": len(comparisons)}


def _run_lemma1(exp, rng):
    _certify_u(exp)
    r_n = diagnostics.r_n_schedule(exp.n, exp.r_exponent)
    tf = exp.test_functions[0]
    rows = []
    for v in exp.v_scales:
        for t in exp.t_nodes:
            res = laplace.block_conditional_laplace(
                exp.model, tf, exp.risk, exp.u, v, t, exp.n, r_n,
                reps=exp.reps, rng=rng)
            rows.append({
                "g": tf.name, "v": v, "t": t,
                "left": res.left.value, "left_se": res.left.std_error,
                "right": res.right.value, "right_se": res.right.std_error,
                "diff": res.difference, "combined_se": res.combined_se,
                "accepted_blocks": res.accepted_blocks,
                "within_3se": bool(abs(res.difference) <= 3 * res.combined_se),
            })
    out_json = io.write_json(exp.out_dir / "lemma1.json",
                             {"rows": rows,
                              "config_hash": exp.config_hash()})
    cols = list(rows[0].keys())
    out_csv = io.write_csv(exp.out_dir / "lemma1.csv", cols,
                           ([row[c] for c in cols] for row in rows),
                           config_hash=exp.config_hash())
    return [out_json, out_csv], {"all_within_3se": all(r["within_3se"]
                                                       for r in rows)}


def _report_outputs(exp, report, stem):
    obj = report.to_json_obj()
    obj["config_hash"] = exp.config_hash()
    out_json = io.write_json(exp.out_dir / f"{stem}.json", obj)
    out_csv = io.write_csv(exp.out_dir / f"{stem}.csv",
                           report.csv_columns(), report.csv_rows(),
                           config_hash=exp.config_hash())
    return [out_json, out_csv]


def _run_diag_m(exp, rng):
    tf = exp.test_functions[0]
    report = diagnostics.check_condition_M(
        exp.model, tf, exp.risk, exp.u, exp.n_grid, exp.reps,
        r_exponent=exp.r_exponent)
    return (_report_outputs(exp, report, "condition_M"),
            {"verdict": report.verdict})


def _run_diag_ac(exp, rng):
    tol = exp.raw.get("verdict_tol", 0.01)
    report = diagnostics.check_condition_AC(
        exp.model, exp.u, exp.m_grid, exp.n_grid, exp.reps,
        r_exponent=exp.r_exponent, verdict_tol=tol)
    return (_report_outputs(exp, report, "condition_AC"),
            {"verdict": report.verdict})


_RUNNERS = {
    "simulate": _run_simulate,
    "pattern": _run_pattern,
    "tail": _run_tail,
    "cluster": _run_cluster,
    "theta": _run_theta,
    "limit-sample": _run_limit_sample,
    "laplace-compare": _run_laplace_compare,
    "lemma1-check": _run_lemma1,
    "diag-M": _run_diag_m,
    "diag-AC": _run_diag_ac,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 2
        file_cfg = configmod.load_config_file(args.config) if args.config else None
        ov = _overrides_from_args(args)
        if getattr(args, "with_blocks", False):
            ov["with_blocks"] = True
        if getattr(args, "verdict_tol", None) is not None:
            ov["verdict_tol"] = args.verdict_tol
        exp = configmod.resolve(file_cfg, ov)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    try:
        outputs, summary = _RUNNERS[args.command](exp, _rng(exp, args.command))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0

    manifest = io.build_manifest(
        command=args.command,
        config=exp.raw,
        cfg_hash=exp.config_hash(),
        seed=exp.seed,
        outputs=[str(Path(o).name) for o in outputs],
        wall_time_s=wall,
        backend=active_backend(),
        version=__version__,
    )
    io.write_json(exp.out_dir / "manifest.json", manifest)
    print(io.json_bytes({"command": args.command, "config_hash":
                         exp.config_hash(), **summary}).decode().rstrip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
