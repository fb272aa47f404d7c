"""Command line entry point: ``admkit simulate|fit|oracle|reliability --config PATH``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import abcmcmc, reliability as rel
from .config import ConfigError, RunConfig, parse_config
from .damage import HOURS_PER_YEAR
from .errors import DomainError, IntegrationError, NumericalError, SolverError
from .hier import THETA_FIELDS, PriorSpec, ProposalSpec, log_prior
from .loads import assemble_load, sample_load_path, write_load_path
from .simulate import kde_log_likelihood, read_dataset, simulate_failure_times, write_dataset
from .streams import name_key, substream

log = logging.getLogger("admkit")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_SIM = name_key("simulate")
_FIT = name_key("fit")
_ORACLE = name_key("oracle")
_RELIABILITY = name_key("reliability")
_EXAMPLE = name_key("example-path")


def _read_datasets(cfg: RunConfig):
    return [read_dataset(cfg.base / p) for p in cfg["datasets"]]


def cmd_simulate(cfg: RunConfig) -> int:
    theta = cfg.theta("theta")
    out_dir = cfg.path("output.dir")
    for i, (name, test) in enumerate(cfg["datasets"]):
        sample = simulate_failure_times(theta, test, substream(cfg.seed, _SIM, i))
        path = write_dataset(sample, out_dir / name)
        b = sample.breakdown()
        print(f"{path}: N={sample.n_total} ramp={b['ramp']} constant={b['constant']} censored={b['censored']}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    datasets = _read_datasets(cfg)
    theta0 = cfg.theta("theta0")
    seed = int(substream(cfg.seed, _FIT).integers(2**63))
    base = abcmcmc.ChainConfig(
        datasets=datasets, delta=cfg["chain.delta"] or 1.0, burn_in=cfg["chain.burn_in"],
        thin=cfg["chain.thin"], n_draws=cfg["chain.n_draws"],
        proposal=ProposalSpec(tuple(cfg["proposal.diag"])), seed=seed, theta0=theta0,
        standardize=cfg["chain.standardize"], pilot_size=cfg["chain.pilot_size"], prior=PriorSpec())
    header = {"config": cfg.echo()}
    if cfg["chain.delta"] is None:
        cands = cfg["calibration.candidates"]
        if cands is None:
            lo, hi, count = cfg["calibration.sweep"]
            cands = abcmcmc.sweep_candidates(lo, hi, int(count))
        cal = abcmcmc.calibrate_bandwidth(cands, cfg["calibration.pilot_iterations"], base,
                                          target_rate=cfg["calibration.target_rate"])
        base.delta = cal.delta
        header["calibration"] = {"rates": [[d, r] for d, r in sorted(cal.rates.items())],
                                 "delta": cal.delta, "warning": cal.warning}
        print(f"calibrated delta={cal.delta:.6g} warning={cal.warning}")
    result = abcmcmc.run_chain(base)
    path = abcmcmc.write_chain(result, cfg.path("output.chain"), header)
    print(f"{path}: {len(result.draws)} draws, acceptance {result.acceptance_rate:.4%}, "
          f"failed simulations {result.n_failed_sims}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    datasets = _read_datasets(cfg)
    _, rows = abcmcmc.read_chain(cfg.path("chain"))
    picks = cfg["oracle.draws"]
    if picks is not None:
        bad = [i for i in picks if not 0 <= i < len(rows)]
        if bad:
            raise ConfigError(f"oracle.draws out of range: {bad}")
        rows = [rows[i] for i in picks]
    n_sim = cfg["oracle.n_sim"]

    def score(theta):
        # same simulation stream for every theta, so rankings are not driven by noise
        ll = sum(kde_log_likelihood(d, theta, n_sim, substream(cfg.seed, _ORACLE, i))
                 for i, d in enumerate(datasets))
        return ll, ll + log_prior(theta)

    table = []
    for j, row in enumerate(rows):
        ll, lp = score(row["theta"])
        table.append((ll, lp, str(j), row["iteration"], row["theta"]))
    table.sort(key=lambda r: (-r[0] if math.isfinite(r[0]) else math.inf, int(r[2])))
    true_theta = cfg.theta("theta_true")
    if true_theta is not None:
        ll, lp = score(true_theta)
        table.insert(0, (ll, lp, "true", "", true_theta))

    path = cfg.path("output.table")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "draw", "iteration", *THETA_FIELDS, "ll", "log_post"])
        rank = 0
        for ll, lp, label, it, theta in table:
            if label != "true":
                rank += 1
            w.writerow([0 if label == "true" else rank, label, it,
                        *(repr(v) for v in theta.as_array().tolist()), repr(float(ll)), repr(float(lp))])
    print(f"{path}: {len(table)} rows")
    return EXIT_OK


def _even_subset(items: list, n: int | None) -> list:
    if n is None or n >= len(items):
        return items
    idx = np.unique(np.round(np.linspace(0, len(items) - 1, n)).astype(int))
    return [items[i] for i in idx]


def cmd_reliability(cfg: RunConfig) -> int:
    params = cfg.load_params()
    if cfg["chain"] is not None:
        _, rows = abcmcmc.read_chain(cfg.path("chain"))
        if not rows:
            raise ConfigError("chain file holds no draws")
        draws = _even_subset([r["theta"] for r in rows], cfg["reliability.n_draws"])
    else:
        draws = [cfg.theta("theta")]
    horizon = cfg["reliability.horizon_years"] * HOURS_PER_YEAR
    n_rep = cfg["reliability.n_rep"]
    seed = int(substream(cfg.seed, _RELIABILITY).integers(2**63))
    curves = rel.phi_beta_curves(draws, cfg["reliability.phi_grid"], n_rep, horizon, seed, params,
                                 cfg.threads, cfg["reliability.coupled"], cfg["reliability.block"])
    path = rel.write_curves(curves, cfg.path("output.curves"))
    print(f"{path}: {len(draws)} draws x {n_rep} replicates")
    for mode in rel.MODES:
        print(mode, " ".join(f"{p.phi:g}:{p.beta:.3f}" for p in curves[mode]))

    kd, failures = [], []
    for b in cfg["reliability.beta_targets"]:
        try:
            kd.append(rel.k_d_factor(curves[rel.DOL], curves[rel.NO_DOL], b, rng=seed))
        except DomainError as exc:
            failures.append(str(exc))
    path = rel.write_kd(kd, cfg.path("output.kd"))
    for r in kd:
        print(f"beta={r.beta_target:g} phi1={r.phi1:.4f} phi2={r.phi2:.4f} K_D={r.k_d:.4f} "
              f"({r.interval[0]:.4f}, {r.interval[1]:.4f}) [{r.method}]")
    print(path)

    phi = cfg["reliability.example_phi"]
    if phi is not None:
        if cfg.path("output.load_path") is not None:
            lp = sample_load_path(params, horizon, substream(seed, _EXAMPLE))
            print(write_load_path(assemble_load(lp, phi, params), horizon, cfg.path("output.load_path")))
        if cfg.path("output.failure_times") is not None:
            times = rel.simulate_time_to_failure(draws, phi, n_rep, horizon, seed, params, cfg.threads,
                                                 cfg["reliability.block"])
            out = cfg.path("output.failure_times")
            out.parent.mkdir(parents=True, exist_ok=True)
            with out.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["draw", "replicate", "time_hours"])
                for i, row in enumerate(times):
                    for j, t in enumerate(row):
                        w.writerow([i, j, repr(float(t))])
            print(out)
    if failures:
        raise DomainError("K_D not computed: " + "; ".join(failures))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "oracle": cmd_oracle, "reliability": cmd_reliability}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="admkit", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (outputs do not depend on it)")
    parser.add_argument("--seed", type=int, default=None, help="root seed, overrides the config's 'seed'")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = parse_config(args.command, args.config, args.seed, args.threads)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, SolverError, NumericalError, IntegrationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
