"""Batch experiment driver.

Subcommands compute functional tables, deficit sweeps, Poincare constants,
deterministic SVG plots, and the full verification suite from a TOML
manifest (or the built-in default experiment).  All CSV floats are printed
with 12 significant digits; identical config and build produce bit-identical
artifacts.  Exit codes: 0 all asserted inequalities pass, 1 a check failed,
2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .grids import CapabilityError, GridDensity, StamlabError, ValidationError
from .config import (
    ExperimentConfig,
    default_config,
    load_config,
    scaled_resolution,
)
from .functionals import functional_report, rel_fisher_gauss
from .poincare import poincare_constant
from .deficits import entropy_deficit, info_deficit, _presmooth
from .dynamics import ou_evolve
from .suite import build_densities, run_suite

FUNCTIONAL_FIELDS = (
    "ent_L",
    "fisher_L",
    "rel_entropy",
    "rel_fisher",
    "k_L",
    "k_gauss",
    "m_gauss",
)

DEFICIT_HEADER = (
    "pair",
    "lambda",
    "type",
    "deficit",
    "bound",
    "margin",
    "c0",
    "c1",
    "err",
    "bound_valid",
    "presmooth_t",
)

LEMMA_HEADER = ("group", "check", "subject", "passed", "asserted", "margin", "err", "detail")

POINCARE_HEADER = ("name", "family", "c", "gap", "residual", "refinement_ratio")


def _num(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return "%.12g" % x


def _open_csv(out_dir: Path, name: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    return path, path.open("w", newline="")


# ---------------------------------------------------------------------------
# artifact writers


def write_functionals_csv(out_dir: Path, rows: list) -> Path:
    """rows: (name, family, FunctionalReport)."""
    header = (
        ["name", "family"]
        + list(FUNCTIONAL_FIELDS)
        + [f + "_err" for f in FUNCTIONAL_FIELDS]
        + [f + "_finite" for f in FUNCTIONAL_FIELDS]
    )
    path, fh = _open_csv(out_dir, "functionals.csv")
    with fh:
        w = csv.writer(fh)
        w.writerow(header)
        for name, family, rep in rows:
            w.writerow(
                [name, family]
                + [_num(getattr(rep, f)) for f in FUNCTIONAL_FIELDS]
                + [_num(rep.err[f]) for f in FUNCTIONAL_FIELDS]
                + [str(rep.finite_mask[f]) for f in FUNCTIONAL_FIELDS]
            )
    return path


def write_deficits_csv(out_dir: Path, rows: list) -> Path:
    """rows: (pair_label, DeficitReport)."""
    path, fh = _open_csv(out_dir, "deficits.csv")
    with fh:
        w = csv.writer(fh)
        w.writerow(DEFICIT_HEADER)
        for label, rep in rows:
            w.writerow(
                [
                    label,
                    _num(rep.lam),
                    rep.kind,
                    _num(rep.deficit),
                    _num(rep.bound),
                    _num(rep.margin),
                    _num(rep.c0),
                    _num(rep.c1),
                    _num(rep.err),
                    str(rep.bound_valid),
                    _num(rep.presmooth_t),
                ]
            )
    return path


def write_lemmas_csv(out_dir: Path, items) -> Path:
    path, fh = _open_csv(out_dir, "lemmas.csv")
    with fh:
        w = csv.writer(fh)
        w.writerow(LEMMA_HEADER)
        for it in items:
            w.writerow(
                [
                    it.group,
                    it.check,
                    it.subject,
                    str(it.passed),
                    str(it.asserted),
                    _num(it.margin),
                    _num(it.err),
                    it.detail,
                ]
            )
    return path


def write_poincare_csv(out_dir: Path, rows: list) -> Path:
    """rows: (name, family, PoincareEstimate)."""
    path, fh = _open_csv(out_dir, "poincare.csv")
    with fh:
        w = csv.writer(fh)
        w.writerow(POINCARE_HEADER)
        for name, family, est in rows:
            w.writerow(
                [name, family, _num(est.c), _num(est.gap), _num(est.residual),
                 _num(est.refinement_ratio)]
            )
    return path


# ---------------------------------------------------------------------------
# plots


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "stamlab"
    return plt


def _save_svg(fig, out_dir: Path, name: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    # a pinned Date keeps the output byte-identical across runs
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def plot_deficits(out_dir: Path, pair_label: str, rows: list) -> Path:
    """Deficit and bound vs lambda for one pair; rows: DeficitReport."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    styles = {"entropy": "tab:blue", "fisher": "tab:red"}
    for kind, color in styles.items():
        sub = sorted((r for r in rows if r.kind == kind), key=lambda r: r.lam)
        if not sub:
            continue
        lams = [r.lam for r in sub]
        ax.plot(lams, [r.deficit for r in sub], color=color, marker="o",
                label=f"{kind} deficit")
        if all(r.bound_valid for r in sub):
            ax.plot(lams, [r.bound for r in sub], color=color, linestyle="--",
                    label=f"{kind} bound")
    ax.set_xlabel("lambda")
    ax.set_ylabel("nats")
    ax.set_title(f"convolution deficits, {pair_label}")
    ax.legend()
    fig.tight_layout()
    name = pair_label.strip("()").replace(", ", "_").replace(" ", "")
    path = _save_svg(fig, out_dir, f"deficit_{name}.svg")
    plt.close(fig)
    return path


def plot_flow(out_dir: Path, name: str, d: GridDensity, t_max: float) -> Path:
    """Relative Fisher information along the flow vs its decay envelope."""
    plt = _plt()
    base, t0 = _presmooth(d)
    ts = np.linspace(0.0, max(t_max, 0.5), 9)
    i0 = rel_fisher_gauss(base).value
    vals = [i0] + [rel_fisher_gauss(ou_evolve(base, float(t))).value for t in ts[1:]]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ts, vals, color="tab:blue", marker="o", label="I(X_t || G)")
    ax.plot(ts, i0 * np.exp(-2.0 * ts), color="tab:gray", linestyle="--",
            label="e^{-2t} I(X_0 || G)")
    ax.set_xlabel("t" if t0 == 0.0 else f"t (after t0={t0:g} smoothing)")
    ax.set_ylabel("relative Fisher information")
    ax.set_yscale("log" if i0 > 0 else "linear")
    ax.set_title(f"information decay along the flow, {name}")
    ax.legend()
    fig.tight_layout()
    path = _save_svg(fig, out_dir, f"flow_{name}.svg")
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# subcommands


def _sweep_rows(config: ExperimentConfig, densities: dict) -> list:
    rows = []
    for a, b in config.pairs:
        label = f"({a}, {b})"
        for lam in config.lambda_grid:
            rows.append((label, entropy_deficit(densities[a], densities[b], lam)))
            rows.append((label, info_deficit(densities[a], densities[b], lam)))
    return rows


def _asserted_ok(rows: list) -> bool:
    for _, rep in rows:
        if not (rep.deficit >= -rep.err):
            return False
        if rep.bound_valid and not (rep.margin >= -10.0 * rep.err):
            return False
    return True


def cmd_functionals(args, config: ExperimentConfig) -> int:
    densities = build_densities(config)
    rows = [
        (name, config.distributions[name].family, functional_report(d))
        for name, d in densities.items()
    ]
    path = write_functionals_csv(config.output_dir, rows)
    print(f"wrote {path}")
    return 0


def cmd_poincare(args, config: ExperimentConfig) -> int:
    densities = build_densities(config)
    rows = [
        (name, config.distributions[name].family, poincare_constant(d))
        for name, d in densities.items()
    ]
    path = write_poincare_csv(config.output_dir, rows)
    print(f"wrote {path}")
    bad = [
        name for name, _, est in rows
        if not (0.999 <= est.refinement_ratio <= 1.001)
    ]
    for name in bad:
        print(f"check failure: poincare refinement ratio out of band for {name}")
    return 1 if bad else 0


def cmd_deficit(args, config: ExperimentConfig) -> int:
    for name in (args.first, args.second):
        if name not in config.distributions:
            raise ValidationError(
                f"unknown distribution {name!r} (declared: "
                f"{sorted(config.distributions)})"
            )
    if not 0.0 <= args.lam <= 1.0:
        raise ValidationError(f"lambda = {args.lam:g} is outside [0, 1]")
    densities = build_densities(config)
    label = f"({args.first}, {args.second})"
    rows = [
        (label, entropy_deficit(densities[args.first], densities[args.second], args.lam)),
        (label, info_deficit(densities[args.first], densities[args.second], args.lam)),
    ]
    for _, rep in rows:
        bound = "refused (not log-concave isotropic)" if not rep.bound_valid else _num(rep.bound)
        print(
            f"{rep.kind:8s} lam={rep.lam:g}  deficit={_num(rep.deficit)}  "
            f"bound={bound}  err={rep.err:.3e}"
        )
    path = write_deficits_csv(config.output_dir, rows)
    print(f"wrote {path}")
    return 0 if _asserted_ok(rows) else 1


def cmd_sweep(args, config: ExperimentConfig) -> int:
    densities = build_densities(config)
    rows = _sweep_rows(config, densities)
    path = write_deficits_csv(config.output_dir, rows)
    print(f"wrote {path}")
    if config.plots:
        for a, b in config.pairs:
            label = f"({a}, {b})"
            path = plot_deficits(
                config.output_dir, label, [r for lbl, r in rows if lbl == label]
            )
            print(f"wrote {path}")
    return 0 if _asserted_ok(rows) else 1


def cmd_plot(args, config: ExperimentConfig) -> int:
    densities = build_densities(config)
    rows = _sweep_rows(config, densities)
    for a, b in config.pairs:
        label = f"({a}, {b})"
        path = plot_deficits(
            config.output_dir, label, [r for lbl, r in rows if lbl == label]
        )
        print(f"wrote {path}")
    t_max = max(config.t_grid) if config.t_grid else 1.0
    for name, d in densities.items():
        path = plot_flow(config.output_dir, name, d, t_max)
        print(f"wrote {path}")
    return 0


def cmd_verify(args, config: ExperimentConfig) -> int:
    result = run_suite(config, progress=print)
    path = write_lemmas_csv(config.output_dir, result.items)
    print(f"wrote {path}")
    failures = result.failures()
    asserted = sum(1 for it in result.items if it.asserted)
    if failures:
        print(f"FAIL: {len(failures)} of {asserted} asserted checks failed")
        return 1
    print(f"PASS: {asserted} asserted checks, {len(result.items)} total items")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment manifest")
    common.add_argument(
        "--resolution", type=int, metavar="N", help="override the base grid resolution"
    )
    common.add_argument(
        "--output-dir", metavar="DIR", help="override the artifact directory"
    )
    common.add_argument(
        "--no-plots", action="store_true", help="skip SVG emission in sweep"
    )

    parser = argparse.ArgumentParser(
        prog="stamlab",
        description="entropy and Fisher information deficits of rescaled "
        "convolutions, with every inequality checked numerically",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("functionals", parents=[common],
                       help="per-distribution functional table")
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("deficit", parents=[common],
                       help="both deficits for one pair at one lambda")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("lam", type=float)
    p.set_defaults(func=cmd_deficit)

    p = sub.add_parser("sweep", parents=[common],
                       help="deficits over all pairs and the lambda grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("poincare", parents=[common],
                       help="Poincare constants of the configured distributions")
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("verify", parents=[common],
                       help="run the full verification suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", parents=[common], help="emit all SVG plots")
    p.set_defaults(func=cmd_plot)

    return parser


def _effective_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    updates = {}
    if args.resolution is not None:
        if args.resolution < 256:
            raise ValidationError(
                f"--resolution {args.resolution} is below the minimum 256"
            )
        updates["resolution"] = args.resolution
    if args.output_dir:
        updates["output_dir"] = Path(args.output_dir)
    if args.no_plots:
        updates["plots"] = False
    if updates:
        from dataclasses import replace

        config = replace(config, **updates)
    return config


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _effective_config(args)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except (ValidationError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StamlabError as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
