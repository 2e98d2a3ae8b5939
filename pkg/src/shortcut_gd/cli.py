"""Command-line interface.

Subcommands: run (single trajectory), sweep (success-rate table), verify
(dissipativity reports), check-grad (oracle certification of the closed
forms), show-teacher. Every flag has a config-file equivalent: an INI file
with one section per subcommand, values in the same spelling as the flag
(dashes may be written as underscores); explicit flags override the file.

Exit codes: 0 success, 1 configuration/usage error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import experiments
from .errors import InfeasibleRegionError
from .landscape import EscapeRegion, FilterBasinRegion, RefinementRegion
from .model import random_state, random_teacher
from .optimizer import cnn_run, gaussian_init, run, sample_cnn_init, sample_init
from .oracle import fd_grad_check, mc_estimates
from .schedules import ConstantSchedule, WarmupSchedule
from .verification import check_dissipativity, negative_control_filter_basin


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(tok for tok in text.replace(",", " ").split())


@dataclass(frozen=True)
class _Opt:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    choices: tuple[str, ...] | None = None


_OPTIONS: dict[str, tuple[_Opt, ...]] = {
    "run": (
        _Opt("variant", str, "ssw", "schedule variant", ("ssw", "constant", "cnn")),
        _Opt("k", int, 25, "number of patches"),
        _Opt("p", int, 8, "patch dimension"),
        _Opt("init", str, "fixed", "start vector law", ("fixed", "ball", "gaussian")),
        _Opt("seed", int, 0, "seed for ball/gaussian/cnn initialization"),
        _Opt("max-iters", int, 0, "iteration budget (0 = variant default)"),
        _Opt("record-stride", int, 1, "record every N iterations"),
        _Opt("eta", float, 0.1, "step size for the cnn variant"),
        _Opt("out-dir", str, ".", "directory for trajectory CSV/SVG"),
    ),
    "sweep": (
        _Opt("k", _int_list, experiments.SUPPORTED_K, "k values, comma separated"),
        _Opt("trials", int, 500, "trials per (variant, k) cell"),
        _Opt("base-seed", int, 0, "per-trial seeds are base-seed + trial index"),
        _Opt("variants", _str_list, experiments.VARIANTS, "variants to run"),
        _Opt("max-iters", int, 1_000_000, "iteration budget per trial"),
        _Opt("stage1-iters", int, 1000, "warmup length for resnet_ssw"),
        _Opt("cnn-eta", float, 0.1, "step size for cnn_baseline"),
        _Opt("workers", int, 0, "worker processes (0 = env or 1)"),
        _Opt("out", str, "sweep.json", "output JSON path"),
    ),
    "verify": (
        _Opt("region", str, "filter-basin", "region to certify",
             ("escape", "filter-basin", "refinement", "A", "K", "AmMdelta")),
        _Opt("m", float, 0.2, "min alignment for filter-basin/refinement"),
        _Opt("max-alignment", float, 0.0, "max alignment for refinement (0 = teacher bound)"),
        _Opt("delta", float, 0.1, "filter error bound for refinement"),
        _Opt("k", int, 5, "teacher patches"),
        _Opt("p", int, 4, "teacher patch dimension"),
        _Opt("teacher-seed", int, 0, "random-teacher seed"),
        _Opt("tabulated", int, 0, "1 = use the tabulated teacher for k"),
        _Opt("points", int, 2000, "sample size"),
        _Opt("seed", int, 0, "sampling seed"),
        _Opt("negative-control", int, 0, "1 = sample outside the filter basin"),
        _Opt("out", str, "", "optional JSON report path"),
    ),
    "check-grad": (
        _Opt("samples", int, 200_000, "Monte-Carlo samples per state"),
        _Opt("states", int, 9, "number of random states"),
        _Opt("seed", int, 0, "base seed"),
        _Opt("step", float, 1e-6, "finite-difference step"),
        _Opt("fd-tol", float, 1e-5, "max relative FD error allowed"),
    ),
    "show-teacher": (
        _Opt("k", int, 25, "number of patches"),
        _Opt("p", int, 8, "patch dimension"),
    ),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="shortcut-gd", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for command, opts in _OPTIONS.items():
        p = sub.add_parser(command, add_help=True)
        p.add_argument("--config", default=None, help="INI config file")
        for opt in opts:
            kwargs: dict[str, Any] = {"default": None, "help": opt.help}
            if opt.choices is not None:
                kwargs["choices"] = opt.choices
            p.add_argument(f"--{opt.name}", **kwargs)
    return parser


def _merge_options(command: str, args: argparse.Namespace) -> dict[str, Any]:
    file_values: dict[str, str] = {}
    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        ini = configparser.ConfigParser()
        ini.read(args.config)
        if ini.has_section(command):
            for key, value in ini.items(command):
                file_values[key.replace("_", "-")] = value
        unknown = set(file_values) - {o.name for o in _OPTIONS[command]}
        if unknown:
            raise UsageError(f"unknown config keys in [{command}]: {sorted(unknown)}")
    merged: dict[str, Any] = {}
    for opt in _OPTIONS[command]:
        cli_value = getattr(args, opt.name.replace("-", "_"))
        if cli_value is not None:
            raw = cli_value
        elif opt.name in file_values:
            raw = file_values[opt.name]
        else:
            merged[opt.name] = opt.default
            continue
        if opt.choices is not None and raw not in opt.choices:
            raise UsageError(f"--{opt.name}: invalid choice {raw!r}")
        try:
            merged[opt.name] = opt.parse(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise UsageError(f"--{opt.name}: {exc}") from exc
    return merged


def _cmd_run(o: dict[str, Any]) -> int:
    out_dir = o["out-dir"]
    os.makedirs(out_dir, exist_ok=True)
    variant = o["variant"]
    if variant in ("ssw", "constant") and o["init"] == "fixed":
        traj, csv_path, svg_path = experiments.trajectory_experiment(
            variant, out_dir, k=o["k"], record_stride=o["record-stride"],
            max_iters=o["max-iters"] or None,
        )
    else:
        teacher = experiments.teacher_for_k(o["k"], o["p"])
        budget = o["max-iters"] or 1_000_000
        if variant == "cnn":
            v0, a0 = sample_cnn_init(teacher, o["seed"])
            traj = cnn_run(v0, a0, teacher, eta=o["eta"], max_iters=budget,
                           record_stride=o["record-stride"])
        else:
            init = (gaussian_init if o["init"] == "gaussian" else sample_init)(
                teacher, o["seed"]
            )
            schedule = (
                WarmupSchedule.for_k(o["k"]) if variant == "ssw"
                else ConstantSchedule.for_k(o["k"])
            )
            traj = run(init, teacher, schedule, max_iters=budget,
                       record_stride=o["record-stride"], stop_on_spurious=True)
        csv_path = os.path.join(out_dir, f"trajectory_{variant}.csv")
        svg_path = os.path.join(out_dir, f"trajectory_{variant}.svg")
        experiments.write_trajectory_csv(traj, csv_path)
        experiments.plot_trajectory(traj, svg_path, title=f"{variant}, k={o['k']}")
    print(f"outcome: {traj.outcome.kind} after {traj.outcome.iters} iterations")
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def _cmd_sweep(o: dict[str, Any]) -> int:
    config = experiments.SweepConfig(
        k_values=tuple(o["k"]),
        n_trials=o["trials"],
        base_seed=o["base-seed"],
        variants=tuple(o["variants"]),
        max_iters=o["max-iters"],
        stage1_iters=o["stage1-iters"],
        cnn_eta=o["cnn-eta"],
    )
    config = experiments.config_with_workers(config, o["workers"] or None)
    report = experiments.success_rate_sweep(config)
    experiments.write_sweep_json(report, o["out"])
    for cell in report.cells:
        print(
            f"{cell.variant:16s} k={cell.k:3d} success={cell.success_rate:.4f} "
            f"({cell.success_count}/{cell.n_trials}, spurious={cell.spurious_count}, "
            f"undecided={cell.undecided_count})"
        )
    print(f"wrote {o['out']}")
    return 0


_REGION_ALIASES = {"A": "escape", "K": "filter-basin", "AmMdelta": "refinement"}


def _cmd_verify(o: dict[str, Any]) -> int:
    if o["tabulated"]:
        teacher = experiments.teacher_for_k(o["k"], max(o["p"], 2))
    else:
        teacher = random_teacher(o["k"], o["p"], o["teacher-seed"])
    name = _REGION_ALIASES.get(o["region"], o["region"])
    if o["negative-control"]:
        report = negative_control_filter_basin(teacher, o["m"], o["points"], o["seed"])
        found = len(report.violating_points) > 0
        print(
            f"negative control: min_slack={report.min_slack:.6g}, "
            f"violations={len(report.violating_points)} (expected > 0)"
        )
        _maybe_write_report(report, o["out"])
        return 0 if found else 2
    if name == "escape":
        region = EscapeRegion(teacher=teacher)
    elif name == "filter-basin":
        region = FilterBasinRegion(teacher=teacher, min_alignment=o["m"])
    else:
        max_alignment = o["max-alignment"] or teacher.alignment_upper
        region = RefinementRegion(
            teacher=teacher, min_alignment=o["m"],
            max_alignment=max_alignment, filter_err_bound=o["delta"],
        )
    try:
        report = check_dissipativity(region, o["points"], o["seed"])
    except InfeasibleRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"{name}: n={report.n_points} min_slack={report.min_slack:.6g} "
        f"constant={report.constant_used:.6g} "
        f"violations={len(report.violating_points)} -> "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    _maybe_write_report(report, o["out"])
    return 0 if report.passed else 2


def _maybe_write_report(report, path: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")


def _cmd_check_grad(o: dict[str, Any]) -> int:
    combos = [(k, p) for k in (2, 5, 25) for p in (2, 4, 8)]
    n_states = o["states"]
    checks = total = 0
    fd_worst = 0.0
    failed = False
    for i in range(n_states):
        k, p = combos[i % len(combos)]
        teacher = random_teacher(k, p, o["seed"] + 1000 + i, a_norm=1.0 + (i % 3))
        state = random_state(teacher, o["seed"] + 2000 + i)
        fd = fd_grad_check(state, teacher, step=o["step"])
        fd_worst = max(fd_worst, fd.max_rel_error_a, fd.max_rel_error_w)
        fd_ok = max(fd.max_rel_error_a, fd.max_rel_error_w) <= o["fd-tol"]
        loss_est, gw_est, ga_est = mc_estimates(state, teacher, o["samples"], o["seed"] + 3000 + i)
        from .landscape import grad_a, grad_w, population_loss

        within = 0
        comps = 0
        for est, exact in (
            (loss_est, population_loss(state, teacher)),
            (gw_est, grad_w(state, teacher)),
            (ga_est, grad_a(state, teacher)),
        ):
            err = np.abs(np.atleast_1d(est.value) - np.atleast_1d(exact))
            bound = 4.0 * np.atleast_1d(est.std_error)
            within += int((err <= bound + 1e-12).sum())
            comps += err.size
        checks += within
        total += comps
        status = "ok" if fd_ok else "FD-FAIL"
        print(
            f"state {i}: k={k} p={p} fd_a={fd.max_rel_error_a:.2e} "
            f"fd_w={fd.max_rel_error_w:.2e} mc {within}/{comps} within 4se [{status}]"
        )
        if not fd_ok:
            failed = True
    frac = checks / total if total else 1.0
    print(f"fd worst={fd_worst:.3e} (tol {o['fd-tol']:g}); mc pooled {checks}/{total}"
          f" = {frac:.4f} (need >= 0.95)")
    if frac < 0.95:
        failed = True
    return 2 if failed else 0


def _cmd_show_teacher(o: dict[str, Any]) -> int:
    teacher = experiments.teacher_for_k(o["k"], o["p"])
    meta = experiments.teacher_metadata(teacher)
    counts = {
        "+1": int((teacher.a_star == 1.0).sum()),
        "-1": int((teacher.a_star == -1.0).sum()),
        "0": int((teacher.a_star == 0.0).sum()),
    }
    print(f"teacher k={teacher.k} p={teacher.p}")
    print(f"  a_star pattern: {counts['+1']} ones, {counts['-1']} minus-ones, {counts['0']} zeros")
    for key in (
        "sum_a_star", "a_star_norm_sq", "quarter_a_star_norm_sq", "alignment_lower",
        "alignment_upper", "strict_prior", "shortcut_vstar_angle_per_pi",
        "nominal_design_angle_per_pi",
    ):
        print(f"  {key}: {meta[key]}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "check-grad": _cmd_check_grad,
    "show-teacher": _cmd_show_teacher,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        options = _merge_options(args.command, args)
        return _COMMANDS[args.command](options)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
