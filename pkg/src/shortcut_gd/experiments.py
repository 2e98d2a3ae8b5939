"""Reproduction harness: tabulated teachers, success-rate sweeps, trajectory runs.

Outputs are deterministic for a fixed configuration: per-trial seeds derive
from (base_seed + trial index), trials are processed in fixed-size chunks
regardless of worker count, and aggregation is order-independent counting.
Wall-clock timings live in a separate metadata block so the results block is
byte-reproducible.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .batch import KIND_CONVERGED, KIND_TRAPPED, KIND_UNDECIDED, run_batch
from .model import StudentState, TeacherSpec, make_rng
from .optimizer import Thresholds, Trajectory, gaussian_init, run, sample_init
from .schedules import ConstantSchedule, WarmupSchedule
from .svgplot import render_panels

WORKERS_ENV_VAR = "SHORTCUT_GD_WORKERS"
TRIAL_CHUNK = 250

SUPPORTED_K = (16, 25, 36, 49, 64, 81, 100)

# Output-weight patterns per k: (count of +1, count of -1, count of 0).
_A_STAR_PATTERN = {
    16: (9, 7, 0),
    25: (14, 11, 0),
    36: (19, 16, 1),
    49: (26, 22, 1),
    64: (34, 30, 0),
    81: (43, 38, 0),
    100: (52, 47, 1),
}

_V_STAR_ANGLE = 7.0 * math.pi / 10.0

VARIANTS = ("resnet_ssw", "resnet_constant", "cnn_baseline")

# Init law per variant. The warmup variant keeps the ball law whose draws
# satisfy |1^T a_0| <= |1^T a_star|; the other two use the fan-in Gaussian
# law that the tabulated k=25 start vector and the reference success rates
# are consistent with.
DEFAULT_INIT_LAWS = {
    "resnet_ssw": "ball",
    "resnet_constant": "gaussian",
    "cnn_baseline": "gaussian",
}

# Reference success rates at 5000 trials per cell.
REFERENCE_RATES = {
    "resnet_ssw": dict.fromkeys(SUPPORTED_K, 1.0),
    "resnet_constant": {
        16: 0.7042, 25: 0.7354, 36: 0.7776, 49: 0.7848,
        64: 0.8220, 81: 0.8388, 100: 0.8426,
    },
    "cnn_baseline": {
        16: 0.5348, 25: 0.5528, 36: 0.5312, 49: 0.5426,
        64: 0.5192, 81: 0.5368, 100: 0.5374,
    },
}


def teacher_for_k(k: int, p: int = 8, *, allow_generic: bool = False) -> TeacherSpec:
    """Teacher with the tabulated output weights and the planar filter.

    v_star has components (cos(7pi/10), sin(7pi/10), 0, ...). For k outside
    the supported table, allow_generic=True builds a same-shaped pattern:
    ones then minus-ones with entry sum ceil(sqrt(k)/2), one zero when parity
    requires it. Such teachers are not part of the reference tables.
    """
    if k in _A_STAR_PATTERN:
        n_pos, n_neg, n_zero = _A_STAR_PATTERN[k]
    elif allow_generic:
        target_sum = math.ceil(math.sqrt(k) / 2.0)
        n_zero = (k + target_sum) % 2
        n_pos = (k + target_sum - n_zero) // 2
        n_neg = n_pos - target_sum
        if n_neg < 0 or n_pos + n_neg + n_zero != k:
            raise ValueError(f"no generic output-weight pattern for k={k}")
    else:
        raise ValueError(f"k={k} is not tabulated; pass allow_generic=True for a synthetic teacher")
    if p < 2:
        raise ValueError("the tabulated filter needs p >= 2")
    a_star = np.concatenate([np.ones(n_pos), -np.ones(n_neg), np.zeros(n_zero)])
    v_star = np.zeros(p)
    v_star[0] = math.cos(_V_STAR_ANGLE)
    v_star[1] = math.sin(_V_STAR_ANGLE)
    return TeacherSpec(p=p, k=k, v_star=v_star, a_star=a_star)


def fixed_a0_k25() -> np.ndarray:
    """The tabulated 25-component start vector for the trajectory runs."""
    return np.array([
        -0.1268, -0.1590, -0.1071, -0.1594, -0.4670, 0.1563, 0.1894, -0.2390, -0.0602,
        -0.5047, 0.0325, -0.0886, 0.1514, -0.0883, -0.0243, 0.1198, -0.2805, 0.0024,
        -0.0855, 0.0742, -0.0976, -0.1768, 0.1207, 0.0049, 0.1809,
    ])


def teacher_metadata(teacher: TeacherSpec) -> dict:
    """Descriptive facts recorded with experiment outputs.

    Includes the computed shortcut/filter angle next to the nominal 0.45 pi
    design value, and the entry sum next to the nominal quarter-norm relation
    (1^T a_star = ||a_star||^2 / 4); the tabulated weights satisfy neither
    nominal value exactly.
    """
    angle = teacher.shortcut_angle()
    return {
        "k": teacher.k,
        "p": teacher.p,
        "sum_a_star": teacher.sum_a_star,
        "a_star_norm_sq": teacher.a_star_norm_sq,
        "quarter_a_star_norm_sq": teacher.a_star_norm_sq / 4.0,
        "alignment_lower": teacher.alignment_lower,
        "alignment_upper": teacher.alignment_upper,
        "strict_prior": teacher.strict_prior,
        "shortcut_vstar_angle_rad": angle,
        "shortcut_vstar_angle_per_pi": angle / math.pi,
        "nominal_design_angle_per_pi": 0.45,
    }


@dataclass(frozen=True)
class SweepConfig:
    k_values: tuple[int, ...] = SUPPORTED_K
    n_trials: int = 500
    base_seed: int = 0
    variants: tuple[str, ...] = VARIANTS
    max_iters: int = 1_000_000
    thresholds: Thresholds = Thresholds()
    stage1_iters: int = 1000
    cnn_eta: float = 0.1
    workers: int = 1
    spurious_check_every: int = 200
    init_laws: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_INIT_LAWS))

    def __post_init__(self) -> None:
        if not self.k_values:
            raise ValueError("k_values must be nonempty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants: {sorted(unknown)}")


@dataclass(frozen=True)
class CellResult:
    variant: str
    k: int
    n_trials: int
    success_count: int
    spurious_count: int
    undecided_count: int

    @property
    def success_rate(self) -> float:
        return self.success_count / self.n_trials

    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.success_count, self.n_trials)


@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    cells: tuple[CellResult, ...]
    wall_time_s: dict[str, float]


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% score interval for a binomial proportion; always contains the estimate."""
    if n < 1:
        raise ValueError("n must be >= 1")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = max(0.0, min(center - half, phat))
    hi = min(1.0, max(center + half, phat))
    return lo, hi


def _cell_inits(
    variant: str, teacher: TeacherSpec, seeds: range, init_law: str
) -> tuple[np.ndarray, np.ndarray]:
    n = len(seeds)
    v0 = np.empty((n, teacher.p))
    a0 = np.empty((n, teacher.k))
    for row, seed in enumerate(seeds):
        if variant == "cnn_baseline":
            rng = make_rng(seed, 0)
            z = rng.standard_normal(teacher.p)
            v0[row] = z / np.linalg.norm(z)
            if init_law == "gaussian":
                a0[row] = rng.standard_normal(teacher.k) / np.sqrt(teacher.k)
            else:
                from .optimizer import _ball_draw

                a0[row] = _ball_draw(rng, teacher.k, abs(teacher.sum_a_star) / np.sqrt(teacher.k))
        else:
            v0[row] = teacher.shortcut
            init = (gaussian_init if init_law == "gaussian" else sample_init)(teacher, seed)
            a0[row] = init.a
    return v0, a0


def _schedule_for(variant: str, k: int, config: SweepConfig):
    if variant == "resnet_ssw":
        return WarmupSchedule.for_k(k, stage1_iters=config.stage1_iters)
    if variant == "resnet_constant":
        return ConstantSchedule.for_k(k)
    return ConstantSchedule(eta_a=config.cnn_eta, eta_w=config.cnn_eta)


def _run_chunk(args) -> tuple[int, int, int]:
    """Worker task: one fixed chunk of trials of one cell; returns counts."""
    variant, k, trial_start, trial_count, config = args
    teacher = teacher_for_k(k)
    seeds = range(config.base_seed + trial_start, config.base_seed + trial_start + trial_count)
    init_law = config.init_laws.get(variant, DEFAULT_INIT_LAWS[variant])
    v0, a0 = _cell_inits(variant, teacher, seeds, init_law)
    result = run_batch(
        v0,
        a0,
        teacher,
        _schedule_for(variant, k, config),
        max_iters=config.max_iters,
        thresholds=config.thresholds,
        stop_on_spurious=True,
        spurious_check_every=config.spurious_check_every,
        basin_success=(variant == "cnn_baseline"),
    )
    return (
        int((result.kinds == KIND_CONVERGED).sum()),
        int((result.kinds == KIND_TRAPPED).sum()),
        int((result.kinds == KIND_UNDECIDED).sum()),
    )


def success_rate_sweep(config: SweepConfig) -> SweepReport:
    """Run every (variant, k) cell of the sweep and aggregate outcome counts.

    Trials are split into fixed chunks of TRIAL_CHUNK regardless of the
    worker count, so results do not depend on scheduling.
    """
    tasks = []
    for variant in config.variants:
        for k in config.k_values:
            for start in range(0, config.n_trials, TRIAL_CHUNK):
                count = min(TRIAL_CHUNK, config.n_trials - start)
                tasks.append((variant, k, start, count, config))

    t_start = {}
    wall: dict[str, float] = {}
    counts: dict[tuple[str, int], list[int]] = {
        (v, k): [0, 0, 0] for v in config.variants for k in config.k_values
    }
    t0_all = time.perf_counter()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for task, result in zip(tasks, pool.map(_run_chunk, tasks)):
                cell = (task[0], task[1])
                for i in range(3):
                    counts[cell][i] += result[i]
    else:
        for task in tasks:
            cell = (task[0], task[1])
            t_start.setdefault(cell, time.perf_counter())
            result = _run_chunk(task)
            for i in range(3):
                counts[cell][i] += result[i]
            wall[f"{cell[0]}/k={cell[1]}"] = time.perf_counter() - t_start[cell]
    wall["total"] = time.perf_counter() - t0_all

    cells = tuple(
        CellResult(
            variant=v,
            k=k,
            n_trials=config.n_trials,
            success_count=counts[(v, k)][0],
            spurious_count=counts[(v, k)][1],
            undecided_count=counts[(v, k)][2],
        )
        for v in config.variants
        for k in config.k_values
    )
    return SweepReport(config=config, cells=cells, wall_time_s=wall)


def sweep_report_dict(report: SweepReport) -> dict:
    """JSON-ready dict; wall-clock facts stay inside the 'metadata' block."""
    config = report.config
    results = []
    for cell in report.cells:
        lo, hi = cell.ci95()
        results.append(
            {
                "variant": cell.variant,
                "k": cell.k,
                "n_trials": cell.n_trials,
                "success_count": cell.success_count,
                "spurious_count": cell.spurious_count,
                "undecided_count": cell.undecided_count,
                "success_rate": cell.success_rate,
                "ci95_low": lo,
                "ci95_high": hi,
            }
        )
    return {
        "config": {
            "k_values": list(config.k_values),
            "n_trials": config.n_trials,
            "base_seed": config.base_seed,
            "variants": list(config.variants),
            "max_iters": config.max_iters,
            "stage1_iters": config.stage1_iters,
            "cnn_eta": config.cnn_eta,
            "init_laws": dict(sorted(config.init_laws.items())),
            "thresholds": {
                "global_tol": config.thresholds.global_tol,
                "phi_tol": config.thresholds.phi_tol,
                "w_err_tol": config.thresholds.w_err_tol,
                "a_rel_tol": config.thresholds.a_rel_tol,
            },
        },
        "results": results,
        "metadata": {
            "wall_time_s": dict(sorted(report.wall_time_s.items())),
            "teachers": [teacher_metadata(teacher_for_k(k)) for k in config.k_values],
        },
    }


def write_sweep_json(report: SweepReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sweep_report_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


CSV_COLUMNS = ("t", "phi", "a_dot_astar", "w_err_sq", "a_err_sq", "loss")


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """Fixed-column CSV with 17 significant digits (lossless doubles)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(traj.t.shape[0]):
            row = (
                str(int(traj.t[i])),
                *(
                    f"{val:.17g}"
                    for val in (
                        traj.phi[i], traj.a_dot_astar[i], traj.w_err_sq[i],
                        traj.a_err_sq[i], traj.loss[i],
                    )
                ),
            )
            fh.write(",".join(row) + "\n")


def plot_trajectory(traj: Trajectory, path: str, *, title: str = "") -> None:
    ts = traj.t.tolist()
    render_panels(
        path,
        [
            ("phi", ts, traj.phi.tolist()),
            ("a . a_star", ts, traj.a_dot_astar.tolist()),
            ("||w - w_star||^2", ts, traj.w_err_sq.tolist()),
            ("||a - a_star||^2", ts, traj.a_err_sq.tolist()),
            ("loss", ts, traj.loss.tolist()),
        ],
        title=title,
    )


def trajectory_experiment(
    variant: str,
    out_dir: str,
    *,
    k: int = 25,
    record_stride: int = 1,
    max_iters: int | None = None,
    thresholds: Thresholds = Thresholds(),
    stage1_iters: int = 1000,
) -> tuple[Trajectory, str, str]:
    """Single diagnostic run from the tabulated k=25 start vector.

    variant 'ssw' uses the warmup schedule and runs to the global tolerance;
    variant 'constant' keeps both step sizes at 1/k^2 and is expected to end
    at the spurious optimum (polled early so the run does not burn the whole
    budget). Writes <variant>.csv and <variant>.svg into out_dir.
    """
    if variant not in ("ssw", "constant"):
        raise ValueError(f"variant must be 'ssw' or 'constant', got {variant!r}")
    if k == 25:
        a0 = fixed_a0_k25()
    else:
        raise ValueError("the fixed start vector is only tabulated for k=25")
    teacher = teacher_for_k(k)
    init = StudentState(w=np.zeros(teacher.p), a=a0)
    if variant == "ssw":
        schedule = WarmupSchedule.for_k(k, stage1_iters=stage1_iters)
        budget = 500_000 if max_iters is None else max_iters
        traj = run(
            init, teacher, schedule, max_iters=budget,
            record_stride=record_stride, thresholds=thresholds,
        )
    else:
        schedule = ConstantSchedule.for_k(k)
        budget = 1_000_000 if max_iters is None else max_iters
        traj = run(
            init, teacher, schedule, max_iters=budget,
            record_stride=record_stride, thresholds=thresholds,
            stop_on_spurious=True,
        )
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"trajectory_{variant}.csv")
    svg_path = os.path.join(out_dir, f"trajectory_{variant}.svg")
    write_trajectory_csv(traj, csv_path)
    plot_trajectory(traj, svg_path, title=f"{variant} schedule, k={k}")
    return traj, csv_path, svg_path


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV_VAR, "")
    try:
        workers = int(value)
    except ValueError:
        return 1
    return max(1, workers)


def config_with_workers(config: SweepConfig, workers: int | None) -> SweepConfig:
    return replace(config, workers=default_workers() if workers is None else max(1, workers))
