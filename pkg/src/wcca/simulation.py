"""Sign-recovery experiment for signed canonical correlations.

Data are drawn from :func:`~wcca.generative.simulation_design` (identity
blocks, ``Sigma_XY = diag(l, -l, l, ...)``), refitted with shrinkage CCA, and
each estimated component is scored on whether its canonical correlation has
the right sign.

Estimated components are matched to true ones by direction: component ``i``
goes to the true index ``j`` maximizing ``|cos(a_i, e_j)| + |cos(b_i, e_j)|``
where ``a_i``, ``b_i`` are the estimated X and Y directions.  The estimated
correlation is re-expressed in the orientation of the true pair,
``sign(a_ij) * sign(b_ij) * l_i``, before comparing signs.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cca import fit_cca
from .errors import ValidationError, WccaError
from .generative import sample_observed, simulation_design

DEFAULT_LAMBDAS = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_NS = (20, 30, 50, 100, 200, 500)
N_SIGNAL = 10
CSV_COLUMNS = ("n", "lambda", "proportion_correct", "mean_abs_error", "failures", "replicates")


@dataclass(frozen=True)
class SimulationConfig:
    p: int = 60
    q: int = 10
    lambda_grid: tuple = DEFAULT_LAMBDAS
    n_grid: tuple = DEFAULT_NS
    replicates: int = 500
    seed: int = 0
    shrinkage: str = "auto"
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        if self.replicates < 1:
            raise ValidationError("replicates must be at least 1")
        if not self.lambda_grid or not self.n_grid:
            raise ValidationError("lambda and n grids must be non-empty")
        if any(not 0 < v < 1 for v in self.lambda_grid):
            raise ValidationError("lambda magnitudes must lie in (0, 1)")
        if any(v < 3 for v in self.n_grid):
            raise ValidationError("sample sizes must be at least 3")
        if min(self.p, self.q) < 1:
            raise ValidationError("p and q must be positive")

    def cells(self):
        """Grid cells ``(index, n, lambda)``, lambda-major."""
        grid = [(n, lam) for lam in self.lambda_grid for n in self.n_grid]
        return [(k, n, lam) for k, (n, lam) in enumerate(grid)]


@dataclass(frozen=True)
class SimulationCell:
    n: int
    lam: float
    proportion_correct: float
    mean_abs_error: float
    failures: int
    replicates: int


@dataclass
class SimulationReport:
    config: SimulationConfig
    cells: list = field(default_factory=list)
    elapsed: float = 0.0

    def cell(self, n, lam):
        for c in self.cells:
            if c.n == n and np.isclose(c.lam, lam):
                return c
        raise KeyError((n, lam))

    def proportion_table(self):
        """``(len(lambda_grid), len(n_grid))`` array of proportions."""
        return np.array([
            [self.cell(n, lam).proportion_correct for n in self.config.n_grid]
            for lam in self.config.lambda_grid
        ])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow([
                c.n, repr(c.lam), repr(c.proportion_correct),
                repr(c.mean_abs_error), c.failures, c.replicates,
            ])
        return buf.getvalue()


def match_components(directions_x, directions_y, true_lambdas):
    """Match estimated components to true identity-basis components.

    Returns the matched true index and the orientation sign per estimated
    component.
    """
    candidates = np.flatnonzero(true_lambdas)
    ax = directions_x[:, candidates]
    by = directions_y[:, candidates]
    ax = ax / np.linalg.norm(directions_x, axis=1, keepdims=True)
    by = by / np.linalg.norm(directions_y, axis=1, keepdims=True)
    best = np.argmax(np.abs(ax) + np.abs(by), axis=1)
    rows = np.arange(best.size)
    orient = np.sign(ax[rows, best]) * np.sign(by[rows, best])
    return candidates[best], orient


def sign_agreement(model, true_lambdas, n_signal=N_SIGNAL):
    """``(n_correct, n_scored, sum_abs_error)`` for one fitted model."""
    k = min(n_signal, model.m, np.count_nonzero(true_lambdas))
    j, orient = match_components(
        model.directions_x[:k], model.directions_y[:k], true_lambdas
    )
    est = model.lambdas[:k] * orient
    truth = true_lambdas[j]
    correct = int(np.sum(np.sign(est) == np.sign(truth)))
    return correct, k, float(np.sum(np.abs(est - truth)))


def _run_replicate(task):
    config, cell_index, rep, n, lam = task
    design = simulation_design(config.p, config.q, lam)
    x, y = sample_observed(design, n, seed=[config.seed, cell_index, rep])
    try:
        model = fit_cca(x, y, scale=True, shrinkage=config.shrinkage)
    except (WccaError, np.linalg.LinAlgError):
        return None
    return sign_agreement(model, design.lambdas)


def run_sign_recovery(config):
    """Run every grid cell and collect a :class:`SimulationReport`.

    Replicate ``r`` of cell ``k`` draws its data with seed
    ``[config.seed, k, r]``, so results do not depend on ``n_jobs``.
    Replicates whose fit fails are counted in ``failures`` and excluded.
    """
    start = time.perf_counter()
    tasks = [
        (config, k, r, n, lam)
        for k, n, lam in config.cells()
        for r in range(config.replicates)
    ]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(_run_replicate, tasks, chunksize=16))
    else:
        results = [_run_replicate(t) for t in tasks]

    report = SimulationReport(config)
    per_cell = config.replicates
    for k, n, lam in config.cells():
        chunk = results[k * per_cell:(k + 1) * per_cell]
        ok = [r for r in chunk if r is not None]
        scored = sum(r[1] for r in ok)
        report.cells.append(SimulationCell(
            n=n,
            lam=lam,
            proportion_correct=sum(r[0] for r in ok) / scored if scored else float("nan"),
            mean_abs_error=sum(r[2] for r in ok) / scored if scored else float("nan"),
            failures=len(chunk) - len(ok),
            replicates=config.replicates,
        ))
    report.elapsed = time.perf_counter() - start
    return report


def monotone_violations(table, allowance=0.05):
    """Adjacent-cell decreases larger than ``allowance`` along either grid axis.

    ``table`` is indexed ``[lambda, n]`` with both grids ascending.  Returns
    a list of ``(axis, i, j, drop)`` tuples.
    """
    out = []
    diff_n = table[:, :-1] - table[:, 1:]
    diff_l = table[:-1, :] - table[1:, :]
    for axis, diff in (("n", diff_n), ("lambda", diff_l)):
        for i, j in zip(*np.nonzero(diff > allowance)):
            out.append((axis, int(i), int(j), float(diff[i, j])))
    return out
