"""Seeded replicated experiments over smoother families.

Each replicate draws its noise from a counter-derived stream, selects by SURE,
and records statistics whose exact algebraic identities (edf decomposition,
basic inequality, excess-optimism linkage) are checked on every draw, not just
in expectation. Reduction is deterministic by replicate index regardless of
worker count.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import criteria
from .sequence_model import GaussianSequenceModel, derive_stream
from .smoothers import Smoother, SmootherFamily

__all__ = [
    "ReplicateRecord",
    "MonteCarloSummary",
    "ShellDecayReport",
    "replicate",
    "run_experiment",
    "sure_unbiasedness_check",
    "shell_decay_report",
    "records_to_csv",
    "RECORD_CSV_COLUMNS",
]

IDENTITY_TOL = 1e-8
RECORDS_MEMORY_GUARD = 10**6

ESTIMATE_NAMES = (
    "risk_tuned",
    "exopt",
    "edf_total",
    "edf_quadratic",
    "edf_linear",
    "sure_min_mean",
    "noise_sq_gap",
)


@dataclass(frozen=True)
class ReplicateRecord:
    """Per-draw statistics of one SURE selection.

    noise_sq_gap is n sigma^2 - ||z||^2 and signal_cross is 2 theta0^T z; the
    exact per-replicate linkage is
    exopt_stat = 2 sigma^2 edf_total + noise_sq_gap - signal_cross.
    """

    replicate_index: int
    selected: str
    sure_min: float
    loss_selected: float
    edf_total: float
    edf_quadratic: float
    edf_linear: float
    exopt_stat: float
    noise_sq_gap: float
    signal_cross: float
    shell: int | None
    basic_inequality_slack: float


@dataclass(frozen=True)
class MonteCarloSummary:
    """Deterministic reduction of an experiment's replicate records."""

    n_reps: int
    estimates: dict  # name -> {"mean": float, "stderr": float | None}
    shell_histogram: dict | None  # None when r_star is degenerate
    selection_histogram: dict
    decomposition_pass_rate: float
    basic_inequality_pass_rate: float
    exopt_identity_pass_rate: float
    r_star: float
    h_op: float
    family_size: int

    @property
    def all_identities_pass(self) -> bool:
        return (self.decomposition_pass_rate == 1.0
                and self.basic_inequality_pass_rate == 1.0
                and self.exopt_identity_pass_rate == 1.0)

    def to_json_dict(self) -> dict:
        return {
            "n_reps": self.n_reps,
            "estimates": self.estimates,
            "shell_histogram": (None if self.shell_histogram is None else
                                {str(k): v for k, v in self.shell_histogram.items()}),
            "selection_histogram": dict(self.selection_histogram),
            "identity_pass_rates": {
                "edf_decomposition": self.decomposition_pass_rate,
                "basic_inequality": self.basic_inequality_pass_rate,
                "exopt_linkage": self.exopt_identity_pass_rate,
            },
            "r_star": self.r_star,
            "h_op": self.h_op,
            "family_size": self.family_size,
        }


class _Context:
    """Precomputed per-(family, model) arrays shared by all replicates."""

    def __init__(self, family: SmootherFamily, model: GaussianSequenceModel):
        if family.n != model.n:
            raise ValueError(
                f"family dimension {family.n} does not match model dimension {model.n}")
        self.family = family
        self.model = model
        self.n = model.n
        self.sigma_sq = model.sigma_sq
        self.theta0 = model.theta0
        self.labels = family.labels
        self.h_stack = np.stack([m.h for m in family.members])
        self.trs = np.array([m.df for m in family.members])
        self.frob_sqs = np.array([m.frob_sq for m in family.members])
        self.h_theta = self.h_stack @ self.theta0
        self.risks = np.array([criteria.risk(m, model) for m in family.members])
        self.oracle_idx = int(np.argmin(self.risks))
        self.r_star = float(self.risks[self.oracle_idx]) / self.sigma_sq
        if self.r_star > 0:
            self.shells = [
                criteria.shell_index(m, family, model, self.r_star)
                for m in family.members
            ]
        else:
            self.shells = None  # degenerate: shell machinery disabled
        # W_s quadratic kernels 2H - H^T H and Z_s projection vectors
        self.w_kernels = np.stack([
            2.0 * m.h - m.h.T @ m.h for m in family.members])
        eye = np.eye(self.n)
        self.z_vecs = np.stack([
            (eye - m.h).T @ ((eye - m.h) @ self.theta0) for m in family.members])

    def replicate(self, index: int, stream: np.random.Generator) -> ReplicateRecord:
        model = self.model
        s2 = self.sigma_sq
        z = model.sigma * stream.standard_normal(self.n)
        y = self.theta0 + z
        hy = self.h_stack @ y
        resid = y[None, :] - hy
        sure_vals = np.einsum("ij,ij->i", resid, resid) + 2.0 * s2 * self.trs
        j = int(np.argmin(sure_vals))  # first index on ties

        diff = hy[j] - self.theta0
        loss = float(diff @ diff)
        sure_min = float(sure_vals[j])
        edf_total = float(hy[j] @ z) / s2 - float(self.trs[j])
        hz_j = hy[j] - self.h_theta[j]
        edf_quadratic = float(z @ hz_j) / s2 - float(self.trs[j])
        edf_linear = float(self.h_theta[j] @ z) / s2
        exopt_stat = loss + self.n * s2 - sure_min
        noise_sq_gap = self.n * s2 - float(z @ z)
        signal_cross = 2.0 * float(self.theta0 @ z)

        j0 = self.oracle_idx
        w_j = float(z @ (self.w_kernels[j] @ z)) / s2 + self.frob_sqs[j] - 2.0 * self.trs[j]
        w_0 = float(z @ (self.w_kernels[j0] @ z)) / s2 + self.frob_sqs[j0] - 2.0 * self.trs[j0]
        zlin_j = -float(self.z_vecs[j] @ z) / s2
        zlin_0 = -float(self.z_vecs[j0] @ z) / s2
        lhs = float(self.risks[j] - self.risks[j0]) / s2
        rhs = (float(w_j) - float(w_0)) + 2.0 * (zlin_j - zlin_0)
        return ReplicateRecord(
            replicate_index=index,
            selected=self.labels[j],
            sure_min=sure_min,
            loss_selected=loss,
            edf_total=edf_total,
            edf_quadratic=edf_quadratic,
            edf_linear=edf_linear,
            exopt_stat=exopt_stat,
            noise_sq_gap=noise_sq_gap,
            signal_cross=signal_cross,
            shell=None if self.shells is None else self.shells[j],
            basic_inequality_slack=rhs - lhs,
        )


def replicate(family: SmootherFamily, model: GaussianSequenceModel,
              stream: np.random.Generator, replicate_index: int = 0) -> ReplicateRecord:
    """Run a single replicate: sample, select by SURE, record statistics."""
    return _Context(family, model).replicate(replicate_index, stream)


def _mean_stderr(values: np.ndarray):
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, None  # stderr unavailable for a single replicate
    stderr = float(np.std(values, ddof=1) / np.sqrt(values.size))
    return mean, stderr


def _summarize(ctx: _Context, records: list) -> MonteCarloSummary:
    n_reps = len(records)
    s2 = ctx.sigma_sq
    arrays = {
        "risk_tuned": np.array([r.loss_selected for r in records]),
        "exopt": np.array([r.exopt_stat for r in records]),
        "edf_total": np.array([r.edf_total for r in records]),
        "edf_quadratic": np.array([r.edf_quadratic for r in records]),
        "edf_linear": np.array([r.edf_linear for r in records]),
        "sure_min_mean": np.array([r.sure_min for r in records]),
        "noise_sq_gap": np.array([r.noise_sq_gap for r in records]),
    }
    estimates = {}
    for name in ESTIMATE_NAMES:
        mean, stderr = _mean_stderr(arrays[name])
        estimates[name] = {"mean": mean, "stderr": stderr}

    selection_histogram = {label: 0 for label in ctx.labels}
    for r in records:
        selection_histogram[r.selected] += 1
    if ctx.shells is None:
        shell_histogram = None
    else:
        shell_histogram = {}
        for r in records:
            shell_histogram[r.shell] = shell_histogram.get(r.shell, 0) + 1
        shell_histogram = dict(sorted(shell_histogram.items()))

    decomp_ok = 0
    basic_ok = 0
    exopt_ok = 0
    for r in records:
        tol = IDENTITY_TOL * (1.0 + abs(r.edf_total))
        if abs(r.edf_total - (r.edf_quadratic + r.edf_linear)) <= tol:
            decomp_ok += 1
        if r.basic_inequality_slack >= -IDENTITY_TOL:
            basic_ok += 1
        linkage = r.exopt_stat - 2.0 * s2 * r.edf_total - (r.noise_sq_gap - r.signal_cross)
        if abs(linkage) <= IDENTITY_TOL * (1.0 + abs(r.exopt_stat)):
            exopt_ok += 1
    return MonteCarloSummary(
        n_reps=n_reps,
        estimates=estimates,
        shell_histogram=shell_histogram,
        selection_histogram=selection_histogram,
        decomposition_pass_rate=decomp_ok / n_reps,
        basic_inequality_pass_rate=basic_ok / n_reps,
        exopt_identity_pass_rate=exopt_ok / n_reps,
        r_star=ctx.r_star,
        h_op=ctx.family.h_op,
        family_size=len(ctx.family),
    )


def run_experiment(family: SmootherFamily, model: GaussianSequenceModel,
                   n_reps: int, master_seed: int, n_threads: int = 1,
                   keep_records: bool = False, force_records: bool = False):
    """Run n_reps seeded replicates and reduce them in index order.

    Replicate i always uses derive_stream(master_seed, i), so results are
    independent of n_threads and of scheduling. Returns (summary, records);
    records is None unless keep_records is set (guarded above 10^6 replicates
    unless force_records overrides).
    """
    n_reps = int(n_reps)
    if n_reps < 1:
        raise ValueError(f"n_reps must be >= 1, got {n_reps}")
    if keep_records and n_reps > RECORDS_MEMORY_GUARD and not force_records:
        raise ValueError(
            f"refusing to retain {n_reps} records (> {RECORDS_MEMORY_GUARD}); "
            "pass force_records=True to override")
    ctx = _Context(family, model)

    def run_range(start, stop):
        return [ctx.replicate(i, derive_stream(master_seed, i)) for i in range(start, stop)]

    n_threads = max(1, int(n_threads))
    if n_threads == 1:
        records = run_range(0, n_reps)
    else:
        chunk = max(256, -(-n_reps // (4 * n_threads)))
        bounds = [(lo, min(lo + chunk, n_reps)) for lo in range(0, n_reps, chunk)]
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            chunks = list(pool.map(lambda b: run_range(*b), bounds))
        records = [rec for part in chunks for rec in part]
    summary = _summarize(ctx, records)
    return summary, (records if keep_records else None)


def sure_unbiasedness_check(smoother: Smoother, model: GaussianSequenceModel,
                            n_reps: int, master_seed: int):
    """Monte Carlo check that E[SURE(s)] = R(s) + n sigma^2 for a fixed smoother.

    Returns (mean_sure, target, z_score).
    """
    n_reps = int(n_reps)
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2 for a z-score")
    target = criteria.risk(smoother, model) + model.n * model.sigma_sq
    values = np.empty(n_reps)
    for i in range(n_reps):
        stream = derive_stream(master_seed, i)
        z = model.sigma * stream.standard_normal(model.n)
        values[i] = criteria.sure(smoother, model.theta0 + z, model.sigma)
    mean, stderr = _mean_stderr(values)
    if stderr == 0.0:  # degenerate case, e.g. H = I has constant SURE
        z_score = 0.0 if mean == target else math.inf
    else:
        z_score = (mean - target) / stderr
    return mean, target, z_score


@dataclass(frozen=True)
class ShellDecayReport:
    """Empirical shell frequencies next to the lemma-shaped decay profile."""

    rows: list  # dicts: shell, frequency, members, lemma_shape
    violations: list  # shells where frequency increased after first occupied
    r_star: float
    h_op: float

    @property
    def nonincreasing(self) -> bool:
        return not self.violations


def shell_decay_report(records, family: SmootherFamily,
                       model: GaussianSequenceModel, c_test: float = 1.0) -> ShellDecayReport:
    """Tabulate P(selected in shell l) against |S_l| exp(-c 2^l r* / h_op^2).

    The exponential is a shape comparison with a caller-supplied constant, not
    a certified bound.
    """
    rs = criteria.r_star(family, model)
    if rs <= 0:
        raise criteria.DegenerateFamilyError(
            "shell decay report requires r_star > 0; family contains a zero-risk member")
    shells = [criteria.shell_index(m, family, model, rs) for m in family.members]
    records = list(records)
    n_reps = len(records)
    max_shell = max(shells)
    counts = {l: 0 for l in range(max_shell + 1)}
    for r in records:
        counts[r.shell] = counts.get(r.shell, 0) + 1
    rows = []
    for l in sorted(counts):
        members = shells.count(l)
        rows.append({
            "shell": l,
            "frequency": counts[l] / n_reps,
            "members": members,
            "lemma_shape": members * float(np.exp(-c_test * 2.0**l * rs / family.h_op**2)),
        })
    freqs = [row["frequency"] for row in rows]
    first = next((i for i, f in enumerate(freqs) if f > 0), len(freqs))
    violations = [rows[i]["shell"] for i in range(first + 1, len(rows))
                  if freqs[i] > freqs[i - 1]]
    return ShellDecayReport(rows=rows, violations=violations, r_star=rs, h_op=family.h_op)


RECORD_CSV_COLUMNS = (
    "replicate_index",
    "selected",
    "sure_min",
    "loss_selected",
    "edf_total",
    "edf_quadratic",
    "edf_linear",
    "exopt_stat",
    "noise_sq_gap",
    "signal_cross",
    "shell",
    "basic_inequality_slack",
)


def records_to_csv(records) -> str:
    """Serialize records with full round-trip float precision (repr)."""
    buf = io.StringIO()
    buf.write(",".join(RECORD_CSV_COLUMNS) + "\n")
    for r in records:
        cells = []
        for col in RECORD_CSV_COLUMNS:
            value = getattr(r, col)
            if value is None:
                cells.append("")
            elif isinstance(value, float):
                cells.append(repr(float(value)))
            else:
                cells.append(str(value))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
