"""Multiple logistic regression over trial-history features.

The model predicts recall of a KC at a point in time from five feature
groups computed over the student's past trials on that KC: per-trial
correctness, log recency of each trial, log spacing between consecutive
trials, the share of past trials studied in the queried direction, and
two long-range summaries (trial count, log age of the first trial).
Past trials are indexed reverse-chronologically: trial 1 is the most
recent. Feature sums truncate to the trials that exist.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import Direction, KCHistory, TrialRecord
from .optimizers import OptimizerConfig, SingularHessianError, newton_raphson
from .params import MLRParams


class PerfectSeparationError(RuntimeError):
    """The MLE is unbounded: some coefficient diverges during fitting."""


class CollinearFeaturesError(RuntimeError):
    """The observed information is singular; features are collinear."""


@dataclass(frozen=True)
class FeatureVector:
    """Raw feature components for one prediction; weights apply at predict.

    correctness[i-1] is 1.0/0.0 for past trial i (most recent first, up to
    n). log_recency[j-1] is ln(now - t_j) for past trial j (up to m).
    log_spacing[k-1] is ln(t_{k+1} - t_{k+2}), the log gap between
    consecutive past trials, defined only when trial k+2 exists (up to l).
    same_direction_share is the fraction of past trials whose direction
    matches the query (0 for an empty history); trial_count and log_span
    summarize the whole history and are 0 when it is empty.
    """

    correctness: tuple[float, ...]
    log_recency: tuple[float, ...]
    log_spacing: tuple[float, ...]
    same_direction_share: float
    trial_count: float
    log_span: float


def _log_gap(seconds: int) -> float:
    # Same-second events would make the argument 0; clamp at 1 s (ln 1 = 0).
    return math.log(max(seconds, 1))


def extract_features(
    history: KCHistory | Sequence[TrialRecord],
    now: int,
    query_direction: Direction,
    windows: tuple[int, int, int],
) -> FeatureVector:
    """Compute feature components from trials strictly before ``now``.

    Raises:
        ValueError: if any trial is at or after ``now``, or a window is
            negative.
    """
    n, m, l = windows
    if n < 0 or m < 0 or l < 0:
        raise ValueError(f"windows must be non-negative, got {windows}")
    trials = history.trials if isinstance(history, KCHistory) else tuple(history)
    if trials and trials[-1].timestamp_s >= now:
        raise ValueError(
            f"prediction time {now} is not after the last trial "
            f"({trials[-1].timestamp_s}); features must be strictly causal"
        )

    recent_first = trials[::-1]
    h = len(recent_first)

    correctness = tuple(1.0 if t.correct else 0.0 for t in recent_first[: min(n, h)])
    log_recency = tuple(_log_gap(now - t.timestamp_s) for t in recent_first[: min(m, h)])
    # Spacing term k needs both trial k+1 and trial k+2.
    max_spacing = min(l, max(0, h - 2))
    log_spacing = tuple(
        _log_gap(recent_first[k].timestamp_s - recent_first[k + 1].timestamp_s)
        for k in range(1, max_spacing + 1)
    )
    if h:
        same = sum(1 for t in recent_first if t.direction is query_direction)
        share = same / h
        span = _log_gap(now - recent_first[-1].timestamp_s)
    else:
        share = 0.0
        span = 0.0

    return FeatureVector(
        correctness=correctness,
        log_recency=log_recency,
        log_spacing=log_spacing,
        same_direction_share=share,
        trial_count=float(h),
        log_span=span,
    )


def design_row(features: FeatureVector, windows: tuple[int, int, int]) -> np.ndarray:
    """[1, c_1..c_n, recency_1..m, spacing_1..l, share, count, log_span].

    Components beyond the available trials are zero, which is exactly the
    truncated-sum semantics: absent terms contribute nothing.
    """
    n, m, l = windows
    row = np.zeros(1 + n + m + l + 3)
    row[0] = 1.0
    row[1 : 1 + len(features.correctness[:n])] = features.correctness[:n]
    row[1 + n : 1 + n + len(features.log_recency[:m])] = features.log_recency[:m]
    row[1 + n + m : 1 + n + m + len(features.log_spacing[:l])] = features.log_spacing[:l]
    row[-3] = features.same_direction_share
    row[-2] = features.trial_count
    row[-1] = features.log_span
    return row


def coefficient_vector(params: MLRParams) -> np.ndarray:
    return np.concatenate(
        [
            [params.beta],
            params.w_c,
            params.w_t,
            params.w_s,
            [params.w_r0, params.w_r1, params.w_r2],
        ]
    )


def params_from_vector(vector: np.ndarray, windows: tuple[int, int, int]) -> MLRParams:
    n, m, l = windows
    v = np.asarray(vector, dtype=float)
    return MLRParams(
        beta=float(v[0]),
        w_c=tuple(v[1 : 1 + n]),
        w_t=tuple(v[1 + n : 1 + n + m]),
        w_s=tuple(v[1 + n + m : 1 + n + m + l]),
        w_r0=float(v[-3]),
        w_r1=float(v[-2]),
        w_r2=float(v[-1]),
        n=n,
        m=m,
        l=l,
    )


def coefficient_names(windows: tuple[int, int, int]) -> list[str]:
    n, m, l = windows
    return (
        ["beta"]
        + [f"w_c_{i}" for i in range(1, n + 1)]
        + [f"w_t_{j}" for j in range(1, m + 1)]
        + [f"w_s_{k}" for k in range(1, l + 1)]
        + ["w_r0", "w_r1", "w_r2"]
    )


def _sigmoid(z: float | np.ndarray):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -700, 700)))


def feature_group_sums(params: MLRParams, features: FeatureVector) -> tuple[float, float, float, float, float]:
    """The five weighted group contributions to the logit, for inspection:
    (correctness, recency, spacing, direction share, long-range)."""
    correctness = sum(w * c for w, c in zip(params.w_c, features.correctness))
    recency = sum(w * r for w, r in zip(params.w_t, features.log_recency))
    spacing = sum(w * s for w, s in zip(params.w_s, features.log_spacing))
    share = params.w_r0 * features.same_direction_share
    long_range = params.w_r1 * features.trial_count + params.w_r2 * features.log_span
    return (correctness, recency, spacing, share, long_range)


def predict_mlr(params: MLRParams, features: FeatureVector) -> float:
    """Recall probability: the logistic of beta plus the five group sums.

    Raises:
        ValueError: on a non-finite feature component (NaN never
            propagates silently into a probability).
    """
    row = design_row(features, params.windows)
    if not np.all(np.isfinite(row)):
        raise ValueError("feature vector contains a non-finite component")
    return float(_sigmoid(coefficient_vector(params) @ row))


def build_training_examples(
    histories: Iterable[KCHistory],
    windows: tuple[int, int, int],
) -> list[tuple[FeatureVector, bool]]:
    """Causally replay histories into (features-before-trial, outcome) pairs.

    The prefix for each trial contains only strictly earlier timestamps,
    so same-second records never leak into their own features.
    """
    examples: list[tuple[FeatureVector, bool]] = []
    for history in histories:
        for i, trial in enumerate(history.trials):
            prefix = [t for t in history.trials[:i] if t.timestamp_s < trial.timestamp_s]
            fv = extract_features(prefix, trial.timestamp_s, trial.direction, windows)
            examples.append((fv, trial.correct))
    return examples


def _design_matrix(
    dataset: Sequence[tuple[FeatureVector, bool]],
    windows: tuple[int, int, int],
) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([design_row(fv, windows) for fv, _ in dataset])
    y = np.array([1.0 if correct else 0.0 for _, correct in dataset])
    return X, y


@dataclass(frozen=True)
class MLRFit:
    params: MLRParams
    standard_errors: tuple[float, ...]
    z_values: tuple[float, ...]
    p_values: tuple[float, ...]
    log_likelihood: float
    converged: bool
    iterations: int

    def report_rows(self) -> list[dict]:
        names = coefficient_names(self.params.windows)
        coefs = coefficient_vector(self.params)
        rows = []
        for name, coef, se, z, p in zip(names, coefs, self.standard_errors, self.z_values, self.p_values):
            # Coefficients of identically-zero feature columns cannot be
            # estimated; their statistics serialize as null, not NaN.
            estimable = not math.isnan(se)
            rows.append(
                {
                    "coef": name,
                    "value": float(coef),
                    "std_err": se if estimable else None,
                    "z": z if estimable else None,
                    "p": p,
                    "ci_low": float(coef - 1.96 * se) if estimable else None,
                    "ci_high": float(coef + 1.96 * se) if estimable else None,
                }
            )
        return rows

    def report_table(self) -> str:
        """Aligned plain-text fit report (coefficient, SE, z, p, 95% CI)."""
        header = ("coef", "value", "std err", "z", "P>|z|", "0.025", "0.975")

        def cell(value, fmt: str) -> str:
            return "n/a" if value is None else format(value, fmt)

        rows = [
            (
                r["coef"],
                f"{r['value']:.4f}",
                cell(r["std_err"], ".3f"),
                cell(r["z"], ".3f"),
                f"{r['p']:.3f}",
                cell(r["ci_low"], ".3f"),
                cell(r["ci_high"], ".3f"),
            )
            for r in self.report_rows()
        ]
        widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        return {
            "coefficients": self.report_rows(),
            "windows": list(self.params.windows),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def fit_mlr(
    dataset: Sequence[tuple[FeatureVector, bool]],
    windows: tuple[int, int, int],
    init: MLRParams | None = None,
    config: OptimizerConfig | None = None,
) -> MLRFit:
    """Maximum-likelihood fit via damped Newton-Raphson.

    Standard errors come from the inverse observed information at the
    optimum. Convergence: max absolute coefficient step below the config
    tolerance (default 1e-8) within the iteration cap (default 100).

    Raises:
        ValueError: empty dataset or a single outcome class.
        PerfectSeparationError: coefficients diverge (unbounded MLE).
        CollinearFeaturesError: singular observed information.
    """
    if not dataset:
        raise ValueError("cannot fit on an empty dataset")
    X_full, y = _design_matrix(dataset, windows)
    if y.min() == y.max():
        label = "positive" if y.max() == 0.0 else "negative"
        raise ValueError(f"dataset has no {label} outcomes; the MLE is undefined")

    # Identically-zero columns (features never observed at these window
    # sizes, e.g. spacing lags no history is long enough to fill) carry no
    # information; excluding them keeps the Hessian invertible. They report
    # coefficient 0 with undefined SE and p = 1.
    nonzero = np.any(X_full != 0.0, axis=0)
    nonzero[0] = True
    active = np.flatnonzero(nonzero)
    X = X_full[:, active]

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        eta = X @ theta
        p = _sigmoid(eta)
        # Negative Bernoulli log-likelihood via the numerically stable
        # log(1 + e^z) form.
        nll = float(np.sum(np.logaddexp(0.0, eta)) - y @ eta)
        grad = X.T @ (p - y)
        w = p * (1.0 - p)
        hess = X.T @ (X * w[:, None])
        return nll, grad, hess

    theta_full = coefficient_vector(init) if init is not None else np.zeros(X_full.shape[1])
    cfg = config or OptimizerConfig(max_iterations=100, tolerance=1e-8)
    try:
        result = newton_raphson(objective, theta_full[active], cfg)
    except SingularHessianError as exc:
        # A Hessian failure means either linearly dependent columns (a
        # property of X alone) or probabilities saturating under a
        # separable-data likelihood; the design-matrix rank tells them apart.
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise CollinearFeaturesError(
                "design matrix is rank-deficient; features are collinear"
            ) from exc
        raise PerfectSeparationError(
            "likelihood saturated before convergence; the data are likely "
            "perfectly separable"
        ) from exc

    # An unbounded MLE (perfect separation) also shows up as steadily
    # growing coefficients with the likelihood tending to 0.
    if not result.converged and (
        np.max(np.abs(result.x)) > 1e2 or result.value / len(dataset) < 1e-7
    ):
        raise PerfectSeparationError(
            "coefficients diverged during fitting; the data are likely "
            "perfectly separable"
        )

    dim = X_full.shape[1]
    coefs = np.zeros(dim)
    coefs[active] = result.x
    ses = np.full(dim, math.nan)
    ses[active] = np.sqrt(np.clip(np.diag(result.covariance), 0.0, None))
    zs = np.full(dim, math.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        zs[active] = np.where(
            ses[active] > 0, coefs[active] / ses[active], np.inf * np.sign(coefs[active])
        )
    ps = tuple(1.0 if math.isnan(z) else _two_sided_p(z) for z in zs)
    return MLRFit(
        params=params_from_vector(coefs, windows),
        standard_errors=tuple(float(s) for s in ses),
        z_values=tuple(float(z) for z in zs),
        p_values=ps,
        log_likelihood=-result.value,
        converged=result.converged,
        iterations=result.iterations,
    )


_FAMILY_SLOTS = ("n", "m", "l")


def _family_pvalues(fit: MLRFit, family: str) -> list[float]:
    names = coefficient_names(fit.params.windows)
    prefix = {"n": "w_c_", "m": "w_t_", "l": "w_s_"}[family]
    return [p for name, p in zip(names, fit.p_values) if name.startswith(prefix)]


def select_windows(
    dataset: Sequence[tuple[FeatureVector, bool]],
    alpha: float = 0.05,
    max_windows: tuple[int, int, int] = (8, 8, 8),
    config: OptimizerConfig | None = None,
) -> tuple[int, int, int]:
    """Pick the largest window per family with all-significant coefficients.

    Families are grown one at a time in the order (n, m, l), holding
    already-selected families at their chosen sizes and later families at
    size 1. A family's candidate size is accepted while every coefficient
    in that family has Wald p-value < alpha; the search stops at the first
    failure. A family whose size-1 coefficient is already insignificant
    selects 0, with a warning.

    The dataset's feature vectors must carry components up to max_windows
    (extract them at max_windows or larger).
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    selected = [1, 1, 1]
    for slot, family in enumerate(_FAMILY_SLOTS):
        chosen = 0
        for size in range(1, max_windows[slot] + 1):
            trial_windows = list(selected)
            trial_windows[slot] = size
            fit = fit_mlr(dataset, tuple(trial_windows), config=config)
            if all(p < alpha for p in _family_pvalues(fit, family)):
                chosen = size
            else:
                break
        if chosen == 0:
            warnings.warn(
                f"window family {family!r} has no significant coefficient even "
                f"at size 1; selecting 0",
                stacklevel=2,
            )
        selected[slot] = chosen
    n, m, l = selected
    return (n, m, l)
