"""Recurrent power-law knowledge-state model.

Recall probability after a trial follows a power-law forgetting curve
p_cr = (1 + e^{-s} r)^{-e^{-tau}} in the retention interval r; each trial
resets the curve to 1 (feedback is immediate) and reshapes it by updating
(tau, s) from the pre-trial recall estimate, the outcome, and the
format's guess probability. Question formats easier than cued recall
multiply the knowledge odds by a difficulty factor k; guessing mixes in
with probability g; and study of the opposite direction of the pair can
substitute for the target with a fixed transfer probability.

The two study directions of a KC are separate items with their own
(tau, s) state, each updated only when studied in that direction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import Direction, FormatKind, KCHistory, QuestionFormat, TrialRecord
from .optimizers import NelderMeadResult, OptimizerConfig, nelder_mead
from .params import RPLParams

# Update multipliers are clamped here so tau can never cross zero, which
# would flip the sign of the decay exponent.
MIN_UPDATE_MULTIPLIER = 1e-6

PROBABILITY_CLAMP = 1e-9

DEFAULT_COLD_START = 0.5


@dataclass(frozen=True)
class ItemState:
    """Forgetting-curve state of one studyable direction of a KC."""

    tau: float
    s: float
    last_trial_time: int
    trial_count: int

    def __post_init__(self) -> None:
        if self.trial_count < 1:
            raise ValueError("state exists only after the first trial")


@dataclass(frozen=True)
class StatePair:
    """Per-direction states of one (student, KC) pair; None = never studied."""

    forward: ItemState | None = None
    backward: ItemState | None = None

    def get(self, direction: Direction) -> ItemState | None:
        return self.forward if direction is Direction.FORWARD else self.backward

    def with_state(self, direction: Direction, state: ItemState) -> "StatePair":
        if direction is Direction.FORWARD:
            return StatePair(forward=state, backward=self.backward)
        return StatePair(forward=self.forward, backward=state)

    @property
    def empty(self) -> bool:
        return self.forward is None and self.backward is None


@dataclass(frozen=True)
class RecallPrediction:
    probability: float
    cold_start: bool


def recall_probability(state: ItemState, r: float) -> float:
    """Recall probability after r seconds: (1 + e^{-s} r)^{-e^{-tau}}.

    Exactly 1 at r = 0, strictly decreasing in r, positive for all finite
    r.

    Raises:
        ValueError: negative retention interval.
    """
    if r < 0:
        raise ValueError(f"retention interval must be non-negative, got {r}")
    return math.exp(-math.exp(-state.tau) * math.log1p(math.exp(-state.s) * r))


def init_state(first_trial_correct: bool, trial_time: int, params: RPLParams) -> ItemState:
    """First-trial state: s starts at s_0, tau at tau_0c or tau_0i by outcome."""
    return ItemState(
        tau=params.tau_0c if first_trial_correct else params.tau_0i,
        s=params.s_0,
        last_trial_time=trial_time,
        trial_count=1,
    )


def update_state(
    state: ItemState,
    outcome: bool,
    trial_time: int,
    g_f: float,
    params: RPLParams,
) -> ItemState:
    """Reshape the curve for one trial at trial_time.

    The recall estimate driving the update is computed from the
    pre-update state at the elapsed interval. Correct answers flatten the
    curve by the more the recall estimate had decayed; incorrect answers
    steepen it by the more recall was still expected. A larger guess
    probability damps correct updates (the answer may have been luck) and
    amplifies incorrect ones.

    Raises:
        ValueError: trial_time before the last trial, or g_f outside [0, 1).
    """
    if trial_time < state.last_trial_time:
        raise ValueError(
            f"trial_time {trial_time} precedes last trial {state.last_trial_time}"
        )
    if not 0.0 <= g_f < 1.0:
        raise ValueError(f"guess probability must lie in [0, 1), got {g_f}")

    p = recall_probability(state, trial_time - state.last_trial_time)
    if outcome:
        tau_mult = 1.0 + (params.tau_c * (1.0 - p)) ** params.gamma_c * (1.0 - g_f)
        s_mult = 1.0 + params.s_c * (1.0 - p) * (1.0 - g_f)
    else:
        tau_mult = 1.0 - (params.tau_i * p) ** params.gamma_i / (1.0 - g_f)
        s_mult = 1.0 - params.s_i * p / (1.0 - g_f)
    tau_mult = max(tau_mult, MIN_UPDATE_MULTIPLIER)
    s_mult = max(s_mult, MIN_UPDATE_MULTIPLIER)

    return ItemState(
        tau=state.tau * tau_mult,
        s=state.s * s_mult,
        last_trial_time=trial_time,
        trial_count=state.trial_count + 1,
    )


def _unit(value: float) -> float:
    # One-ulp float overshoot (e.g. k/(1 - (1 - k)) at p = 1) must not
    # escape the probability pipeline.
    return min(max(value, 0.0), 1.0)


def apply_difficulty(p_cr: float, k_f: float) -> float:
    """Convert cued-recall knowledge to format knowledge: odds scale by k_f."""
    if not 0.0 <= p_cr <= 1.0:
        raise ValueError(f"p_cr must lie in [0, 1], got {p_cr}")
    if k_f <= 0:
        raise ValueError(f"difficulty factor must be positive, got {k_f}")
    denominator = 1.0 - p_cr * (1.0 - k_f)
    if denominator <= 0:
        raise RuntimeError(
            f"difficulty denominator {denominator} <= 0 for p_cr={p_cr}, k={k_f}"
        )
    return _unit(k_f * p_cr / denominator)


def correct_probability(p_k: float, g_f: float) -> float:
    """Chance of a correct answer: knowledge, else a lucky guess."""
    return _unit(p_k + (1.0 - p_k) * g_f)


def apply_transfer(p_c: float, p_o: float | None, transfer_t: float) -> float:
    """Mix in inverse-direction knowledge when the inverse was ever studied."""
    if p_o is None:
        return p_c
    return _unit(p_c + (1.0 - p_c) * p_o * transfer_t)


def predict_rpl(
    params: RPLParams,
    states: StatePair,
    direction: Direction,
    fmt: QuestionFormat,
    now: int,
    cold_start: float = DEFAULT_COLD_START,
) -> RecallPrediction:
    """Full prediction pipeline for one query.

    Target-direction recall decays from its state (0 if never studied in
    that direction), is odds-scaled by the format's difficulty factor,
    mixed with the guess probability, and finally boosted by
    inverse-direction transfer evaluated at cued recall. With no trials in
    either direction the configured cold-start constant is returned,
    flagged.
    """
    if states.empty:
        return RecallPrediction(probability=cold_start, cold_start=True)
    target = states.get(direction)
    inverse = states.get(direction.inverse)
    p_cr = recall_probability(target, now - target.last_trial_time) if target else 0.0
    p_k = apply_difficulty(p_cr, params.k_for(fmt))
    p_c = correct_probability(p_k, fmt.guess_probability)
    p_o = (
        recall_probability(inverse, now - inverse.last_trial_time)
        if inverse
        else None
    )
    return RecallPrediction(
        probability=apply_transfer(p_c, p_o, params.transfer_t),
        cold_start=False,
    )


def evolve_states(
    params: RPLParams,
    trials: Sequence[TrialRecord],
    initial: StatePair | None = None,
) -> StatePair:
    """Evolve a state pair through trials in order; each updates only its
    own direction."""
    states = initial or StatePair()
    for trial in trials:
        current = states.get(trial.direction)
        if current is None:
            new = init_state(trial.correct, trial.timestamp_s, params)
        else:
            new = update_state(
                current,
                trial.correct,
                trial.timestamp_s,
                trial.format.guess_probability,
                params,
            )
        states = states.with_state(trial.direction, new)
    return states


def state_to_json_dict(kc_id: str, direction: Direction, state: ItemState) -> dict:
    return {
        "kc_id": kc_id,
        "direction": direction.value,
        "tau": state.tau,
        "s": state.s,
        "last_trial_time": state.last_trial_time,
        "trial_count": state.trial_count,
    }


def state_from_json_dict(data: Mapping) -> tuple[str, Direction, ItemState]:
    state = ItemState(
        tau=float(data["tau"]),
        s=float(data["s"]),
        last_trial_time=int(data["last_trial_time"]),
        trial_count=int(data["trial_count"]),
    )
    return str(data["kc_id"]), Direction(data["direction"]), state


# ---------------------------------------------------------------------------
# Vectorized likelihood replay used by the trainer.
#
# Trials are replayed round by round: round r holds the r-th trial of
# every (student, KC) pair, so each round is one batch of independent
# state updates. The per-trial arithmetic is identical to the scalar
# functions above (a test pins the agreement).
# ---------------------------------------------------------------------------

_FITTABLE_KINDS = (
    FormatKind.MULTIPLE_CHOICE,
    FormatKind.MULTIPLE_CHOICE_WITH_NONE,
    FormatKind.TRUE_FALSE,
    FormatKind.SELF_GRADED,
)


class ReplayLog:
    """A trial log packed into arrays for fast repeated likelihood replay."""

    def __init__(self, histories: Iterable[KCHistory]) -> None:
        ordered = sorted(histories, key=lambda h: (h.student_id, h.kc_id))
        trials: list[tuple[int, int, TrialRecord]] = []
        for pair_idx, history in enumerate(ordered):
            for seq, trial in enumerate(history.trials):
                trials.append((pair_idx, seq, trial))

        self.n_pairs = len(ordered)
        self.n_trials = len(trials)
        self.pair_keys = [(h.student_id, h.kc_id) for h in ordered]

        kinds_present = sorted(
            {t.format.kind for _, _, t in trials if t.format.kind in _FITTABLE_KINDS},
            key=lambda k: k.value,
        )
        self.fitted_kinds: tuple[FormatKind, ...] = tuple(kinds_present)
        kind_slot = {kind: i + 1 for i, kind in enumerate(kinds_present)}

        self.pair_idx = np.array([p for p, _, _ in trials], dtype=np.intp)
        self.seq = np.array([s for _, s, _ in trials], dtype=np.intp)
        self.dir01 = np.array(
            [0 if t.direction is Direction.FORWARD else 1 for _, _, t in trials],
            dtype=np.intp,
        )
        self.ts = np.array([t.timestamp_s for _, _, t in trials], dtype=float)
        self.correct = np.array([t.correct for _, _, t in trials], dtype=bool)
        self.guess = np.array([t.format.guess_probability for _, _, t in trials])
        self.k_slot = np.array(
            [kind_slot.get(t.format.kind, 0) for _, _, t in trials], dtype=np.intp
        )
        max_rounds = int(self.seq.max()) + 1 if self.n_trials else 0
        self.rounds = [np.flatnonzero(self.seq == r) for r in range(max_rounds)]

    def k_vector(self, params: RPLParams) -> np.ndarray:
        """Slot 0 is cued recall (k = 1); later slots follow fitted_kinds."""
        ks = [1.0] + [
            float(params.k_factors.get(kind.value, 1.0)) for kind in self.fitted_kinds
        ]
        return np.array(ks)

    def predictions(self, params: RPLParams, cold_start: float = DEFAULT_COLD_START) -> np.ndarray:
        """Pre-trial predicted probability for every trial, in log order."""
        return self._replay(params, cold_start)

    def log_likelihood(
        self,
        params: RPLParams,
        cold_start: float = DEFAULT_COLD_START,
        clamp: float = PROBABILITY_CLAMP,
    ) -> float:
        """Total Bernoulli log-likelihood of the log under the model."""
        p = np.clip(self._replay(params, cold_start), clamp, 1.0 - clamp)
        return float(np.sum(np.where(self.correct, np.log(p), np.log1p(-p))))

    def _replay(self, params: RPLParams, cold_start: float) -> np.ndarray:
        tau = np.zeros((self.n_pairs, 2))
        s = np.zeros((self.n_pairs, 2))
        last = np.zeros((self.n_pairs, 2))
        has = np.zeros((self.n_pairs, 2), dtype=bool)
        pred = np.empty(self.n_trials)

        kvec = self.k_vector(params)
        t_transfer = params.transfer_t

        for rows in self.rounds:
            pi = self.pair_idx[rows]
            d = self.dir01[rows]
            inv = 1 - d
            t = self.ts[rows]
            g = self.guess[rows]
            c = self.correct[rows]

            tau_t, s_t = tau[pi, d], s[pi, d]
            has_t, last_t = has[pi, d], last[pi, d]
            r = np.where(has_t, t - last_t, 0.0)
            p_cr = np.where(
                has_t,
                np.exp(-np.exp(-tau_t) * np.log1p(np.exp(-s_t) * r)),
                0.0,
            )

            k = kvec[self.k_slot[rows]]
            p_k = np.clip(k * p_cr / (1.0 - p_cr * (1.0 - k)), 0.0, 1.0)
            p_c = np.clip(p_k + (1.0 - p_k) * g, 0.0, 1.0)

            tau_o, s_o = tau[pi, inv], s[pi, inv]
            has_o, last_o = has[pi, inv], last[pi, inv]
            r_o = np.where(has_o, t - last_o, 0.0)
            p_o = np.where(
                has_o,
                np.exp(-np.exp(-tau_o) * np.log1p(np.exp(-s_o) * r_o)),
                0.0,
            )
            p = np.where(
                has_o, np.clip(p_c + (1.0 - p_c) * p_o * t_transfer, 0.0, 1.0), p_c
            )
            p = np.where(has_t | has_o, p, cold_start)
            pred[rows] = p

            tau_mult = np.where(
                c,
                1.0 + (params.tau_c * (1.0 - p_cr)) ** params.gamma_c * (1.0 - g),
                1.0 - (params.tau_i * p_cr) ** params.gamma_i / (1.0 - g),
            )
            s_mult = np.where(
                c,
                1.0 + params.s_c * (1.0 - p_cr) * (1.0 - g),
                1.0 - params.s_i * p_cr / (1.0 - g),
            )
            tau_mult = np.maximum(tau_mult, MIN_UPDATE_MULTIPLIER)
            s_mult = np.maximum(s_mult, MIN_UPDATE_MULTIPLIER)

            new_tau = np.where(has_t, tau_t * tau_mult, np.where(c, params.tau_0c, params.tau_0i))
            new_s = np.where(has_t, s_t * s_mult, params.s_0)
            tau[pi, d] = new_tau
            s[pi, d] = new_s
            last[pi, d] = t
            has[pi, d] = True

        return pred


# --- Fitting -----------------------------------------------------------------

_SCALAR_FIELDS = (
    "s_0", "s_c", "s_i", "tau_0c", "tau_0i", "tau_c", "tau_i", "gamma_c", "gamma_i", "transfer_t",
)

NEUTRAL_INIT = RPLParams(
    s_0=-1.0,
    s_c=0.05,
    s_i=0.05,
    tau_0c=1.0,
    tau_0i=1.0,
    tau_c=0.1,
    tau_i=0.1,
    gamma_c=1.0,
    gamma_i=1.0,
    transfer_t=0.3,
    k_factors={},
)

_POSITIVE_FLOOR = 1e-6


def _encode(params: RPLParams, fitted_kinds: Sequence[FormatKind]) -> np.ndarray:
    values = [getattr(params, f) for f in _SCALAR_FIELDS]
    values += [float(params.k_factors.get(k.value, 1.5)) for k in fitted_kinds]
    return np.array(values)


def _decode(vector: np.ndarray, fitted_kinds: Sequence[FormatKind]) -> RPLParams | None:
    """Vector -> params, or None when outside the parameter domain."""
    base = dict(zip(_SCALAR_FIELDS, (float(v) for v in vector[: len(_SCALAR_FIELDS)])))
    ks = vector[len(_SCALAR_FIELDS):]
    if (
        base["tau_0c"] < _POSITIVE_FLOOR
        or base["tau_0i"] < _POSITIVE_FLOOR
        or base["gamma_c"] < _POSITIVE_FLOOR
        or base["gamma_i"] < _POSITIVE_FLOOR
        or base["tau_c"] < 0.0
        or base["tau_i"] < 0.0
        or not 0.0 <= base["transfer_t"] <= 1.0
        or any(k < _POSITIVE_FLOOR for k in ks)
    ):
        return None
    k_factors = {kind.value: float(k) for kind, k in zip(fitted_kinds, ks)}
    return RPLParams(k_factors=k_factors, **base)


@dataclass(frozen=True)
class RPLFit:
    params: RPLParams
    log_likelihood: float
    mean_log_likelihood: float
    n_trials: int
    converged: bool
    restarts: int
    optimizer_result: NelderMeadResult | None


def fit_rpl(
    histories: Iterable[KCHistory],
    init: RPLParams | None = None,
    config: OptimizerConfig | None = None,
    restarts: int = 3,
    seed: int = 0,
    cold_start: float = DEFAULT_COLD_START,
) -> RPLFit:
    """Maximum-likelihood fit by Nelder-Mead over the global parameters.

    Fits the ten curve/update/transfer parameters plus one difficulty
    factor per non-cued-recall format present in the log. The likelihood
    replays every history in trial order with the vectorized engine.
    Out-of-domain vectors (negative rates, transfer outside [0, 1]) score
    +inf, which the simplex simply retreats from. The first start is
    ``init`` (default: a neutral interior point); subsequent restarts
    re-seed the simplex around the best point found, jittered
    deterministically from ``seed``.

    Raises:
        ValueError: empty log, a single outcome class, or a non-finite
            likelihood at init.
    """
    log = ReplayLog(histories)
    if log.n_trials == 0:
        raise ValueError("cannot fit on an empty trial log")
    if bool(log.correct.all()) or not bool(log.correct.any()):
        raise ValueError("trial log must contain both correct and incorrect outcomes")

    fitted_kinds = log.fitted_kinds
    start = init if init is not None else NEUTRAL_INIT

    def objective(vector: np.ndarray) -> float:
        params = _decode(vector, fitted_kinds)
        if params is None:
            return math.inf
        ll = log.log_likelihood(params, cold_start=cold_start)
        if not math.isfinite(ll):
            return math.inf
        return -ll / log.n_trials

    x0 = _encode(start, fitted_kinds)
    init_value = objective(x0)
    if not math.isfinite(init_value):
        raise ValueError("likelihood is not finite at the initial parameters")

    cfg = config or OptimizerConfig(max_iterations=6000, tolerance=1e-10)
    rng = np.random.default_rng(seed)
    best: NelderMeadResult | None = None
    current = x0
    for _ in range(max(restarts, 1)):
        result = nelder_mead(objective, current, cfg)
        if best is None or result.value < best.value:
            best = result
        # Fresh simplex around the best point, with a small deterministic
        # jitter so a degenerate simplex cannot trap every restart.
        jitter = 1.0 + 0.05 * rng.standard_normal(best.x.size)
        current = best.x * jitter
        if not math.isfinite(objective(current)):
            current = best.x

    assert best is not None
    if best.value >= init_value:
        warnings.warn(
            "optimizer failed to improve on the initial parameters; "
            "returning the initial point",
            stacklevel=2,
        )
        best_params = _decode(x0, fitted_kinds)
        assert best_params is not None
        return RPLFit(
            params=best_params,
            log_likelihood=-init_value * log.n_trials,
            mean_log_likelihood=-init_value,
            n_trials=log.n_trials,
            converged=False,
            restarts=restarts,
            optimizer_result=best,
        )

    params = _decode(best.x, fitted_kinds)
    assert params is not None
    return RPLFit(
        params=params,
        log_likelihood=-best.value * log.n_trials,
        mean_log_likelihood=-best.value,
        n_trials=log.n_trials,
        converged=best.converged,
        restarts=restarts,
        optimizer_result=best,
    )
