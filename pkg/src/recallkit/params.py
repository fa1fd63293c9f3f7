"""Model parameter sets and their JSON persistence.

Both parameter files are flat JSON objects; ``load``/``save`` round-trip
bit-exactly for finite values because Python's json module serializes
floats with shortest-round-trip repr.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

from .domain import FormatKind, QuestionFormat


class ParamsError(ValueError):
    """A parameter file or parameter set violates its schema."""


@dataclass(frozen=True)
class MLRParams:
    """Logistic-model coefficients over trial-history features.

    w_c weighs per-trial correctness (most recent first), w_t the log
    recency of each past trial, w_s the log spacing between consecutive
    past trials; w_r0 scales the same-direction share, w_r1 the total
    trial count and w_r2 the log age of the first trial. n, m, l are the
    window sizes of the three weight families.
    """

    beta: float
    w_c: tuple[float, ...]
    w_t: tuple[float, ...]
    w_s: tuple[float, ...]
    w_r0: float
    w_r1: float
    w_r2: float
    n: int
    m: int
    l: int

    def __post_init__(self) -> None:
        if self.n < 0 or self.m < 0 or self.l < 0:
            raise ParamsError("window sizes must be non-negative")
        for name, arr, size in (("w_c", self.w_c, self.n), ("w_t", self.w_t, self.m), ("w_s", self.w_s, self.l)):
            if len(arr) != size:
                raise ParamsError(
                    f"{name} has length {len(arr)}, expected window size {size}"
                )
        for name, value in self.scalars().items():
            if not math.isfinite(value):
                raise ParamsError(f"{name} is not finite: {value!r}")
        for name, arr in (("w_c", self.w_c), ("w_t", self.w_t), ("w_s", self.w_s)):
            if any(not math.isfinite(v) for v in arr):
                raise ParamsError(f"{name} contains a non-finite weight")

    def scalars(self) -> dict[str, float]:
        return {
            "beta": self.beta,
            "w_r0": self.w_r0,
            "w_r1": self.w_r1,
            "w_r2": self.w_r2,
        }

    @property
    def windows(self) -> tuple[int, int, int]:
        return (self.n, self.m, self.l)

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "w_c": list(self.w_c),
            "w_t": list(self.w_t),
            "w_s": list(self.w_s),
            "w_r0": self.w_r0,
            "w_r1": self.w_r1,
            "w_r2": self.w_r2,
            "n": self.n,
            "m": self.m,
            "l": self.l,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "MLRParams":
        _require(data, ("beta", "w_c", "w_t", "w_s", "w_r0", "w_r1", "w_r2", "n", "m", "l"), "MLR")
        try:
            return cls(
                beta=float(data["beta"]),
                w_c=tuple(float(v) for v in data["w_c"]),
                w_t=tuple(float(v) for v in data["w_t"]),
                w_s=tuple(float(v) for v in data["w_s"]),
                w_r0=float(data["w_r0"]),
                w_r1=float(data["w_r1"]),
                w_r2=float(data["w_r2"]),
                n=int(data["n"]),
                m=int(data["m"]),
                l=int(data["l"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParamsError):
                raise
            raise ParamsError(f"malformed MLR parameter file: {exc}") from exc


@dataclass(frozen=True)
class RPLParams:
    """Recurrent power-law forgetting parameters.

    s_0 is the initial log-scale of the decay; tau_0c / tau_0i the initial
    curve flatness after a correct / incorrect first trial; tau_c, tau_i,
    s_c, s_i and gamma_c, gamma_i modulate the per-trial updates.
    transfer_t is the probability that inverse-direction knowledge
    substitutes for the queried direction. k_factors maps question-format
    names to difficulty odds ratios (cued recall is fixed at 1).
    """

    s_0: float
    s_c: float
    s_i: float
    tau_0c: float
    tau_0i: float
    tau_c: float
    tau_i: float
    gamma_c: float
    gamma_i: float
    transfer_t: float
    k_factors: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_factors", dict(self.k_factors))
        if self.gamma_c <= 0 or self.gamma_i <= 0:
            raise ParamsError("gamma_c and gamma_i must be positive")
        if self.tau_0c <= 0 or self.tau_0i <= 0:
            raise ParamsError("tau_0c and tau_0i must be positive")
        if not 0.0 <= self.transfer_t <= 1.0:
            raise ParamsError(f"transfer_t must lie in [0, 1], got {self.transfer_t}")
        for name in ("s_0", "s_c", "s_i", "tau_0c", "tau_0i", "tau_c", "tau_i", "gamma_c", "gamma_i", "transfer_t"):
            if not math.isfinite(getattr(self, name)):
                raise ParamsError(f"{name} is not finite")
        for fmt, k in self.k_factors.items():
            FormatKind(fmt)  # raises on unknown format names
            if not (math.isfinite(k) and k > 0):
                raise ParamsError(f"k_factors[{fmt!r}] must be positive and finite")

    def k_for(self, fmt: QuestionFormat) -> float:
        """Difficulty factor for a format; cued recall is always 1."""
        if fmt.kind is FormatKind.CUED_RECALL:
            return 1.0
        return float(self.k_factors.get(fmt.kind.value, 1.0))

    def with_k_factors(self, k_factors: Mapping[str, float]) -> "RPLParams":
        return replace(self, k_factors=dict(k_factors))

    def to_json_dict(self) -> dict:
        return {
            "s_0": self.s_0,
            "s_c": self.s_c,
            "s_i": self.s_i,
            "tau_0c": self.tau_0c,
            "tau_0i": self.tau_0i,
            "tau_c": self.tau_c,
            "tau_i": self.tau_i,
            "gamma_c": self.gamma_c,
            "gamma_i": self.gamma_i,
            "transfer_t": self.transfer_t,
            "k_factors": dict(self.k_factors),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "RPLParams":
        _require(
            data,
            ("s_0", "s_c", "s_i", "tau_0c", "tau_0i", "tau_c", "tau_i", "gamma_c", "gamma_i", "transfer_t", "k_factors"),
            "RPL",
        )
        try:
            return cls(
                s_0=float(data["s_0"]),
                s_c=float(data["s_c"]),
                s_i=float(data["s_i"]),
                tau_0c=float(data["tau_0c"]),
                tau_0i=float(data["tau_0i"]),
                tau_c=float(data["tau_c"]),
                tau_i=float(data["tau_i"]),
                gamma_c=float(data["gamma_c"]),
                gamma_i=float(data["gamma_i"]),
                transfer_t=float(data["transfer_t"]),
                k_factors={str(k): float(v) for k, v in data["k_factors"].items()},
            )
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, ParamsError):
                raise
            raise ParamsError(f"malformed RPL parameter file: {exc}") from exc


def _require(data: Mapping, names: tuple[str, ...], kind: str) -> None:
    if not isinstance(data, Mapping):
        raise ParamsError(f"{kind} parameter file is not a JSON object")
    for name in names:
        if name not in data:
            raise ParamsError(f"{kind} parameter file is missing field {name!r}")


# Reference parameters from a large-scale production fit of each model,
# bundled so predictions work out of the box.

REFERENCE_MLR_PARAMS = MLRParams(
    beta=0.4742,
    w_c=(1.8193, 0.8491, 0.7068, 0.4325, 0.4940, 0.3857),
    w_t=(-0.0958, -0.0778, -0.0535, -0.0257, -0.0238),
    w_s=(0.0657, 0.0285, 0.0325),
    w_r0=0.2126,
    w_r1=-0.0719,
    w_r2=0.0407,
    n=6,
    m=5,
    l=3,
)

# Standard errors matching REFERENCE_MLR_PARAMS, in report order
# (beta, w_c, w_t, w_s, w_r0, w_r1, w_r2).
REFERENCE_MLR_STDERR = (
    0.022,
    0.049, 0.065, 0.082, 0.097, 0.112, 0.122,
    0.011, 0.011, 0.011, 0.012, 0.008,
    0.012, 0.012, 0.014,
    0.054, 0.009, 0.011,
)

REFERENCE_RPL_PARAMS = RPLParams(
    s_0=-3.51706760045,
    s_c=0.00643324313615,
    s_i=-0.0544722896411,
    tau_0c=3.86991863068,
    tau_0i=3.54103122648,
    tau_c=0.396606246542,
    tau_i=0.294149151118,
    gamma_c=0.887589628199,
    gamma_i=1.39704082213,
    transfer_t=0.378245635733,
    k_factors={
        "multiple_choice": 2.055274,
        "multiple_choice_with_none": 1.826852,
        "true_false": 1.9616543,
    },
)


def save_mlr_params(params: MLRParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_json_dict(), indent=2) + "\n")


def save_rpl_params(params: RPLParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_json_dict(), indent=2) + "\n")


def load_mlr_params(path: str | Path) -> MLRParams:
    return MLRParams.from_json_dict(_load_json(path))


def load_rpl_params(path: str | Path) -> RPLParams:
    return RPLParams.from_json_dict(_load_json(path))


def load_params(path: str | Path, kind: str) -> MLRParams | RPLParams:
    """Load a parameter file; kind is "mlr" or "rpl"."""
    if kind == "mlr":
        return load_mlr_params(path)
    if kind == "rpl":
        return load_rpl_params(path)
    raise ValueError(f"unknown model kind {kind!r}")


def _load_json(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParamsError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParamsError(f"{path}: expected a JSON object")
    return data
