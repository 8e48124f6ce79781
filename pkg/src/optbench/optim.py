"""Adam-family optimizers with per-element learning-rate modulators.

Every adaptive variant shares Adam's moment machinery

    m_t = rho1*m_{t-1} + (1 - rho1)*g_t
    u_t = rho2*u_{t-1} + (1 - rho2)*g_t**2
    mhat = m_t / (1 - rho1**t),   uhat = u_t / (1 - rho2**t)

and applies

    theta <- theta - lr * mod_t * mhat / (sqrt(uhat) + epsilon)

where mod_t is the variant's element-wise modulator:

    sgd       theta <- theta - lr*g_t  (no moments, no modulator)
    adam      mod = 1
    amsgrad   mod = 1; denominator uses the running max of u_t, uncorrected
    diffgrad  mod = sig(|g_prev - g|)
    dgrad     mod = sig(4 * nd),          nd = delta/max(delta), delta = |g - avg|
    cos       mod = sig(4 * lr_t * nd),   lr_t cyclic in [1, 2] with period `steps`
    exp       mod = 1.5 * (r/max(r)),     r = (k*delta) * e**(-k*delta)
    explr     mod = (1.5 * (r/max(r))) * sig(2*nd),   r = delta * e**(-delta)

avg is an exponential moving average (decay rho2) of g**2 by default, or of
g with avg_mode="grad"; a step reads avg before updating it, the same way
diffgrad reads g_prev before replacing it. Every max() denominator is
guarded by eps_div, so a step with zero information freezes the parameters
instead of dividing by zero. max() spans one parameter tensor at a time by
default, or the whole parameter set with norm_scope="global".

An optimizer instance is single-threaded during a step; distinct instances
never share state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import (
    Tensor,
    absolute,
    elem_max_scalar,
    hadamard,
    hadamard_exp,
    maximum,
    ones_like,
    scale,
    sigmoid,
    sqrt,
    sub,
    tensor,
    zeros_like,
)

__all__ = [
    "VARIANTS",
    "NORM_SCOPES",
    "AVG_MODES",
    "OptimizerConfig",
    "OptimizerState",
    "ParamState",
    "StepReport",
    "Optimizer",
    "NonFiniteGradientError",
    "UnknownParameterError",
    "ShapeDriftError",
    "ema_update",
    "bias_correct",
    "delta_vs_average",
    "normalize_delta",
    "cyclic_rate",
    "exp_modulator",
    "explr_modulator",
    "to_snapshot",
    "from_snapshot",
]

VARIANTS = ("sgd", "adam", "amsgrad", "diffgrad", "dgrad", "cos", "exp", "explr")
NORM_SCOPES = ("per_tensor", "global")
AVG_MODES = ("squared_grad", "grad")

# Variants whose modulator is built from delta = |g - avg|.
_AVG_FAMILY = ("dgrad", "cos", "exp", "explr")


class NonFiniteGradientError(ValueError):
    """A gradient tensor contained NaN or Inf."""


class UnknownParameterError(ValueError):
    """Step called with parameter names that do not match the optimizer state."""


class ShapeDriftError(ValueError):
    """A parameter changed shape between step calls."""


@dataclass(frozen=True)
class OptimizerConfig:
    variant: str
    lr: float = 0.001
    rho1: float = 0.9
    rho2: float = 0.999
    epsilon: float = 1e-8
    k: float = 4.0
    steps: int = 30
    eps_div: float = 1e-12
    norm_scope: str = "per_tensor"
    avg_mode: str = "squared_grad"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0.0 <= self.rho1 < 1.0:
            raise ValueError(f"rho1 must satisfy 0 <= rho1 < 1, got {self.rho1}")
        if not 0.0 <= self.rho2 < 1.0:
            raise ValueError(f"rho2 must satisfy 0 <= rho2 < 1, got {self.rho2}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.eps_div > 0:
            raise ValueError(f"eps_div must be > 0, got {self.eps_div}")
        if self.norm_scope not in NORM_SCOPES:
            raise ValueError(f"norm_scope must be one of {NORM_SCOPES}, got {self.norm_scope!r}")
        if self.avg_mode not in AVG_MODES:
            raise ValueError(f"avg_mode must be one of {AVG_MODES}, got {self.avg_mode!r}")


@dataclass
class ParamState:
    """Per-parameter moment tensors, all zero-initialized."""

    m: Tensor
    u: Tensor
    avg: Tensor
    u_max: Tensor
    g_prev: Tensor

    @classmethod
    def zeros_for(cls, theta: Tensor) -> "ParamState":
        return cls(
            m=zeros_like(theta),
            u=zeros_like(theta),
            avg=zeros_like(theta),
            u_max=zeros_like(theta),
            g_prev=zeros_like(theta),
        )


@dataclass
class OptimizerState:
    t: int = 0
    slots: dict[str, ParamState] = field(default_factory=dict)


@dataclass(frozen=True)
class StepReport:
    """Diagnostics for one step: the modulator actually applied per parameter,
    the realized parameter change (new minus old), and the cyclic rate scalar
    (1.0 for variants without one)."""

    modulator: dict[str, Tensor]
    effective_update: dict[str, Tensor]
    lr_scalar: float = 1.0


def ema_update(prev: Tensor, g: Tensor, rho: float) -> Tensor:
    """rho*prev + (1 - rho)*g; pass g**2 for a squared-gradient average."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must satisfy 0 <= rho < 1, got {rho}")
    return scale(prev, rho) + scale(g, 1.0 - rho)


def bias_correct(x: Tensor, rho: float, t: int) -> Tensor:
    """x / (1 - rho**t); undefined before the first step."""
    if t < 1:
        raise ValueError(f"bias correction needs t >= 1, got t={t}")
    return Tensor(x.shape, x.data / (1.0 - rho**t))


def delta_vs_average(g: Tensor, avg: Tensor) -> Tensor:
    """|g - avg|: element-wise gap between a gradient and its running average."""
    return absolute(sub(g, avg))


def normalize_delta(d: Tensor, eps_div: float = 1e-12, max_value: float | None = None) -> Tensor:
    """d divided by its own max (or a supplied one), guarded by eps_div.

    An all-zero d yields an all-zero result rather than NaN; otherwise the
    output lies in [0, 1] and the max-attaining element maps to exactly 1.
    """
    m = elem_max_scalar(d) if max_value is None else max_value
    return d / max(m, eps_div)


def cyclic_rate(t: int, steps: int) -> float:
    """Cyclic per-step rate in [1, 2] with period `steps` (t counts steps from 1)."""
    lr = 2.0 - abs(math.cos(math.pi * t / steps)) * math.exp(-0.01 * (t % steps + 1))
    if lr < 9e-4:  # stated floor; unreachable since lr >= 1 for all t
        lr = 9e-4
    return lr


def _raw_exp_curve(delta: Tensor, k: float) -> Tensor:
    # (k*delta) * e**(-k*delta): rises to 1/e at k*delta = 1, then decays.
    kd = scale(delta, k)
    return hadamard(kd, hadamard_exp(-kd))


def exp_modulator(
    delta: Tensor, k: float, eps_div: float = 1e-12, max_raw: float | None = None
) -> Tensor:
    """1.5 * r/max(r) with r = (k*delta)*e**(-k*delta); range [0, 1.5].

    The ratio is formed before the 1.5 factor so the max-attaining element
    comes out exactly 1.5 whenever max(r) clears the eps_div guard.
    """
    raw = _raw_exp_curve(delta, k)
    m = elem_max_scalar(raw) if max_raw is None else max_raw
    return scale(raw / max(m, eps_div), 1.5)


def explr_modulator(
    delta: Tensor,
    delta_norm: Tensor,
    eps_div: float = 1e-12,
    max_raw: float | None = None,
) -> Tensor:
    """(1.5 * r/max(r)) * sig(2*delta_norm) with r = delta*e**(-delta).

    delta_norm is the max-normalized delta in [0, 1], so the sigmoid factor
    lies in [0.5, sig(2)] and the product in [0, 1.5*sig(2)].
    """
    raw = hadamard(delta, hadamard_exp(-delta))
    m = elem_max_scalar(raw) if max_raw is None else max_raw
    lr_hat = scale(raw / max(m, eps_div), 1.5)
    return hadamard(lr_hat, sigmoid(scale(delta_norm, 2.0)))


class Optimizer:
    """Stateful per-parameter update rule for one variant.

    Parameters are named tensors; the first step fixes the name set and
    shapes, and every later step must match them. step() is pure with
    respect to its inputs: it returns the new parameter dict and a
    StepReport, mutating only the optimizer's own state.
    """

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.state = OptimizerState()
        self._names: list[str] = []

    def step(
        self, params: dict[str, Tensor], grads: dict[str, Tensor]
    ) -> tuple[dict[str, Tensor], StepReport]:
        cfg = self.cfg
        if not params:
            raise ValueError("step over an empty parameter set")
        if set(grads) != set(params):
            raise UnknownParameterError(
                f"gradient names {sorted(grads)} do not match parameter names {sorted(params)}"
            )

        if not self.state.slots:
            self._names = list(params)
            for name in self._names:
                self.state.slots[name] = ParamState.zeros_for(params[name])
        elif set(params) != set(self.state.slots):
            raise UnknownParameterError(
                f"parameter names {sorted(params)} do not match optimizer state "
                f"{sorted(self.state.slots)}"
            )

        for name in self._names:
            if params[name].shape != self.state.slots[name].m.shape:
                raise ShapeDriftError(
                    f"parameter {name!r} changed shape: state has "
                    f"{self.state.slots[name].m.shape}, got {params[name].shape}"
                )
            if params[name].shape != grads[name].shape:
                raise ShapeDriftError(
                    f"gradient for {name!r} has shape {grads[name].shape}, "
                    f"parameter has {params[name].shape}"
                )
            if not np.isfinite(grads[name].data).all():
                raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")

        self.state.t += 1
        t = self.state.t

        new_params: dict[str, Tensor] = {}
        mods: dict[str, Tensor] = {}
        lr_scalar = 1.0

        if cfg.variant == "sgd":
            for name in self._names:
                theta, g = params[name], grads[name]
                new_params[name] = theta - cfg.lr * g
                mods[name] = ones_like(theta)
        elif cfg.variant in _AVG_FAMILY:
            lr_scalar = self._step_avg_family(params, grads, t, new_params, mods)
        else:
            self._step_moment_only(params, grads, t, new_params, mods)

        updates = {name: sub(new_params[name], params[name]) for name in self._names}
        return new_params, StepReport(modulator=mods, effective_update=updates, lr_scalar=lr_scalar)

    def _moments(self, name: str, g: Tensor, t: int) -> tuple[Tensor, Tensor]:
        """Advance m and u for one parameter; return bias-corrected (mhat, uhat)."""
        cfg, slot = self.cfg, self.state.slots[name]
        slot.m = ema_update(slot.m, g, cfg.rho1)
        slot.u = ema_update(slot.u, hadamard(g, g), cfg.rho2)
        return bias_correct(slot.m, cfg.rho1, t), bias_correct(slot.u, cfg.rho2, t)

    def _step_moment_only(self, params, grads, t, new_params, mods) -> None:
        """adam, amsgrad, diffgrad: no cross-tensor coupling."""
        cfg = self.cfg
        for name in self._names:
            theta, g = params[name], grads[name]
            slot = self.state.slots[name]
            mhat, uhat = self._moments(name, g, t)

            if cfg.variant == "adam":
                mod = ones_like(theta)
                denom = sqrt(uhat) + cfg.epsilon
            elif cfg.variant == "amsgrad":
                slot.u_max = maximum(slot.u_max, slot.u)
                mod = ones_like(theta)
                denom = sqrt(slot.u_max) + cfg.epsilon
            else:  # diffgrad
                mod = sigmoid(absolute(sub(slot.g_prev, g)))
                denom = sqrt(uhat) + cfg.epsilon
                slot.g_prev = g

            new_params[name] = theta - cfg.lr * mod * mhat / denom
            mods[name] = mod

    def _step_avg_family(self, params, grads, t, new_params, mods) -> float:
        """dgrad, cos, exp, explr: modulators built from delta = |g - avg|.

        Two passes so norm_scope="global" can take max() across every
        parameter tensor before any update is applied.
        """
        cfg = self.cfg
        deltas = {
            name: delta_vs_average(grads[name], self.state.slots[name].avg)
            for name in self._names
        }
        raws = {}
        if cfg.variant in ("exp", "explr"):
            k = cfg.k if cfg.variant == "exp" else 1.0
            raws = {name: _raw_exp_curve(deltas[name], k) for name in self._names}

        if cfg.norm_scope == "global":
            whole_delta = max(elem_max_scalar(d) for d in deltas.values())
            delta_max = {name: whole_delta for name in self._names}
            raw_max = {}
            if raws:
                whole_raw = max(elem_max_scalar(r) for r in raws.values())
                raw_max = {name: whole_raw for name in self._names}
        else:
            delta_max = {name: elem_max_scalar(deltas[name]) for name in self._names}
            raw_max = {name: elem_max_scalar(raws[name]) for name in self._names} if raws else {}

        lr_scalar = cyclic_rate(t, cfg.steps) if cfg.variant == "cos" else 1.0

        for name in self._names:
            theta, g = params[name], grads[name]
            slot = self.state.slots[name]
            mhat, uhat = self._moments(name, g, t)

            if cfg.variant == "dgrad":
                nd = normalize_delta(deltas[name], cfg.eps_div, delta_max[name])
                mod = sigmoid(scale(nd, 4.0))
            elif cfg.variant == "cos":
                nd = normalize_delta(deltas[name], cfg.eps_div, delta_max[name])
                mod = sigmoid(scale(nd, 4.0 * lr_scalar))
            elif cfg.variant == "exp":
                mod = scale(raws[name] / max(raw_max[name], cfg.eps_div), 1.5)
            else:  # explr
                nd = normalize_delta(deltas[name], cfg.eps_div, delta_max[name])
                lr_hat = scale(raws[name] / max(raw_max[name], cfg.eps_div), 1.5)
                mod = hadamard(lr_hat, sigmoid(scale(nd, 2.0)))

            new_params[name] = theta - cfg.lr * mod * mhat / (sqrt(uhat) + cfg.epsilon)
            mods[name] = mod

            # avg is read by the modulator above, then advanced, exactly the
            # way diffgrad replaces g_prev after using it.
            if cfg.avg_mode == "squared_grad":
                slot.avg = ema_update(slot.avg, hadamard(g, g), cfg.rho2)
            else:
                slot.avg = ema_update(slot.avg, g, cfg.rho2)

        return lr_scalar


SNAPSHOT_VERSION = 1


def _tensor_to_json(x: Tensor) -> dict:
    return {"shape": list(x.shape), "data": x.tolist()}


def _tensor_from_json(obj: dict) -> Tensor:
    return tensor(obj["data"], tuple(obj["shape"]))


def to_snapshot(opt: Optimizer) -> str:
    """Serialize config plus full state as JSON; floats round-trip exactly."""
    doc = {
        "format": "optbench-state",
        "version": SNAPSHOT_VERSION,
        "variant": opt.cfg.variant,
        "config": {
            "lr": opt.cfg.lr,
            "rho1": opt.cfg.rho1,
            "rho2": opt.cfg.rho2,
            "epsilon": opt.cfg.epsilon,
            "k": opt.cfg.k,
            "steps": opt.cfg.steps,
            "eps_div": opt.cfg.eps_div,
            "norm_scope": opt.cfg.norm_scope,
            "avg_mode": opt.cfg.avg_mode,
        },
        "t": opt.state.t,
        "order": list(opt._names),
        "params": {
            name: {
                "m": _tensor_to_json(slot.m),
                "u": _tensor_to_json(slot.u),
                "avg": _tensor_to_json(slot.avg),
                "u_max": _tensor_to_json(slot.u_max),
                "g_prev": _tensor_to_json(slot.g_prev),
            }
            for name, slot in opt.state.slots.items()
        },
    }
    return json.dumps(doc, indent=2)


def from_snapshot(text: str) -> Optimizer:
    doc = json.loads(text)
    if doc.get("format") != "optbench-state":
        raise ValueError("not an optimizer state snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
    cfg = OptimizerConfig(variant=doc["variant"], **doc["config"])
    opt = Optimizer(cfg)
    opt.state.t = int(doc["t"])
    opt._names = list(doc["order"])
    for name in opt._names:
        fields = doc["params"][name]
        opt.state.slots[name] = ParamState(
            m=_tensor_from_json(fields["m"]),
            u=_tensor_from_json(fields["u"]),
            avg=_tensor_from_json(fields["avg"]),
            u_max=_tensor_from_json(fields["u_max"]),
            g_prev=_tensor_from_json(fields["g_prev"]),
        )
    return opt
