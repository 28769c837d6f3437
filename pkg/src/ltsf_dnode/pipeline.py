"""Forecasting pipeline: decomposition, normalization, per-component NODE or
linear map, denormalization and recomposition, with an exact reverse pass.

Decomposition and normalization statistics depend only on the inputs, so
they are treated as constants; gradients flow through the solver, decoder
and the affine DENORM step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decomposition import DecompConfig, decompose
from .errors import ConfigError, NumericsError
from .instnorm import EPS_FLOOR, denormalize, normalize
from .node import (ComponentParams, ModelParams, SolverConfig, TrajectoryStats,
                   init_component, integrate, integrate_backward)

VARIANTS = ("ltsf_dnode", "linear", "linear_tr", "linear_tsr", "nlinear",
            "no_dcmp", "no_norm", "no_node")

# Components never passed through NORM/DENORM.
UNNORMALIZED = frozenset({"seasonality"})


@dataclass(frozen=True)
class PipelineSpec:
    """Resolved block layout of one model variant."""

    variant: str
    L: int
    H: int
    decompose: bool
    decomp: DecompConfig | None
    normalize: bool
    use_node: bool
    subtract_last: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    norm_axis: str = "feature"
    eps_floor: float = EPS_FLOOR
    individual: bool = False

    @property
    def components(self) -> tuple[str, ...]:
        if not self.decompose:
            return ("series",)
        if self.decomp.extract_seasonality:
            return ("trend", "seasonality", "residual")
        return ("trend", "residual")

    def normalized(self, comp: str) -> bool:
        return self.normalize and comp not in UNNORMALIZED

    @property
    def blocks(self) -> list[str]:
        """Ordered block names, for reports and display."""
        out = []
        if self.subtract_last:
            out.append("SUBTRACT_LAST")
        if self.decompose:
            out.append("DCMP(T/S/R)" if self.decomp.extract_seasonality
                       else "DCMP(T/R)")
        if self.normalize:
            out.append("NORM")
        out.append(f"NODE({self.solver.method})" if self.use_node else "LINEAR")
        if self.normalize:
            out.append("DENORM")
        if self.subtract_last:
            out.append("ADD_LAST")
        out.append("RECOMPOSE")
        return out


def make_spec(variant: str, L: int, H: int, *, kernel_size: int = 25,
              period: int = 24, use_seasonality: bool = True,
              use_instance_norm: bool = True, **kw) -> PipelineSpec:
    """Spec for ``variant`` given data-driven decomposition/normalization flags."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    dcmp = lambda season: DecompConfig(kernel_size, period, season)  # noqa: E731
    table = {
        "ltsf_dnode": (dcmp(use_seasonality), use_instance_norm, True, False),
        "linear": (None, False, False, False),
        "nlinear": (None, False, False, True),
        "linear_tr": (dcmp(False), False, False, False),
        "linear_tsr": (dcmp(True), False, False, False),
        "no_dcmp": (None, use_instance_norm, True, False),
        "no_norm": (dcmp(use_seasonality), False, True, False),
        "no_node": (dcmp(use_seasonality), use_instance_norm, False, False),
    }
    decomp, norm, node, last = table[variant]
    if decomp is not None:
        decomp.check_length(L)
    return PipelineSpec(variant, L, H, decomp is not None, decomp, norm, node,
                        last, **kw)


def init_model(spec: PipelineSpec, n_features: int, rng: np.random.Generator
               ) -> ModelParams:
    per_feature = n_features if spec.individual else None
    return ModelParams({
        comp: init_component(spec.L, spec.H, rng, use_node=spec.use_node,
                             n_features=per_feature)
        for comp in spec.components
    })


def _to_cols(c: np.ndarray) -> np.ndarray:
    """(B, L, F) -> (F, L, B)."""
    return np.ascontiguousarray(c.transpose(2, 1, 0))


def _from_cols(z: np.ndarray) -> np.ndarray:
    return z.transpose(2, 1, 0)


@dataclass
class _Cache:
    parts: dict
    last: np.ndarray | None


def prepare(spec: PipelineSpec, x: np.ndarray) -> _Cache:
    """Parameter-free preprocessing of a batch ``x`` of shape (B, L, F)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    last = None
    if spec.subtract_last:
        last = x[:, -1:, :]
        x = x - last
    if spec.decompose:
        comps = decompose(x, spec.decomp).components()
    else:
        comps = {"series": x}
    parts = {}
    for name, c in comps.items():
        state = None
        if spec.normalized(name):
            c, state = normalize(c, spec.eps_floor, spec.norm_axis)
            state = state.for_horizon(spec.H)
        parts[name] = (_to_cols(c), state)
    return _Cache(parts, last)


@dataclass
class ForwardResult:
    pred: np.ndarray                          # (B, H, F)
    stats: dict[str, TrajectoryStats]
    tapes: dict
    cache: _Cache


def forward(spec: PipelineSpec, model: ModelParams, x: np.ndarray, *,
            eps_seed: int = 0, record: bool = False,
            cache: _Cache | None = None) -> ForwardResult:
    cache = prepare(spec, x) if cache is None else cache
    pred = 0.0
    stats, tapes = {}, {}
    for k, (name, (z0, state)) in enumerate(cache.parts.items()):
        params = model.components[name]
        if params.w is None:
            zT, st, tape = z0, TrajectoryStats(eps_seed=eps_seed), None
        else:
            zT, st, tape = integrate(params.w, z0, spec.solver,
                                     eps_seed=eps_seed + k, record=record)
        y = _from_cols(params.dec_w @ zT + params.dec_b[..., None])
        if state is not None:
            y = denormalize(y, state)
        pred = pred + y
        stats[name] = st
        tapes[name] = (zT, tape)
    if cache.last is not None:
        pred = pred + cache.last
    return ForwardResult(pred, stats, tapes, cache)


def regularizer(stats: dict[str, TrajectoryStats], lambda_k: float,
                lambda_j: float) -> float:
    return float(sum(lambda_k * s.kinetic + lambda_j * s.jacobian
                     for s in stats.values()))


def backward(spec: PipelineSpec, model: ModelParams, result: ForwardResult,
             y: np.ndarray, lambda_k: float = 0.0, lambda_j: float = 0.0
             ) -> tuple[float, ModelParams]:
    """Loss and its exact gradient for a recorded forward pass.

    Loss = mean squared error over every element of the batch plus, per
    component with an ODE, ``lambda_k * kinetic + lambda_j * jacobian``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[None]
    diff = result.pred - y
    loss = float(np.mean(diff * diff)) + regularizer(result.stats, lambda_k,
                                                      lambda_j)
    g_pred = (2.0 / diff.size) * diff
    grads = {}
    for name, (z0, state) in result.cache.parts.items():
        params = model.components[name]
        g = g_pred if state is None else state.sigma * g_pred
        g_cols = _to_cols(g)                               # (F, H, B)
        zT, tape = result.tapes[name]
        g_dec_w = _sum_lead(g_cols @ zT.swapaxes(-1, -2), params.dec_w.shape)
        g_dec_b = _sum_lead(g_cols.sum(axis=-1), params.dec_b.shape)
        g_w = None
        if params.w is not None:
            if tape is None:
                raise ValueError("forward pass was not recorded")
            g_zT = params.dec_w.swapaxes(-1, -2) @ g_cols
            g_w, _ = integrate_backward(params.w, tape, spec.solver, g_zT,
                                        lambda_k, lambda_j)
        grads[name] = ComponentParams(g_w, g_dec_w, g_dec_b)
    bundle = ModelParams(grads)
    if not bundle.all_finite():
        raise NumericsError("non-finite gradient")
    return loss, bundle


def _sum_lead(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    return g


def predict(spec: PipelineSpec, model: ModelParams, x: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    """Forecasts for a stack of windows (B, L, F), evaluated in chunks."""
    x = np.asarray(x, dtype=np.float64)
    out = [forward(spec, model, x[i:i + batch_size]).pred
           for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(out, axis=0)
