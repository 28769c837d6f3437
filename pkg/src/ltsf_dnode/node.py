"""Linear neural-ODE block: fixed-step Euler/RK4 integration and decoding.

Each component (trend, seasonality, residual) owns an ODE weight ``w`` that
defines the autonomous vector field ``f(z) = w @ z`` on R^L, and a decoder
``dec_w @ z + dec_b`` mapping the terminal state to the horizon.

Internally states are laid out as ``(F, L, N)``: one L-vector per feature
and per batch column. A shared ``w`` of shape (L, L) broadcasts over the
feature axis; per-feature weights have shape (F, L, L).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import NumericsError

# Butcher tableaux (A, b) of the explicit fixed-step methods.
TABLEAUX = {
    "euler": (np.zeros((1, 1)), np.array([1.0])),
    "rk4": (np.array([[0.0, 0.0, 0.0, 0.0],
                      [0.5, 0.0, 0.0, 0.0],
                      [0.0, 0.5, 0.0, 0.0],
                      [0.0, 0.0, 1.0, 0.0]]),
            np.array([1.0, 2.0, 2.0, 1.0]) / 6.0),
}

CHECKPOINT_FORMAT = "ltsf-dnode-checkpoint/1"


@dataclass(frozen=True)
class SolverConfig:
    method: str = "rk4"
    n_steps: int = 2
    terminal_time: float = 1.0

    def __post_init__(self):
        if self.method not in TABLEAUX:
            raise ValueError(f"unknown solver {self.method!r}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step size {self.step_size} outside (0, 1]")

    @property
    def step_size(self) -> float:
        return self.terminal_time / self.n_steps


@dataclass
class ComponentParams:
    """Parameters of one component; ``w is None`` means no ODE (identity flow)."""

    w: np.ndarray | None
    dec_w: np.ndarray
    dec_b: np.ndarray

    def arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        if self.w is not None:
            yield "w", self.w
        yield "dec_w", self.dec_w
        yield "dec_b", self.dec_b

    def copy(self) -> "ComponentParams":
        return ComponentParams(None if self.w is None else self.w.copy(),
                               self.dec_w.copy(), self.dec_b.copy())

    def zeros_like(self) -> "ComponentParams":
        return ComponentParams(None if self.w is None else np.zeros_like(self.w),
                               np.zeros_like(self.dec_w), np.zeros_like(self.dec_b))


@dataclass
class ModelParams:
    components: dict[str, ComponentParams] = field(default_factory=dict)

    @property
    def trend(self) -> ComponentParams | None:
        return self.components.get("trend")

    @property
    def seasonality(self) -> ComponentParams | None:
        return self.components.get("seasonality")

    @property
    def residual(self) -> ComponentParams | None:
        return self.components.get("residual")

    def arrays(self) -> Iterator[tuple[tuple[str, str], np.ndarray]]:
        for comp, params in self.components.items():
            for name, arr in params.arrays():
                yield (comp, name), arr

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.components.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: v.zeros_like() for k, v in self.components.items()})

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for _, a in self.arrays())


# Gradients mirror the parameter layout exactly.
GradientBundle = ModelParams


@dataclass(frozen=True)
class TrajectoryStats:
    kinetic: float = 0.0
    jacobian: float = 0.0
    eps_seed: int = 0


@dataclass
class _Tape:
    stages: list                # per step: list of (stage_input, f_value)
    eps: np.ndarray
    v: np.ndarray               # w^T eps, one row per weight matrix
    n_points: int
    n_cols: int


def init_component(L: int, H: int, rng: np.random.Generator, *,
                   use_node: bool = True, n_features: int | None = None
                   ) -> ComponentParams:
    """W = 0 (identity flow); decoder uniform in +-1/sqrt(L); bias 0.

    ``n_features`` switches to per-feature weights.
    """
    lead = () if n_features is None else (n_features,)
    bound = 1.0 / np.sqrt(L)
    return ComponentParams(
        np.zeros(lead + (L, L)) if use_node else None,
        rng.uniform(-bound, bound, size=lead + (H, L)),
        np.zeros(lead + (H,)),
    )


def ode_fn(params: ComponentParams, z: np.ndarray) -> np.ndarray:
    """Vector field f(z) = W z (time-autonomous)."""
    return params.w @ z


def _sum_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad


def integrate(w: np.ndarray, z0: np.ndarray, solver: SolverConfig, *,
              eps: np.ndarray | None = None, eps_seed: int = 0,
              record: bool = False):
    """Integrate dz/dt = w z from t=0 to the terminal time.

    Returns ``(zT, stats, tape)``; ``tape`` is None unless ``record``.
    Kinetic energy ||f||^2 is averaged over every vector-field evaluation
    and every column; the Jacobian term ||eps^T w|| uses one Gaussian probe
    drawn from ``eps_seed`` (or the ``eps`` given).
    """
    A, b = TABLEAUX[solver.method]
    h = solver.step_size
    L = w.shape[-1]
    if eps is None:
        eps = np.random.default_rng(eps_seed).standard_normal(L)
    n_cols = z0.size // L
    z = z0
    stages = []
    kinetic = 0.0
    for _ in range(solver.n_steps):
        fs, ins = [], []
        # overflow is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(len(b)):
                a = z
                for j in range(i):
                    if A[i, j] != 0.0:
                        a = a + (h * A[i, j]) * fs[j]
                f = w @ a
                kinetic += float(np.sum(f * f))
                ins.append(a)
                fs.append(f)
            z = z + h * sum(bi * fi for bi, fi in zip(b, fs))
        if not np.isfinite(z).all():
            raise NumericsError("non-finite state during ODE integration")
        if record:
            stages.append((ins, fs))
    n_points = solver.n_steps * len(b)
    v = np.swapaxes(w, -1, -2) @ eps
    stats = TrajectoryStats(
        kinetic=kinetic / (n_points * n_cols),
        jacobian=float(np.mean(np.linalg.norm(v.reshape(-1, L), axis=-1))),
        eps_seed=eps_seed,
    )
    tape = _Tape(stages, eps, v, n_points, n_cols) if record else None
    return z, stats, tape


def integrate_backward(w: np.ndarray, tape: _Tape, solver: SolverConfig,
                       g_zT: np.ndarray, lambda_k: float = 0.0,
                       lambda_j: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Reverse pass through the unrolled solver.

    ``g_zT`` is dLoss/dzT. Returns (dLoss/dw, dLoss/dz0), including the
    gradients of ``lambda_k * kinetic + lambda_j * jacobian``.
    """
    A, b = TABLEAUX[solver.method]
    h = solver.step_size
    wT = np.swapaxes(w, -1, -2)
    kin_scale = 2.0 * lambda_k / (tape.n_points * tape.n_cols)
    g_w = np.zeros_like(w)
    g_z = g_zT
    for ins, fs in reversed(tape.stages):
        g_f = [(h * bi) * g_z for bi in b]
        if kin_scale:
            g_f = [gf + kin_scale * f for gf, f in zip(g_f, fs)]
        g_prev = g_z
        for i in reversed(range(len(b))):
            g_w = g_w + _sum_to(g_f[i] @ np.swapaxes(ins[i], -1, -2), w.shape)
            g_a = wT @ g_f[i]
            g_prev = g_prev + g_a
            for j in range(i):
                if A[i, j] != 0.0:
                    g_f[j] = g_f[j] + (h * A[i, j]) * g_a
        g_z = g_prev
    if lambda_j:
        L = w.shape[-1]
        v = tape.v.reshape(-1, L)
        norms = np.linalg.norm(v, axis=-1, keepdims=True)
        # ||eps^T w|| is not differentiable at w^T eps = 0; use 0 there
        safe = np.where(norms > 0.0, norms, 1.0)
        g_v = np.where(norms > 0.0, v / safe, 0.0) / v.shape[0]
        g_jac = tape.eps[:, None] * g_v[:, None, :]
        g_w = g_w + lambda_j * g_jac.reshape(w.shape)
    return g_w, g_z


def euler_integrate(params: ComponentParams, z0: np.ndarray, n_steps: int,
                    eps_seed: int = 0) -> tuple[np.ndarray, TrajectoryStats]:
    z, stats, _ = integrate(params.w, np.asarray(z0, dtype=np.float64),
                            SolverConfig("euler", n_steps), eps_seed=eps_seed)
    return z, stats


def rk4_integrate(params: ComponentParams, z0: np.ndarray, n_steps: int,
                  eps_seed: int = 0) -> tuple[np.ndarray, TrajectoryStats]:
    z, stats, _ = integrate(params.w, np.asarray(z0, dtype=np.float64),
                            SolverConfig("rk4", n_steps), eps_seed=eps_seed)
    return z, stats


def decode(params: ComponentParams, zT: np.ndarray) -> np.ndarray:
    """Fully connected L -> H map: dec_w @ zT + dec_b.

    ``zT`` may be a vector or carry trailing columns, ``(..., L, N)``.
    """
    zT = np.asarray(zT, dtype=np.float64)
    if zT.ndim == 1:
        return params.dec_w @ zT + params.dec_b
    return params.dec_w @ zT + params.dec_b[..., None]


def forward_component(params: ComponentParams, component: np.ndarray,
                      solver: SolverConfig, eps_seed: int = 0
                      ) -> tuple[np.ndarray, TrajectoryStats]:
    """Forecast one (L, F) component to (H, F); columns share the weights
    unless the parameters are per-feature."""
    c = np.asarray(component, dtype=np.float64)
    z0 = c.T[:, :, None]                      # (F, L, 1)
    if params.w is None:
        zT, stats = z0, TrajectoryStats(eps_seed=eps_seed)
    else:
        zT, stats, _ = integrate(params.w, z0, solver, eps_seed=eps_seed)
    return decode(params, zT)[:, :, 0].T, stats


def count_parameters(model: ModelParams) -> int:
    return int(sum(a.size for _, a in model.arrays()))


def _encode(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape),
            "values": [float(v) for v in np.ravel(arr, order="C")]}


def _decode(entry: dict) -> np.ndarray:
    return np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])


def checkpoint_dict(model: ModelParams) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "components": {
            comp: {name: _encode(arr) for name, arr in params.arrays()}
            for comp, params in model.components.items()
        },
    }


def model_from_dict(doc: dict) -> ModelParams:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    comps = {}
    for comp, entries in doc["components"].items():
        comps[comp] = ComponentParams(
            _decode(entries["w"]) if "w" in entries else None,
            _decode(entries["dec_w"]), _decode(entries["dec_b"]))
    return ModelParams(comps)


def save_checkpoint(model: ModelParams, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(checkpoint_dict(model)))


def load_checkpoint(path: str | Path) -> ModelParams:
    return model_from_dict(json.loads(Path(path).read_text()))
