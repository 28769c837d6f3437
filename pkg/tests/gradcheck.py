"""Finite-difference check of the pipeline's reverse pass on small random instances."""

from __future__ import annotations

import numpy as np

from ltsf_dnode import pipeline
from ltsf_dnode.node import SolverConfig
from ltsf_dnode.pipeline import make_spec

from oracles import central_difference, rel_error


def random_instance(seed: int, variant: str = "ltsf_dnode", method: str = "rk4",
                    individual: bool = False, batch: int = 2):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(4, 9))
    H = int(rng.integers(1, 5))
    F = int(rng.integers(1, 4))
    spec = make_spec(variant, L, H, kernel_size=int(rng.integers(2, L)),
                     period=int(rng.integers(2, L + 1)), use_seasonality=True,
                     use_instance_norm=True,
                     solver=SolverConfig(method, int(rng.integers(1, 4))),
                     individual=individual)
    model = pipeline.init_model(spec, F, rng)
    for _, arr in model.arrays():
        arr[...] = rng.standard_normal(arr.shape) * 0.4
    x = np.cumsum(rng.standard_normal((batch, L, F)), axis=1)
    y = rng.standard_normal((batch, H, F))
    return spec, model, x, y


def check(spec, model, x, y, lambda_k: float, lambda_j: float, eps_seed: int = 5,
          h: float = 1e-5) -> float:
    """Worst relative error over every parameter tensor."""
    result = pipeline.forward(spec, model, x, eps_seed=eps_seed, record=True)
    _, grads = pipeline.backward(spec, model, result, y, lambda_k, lambda_j)

    def f():
        res = pipeline.forward(spec, model, x, eps_seed=eps_seed)
        return (float(np.mean((res.pred - y) ** 2))
                + pipeline.regularizer(res.stats, lambda_k, lambda_j))

    keys = [k for k, _ in model.arrays()]
    arrays = [a for _, a in model.arrays()]
    numeric = central_difference(f, arrays, h)
    analytic = dict(grads.arrays())
    return max(rel_error(analytic[k], n) for k, n in zip(keys, numeric))
