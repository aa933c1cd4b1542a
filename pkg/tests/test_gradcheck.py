"""Finite-difference gradient verification of the substrate and full model."""

import numpy as np
import pytest

from dyadnet import nn
from dyadnet.nn import ops
from dyadnet.nn.gradcheck import check_elementwise
from dyadnet.harness.verification import (run_model_gradcheck, run_op_gradchecks)
from dyadnet.errors import NumericsError


def test_linear_gradcheck_tight():
    r = np.random.default_rng(3)
    x = nn.Tensor(r.standard_normal((2, 3)))
    w = nn.Tensor(r.standard_normal((4, 3)))
    b = nn.Tensor(r.standard_normal(4))

    def f():
        return ops.cross_entropy(ops.linear(x, w, b), np.array([1, 3]))

    for res in check_elementwise(f, [x, w, b], ["x", "w", "b"], tol=1e-6):
        assert res.ok, str(res)


@pytest.mark.parametrize("seed", range(5))
def test_all_ops_gradcheck(seed):
    results = run_op_gradchecks(seed=seed)
    for res in results:
        assert res.ok, str(res)


@pytest.mark.parametrize("seed", range(3))
def test_full_model_gradcheck(seed):
    for res in run_model_gradcheck(seed=seed):
        assert res.ok, str(res)


def test_corrupted_gradient_reported_as_failure():
    """Negative control: an op whose backward is scaled by 1.01 must fail."""
    r = np.random.default_rng(5)
    x = nn.Tensor(r.standard_normal((3, 4)))

    def corrupted_double(a):
        out = nn.Tensor(a.data * 2.0, requires_grad=True, parents=(a,), op="bad")

        def backward(g):
            a.accumulate_grad(g * 2.0 * 1.01)

        out._backward = backward
        return out

    def f():
        return ops.sum_all(corrupted_double(x))

    results = check_elementwise(f, [x], ["corrupted"], tol=1e-5)
    assert not results[0].ok


def test_probe_through_nonfinite_reports_location():
    x = nn.Tensor(np.array([700.0]))

    def f():
        with np.errstate(over="ignore"):
            return ops.sum_all(nn.Tensor(np.exp(x.data * 2), parents=(x,)))

    with pytest.raises(NumericsError, match="probing"):
        check_elementwise(f, [x], ["blowup"], tol=1e-5)


def test_gradcheck_runs_fast_enough():
    import time
    t0 = time.perf_counter()
    run_op_gradchecks(seed=11)
    run_model_gradcheck(seed=11)
    assert time.perf_counter() - t0 < 30.0
