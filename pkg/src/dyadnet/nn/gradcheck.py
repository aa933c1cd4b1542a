"""Finite-difference verification of reverse-mode gradients.

Two probing strategies share one report format:

* elementwise: central differences for every element of every checked input;
  affordable for op-level checks on small shapes.
* directional: a few random unit directions per input, comparing the measured
  directional derivative against grad . dir; this is the only affordable route
  for whole-model checks with tens of thousands of parameters.

Checks should run in float64 with inputs kept away from ReLU kinks; the step
(default 1e-5) would otherwise straddle the non-differentiable point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericsError
from .tensor import Tensor

DEFAULT_STEP = 1e-5


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.tol

    def __str__(self) -> str:
        status = "pass" if self.ok else "FAIL"
        return f"{self.name:<40s} max_rel_err={self.max_rel_err:.3e}  tol={self.tol:.0e}  {status}"


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.atleast_1d(np.asarray(analytic, dtype=np.float64))
    numeric = np.atleast_1d(np.asarray(numeric, dtype=np.float64))
    denom = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1e-3)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


def _eval(f: Callable[[], Tensor], where: str) -> float:
    try:
        out = f()
        val = out.item()
    except NumericsError as exc:
        raise NumericsError(f"non-finite value while probing {where}: {exc}") from exc
    if not np.isfinite(val):
        raise NumericsError(f"non-finite value while probing {where}")
    return val


def _analytic_grads(f: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    for x in inputs:
        x.requires_grad = True
        x.grad = None
    out = f()
    out.backward()
    grads = []
    for x in inputs:
        if x.grad is None:
            grads.append(np.zeros_like(x.data))
        else:
            grads.append(x.grad.copy())
    return grads


def check_elementwise(f: Callable[[], Tensor], inputs: Sequence[Tensor],
                      names: Sequence[str], tol: float = 1e-5,
                      step: float = DEFAULT_STEP) -> list[GradCheckResult]:
    """Full central-difference check; f must rebuild its graph on each call."""
    analytic = _analytic_grads(f, inputs)
    results = []
    for x, name, a in zip(inputs, names, analytic):
        numeric = np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = _eval(f, f"{name}[{i}] (+)")
            flat[i] = orig - step
            fm = _eval(f, f"{name}[{i}] (-)")
            flat[i] = orig
            nflat[i] = (fp - fm) / (2.0 * step)
        results.append(GradCheckResult(name, _rel_err(a, numeric), tol))
    return results


def check_groups_directional(f: Callable[[], Tensor],
                             groups: dict[str, Sequence[Tensor]],
                             rng: np.random.Generator, tol: float = 1e-4,
                             step: float = DEFAULT_STEP, probes: int = 2,
                             kink_signature: Callable[[], int] | None = None,
                             max_redraws: int = 12) -> list[GradCheckResult]:
    """Directional check over groups of tensors perturbed jointly.

    Probing one random direction across a whole group (all backbone
    parameters, say) validates the full gradient vector with two forwards per
    probe regardless of parameter count. When a kink_signature callable is
    given (cumulative count of positive ReLU inputs), probes whose two
    evaluations disagree on it have straddled a non-differentiable point and
    are redrawn in a fresh direction.
    """
    all_tensors = [t for ts in groups.values() for t in ts]
    analytic = _analytic_grads(f, all_tensors)
    grads = {id(t): g for t, g in zip(all_tensors, analytic)}

    def probe_once(name, tensors, dirs) -> tuple[float, bool]:
        origs = [t.data.copy() for t in tensors]
        base_sig = kink_signature() if kink_signature else 0
        for t, d in zip(tensors, dirs):
            t.data[...] = t.data + step * d
        fp = _eval(f, name)
        sig_p = (kink_signature() - base_sig) if kink_signature else 0
        for t, o, d in zip(tensors, origs, dirs):
            t.data[...] = o - step * d
        fm = _eval(f, name)
        sig_m = (kink_signature() - base_sig - sig_p) if kink_signature else 0
        for t, o in zip(tensors, origs):
            t.data[...] = o
        return (fp - fm) / (2.0 * step), sig_p == sig_m

    results = []
    for name, tensors in groups.items():
        worst = 0.0
        done = 0
        attempts = 0
        while done < probes:
            dirs = [rng.standard_normal(t.data.shape) for t in tensors]
            norm = np.sqrt(sum((d * d).sum() for d in dirs)) or 1.0
            dirs = [d / norm for d in dirs]
            numeric, clean = probe_once(name, tensors, dirs)
            attempts += 1
            if not clean and attempts - done <= max_redraws:
                continue
            a = sum(float(grads[id(t)].reshape(-1) @ d.reshape(-1))
                    for t, d in zip(tensors, dirs))
            worst = max(worst, _rel_err(np.float64(a), np.float64(numeric)))
            done += 1
        results.append(GradCheckResult(name, worst, tol))
    return results


def check_directional(f: Callable[[], Tensor], inputs: Sequence[Tensor],
                      names: Sequence[str], rng: np.random.Generator,
                      tol: float = 1e-4, step: float = DEFAULT_STEP,
                      probes: int = 3) -> list[GradCheckResult]:
    """Directional-derivative check: probes random unit directions per input."""
    analytic = _analytic_grads(f, inputs)
    results = []
    for x, name, a in zip(inputs, names, analytic):
        worst = 0.0
        for _ in range(probes):
            direction = rng.standard_normal(x.data.shape)
            direction /= np.linalg.norm(direction.reshape(-1)) or 1.0
            orig = x.data.copy()
            x.data[...] = orig + step * direction
            fp = _eval(f, name)
            x.data[...] = orig - step * direction
            fm = _eval(f, name)
            x.data[...] = orig
            numeric = (fp - fm) / (2.0 * step)
            worst = max(worst, _rel_err(np.float64(a.astype(np.float64).reshape(-1)
                                                   @ direction.reshape(-1)),
                                        np.float64(numeric)))
        results.append(GradCheckResult(name, worst, tol))
    return results
