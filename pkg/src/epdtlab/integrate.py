"""Dormand-Prince 5(4) stepping with blow-up detection.

The stepper is shared by the scalar ODE experiments and the method-of-lines
PDE solver. It stops on one of four conditions: the end time is reached, a
monitored magnitude exceeds a threshold, the step size collapses below
``step_floor * max(1, |t|)``, or the state becomes non-finite.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW

ORDER = 5
EMBEDDED_ORDER = 4

COMPLETED = "completed"
THRESHOLD = "threshold"
STEP_COLLAPSE = "step_collapse"
NONFINITE = "nonfinite"


@dataclass
class StepResult:
    status: str
    t: float
    y: np.ndarray
    steps: int
    rejected: int
    outputs: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.status in (THRESHOLD, STEP_COLLAPSE)


def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def dopri54(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    h0: float | None = None,
    max_step: float | Callable[[float], float] = np.inf,
    output_times=(),
    monitor: Callable[[np.ndarray], float] | None = None,
    threshold: float = np.inf,
    step_floor: float = 1e-14,
    history: int = 0,
    record: Callable[[float, np.ndarray], object] | None = None,
) -> StepResult:
    """Integrate ``y' = fun(t, y)`` from ``t0`` towards ``t_end``.

    ``output_times`` are hit exactly; the state at each is appended to
    ``outputs`` as ``(t, y.copy())``. If ``history > 0`` the last ``history``
    accepted steps are kept as ``(t, record(t, y))`` (or ``(t, y.copy())``).
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    targets = sorted(float(x) for x in output_times if t0 <= x <= t_end)
    outputs = []
    while targets and targets[0] <= t:
        outputs.append((t, y.copy()))
        targets.pop(0)
    hist = deque(maxlen=history) if history else None
    cap = max_step if callable(max_step) else (lambda _t, v=max_step: v)

    def snap(tv, yv):
        return record(tv, yv) if record is not None else yv.copy()

    if hist is not None:
        hist.append((t, snap(t, y)))

    k1 = fun(t, y)
    if h0 is None:
        d0 = np.max(np.abs(y)) + 1e-300
        d1 = np.max(np.abs(k1)) + 1e-300
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(float(h0), cap(t), t_end - t) if t_end > t else 0.0
    steps = rejected = 0
    status = COMPLETED
    ks = [None] * 7

    while t < t_end:
        proposal = h
        h = min(h, cap(t), t_end - t)
        clipped = h < proposal
        hit_target = False
        if targets and t + h >= targets[0]:
            h = targets[0] - t
            hit_target = True
            clipped = True
        if h <= step_floor * max(1.0, abs(t)):
            status = STEP_COLLAPSE
            break
        ks[0] = k1
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(1, 7):
                acc = y.copy()
                for j, aij in enumerate(_A[i]):
                    if aij != 0.0:
                        acc += h * aij * ks[j]
                ks[i] = fun(t + _C[i] * h, acc)
            y_new = acc  # stage 7 argument equals the 5th-order solution (FSAL)
            err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(err)):
            rejected += 1
            h *= 0.25
            if h <= step_floor * max(1.0, abs(t)):
                status = NONFINITE
                break
            continue
        en = _error_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            t = targets[0] if hit_target else t + h
            y = y_new
            k1 = ks[6]
            steps += 1
            if hit_target:
                outputs.append((t, y.copy()))
                targets.pop(0)
            if hist is not None:
                hist.append((t, snap(t, y)))
            fac = 5.0 if en == 0.0 else min(5.0, 0.9 * en ** (-1.0 / ORDER))
            h = max(proposal, h * fac) if clipped else h * fac
            if monitor is not None and monitor(y) > threshold:
                status = THRESHOLD
                break
        else:
            rejected += 1
            h *= max(0.2, 0.9 * en ** (-1.0 / ORDER))
    return StepResult(
        status, t, y, steps, rejected, outputs, list(hist) if hist is not None else []
    )
