"""The round state machine.

One round: every worker runs its pre-communication local steps, the
masked models are averaged by the (simulated) server, overlap methods keep
stepping while the message is in flight, and the configured merge rule
produces the next round's starting models.  Everything is a deterministic
sequential state transition on logical time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Mask, RngStream, average, axpy, project_mask, sample_rand_k
from .errors import ConfigurationError, DivergenceError
from .timing import TimingPlan

__all__ = [
    "Method",
    "WorkerState",
    "RoundOutcome",
    "BLOCKING_METHODS",
    "OVERLAP_METHODS",
    "run_local_steps",
    "merge_delay_corrected",
    "merge_overwrite",
    "validate_method_plan",
    "run_round",
    "initial_states",
]

# Runs abort once any coordinate leaves this range; prevents silent NaNs.
DIVERGENCE_LIMIT = 1e100


class Method(str, Enum):
    SYNC_SGD = "sync_sgd"
    FEDAVG_FULL = "fedavg_full"
    LOCAL_SPARSE = "local_sparse"
    OVERLAP_OVERWRITE = "overlap_overwrite"
    OVERLAP_DELAY_CORRECTED = "overlap_delay_corrected"


# Blocking methods idle during the communication window; overlap methods
# keep taking local steps.
BLOCKING_METHODS = frozenset({Method.SYNC_SGD, Method.FEDAVG_FULL, Method.LOCAL_SPARSE})
OVERLAP_METHODS = frozenset({Method.OVERLAP_OVERWRITE, Method.OVERLAP_DELAY_CORRECTED})


@dataclass
class WorkerState:
    """One worker's trajectory through a round.

    start   model at the beginning of the round
    sent    model after the pre-communication steps (what gets compressed)
    latest  model when the server message arrives (== sent for blocking
            methods, which take no overlap steps)
    """

    start: np.ndarray
    sent: np.ndarray | None = None
    latest: np.ndarray | None = None
    steps_taken: int = 0


@dataclass(frozen=True)
class RoundOutcome:
    """Everything one round produced.

    next_models   merged per-worker models starting the next round
    mask          the shared coordinate mask drawn for this round
    message       server broadcast payload (zero off-mask for sparse methods)
    duration      logical seconds the round occupied
    steps         local steps executed per worker
    avg_grad_sum  sum over step indices of the worker-averaged applied
                  gradients; the mean model moves by exactly
                  -stepsize * avg_grad_sum each round
    sent, latest  per-worker snapshots for drift diagnostics
    """

    next_models: tuple[np.ndarray, ...]
    mask: Mask
    message: np.ndarray
    duration: int
    steps: tuple[int, ...]
    avg_grad_sum: np.ndarray
    sent: tuple[np.ndarray, ...]
    latest: tuple[np.ndarray, ...]


def initial_states(x0: np.ndarray, n_workers: int) -> list[WorkerState]:
    return [WorkerState(start=x0.copy()) for _ in range(n_workers)]


def _guard(w: np.ndarray, round_index: int, worker: int) -> None:
    if not np.all(np.isfinite(w)) or np.any(np.abs(w) > DIVERGENCE_LIMIT):
        raise DivergenceError(
            f"worker {worker} diverged in round {round_index}",
            round_index=round_index,
            worker=worker,
        )


def _steps_traced(start, count, stepsize, oracle, worker, round_index, first_step):
    """Run ``count`` keyed SGD steps; return the end point and the gradient sum."""
    w = start.copy()
    grad_sum = np.zeros_like(start)
    for t in range(first_step, first_step + count):
        g = oracle.gradient(w, worker, round_index, t)
        w -= stepsize * g
        _guard(w, round_index, worker)
        grad_sum += g
    return w, grad_sum


def run_local_steps(
    start: np.ndarray,
    count: int,
    stepsize: float,
    oracle,
    worker: int = 0,
    round_index: int = 0,
    first_step: int = 0,
) -> np.ndarray:
    """Apply ``count`` sequential SGD steps from ``start``.

    Step ``t`` (for t in [first_step, first_step + count)) draws its sample
    from the stream keyed by (worker, round_index, t), so trajectories
    compose: running N then Q steps with consecutive indices equals running
    N + Q steps at once.
    """
    if count < 0:
        raise ConfigurationError(f"step count must be >= 0, got {count}")
    if stepsize <= 0:
        raise ConfigurationError(f"stepsize must be positive, got {stepsize}")
    end, _ = _steps_traced(start, count, stepsize, oracle, worker, round_index, first_step)
    return end


def merge_delay_corrected(
    latest: np.ndarray, sent: np.ndarray, sent_avg: np.ndarray, s: Mask
) -> np.ndarray:
    """latest + Proj_s(sent_avg - sent).

    On masked coordinates the worker moves to the delayed average plus its
    own overlap progress (latest - sent); off-mask coordinates keep the
    newest local value.
    """
    if not (latest.shape == sent.shape == sent_avg.shape):
        raise ConfigurationError("merge inputs must share one dimension")
    out = latest.copy()
    idx = list(s.indices)
    out[idx] = sent_avg[idx] + (latest[idx] - sent[idx])
    return out


def merge_overwrite(latest: np.ndarray, message: np.ndarray, s: Mask) -> np.ndarray:
    """Replace masked coordinates with the server message; keep the rest."""
    if latest.shape != message.shape:
        raise ConfigurationError("merge inputs must share one dimension")
    out = latest.copy()
    idx = list(s.indices)
    out[idx] = message[idx]
    return out


def validate_method_plan(method: Method, plan: TimingPlan, mask_size: int, dim: int) -> None:
    """Reject method/plan combinations before round 0."""
    if not 1 <= mask_size <= dim:
        raise ConfigurationError(f"mask size {mask_size} outside [1, {dim}]")
    if method is Method.SYNC_SGD:
        problems = []
        if len(set(plan.step_times)) != 1:
            problems.append("equal step times")
        if plan.compute_periods != 1:
            problems.append("compute_periods == 1")
        if plan.comm_seconds != 0:
            problems.append("comm_seconds == 0")
        if mask_size != dim:
            problems.append("a full mask (sparsity 1.0)")
        if problems:
            raise ConfigurationError("sync_sgd requires " + ", ".join(problems))
    elif method is Method.FEDAVG_FULL and mask_size != dim:
        raise ConfigurationError("fedavg_full requires a full mask (sparsity 1.0)")


def run_round(
    states: list[WorkerState],
    method: Method,
    plan: TimingPlan,
    mask_size: int,
    stepsize: float,
    oracle,
    root_seed: int,
    round_index: int,
) -> RoundOutcome:
    """Execute one round of ``method`` and return the merged next models.

    The mask is drawn once from the round-keyed stream and shared by all
    workers; sample streams are keyed (worker, round, step index), so
    methods that take the same steps see the same randomness.
    """
    method = Method(method)
    n = len(states)
    if n != plan.n_workers:
        raise ConfigurationError(f"{n} worker states but plan has {plan.n_workers} workers")
    dim = states[0].start.size
    validate_method_plan(method, plan, mask_size, dim)
    mask = sample_rand_k(dim, mask_size, RngStream(root_seed, ("mask", round_index)))

    if method is Method.SYNC_SGD:
        # one gradient per worker at the common point, averaged, one global step
        common = states[0].start
        if any(not np.array_equal(st.start, common) for st in states[1:]):
            raise ConfigurationError("sync_sgd requires identical worker states")
        grads = [oracle.gradient(common, i, round_index, 0) for i in range(n)]
        mean_grad = average(grads)
        merged = axpy(-stepsize, mean_grad, common)
        _guard(merged, round_index, worker=-1)
        next_models = tuple(merged.copy() for _ in range(n))
        for st in states:
            st.sent = merged.copy()
            st.latest = st.sent
            st.steps_taken = 1
        return RoundOutcome(
            next_models=next_models,
            mask=mask,
            message=mean_grad,
            duration=plan.round_seconds,
            steps=tuple(1 for _ in range(n)),
            avg_grad_sum=mean_grad,
            sent=tuple(st.sent for st in states),
            latest=tuple(st.latest for st in states),
        )

    overlap = method in OVERLAP_METHODS
    grad_sum = np.zeros(dim)
    for i, st in enumerate(states):
        y, gs = _steps_traced(st.start, plan.pre_steps[i], stepsize, oracle, i, round_index, 0)
        st.sent = y
        grad_sum += gs
    sent_avg = average([st.sent for st in states])
    message = project_mask(sent_avg, mask)

    for i, st in enumerate(states):
        if overlap and plan.overlap_steps[i] > 0:
            z, gs = _steps_traced(
                st.sent, plan.overlap_steps[i], stepsize, oracle, i, round_index, plan.pre_steps[i]
            )
            grad_sum += gs
        else:
            z = st.sent
        st.latest = z
        st.steps_taken = plan.total_steps[i] if overlap else plan.pre_steps[i]

    next_models = []
    for st in states:
        if method is Method.OVERLAP_DELAY_CORRECTED:
            merged = merge_delay_corrected(st.latest, st.sent, sent_avg, mask)
        else:
            # fedavg_full, local_sparse (latest == sent), overlap_overwrite
            merged = merge_overwrite(st.latest, message, mask)
        next_models.append(merged)

    return RoundOutcome(
        next_models=tuple(next_models),
        mask=mask,
        message=message,
        duration=plan.round_seconds,
        steps=tuple(st.steps_taken for st in states),
        avg_grad_sum=grad_sum / n,
        sent=tuple(st.sent for st in states),
        latest=tuple(st.latest for st in states),
    )
