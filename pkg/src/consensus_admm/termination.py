"""Distributed termination for the finite-time consensus phase.

Each node runs a round counter that freezes at twice its own defect size,
relays the running maximum of all counters it has heard, and terminates once
that maximum has held steady for as many rounds as its own frozen cap. No
node needs the network size: the counters themselves carry enough information
to bound how long news can still be in flight.

With caps ``c°_j = 2(d_j+1)`` the maximum stabilizes at ``2(d_max+1)`` and a
node with defect index d_i terminates at round
``2(d_max+1) + 2(d_i+1) - 1`` (plus a propagation correction when the nearest
argmax node is farther than one hop). The node that attains the overall
maximum terminates at ``t1 = 4(d_max+1) - 1``, which is also the length of
the first solver step that hosts this protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import AlreadyFrozen, NonIntegerResult


@dataclass(frozen=True)
class TerminationState:
    """Counter machinery for one node.

    ``c`` is the node's own (possibly capped) round counter, ``theta`` the
    relayed maximum, ``r`` the number of consecutive rounds theta has held its
    current value (inclusive of the round it changed), and ``c_cap`` the
    frozen target ``2(d+1)`` — None until the defect fires.
    """

    theta: int = 0
    r: int = 0
    c: int = 0
    c_cap: int | None = None
    terminated: bool = False
    t_term: int | None = None


def freeze_counter(state: TerminationState, defect_index: int) -> TerminationState:
    """Set the counter cap to 2*(d+1) when the node's defect d fires."""
    if state.c_cap is not None:
        raise AlreadyFrozen(f"cap already set to {state.c_cap}")
    return replace(state, c_cap=2 * (defect_index + 1))


def counter_message(state: TerminationState, next_round: int) -> tuple[int, int]:
    """(theta, counter) payload for the message emitted after this round.

    The counter is forward-dated to the round the message arrives, so
    distance-one neighbours always see the current value without lag.
    """
    cap = state.c_cap if state.c_cap is not None else next_round
    return state.theta, min(next_round, cap)


def check_termination(state: TerminationState) -> bool:
    """True once the relayed maximum has held for c_cap consecutive rounds."""
    return state.c_cap is not None and state.r >= state.c_cap


def ftdt_step(state: TerminationState, round_idx: int,
              received) -> TerminationState:
    """Advance one round: absorb neighbours' (theta, counter) pairs.

    ``received`` is an iterable of (theta, counter) pairs from in-neighbours,
    already forward-dated to ``round_idx``. The node's own counter joins the
    maximum directly.
    """
    cap = state.c_cap if state.c_cap is not None else round_idx
    own_c = min(round_idx, cap)
    theta = max(state.theta, own_c)
    for theta_in, c_in in received:
        theta = max(theta, theta_in, c_in)
    r = state.r + 1 if theta == state.theta else 1
    new = replace(state, theta=theta, r=r, c=own_c)
    if not new.terminated and check_termination(new):
        new = replace(new, terminated=True, t_term=round_idx)
    return new


def derive_max_defect(t_term: int, defect_index: int) -> int:
    """Recover the network-wide maximum defect index from a termination round.

    Inverts ``t_term = 2(d_max+1) + 2(d_i+1) - 1``. Raises
    :class:`NonIntegerResult` when the arithmetic does not land on an integer
    (which flags a termination round shifted by asymmetric propagation).
    """
    numerator = t_term - 2 * defect_index - 1
    if numerator <= 0 or numerator % 2 != 0:
        raise NonIntegerResult(
            f"stopping round {t_term} with defect {defect_index} gives no "
            f"integer network-wide maximum")
    return numerator // 2 - 1
