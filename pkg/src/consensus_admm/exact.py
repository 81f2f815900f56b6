"""Exact-rational lane for finite-time consensus detection.

Float64 Hankel detection loses roughly ``4^d`` of dynamic range to mode
decay and recurrence-coefficient conditioning, which caps reliable scalar
detection near defect index 13. This module redoes the rank decisions and
the final-value evaluation in exact rational arithmetic: seeds are taken at
their exact binary values, the push-sum weights ``1/(1+d_out)`` are exact
fractions, and every returned value is the correctly rounded exact average.

Rank certificates are cheap in the common direction: full rank modulo a
word-size prime proves full rank over the rationals, so only the one
genuinely deficient size per node pays for fraction-free integer
elimination (Bareiss), which also yields the exact kernel vector.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .consensus import ConsensusResult
from .errors import NumericBreakdown
from .graph import Digraph

_PRIME = (1 << 31) - 1


def _exact_trajectories(g: Digraph, seeds: np.ndarray, rounds: int):
    """Evolve (numerators, denominator) exactly for ``rounds`` exchanges.

    Returns per-node channel sequences: ``chans[j][c][t]`` is node ``j``'s
    channel ``c`` at round ``t``, channel 0 being the denominator.
    """
    n, p = seeds.shape
    shares = [Fraction(1, 1 + g.out_degree(j)) for j in range(n)]
    y = [[Fraction(float(seeds[j, c])) for c in range(p)] for j in range(n)]
    x = [Fraction(1)] * n
    chans = [[[x[j]] if c == 0 else [y[j][c - 1]] for c in range(p + 1)]
             for j in range(n)]
    for _ in range(rounds):
        ny = [[Fraction(0)] * p for _ in range(n)]
        nx = [Fraction(0)] * n
        for j in range(n):
            wy = [shares[j] * v for v in y[j]]
            wx = shares[j] * x[j]
            for r in (j, *g.out_neighbors[j]):
                row = ny[r]
                for c in range(p):
                    row[c] += wy[c]
                nx[r] += wx
        y, x = ny, nx
        for j in range(n):
            chans[j][0].append(x[j])
            for c in range(p):
                chans[j][c + 1].append(y[j][c])
    return chans


def _rank_mod_p(a: np.ndarray, p: int = _PRIME) -> int:
    """Row-echelon rank of a pre-reduced int64 matrix modulo a prime.

    Never exceeds the rational rank, so full rank here proves full rank
    over the rationals.
    """
    a = a.copy()
    nrows, ncols = a.shape
    rank = 0
    for col in range(ncols):
        pivots = np.nonzero(a[rank:, col])[0]
        if pivots.size == 0:
            continue
        piv = rank + int(pivots[0])
        a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank] = (a[rank] * inv) % p
        rest = a[rank + 1:, col]
        a[rank + 1:] = (a[rank + 1:] - np.outer(rest, a[rank])) % p
        rank += 1
        if rank == min(nrows, ncols):
            break
    return rank


def _bareiss_echelon(int_rows: list[list[int]]):
    """Fraction-free integer elimination; returns (rank, echelon, pivot cols)."""
    a = [row[:] for row in int_rows]
    nrows, ncols = len(a), len(a[0])
    prev = 1
    rank = 0
    pivots: list[int] = []
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if a[r][col]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        lead = a[rank][col]
        for r in range(rank + 1, nrows):
            factor = a[r][col]
            a[r] = [(lead * a[r][c] - factor * a[rank][c]) // prev
                    for c in range(ncols)]
        prev = lead
        pivots.append(col)
        rank += 1
        if rank == min(nrows, ncols):
            break
    return rank, a, pivots


def _kernel_vector(echelon, pivots, ncols: int) -> list[Fraction]:
    """Back-substitute one exact kernel vector (rank == ncols - 1)."""
    free = next(c for c in range(ncols) if c not in pivots)
    beta = [Fraction(0)] * ncols
    beta[free] = Fraction(1)
    for r in range(len(pivots) - 1, -1, -1):
        col = pivots[r]
        acc = Fraction(0)
        for c in range(col + 1, ncols):
            if echelon[r][c]:
                acc += Fraction(echelon[r][c]) * beta[c]
        beta[col] = -acc / echelon[r][col]
    return beta


def _detect_node(chans) -> tuple[int, list[Fraction]]:
    """Exact defect index and kernel for one node's channel sequences."""
    samples = len(chans[0])
    diffs = [[seq[t + 1] - seq[t] for t in range(samples - 1)]
             for seq in chans]
    if all(d[0] == 0 for d in diffs):
        return 0, [Fraction(1)]     # constant from the very first exchange
    # One global denominator clearing; every block below is then an integer
    # submatrix (uniform scaling changes neither ranks nor kernels).
    scale = 1
    for d in diffs:
        for v in d:
            scale = math.lcm(scale, v.denominator)
    ints = [[int(v * scale) for v in d] for d in diffs]
    mods = np.array([[v % _PRIME for v in d] for d in ints], dtype=np.int64)
    for m in range(1, samples // 2 + 1):
        window = np.add.outer(np.arange(m), np.arange(m))
        if _rank_mod_p(mods[:, window].reshape(-1, m)) == m:
            continue
        block = [[row[i + j] for j in range(m)]
                 for row in ints for i in range(m)]
        rank, echelon, pivots = _bareiss_echelon(block)
        if rank == m:        # modular false alarm; keep growing
            continue
        if rank != m - 1:
            raise NumericBreakdown(
                f"defect kernel at size {m} is {m - rank}-dimensional")
        return m - 1, _kernel_vector(echelon, pivots, m)
    raise NumericBreakdown(
        f"no exact defect within {samples - 1} exchanges")


def exact_consensus_run(g: Digraph, y0) -> list[ConsensusResult]:
    """Exact-arithmetic twin of :func:`consensus.fterc_run`.

    Every node's returned value is the exact network average of the exact
    binary seeds, correctly rounded to float; defect indices and kernel
    coefficients carry no rounding ambiguity. Costs big-integer arithmetic,
    so intended for verification and for regimes beyond the float64
    detection envelope rather than for inner solver loops.
    """
    arr = np.asarray(y0, dtype=float)
    scalar = arr.ndim == 1
    mat = arr.reshape(g.n, -1)
    if mat.shape[0] != g.n:
        raise ValueError("seed count must match node count")
    chans = _exact_trajectories(g, mat, 2 * g.n + 1)
    results = []
    for j in range(g.n):
        defect, kernel = _detect_node(chans[j])
        if kernel[-1] == 0:
            raise NumericBreakdown("kernel vector has a vanishing last entry")
        beta = [b / kernel[-1] for b in kernel]
        den = sum(b * chans[j][0][t] for t, b in enumerate(beta))
        if den == 0:
            raise NumericBreakdown("exact combination denominator is zero")
        mu = np.array([float(sum(b * chans[j][c][t]
                                 for t, b in enumerate(beta)) / den)
                       for c in range(1, len(chans[j]))])
        results.append(ConsensusResult(
            mu=mu[0] if scalar else mu,
            defect=defect,
            beta=np.array([float(b) for b in beta]),
            rounds_used=2 * (defect + 1) - 1))
    return results
