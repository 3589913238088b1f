"""Ground-truth codebook search: greedy row/column traversal and brute force.

The greedy traversal is the labeling algorithm: starting from the all -1
codebook it sweeps rows 1..M then columns 1..N, tentatively inverting each
whole row/column and keeping the inversion iff the linear received power
strictly increases, until a full sweep changes nothing.  Strict improvement
guarantees termination (power increases over a finite state set) without a
tolerance epsilon.

Both exhaustive searches are verification references: ``exhaustive_rank1``
scans the 2^(M+N-1) codebooks reachable by row/column flips (the greedy
optimizer's search space), ``exhaustive_full`` scans all 2^(M*N) sign
patterns.  Ties are broken deterministically by the smallest enumeration
integer, so results are reproducible even though power is invariant under
global sign flips.
"""

from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, EncodedLabel, decode, factor, initial_codebook
from .errors import BudgetExceeded, NotReachable
from .fieldsim import ScenarioGeometry, channel_gains, linear_to_dbm, power_from_gains

__all__ = [
    "OracleResult",
    "greedy_traversal",
    "exhaustive_rank1",
    "exhaustive_full",
    "RANK1_BUDGET_BITS",
    "FULL_BUDGET_BITS",
]

RANK1_BUDGET_BITS = 24  # max M+N-1 for exhaustive_rank1
FULL_BUDGET_BITS = 20  # max M*N for exhaustive_full

_ENUM_CHUNK = 1 << 14


@dataclass
class OracleResult:
    """Outcome of one codebook search at a single receiver position.

    ``power_dbm``/``power_linear`` are exactly the received power of
    ``codebook`` at the queried position.  ``rank1`` is False only when
    ``exhaustive_full`` found an optimum outside the row/column flip set.
    ``accepted_powers`` (greedy only) is the strictly increasing sequence
    of linear powers of the accepted states, starting from the all -1
    initial codebook.
    """

    codebook: Codebook
    power_dbm: float
    power_linear: float
    passes: int
    evaluations: int
    rank1: bool = True
    accepted_powers: list = field(default_factory=list)


def greedy_traversal(geom: ScenarioGeometry, v) -> OracleResult:
    """Row/column flip descent from the all -1 codebook.

    Each tentative flip costs one power evaluation; a kept flip strictly
    increased the linear power, anything else is reverted.  Terminates when
    a complete row+column sweep accepts nothing.
    """
    gains = channel_gains(geom, v)
    entries = initial_codebook(geom.rows, geom.cols).entries.copy()
    best = power_from_gains(gains, Codebook(entries))
    evaluations = 1
    accepted = [best]

    passes = 0
    max_passes = 2 ** (geom.rows + geom.cols)  # safety bound, unreachable in practice
    while True:
        changed = False
        for axis, count in ((0, geom.rows), (1, geom.cols)):
            for k in range(count):
                if axis == 0:
                    entries[k, :] *= -1
                else:
                    entries[:, k] *= -1
                trial = power_from_gains(gains, Codebook(entries))
                evaluations += 1
                if trial > best:
                    best = trial
                    accepted.append(trial)
                    changed = True
                else:
                    if axis == 0:
                        entries[k, :] *= -1
                    else:
                        entries[:, k] *= -1
        passes += 1
        if not changed:
            break
        if passes > max_passes:
            raise RuntimeError("greedy traversal failed to stabilize")

    return OracleResult(
        codebook=Codebook(entries),
        power_dbm=linear_to_dbm(best),
        power_linear=best,
        passes=passes,
        evaluations=evaluations,
        accepted_powers=accepted,
    )


def _index_bits(indices: np.ndarray, width: int) -> np.ndarray:
    """Bit matrix of the enumeration integers, most-significant bit first."""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.float64)


def _scan_best(gains: np.ndarray, total: int, chunk_signs) -> int:
    """Argmax of |signs . h|^2 over an enumeration; first index wins ties."""
    h_flat = gains.reshape(-1)
    best_power = -1.0
    best_index = -1
    for start in range(0, total, _ENUM_CHUNK):
        idx = np.arange(start, min(start + _ENUM_CHUNK, total), dtype=np.uint64)
        powers = np.abs(chunk_signs(idx) @ h_flat) ** 2
        k = int(np.argmax(powers))
        if powers[k] > best_power:
            best_power = float(powers[k])
            best_index = start + k
    return best_index


def exhaustive_rank1(
    geom: ScenarioGeometry, v, budget_bits: int = RANK1_BUDGET_BITS
) -> OracleResult:
    """Best codebook over all 2^(M+N-1) decoded labels.

    The winning label is the smallest (as an unsigned integer) among the
    maximum-power candidates.
    """
    n_bits = geom.rows + geom.cols - 1
    if n_bits > budget_bits:
        raise BudgetExceeded(
            f"rank-1 enumeration needs {n_bits} bits > budget {budget_bits}"
        )
    gains = channel_gains(geom, v)
    m = geom.rows

    def chunk_signs(idx):
        flips = 2.0 * _index_bits(idx, n_bits) - 1.0
        r = np.concatenate([np.full((idx.size, 1), -1.0), flips[:, : m - 1]], axis=1)
        c = flips[:, m - 1 :]
        return -np.einsum("ki,kj->kij", r, c).reshape(idx.size, -1)

    best_index = _scan_best(gains, 1 << n_bits, chunk_signs)
    cb = decode(EncodedLabel.from_int(best_index, geom.rows, geom.cols))
    exact = power_from_gains(gains, cb)  # identical to received_power at v
    return OracleResult(
        codebook=cb,
        power_dbm=linear_to_dbm(exact),
        power_linear=exact,
        passes=0,
        evaluations=1 << n_bits,
    )


def exhaustive_full(
    geom: ScenarioGeometry, v, budget_bits: int = FULL_BUDGET_BITS
) -> OracleResult:
    """Best codebook over all 2^(M*N) sign patterns.

    Candidate j is the enumeration integer read row-major into the matrix
    (most-significant bit = entry (0, 0)); ties go to the smallest integer.
    The optimum may be outside the rank-1 flip set, flagged via ``rank1``.
    """
    n_bits = geom.rows * geom.cols
    if n_bits > budget_bits:
        raise BudgetExceeded(
            f"full enumeration needs {n_bits} bits > budget {budget_bits}"
        )
    gains = channel_gains(geom, v)

    def chunk_signs(idx):
        return 2.0 * _index_bits(idx, n_bits) - 1.0

    best_index = _scan_best(gains, 1 << n_bits, chunk_signs)
    signs = chunk_signs(np.array([best_index], dtype=np.uint64))
    cb = Codebook(signs.reshape(geom.rows, geom.cols).astype(np.int8))
    exact = power_from_gains(gains, cb)
    try:
        factor(cb)
        rank1 = True
    except NotReachable:
        rank1 = False
    return OracleResult(
        codebook=cb,
        power_dbm=linear_to_dbm(exact),
        power_linear=exact,
        passes=0,
        evaluations=1 << n_bits,
        rank1=rank1,
    )
