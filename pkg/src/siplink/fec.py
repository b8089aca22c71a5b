"""Generic regular LDPC coding.

A seeded progressive-edge-growth-style construction yields column-weight-3
codes with girth >= 6 (no 4-cycles) at the block lengths used here. Encoding
is systematic via a one-time GF(2) elimination; decoding is normalized
min-sum belief propagation with early exit on a zero syndrome.

LLR sign convention, fixed artifact-wide: L = log(P(bit=0)/P(bit=1)),
so positive LLR means bit 0 is more likely.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "CodeSpec",
    "make_code",
    "encode",
    "decode",
    "syndrome",
    "write_alist",
    "read_alist",
    "code_from_parity_matrix",
]

_COLUMN_WEIGHT = 3


@dataclass
class CodeSpec:
    """One LDPC code plus its (cached) systematic encoder.

    ``check_vars`` lists, per parity check, the indices of participating
    variables, padded with -1 to the maximum row weight. ``info_cols`` are
    the systematic bit positions inside a codeword.
    """

    n: int
    m: int
    check_vars: np.ndarray
    rate: Fraction
    max_bp_iterations: int = 25
    normalization_factor: float = 0.75
    info_cols: np.ndarray = field(default=None, repr=False)
    _pivot_cols: np.ndarray = field(default=None, repr=False)
    _parity_gen: np.ndarray = field(default=None, repr=False)
    _edge_var: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (0 < self.normalization_factor <= 1):
            raise ValueError("normalization_factor must be in (0, 1]")
        if self.max_bp_iterations < 1:
            raise ValueError("max_bp_iterations must be positive")
        pad = self.check_vars < 0
        # Padded slots point at a sentinel variable that always carries bit 0
        # and an infinite-confidence LLR, which keeps them neutral.
        self._edge_var = np.where(pad, self.n, self.check_vars).astype(np.int64)
        degrees = np.bincount(self.check_vars[~pad].ravel(), minlength=self.n)
        if (degrees == 0).any():
            raise ValueError("parity-check matrix has empty columns")
        if (self.check_vars >= 0).sum(axis=1).min() == 0:
            raise ValueError("parity-check matrix has empty rows")
        if self.info_cols is None:
            self._build_encoder()

    @property
    def k(self) -> int:
        return self.n - self.m

    def dense_parity_matrix(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for r in range(self.m):
            cols = self.check_vars[r]
            h[r, cols[cols >= 0]] = 1
        return h

    # -- systematic encoder -------------------------------------------------

    def _build_encoder(self):
        h = self.dense_parity_matrix()
        pivots, rref = _gf2_rref(h)
        if len(pivots) != self.m:
            raise ValueError("parity-check matrix is rank deficient")
        pivot_cols = np.array(pivots, dtype=np.int64)
        info_cols = np.setdiff1d(np.arange(self.n), pivot_cols)
        # In reduced row-echelon form, row i reads: x[pivot_i] = sum over the
        # free columns it touches. float32 matmul is exact for these counts.
        self.info_cols = info_cols
        self._pivot_cols = pivot_cols
        self._parity_gen = rref[:, info_cols].astype(np.float32)


def _gf2_rref(h: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Reduced row echelon form over GF(2), bit-packed into uint64 words."""
    m, n = h.shape
    words = (n + 63) // 64
    packed = np.zeros((m, words), dtype=np.uint64)
    rows, cols = np.nonzero(h)
    np.bitwise_or.at(packed, (rows, cols // 64), np.uint64(1) << (cols % 64).astype(np.uint64))

    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        w, b = col // 64, np.uint64(col % 64)
        colbits = (packed[row:, w] >> b) & np.uint64(1)
        nz = np.nonzero(colbits)[0]
        if nz.size == 0:
            continue
        pick = row + nz[0]
        if pick != row:
            packed[[row, pick]] = packed[[pick, row]]
        others = np.nonzero((packed[:, w] >> b) & np.uint64(1))[0]
        others = others[others != row]
        packed[others] ^= packed[row]
        pivots.append(col)
        row += 1

    out = np.zeros((m, n), dtype=np.uint8)
    for w in range(words):
        chunk = packed[:, w]
        for b in range(min(64, n - 64 * w)):
            out[:, 64 * w + b] = (chunk >> np.uint64(b)) & np.uint64(1)
    return pivots, out


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _row_weights(n: int, m: int) -> np.ndarray:
    """Near-regular row weights summing to the 3n column edges."""
    total = _COLUMN_WEIGHT * n
    base = total // m
    weights = np.full(m, base, dtype=np.int64)
    weights[: total - base * m] += 1
    return weights


def _try_construct(n: int, m: int, rng: np.random.Generator) -> np.ndarray | None:
    """One attempt at a 4-cycle-free column-weight-3 graph; None on failure."""
    capacity = _row_weights(n, m)
    row_deg = np.zeros(m, dtype=np.int64)
    rows_of_col: list[list[int]] = [[] for _ in range(n)]
    cols_of_row: list[list[int]] = [[] for _ in range(m)]

    order = rng.permutation(n)
    for v in order:
        for _ in range(_COLUMN_WEIGHT):
            forbidden = set(rows_of_col[v])
            for r in rows_of_col[v]:
                for v2 in cols_of_row[r]:
                    forbidden.update(rows_of_col[v2])
            # Prefer the least-filled admissible row (random tie-break) to
            # keep row weights near-regular.
            best_r = -1
            candidates = np.nonzero(capacity - row_deg > 0)[0]
            if candidates.size == 0:
                return None
            fill = row_deg[candidates] - capacity[candidates]
            for idx in np.lexsort((rng.random(candidates.size), fill)):
                r = int(candidates[idx])
                if r not in forbidden:
                    best_r = r
                    break
            if best_r < 0:
                return None
            rows_of_col[v].append(best_r)
            cols_of_row[best_r].append(int(v))
            row_deg[best_r] += 1

    w_max = int(capacity.max())
    check_vars = np.full((m, w_max), -1, dtype=np.int64)
    for r in range(m):
        check_vars[r, : len(cols_of_row[r])] = sorted(cols_of_row[r])
    return check_vars


def _has_four_cycle(check_vars: np.ndarray) -> bool:
    """True when two checks share two variables (a length-4 cycle)."""
    seen: set[tuple[int, int]] = set()
    for row in check_vars:
        cols = [int(c) for c in row if c >= 0]
        for a in range(len(cols)):
            for b in range(a + 1, len(cols)):
                key = (cols[a], cols[b])
                if key in seen:
                    return True
                seen.add(key)
    return False


@lru_cache(maxsize=32)
def _make_code_cached(n: int, rate_str: str, seed: int, max_iter: int, norm: float) -> CodeSpec:
    rate = Fraction(rate_str)
    m = round(n * (1 - rate))
    if m < 1 or m >= n:
        raise ValueError(f"rate {rate} infeasible at block length {n}")
    for attempt in range(40):
        rng = np.random.default_rng((seed, n, m, attempt))
        check_vars = _try_construct(n, m, rng)
        if check_vars is None:
            continue
        if n <= 2048 and _has_four_cycle(check_vars):
            continue
        try:
            return CodeSpec(
                n=n,
                m=m,
                check_vars=check_vars,
                rate=Fraction(n - m, n),
                max_bp_iterations=max_iter,
                normalization_factor=norm,
            )
        except ValueError:
            continue  # rank deficient; retry with another graph
    raise RuntimeError(f"failed to construct an LDPC code with n={n}, m={m}")


def make_code(
    n: int,
    rate: Fraction | float,
    seed: int = 0,
    max_bp_iterations: int = 25,
    normalization_factor: float = 0.75,
) -> CodeSpec:
    """Build (or fetch from cache) a column-weight-3 regular LDPC code."""
    rate = Fraction(rate).limit_denominator(64)
    return _make_code_cached(int(n), str(rate), int(seed), int(max_bp_iterations), float(normalization_factor))


def code_from_parity_matrix(
    h: np.ndarray, max_bp_iterations: int = 25, normalization_factor: float = 0.75
) -> CodeSpec:
    """Wrap an explicit dense binary parity-check matrix as a CodeSpec."""
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    w_max = int(h.sum(axis=1).max())
    check_vars = np.full((m, w_max), -1, dtype=np.int64)
    for r in range(m):
        cols = np.nonzero(h[r])[0]
        check_vars[r, : cols.size] = cols
    return CodeSpec(
        n=n,
        m=m,
        check_vars=check_vars,
        rate=Fraction(n - m, n),
        max_bp_iterations=max_bp_iterations,
        normalization_factor=normalization_factor,
    )


# ---------------------------------------------------------------------------
# Encode / decode
# ---------------------------------------------------------------------------


def encode(info_bits: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Systematic encoding; the info bits appear verbatim on spec.info_cols."""
    u = np.asarray(info_bits).ravel()
    if u.size != spec.k:
        raise ValueError(f"expected {spec.k} info bits, got {u.size}")
    parity = (spec._parity_gen @ u.astype(np.float32)).astype(np.int64) % 2
    b = np.zeros(spec.n, dtype=np.uint8)
    b[spec.info_cols] = u
    b[spec._pivot_cols] = parity
    return b


def syndrome(bits: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Parity of each check for a hard bit vector."""
    padded = np.concatenate([np.asarray(bits, dtype=np.int64).ravel(), [0]])
    return padded[spec._edge_var].sum(axis=1) % 2


def decode(llrs: np.ndarray, spec: CodeSpec) -> tuple[np.ndarray, bool, bool]:
    """Normalized min-sum decoding.

    Returns (info_bits, converged, parity_ok). The decoder is total: failure
    to converge within max_bp_iterations is reported, never raised.
    """
    llr = np.asarray(llrs, dtype=np.float64).ravel()
    if llr.size != spec.n:
        raise ValueError(f"expected {spec.n} LLRs, got {llr.size}")
    ev = spec._edge_var
    m, w = ev.shape
    alpha = spec.normalization_factor

    # Sentinel variable n: bit 0 at infinite confidence => neutral edge.
    channel = np.concatenate([llr, [np.inf]])
    v2c = channel[ev]
    c2v = np.zeros_like(v2c)
    hard = np.zeros(spec.n + 1, dtype=np.int64)
    converged = False

    for _ in range(spec.max_bp_iterations):
        mag = np.abs(v2c)
        sgn = np.where(v2c < 0, -1.0, 1.0)
        first = np.argmin(mag, axis=1)
        rows = np.arange(m)
        min1 = mag[rows, first]
        mag2 = mag.copy()
        mag2[rows, first] = np.inf
        min2 = mag2.min(axis=1)
        sign_prod = np.prod(sgn, axis=1)

        ext_mag = np.where(
            np.arange(w)[None, :] == first[:, None], min2[:, None], min1[:, None]
        )
        c2v = alpha * sign_prod[:, None] * sgn * ext_mag

        totals = np.bincount(ev.ravel(), weights=c2v.ravel(), minlength=spec.n + 1)
        posterior = channel + totals
        v2c = posterior[ev] - c2v

        hard = (posterior < 0).astype(np.int64)
        hard[spec.n] = 0
        if not (hard[ev].sum(axis=1) % 2).any():
            converged = True
            break

    parity_ok = not (hard[ev].sum(axis=1) % 2).any()
    info = hard[: spec.n][spec.info_cols].astype(np.uint8)
    return info, converged, parity_ok


# ---------------------------------------------------------------------------
# alist import/export
# ---------------------------------------------------------------------------


def write_alist(spec: CodeSpec, path: str | Path) -> None:
    """Write the parity-check matrix in plain-text alist format."""
    h = spec.dense_parity_matrix()
    m, n = h.shape
    col_lists = [np.nonzero(h[:, c])[0] + 1 for c in range(n)]
    row_lists = [np.nonzero(h[r, :])[0] + 1 for r in range(m)]
    max_col = max(len(x) for x in col_lists)
    max_row = max(len(x) for x in row_lists)
    lines = [
        f"{n} {m}",
        f"{max_col} {max_row}",
        " ".join(str(len(x)) for x in col_lists),
        " ".join(str(len(x)) for x in row_lists),
    ]
    for lst, width in ((col_lists, max_col), (row_lists, max_row)):
        for x in lst:
            entries = list(x) + [0] * (width - len(x))
            lines.append(" ".join(str(v) for v in entries))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_alist(path: str | Path, **kwargs) -> CodeSpec:
    """Read an alist parity-check matrix into a CodeSpec."""
    tokens = Path(path).read_text(encoding="utf-8").split()
    it = iter(tokens)
    n, m = int(next(it)), int(next(it))
    next(it), next(it)
    col_deg = [int(next(it)) for _ in range(n)]
    row_deg = [int(next(it)) for _ in range(m)]
    h = np.zeros((m, n), dtype=np.uint8)
    # alist pads each index list to the maximum degree with zeros
    for c in range(n):
        for _ in range(max(col_deg)):
            v = int(next(it))
            if v:
                h[v - 1, c] = 1
    for r in range(m):
        for _ in range(max(row_deg)):
            v = int(next(it))
            if v:
                h[r, v - 1] = 1
    return code_from_parity_matrix(h, **kwargs)
