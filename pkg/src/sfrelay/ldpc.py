"""Regular LDPC codes: construction, systematic encoding, sum-product decoding.

The default code is (dv=2, dc=3)-regular with block length 900. Such codes
are cycle codes, so the check matrix is rank deficient: viewing checks as
vertices and variables as edges, every connected component's rows sum to
zero over GF(2), giving k = n - rank(H) = n - m + (#components). k is
therefore always derived from the actual GF(2) rank, never assumed.

The decoder is a flooding sum-product pass with exact tanh-rule check
updates, vectorized over a batch of blocks. Check-to-variable messages can
be carried across calls through a :class:`SumProductState`, which lets an
outer iterative loop interleave single local passes with a-priori updates
while accumulating the same message state as one long decode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

L_MAX = 30.0


@dataclass
class LdpcCode:
    """Immutable parity-check structure plus derived encoder/decoder tables."""

    n: int
    dv: int
    dc: int
    m: int
    seed: int
    rank: int
    k: int
    edge_var: np.ndarray      # (E,) variable index of each edge
    edge_chk: np.ndarray      # (E,) check index of each edge
    var_edges: np.ndarray     # (n, dv) edge ids grouped by variable
    chk_edges: np.ndarray     # (m, dc) edge ids grouped by check
    info_positions: np.ndarray    # (k,) free columns: systematic positions
    parity_positions: np.ndarray  # (rank,) pivot columns
    parity_map: np.ndarray        # (rank, k) GF(2): parity = parity_map @ info

    @property
    def num_edges(self) -> int:
        return self.n * self.dv

    def parity_check_matrix(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_chk, self.edge_var] ^= 1
        return H

    def new_state(self, batch: int = 1) -> "SumProductState":
        return SumProductState(c2v=np.zeros((batch, self.num_edges)))

    def to_alist(self) -> str:
        """Render H in ALIST text format (1-based indices, zero padding)."""
        H = self.parity_check_matrix()
        col_deg = H.sum(axis=0)
        row_deg = H.sum(axis=1)
        lines = [
            f"{self.n} {self.m}",
            f"{col_deg.max()} {row_deg.max()}",
            " ".join(str(d) for d in col_deg),
            " ".join(str(d) for d in row_deg),
        ]
        for j in range(self.n):
            idx = np.flatnonzero(H[:, j]) + 1
            idx = list(idx) + [0] * (col_deg.max() - len(idx))
            lines.append(" ".join(str(i) for i in idx))
        for i in range(self.m):
            idx = np.flatnonzero(H[i]) + 1
            idx = list(idx) + [0] * (row_deg.max() - len(idx))
            lines.append(" ".join(str(i) for i in idx))
        return "\n".join(lines) + "\n"


@dataclass
class SumProductState:
    """Check-to-variable messages carried between decode calls."""

    c2v: np.ndarray  # (batch, E)


def _gf2_rref(H: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (R, pivot_columns)."""
    R = H.copy().astype(np.uint8)
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        sub = np.flatnonzero(R[row:, col])
        if sub.size == 0:
            continue
        pr = row + sub[0]
        if pr != row:
            R[[row, pr]] = R[[pr, row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R, pivots


def _conflict_edges(edge_var, edge_chk):
    """Edge ids involved in duplicate (variable, check) incidences or in a
    pair of variables sharing two checks (a length-4 Tanner cycle)."""
    E = edge_var.size
    bad = set()
    pair_seen: dict[tuple[int, int], int] = {}
    for e in range(E):
        key = (int(edge_var[e]), int(edge_chk[e]))
        if key in pair_seen:
            bad.add(e)
        else:
            pair_seen[key] = e
    chkpair_seen: dict[tuple[int, int], int] = {}
    by_var: dict[int, list[int]] = {}
    for e in range(E):
        by_var.setdefault(int(edge_var[e]), []).append(e)
    for v, edges in by_var.items():
        checks = sorted((int(edge_chk[e]), e) for e in edges)
        for i in range(len(checks)):
            for j in range(i + 1, len(checks)):
                key = (checks[i][0], checks[j][0])
                if checks[i][0] == checks[j][0]:
                    continue  # duplicate incidence, already flagged above
                if key in chkpair_seen and chkpair_seen[key] != v:
                    bad.add(checks[j][1])
                else:
                    chkpair_seen[key] = v
    return bad


def _fix_conflicts(edge_var, edge_chk, rng, budget=600, restarts=20):
    """Swap check endpoints until conflict-free, best effort.

    Hill climbing with plateau moves, reshuffling from scratch when a climb
    stalls; after the restart budget the best attempt so far is accepted.
    """
    E = edge_var.size
    best = edge_chk.copy()
    best_count = len(_conflict_edges(edge_var, best))
    for _ in range(restarts):
        if best_count == 0:
            break
        work = edge_chk.copy()
        rng.shuffle(work)
        bad = _conflict_edges(edge_var, work)
        for _ in range(budget):
            if not bad:
                break
            e = int(rng.choice(sorted(bad)))
            f = int(rng.integers(E))
            work[e], work[f] = work[f], work[e]
            new_bad = _conflict_edges(edge_var, work)
            if len(new_bad) <= len(bad):
                bad = new_bad
            else:
                work[e], work[f] = work[f], work[e]
        if len(bad) < best_count:
            best, best_count = work, len(bad)
    return best


def build_code(n: int, dv: int = 2, dc: int = 3, seed: int = 0) -> LdpcCode:
    """Construct a (dv, dc)-regular code by random edge permutation.

    Deterministic for a given seed. Duplicate edges are always removed;
    4-cycles are removed best-effort within a retry budget.
    """
    if (n * dv) % dc != 0:
        raise ValueError(f"n*dv = {n * dv} not divisible by dc = {dc}")
    m = n * dv // dc
    rng = np.random.default_rng(seed)

    edge_var = np.repeat(np.arange(n), dv)
    edge_chk = np.repeat(np.arange(m), dc)
    rng.shuffle(edge_chk)
    edge_chk = _fix_conflicts(edge_var, edge_chk, rng)

    # group edge ids per variable and per check (degrees are exact)
    var_edges = np.argsort(edge_var, kind="stable").reshape(n, dv).astype(np.int32)
    chk_edges = np.argsort(edge_chk, kind="stable").reshape(m, dc).astype(np.int32)

    H = np.zeros((m, n), dtype=np.uint8)
    H[edge_chk, edge_var] ^= 1
    R, pivot_cols = _gf2_rref(H)
    rank = len(pivot_cols)
    k = n - rank
    if k < 1:
        raise ValueError("degenerate code: k < 1")
    free_cols = np.setdiff1d(np.arange(n), pivot_cols)
    parity_map = R[:rank][:, free_cols].astype(np.uint8)

    return LdpcCode(
        n=n, dv=dv, dc=dc, m=m, seed=seed, rank=rank, k=k,
        edge_var=edge_var.astype(np.int32), edge_chk=edge_chk.astype(np.int32),
        var_edges=var_edges, chk_edges=chk_edges,
        info_positions=free_cols.astype(np.int32),
        parity_positions=np.asarray(pivot_cols, dtype=np.int32),
        parity_map=parity_map,
    )


def encode(code: LdpcCode, info: np.ndarray) -> np.ndarray:
    """Systematic encode: info bits land verbatim on the free columns.

    Accepts a single (k,) word or a (B, k) batch.
    """
    info = np.asarray(info)
    single = info.ndim == 1
    blocks = info.reshape(1, -1) if single else info
    if blocks.shape[1] != code.k:
        raise ValueError(f"info length {blocks.shape[1]} != k = {code.k}")
    parity = (blocks.astype(np.int64) @ code.parity_map.T.astype(np.int64)) % 2
    out = np.zeros((blocks.shape[0], code.n), dtype=np.uint8)
    out[:, code.info_positions] = blocks
    out[:, code.parity_positions] = parity
    return out[0] if single else out


def encode_stream(code: LdpcCode, bits: np.ndarray) -> tuple[np.ndarray, int]:
    """Split a bit stream into k-bit groups, zero-padding the last group,
    and encode each. Returns (codewords (B, n), pad_count)."""
    bits = np.asarray(bits).astype(np.uint8).reshape(-1)
    n_blocks = -(-bits.size // code.k)
    pad = n_blocks * code.k - bits.size
    info = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)]).reshape(n_blocks, code.k)
    return encode(code, info), pad


def decode(
    code: LdpcCode,
    channel_llr: np.ndarray,
    apriori_llr: np.ndarray | None = None,
    local_iters: int = 1,
    state: SumProductState | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Flooding sum-product decode with tanh-rule check updates.

    Returns (posterior, extrinsic) where posterior = intrinsic + sum of
    incoming check messages and extrinsic = posterior - apriori. Channel
    and a-priori LLRs are clipped to +-L_MAX on entry, as are all internal
    messages, so no non-finite value can escape.

    When `state` is given its messages seed the pass and are updated in
    place, so repeated single-iteration calls with evolving a-priori
    accumulate the same message state as one long decode.
    """
    ch = np.asarray(channel_llr, dtype=np.float64)
    single = ch.ndim == 1
    ch = np.atleast_2d(ch)
    B = ch.shape[0]
    if ch.shape[1] != code.n:
        raise ValueError(f"channel LLR length {ch.shape[1]} != n = {code.n}")
    if apriori_llr is None:
        ap = np.zeros_like(ch)
    else:
        ap = np.atleast_2d(np.asarray(apriori_llr, dtype=np.float64))
        if ap.shape != ch.shape:
            raise ValueError(f"a-priori shape {ap.shape} != channel shape {ch.shape}")
    ch = np.clip(ch, -L_MAX, L_MAX)
    ap = np.clip(ap, -L_MAX, L_MAX)
    intrinsic = ch + ap

    if state is None:
        state = code.new_state(B)
    c2v = state.c2v
    if c2v.shape != (B, code.num_edges):
        raise ValueError(f"state shape {c2v.shape} incompatible with batch {B}")

    for _ in range(local_iters):
        var_tot = intrinsic + c2v[:, code.var_edges].sum(axis=2)
        v2c = np.clip(var_tot[:, code.edge_var] - c2v, -L_MAX, L_MAX)
        t = np.tanh(0.5 * v2c[:, code.chk_edges])  # (B, m, dc)
        # leave-one-out products via prefix/suffix along the check axis
        pref = np.ones_like(t)
        pref[:, :, 1:] = np.cumprod(t[:, :, :-1], axis=2)
        suf = np.ones_like(t)
        suf[:, :, :-1] = np.cumprod(t[:, :, :0:-1], axis=2)[:, :, ::-1]
        prod = np.clip(pref * suf, -1.0 + 1e-15, 1.0 - 1e-15)
        msgs = np.clip(2.0 * np.arctanh(prod), -L_MAX, L_MAX)
        c2v[:, code.chk_edges.reshape(-1)] = msgs.reshape(B, -1)

    posterior = intrinsic + c2v[:, code.var_edges].sum(axis=2)
    extrinsic = posterior - ap
    if single:
        return posterior[0], extrinsic[0]
    return posterior, extrinsic


def hard_decision(llr: np.ndarray) -> np.ndarray:
    """Positive LLR (including exactly 0) decides bit 0."""
    return (np.asarray(llr) < 0).astype(np.uint8)
