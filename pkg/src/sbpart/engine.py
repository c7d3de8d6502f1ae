"""Block partition engine: MCMC nodal updates, greedy block merges, and a
golden-section search over the number of blocks minimizing description length.

The objective for merges and nodal moves is the log posterior
S = sum_{t1,t2} M[t1,t2] * log(M[t1,t2] / (d_out[t1] * d_in[t2]))
restricted to the affected rows/columns when evaluating a single move, which
is exact because a node move only touches rows and columns r and s.
All logarithms are natural.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import (
    BlockModelState,
    Graph,
    NodeBlockEdgeCounts,
    Partition,
    _bump,
    apply_move,
    move_delta,
    node_block_edge_counts,
    recompute_block_matrix,
)

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MCMCConfig:
    beta: float = 3.0
    max_sweeps: int = 100
    probe_sweeps: int = 8  # sweep budget per intermediate search probe
    convergence_threshold: float = 1e-4
    convergence_window: int = 3
    merge_reduction_rate: float = 0.5
    merge_proposals_per_block: int = 10
    rng_seed: int = 0
    execution_mode: str = "sequential"  # sequential | parallel-snapshot | batch
    workers: int = 1

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 0.0 < self.merge_reduction_rate < 1.0:
            raise ValueError("merge_reduction_rate must be in (0, 1)")
        if self.max_sweeps < 1 or self.convergence_window < 1 \
                or self.probe_sweeps < 1:
            raise ValueError("sweep counts must be positive")
        if self.convergence_threshold <= 0:
            raise ValueError("convergence_threshold must be positive")
        if self.execution_mode not in ("sequential", "parallel-snapshot", "batch"):
            raise ValueError(f"unknown execution mode {self.execution_mode!r}")


@dataclass
class ProposalOutcome:
    node: int
    current_block: int
    proposed_block: int
    delta_S: float
    p_forward: float
    p_backward: float
    p_accept: float
    accepted: bool


def _h(x):
    if x <= 0.0:
        return 0.0
    return (1.0 + x) * math.log(1.0 + x) - x * math.log(x)


def entropy_sum(state):
    """S = sum M log(M / (d_out d_in)) over all nonzero entries of M."""
    log = math.log
    d_in = state.d_in
    tot = 0.0
    for r, row in enumerate(state.rows):
        do = state.d_out[r]
        for t, w in row.items():
            if w > 0:
                tot += w * log(w / (do * d_in[t]))
    return tot


def description_length(state, num_nodes, total_edge_weight):
    """Total description length H of the model plus the graph given the model."""
    B = state.num_blocks
    if B < 1:
        raise ValueError("state has no blocks")
    if total_edge_weight == 0:
        return num_nodes * math.log(B) if B > 1 else 0.0
    E = total_edge_weight
    return (E * _h(B * B / E) + num_nodes * math.log(B) - entropy_sum(state))


def _window_entropy(row_r, row_s, col_r, col_s, r, s,
                    dor, dos, dir_, dis, d_out, d_in):
    """Entropy restricted to rows r, s and columns r, s (each entry once)."""
    log = math.log
    tot = 0.0
    for row, do in ((row_r, dor), (row_s, dos)):
        if do > 0:
            for t, w in row.items():
                if w > 0:
                    dt = dir_ if t == r else dis if t == s else d_in[t]
                    tot += w * log(w / (do * dt))
    for col, di in ((col_r, dir_), (col_s, dis)):
        if di > 0:
            for t, w in col.items():
                if t != r and t != s and w > 0:
                    tot += w * log(w / (d_out[t] * di))
    return tot


def _state_window_entropy(state, r, s):
    return _window_entropy(state.rows[r], state.rows[s],
                           state.cols[r], state.cols[s], r, s,
                           state.d_out[r], state.d_out[s],
                           state.d_in[r], state.d_in[s],
                           state.d_out, state.d_in)


def delta_log_posterior(before, after, r, s):
    """Change in log posterior for one move r -> s, from the affected
    rows/columns of the two states. Equals the full entropy difference."""
    return _state_window_entropy(before, r, s) - _state_window_entropy(after, r, s)


def _sweep_uniforms(seed, sweep_index, num_nodes):
    """Counter-based uniform draws, 4 per node, replayable across modes."""
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1),
                              counter=[0, 0, int(sweep_index), 0])
    return np.random.Generator(bitgen).random((num_nodes, 4))


def _sweep_permutation(seed, sweep_index, num_nodes):
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1),
                              counter=[0, 1, int(sweep_index), 0])
    return np.random.Generator(bitgen).permutation(num_nodes)


def _propose(graph, assignment, state, B, i, u_edge, u_coin, u_prop):
    j = graph.draw_neighbor(i, u_edge)
    u_blk = int(assignment[j])
    du = int(state.d[u_blk])
    if u_coin <= B / (du + B):
        return min(int(u_prop * B), B - 1)
    comb = dict(state.rows[u_blk])
    for t, w in state.cols[u_blk].items():
        comb[t] = comb.get(t, 0) + w
    thresh = u_prop * du
    c = 0
    t = u_blk
    for t in sorted(comb):
        c += comb[t]
        if c > thresh:
            return t
    return t


def propose_block(i, partition, state, graph, rng):
    """Draw a block proposal for node i per the nodal-update proposal rule."""
    u = rng.random(3)
    return _propose(graph, partition.assignment, state, state.num_blocks,
                    i, u[0], u[1], u[2])


def hastings_correction(i, counts, state_before, state_after, r, s, B):
    """Forward/backward proposal probabilities for the move r -> s of node i."""
    pf = 0.0
    pb = 0.0
    rows_b, cols_b = state_before.rows, state_before.cols
    rows_a, cols_a = state_after.rows, state_after.cols
    for t, k in counts.combined.items():
        pf += k * (cols_b[s].get(t, 0) + rows_b[s].get(t, 0) + 1) \
            / (int(state_before.d[t]) + B)
        pb += k * (cols_a[r].get(t, 0) + rows_a[r].get(t, 0) + 1) \
            / (int(state_after.d[t]) + B)
    return pf, pb


def _counts_from_assignment(graph, b, i):
    out_c, in_c, comb = {}, {}, {}
    for j, w in graph.out_adj[i].items():
        t = int(b[j])
        out_c[t] = out_c.get(t, 0) + w
        comb[t] = comb.get(t, 0) + w
    for j, w in graph.in_adj[i].items():
        t = int(b[j])
        in_c[t] = in_c.get(t, 0) + w
        comb[t] = comb.get(t, 0) + w
    return NodeBlockEdgeCounts(out_c, in_c, comb, graph.out_adj[i].get(i, 0))


def _evaluate(graph, assignment, state, B, beta, i,
              u_edge, u_coin, u_prop, u_accept):
    """One proposal for node i against (assignment, state); no mutation.

    Returns (outcome, commit) where commit is (delta, ki_out, ki_in, s) if
    the move was accepted, else None.
    """
    r = int(assignment[i])
    s = _propose(graph, assignment, state, B, i, u_edge, u_coin, u_prop)
    if s == r:
        return ProposalOutcome(i, r, s, 0.0, 0.0, 0.0, 0.0, False), None
    counts = _counts_from_assignment(graph, assignment, i)
    delta, ki_out, ki_in = move_delta(counts, r, s)
    rows, cols = state.rows, state.cols
    d_out, d_in, d = state.d_out, state.d_in, state.d
    dor, dos = int(d_out[r]), int(d_out[s])
    dir_, dis = int(d_in[r]), int(d_in[s])
    dor_a, dos_a = dor - ki_out, dos + ki_out
    dir_a, dis_a = dir_ - ki_in, dis + ki_in
    # S collapses to sum(w log w) - sum(d_out log d_out) - sum(d_in log d_in)
    # over the whole matrix, so dS only involves changed cells and degrees
    dS = 0.0
    for (t1, t2), dw in delta.items():
        if dw == 0:
            continue
        w_b = rows[t1].get(t2, 0)
        w_a = w_b + dw
        if w_b:
            dS += w_b * math.log(w_b)
        if w_a:
            dS -= w_a * math.log(w_a)
    for db, da in ((dor, dor_a), (dos, dos_a), (dir_, dir_a), (dis, dis_a)):
        if db:
            dS -= db * math.log(db)
        if da:
            dS += da * math.log(da)

    dr_a = dor_a + dir_a
    ds_a = dos_a + dis_a
    pf = 0.0
    pb = 0.0
    row_r, col_r = rows[r], cols[r]
    row_s, col_s = rows[s], cols[s]
    for t, k in counts.combined.items():
        pf += k * (col_s.get(t, 0) + row_s.get(t, 0) + 1) / (int(d[t]) + B)
        m_tr_a = col_r.get(t, 0) + delta.get((t, r), 0)
        m_rt_a = row_r.get(t, 0) + delta.get((r, t), 0)
        dt_a = dr_a if t == r else ds_a if t == s else int(d[t])
        pb += k * (m_tr_a + m_rt_a + 1) / (dt_a + B)
    if pf <= 0.0:
        # unreachable with the +1 smoothing whenever K is nonempty; guarded
        p_accept = 1.0 if dS < 0 else 0.0
    else:
        try:
            p_accept = min(math.exp(-beta * dS) * pb / pf, 1.0)
        except OverflowError:
            p_accept = 1.0
    accepted = bool(u_accept <= p_accept)
    outcome = ProposalOutcome(i, r, s, dS, pf, pb, p_accept, accepted)
    return outcome, ((delta, ki_out, ki_in, s) if accepted else None)


def _commit(state, assignment, i, r, commit):
    delta, ki_out, ki_in, s = commit
    rows, cols = state.rows, state.cols
    for (t1, t2), dw in delta.items():
        if dw == 0:
            continue
        _bump(rows[t1], t2, dw)
        _bump(cols[t2], t1, dw)
    state.d_out[r] -= ki_out
    state.d_out[s] += ki_out
    state.d_in[r] -= ki_in
    state.d_in[s] += ki_in
    state.d[r] -= ki_out + ki_in
    state.d[s] += ki_out + ki_in
    assignment[i] = s


def nodal_update(i, partition, state, graph, config, rng):
    """Metropolis-Hastings update of node i's block assignment (in place)."""
    r = int(partition.assignment[i])
    if graph.degree[i] == 0:
        return ProposalOutcome(i, r, r, 0.0, 0.0, 0.0, 0.0, False)
    u = rng.random(4)
    outcome, commit = _evaluate(graph, partition.assignment, state,
                                state.num_blocks, config.beta, i,
                                u[0], u[1], u[2], u[3])
    if commit is not None:
        _commit(state, partition.assignment, i, r, commit)
    return outcome


# ---------------------------------------------------------------------------
# snapshot (one-iteration-old) evaluation, optionally across worker processes

_WORKER_PAYLOAD = {}


def _init_snapshot_worker(payload):
    _WORKER_PAYLOAD["p"] = payload


def _eval_node_chunk(node_ids):
    graph, assignment, state, B, beta, uniforms = _WORKER_PAYLOAD["p"]
    out = []
    for i in node_ids:
        if graph.degree[i] == 0:
            continue
        o, _ = _evaluate(graph, assignment, state, B, beta, i,
                         uniforms[i, 0], uniforms[i, 1],
                         uniforms[i, 2], uniforms[i, 3])
        out.append(o)
    return out


def snapshot_outcomes(graph, assignment, state, config, uniforms):
    """Evaluate every node against the frozen (assignment, state) snapshot."""
    B = state.num_blocks
    if config.workers > 1:
        import multiprocessing
        ctx = multiprocessing.get_context("fork")
        payload = (graph, assignment, state, B, config.beta, uniforms)
        chunks = np.array_split(np.arange(graph.num_nodes), config.workers)
        with ctx.Pool(config.workers, initializer=_init_snapshot_worker,
                      initargs=(payload,)) as pool:
            parts = pool.map(_eval_node_chunk, [c.tolist() for c in chunks])
        return [o for part in parts for o in part]
    _init_snapshot_worker((graph, assignment, state, B, config.beta, uniforms))
    return _eval_node_chunk(range(graph.num_nodes))


def mcmc_sweep(graph, partition, state, config, sweep_index=0):
    """One full pass of nodal updates.

    sequential: nodes visited in random order against the live state.
    parallel-snapshot: all nodes evaluated against the frozen sweep-start
    state; accepted moves are applied at a barrier and M is rebuilt once.
    batch: matrix-form snapshot sweep (see batch_sweep).
    Returns (partition, state, H_after, num_accepted).
    """
    N = graph.num_nodes
    E = graph.total_edge_weight
    U = _sweep_uniforms(config.rng_seed, sweep_index, N)
    b = partition.assignment
    if config.execution_mode == "sequential":
        B = state.num_blocks
        beta = config.beta
        accepted = 0
        for i in _sweep_permutation(config.rng_seed, sweep_index, N):
            i = int(i)
            if graph.degree[i] == 0:
                continue
            r = int(b[i])
            _, commit = _evaluate(graph, b, state, B, beta, i,
                                  U[i, 0], U[i, 1], U[i, 2], U[i, 3])
            if commit is not None:
                _commit(state, b, i, r, commit)
                accepted += 1
        return partition, state, description_length(state, N, E), accepted
    if config.execution_mode == "parallel-snapshot":
        outcomes = snapshot_outcomes(graph, b.copy(), state, config, U)
        moves = [(o.node, o.proposed_block) for o in outcomes if o.accepted]
        for i, s in moves:
            b[i] = s
        state = recompute_block_matrix(graph, partition)
        return partition, state, description_length(state, N, E), len(moves)
    if config.execution_mode == "batch":
        partition, state, accepted = _batch_apply(graph, partition, state,
                                                  config, U)
        return partition, state, description_length(state, N, E), accepted
    raise ValueError(f"unknown execution mode {config.execution_mode!r}")


def run_mcmc(graph, partition, state, config, sweep_base=0, sweep_cap=None):
    """Sweep until the windowed relative improvement in H drops below the
    convergence threshold, or the sweep budget is hit."""
    N = graph.num_nodes
    E = graph.total_edge_weight
    cap = config.max_sweeps if sweep_cap is None \
        else min(sweep_cap, config.max_sweeps)
    H = description_length(state, N, E)
    window = deque(maxlen=config.convergence_window)
    sweeps = 0
    for t in range(cap):
        partition, state, H_new, _ = mcmc_sweep(graph, partition, state,
                                                config, sweep_index=sweep_base + t)
        sweeps += 1
        window.append(abs(H - H_new) / max(abs(H_new), 1e-12))
        H = H_new
        if len(window) == window.maxlen and \
                sum(window) / len(window) < config.convergence_threshold:
            break
    return partition, state, H, sweeps


# ---------------------------------------------------------------------------
# greedy block merges

def _merge_window_after(state, r, s):
    """Rows/cols of the window after merging block r into block s."""
    row_s_a, col_s_a = {}, {}
    for src in (state.rows[s], state.rows[r]):
        for t, w in src.items():
            tt = s if t == r else t
            row_s_a[tt] = row_s_a.get(tt, 0) + w
    for src in (state.cols[s], state.cols[r]):
        for t, w in src.items():
            tt = s if t == r else t
            col_s_a[tt] = col_s_a.get(tt, 0) + w
    return row_s_a, col_s_a


def merge_delta_S(state, r, s):
    """Log-posterior change of reassigning every node of block r to block s.

    Uses the collapsed form of S (sum of w log w minus block-degree
    entropies), so only the changed cells of rows/cols r and s enter.
    """
    rows, cols = state.rows, state.cols
    dS = 0.0
    for w in rows[r].values():
        dS += w * math.log(w)
    for w in rows[s].values():
        dS += w * math.log(w)
    for t, w in cols[r].items():
        if t != r and t != s:
            dS += w * math.log(w)
    for t, w in cols[s].items():
        if t != r and t != s:
            dS += w * math.log(w)
    row_s_a, col_s_a = _merge_window_after(state, r, s)
    for w in row_s_a.values():
        dS -= w * math.log(w)
    for t, w in col_s_a.items():
        if t != r and t != s:
            dS -= w * math.log(w)
    dor, dos = int(state.d_out[r]), int(state.d_out[s])
    dir_, dis = int(state.d_in[r]), int(state.d_in[s])
    for db in (dor, dos, dir_, dis):
        if db:
            dS -= db * math.log(db)
    if dor + dos:
        dS += (dor + dos) * math.log(dor + dos)
    if dir_ + dis:
        dS += (dir_ + dis) * math.log(dir_ + dis)
    return dS


def _merge_into(state, r, s):
    """Fold block r into block s on the live state (row/col r become empty)."""
    rows, cols = state.rows, state.cols
    row_r = rows[r]
    col_r = cols[r]
    rows[r] = {}
    cols[r] = {}
    for t in row_r:
        if t != r:
            del cols[t][r]
    for t in col_r:
        if t != r:
            del rows[t][r]
    for t, w in row_r.items():
        tt = s if t == r else t
        _bump(rows[s], tt, w)
        _bump(cols[tt], s, w)
    for t, w in col_r.items():
        if t == r:
            continue
        _bump(rows[t], s, w)
        _bump(cols[s], t, w)
    state.d_out[s] += state.d_out[r]
    state.d_in[s] += state.d_in[r]
    state.d[s] += state.d[r]
    state.d_out[r] = 0
    state.d_in[r] = 0
    state.d[r] = 0


def _propose_merge_target(state, r, B, rng):
    """Merge-candidate proposal: the nodal proposal rule on the block graph."""
    dr = int(state.d[r])
    if dr == 0:
        s = int(rng.integers(B))
        return s if s != r else None
    comb = dict(state.rows[r])
    for t, w in state.cols[r].items():
        comb[t] = comb.get(t, 0) + w
    thresh = rng.random() * dr
    c = 0
    u = r
    for u in sorted(comb):
        c += comb[u]
        if c > thresh:
            break
    du = int(state.d[u])
    if rng.random() <= B / (du + B):
        return int(rng.integers(B))
    comb_u = dict(state.rows[u])
    for t, w in state.cols[u].items():
        comb_u[t] = comb_u.get(t, 0) + w
    thresh = rng.random() * du
    c = 0
    s = u
    for s in sorted(comb_u):
        c += comb_u[s]
        if c > thresh:
            break
    return s


def merge_blocks(graph, partition, state, target_B, config, rng=None):
    """Greedily merge blocks down to target_B and relabel to [0, target_B)."""
    if target_B < 1:
        raise ValueError("target_B must be at least 1")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    partition = partition.compact()
    state = recompute_block_matrix(graph, partition)
    B = partition.num_blocks
    if target_B > B:
        raise ValueError(f"target_B={target_B} exceeds current B={B}")
    if target_B == B:
        return partition, state

    heap = []
    for r in range(B):
        best = None
        for _ in range(config.merge_proposals_per_block):
            s = _propose_merge_target(state, r, B, rng)
            if s is None or s == r:
                continue
            dS = merge_delta_S(state, r, s)
            if best is None or (dS, s) < best:
                best = (dS, s)
        if best is not None:
            heap.append((best[0], r, best[1]))
    heapq.heapify(heap)

    parent = list(range(B))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merged = 0
    need = B - target_B
    empty_refills = 0
    while merged < need:
        if not heap:
            roots = [x for x in range(B) if find(x) == x]
            for r in roots:
                s = _propose_merge_target(state, r, B, rng)
                if s is None:
                    continue
                s = find(s)
                if s == r:
                    continue
                heapq.heappush(heap, (merge_delta_S(state, r, s), r, s))
            if not heap:
                empty_refills += 1
                if empty_refills > 100:
                    raise RuntimeError("unable to find further merge candidates")
            continue
        dS, r, s = heapq.heappop(heap)
        if find(r) != r:
            continue
        s = find(s)
        if s == r:
            continue
        # lazy re-evaluation: earlier merges may have changed this move's cost
        dS_now = merge_delta_S(state, r, s)
        if heap and dS_now > heap[0][0] + 1e-12:
            heapq.heappush(heap, (dS_now, r, s))
            continue
        _merge_into(state, r, s)
        parent[r] = s
        merged += 1

    roots = np.fromiter((find(x) for x in range(B)), dtype=np.int64, count=B)
    new_partition = Partition(roots[partition.assignment], B).compact()
    assert new_partition.num_blocks == target_B
    return new_partition, recompute_block_matrix(graph, new_partition)


# ---------------------------------------------------------------------------
# golden-section search over B

def _split_to(partition, target, rng):
    """Grow the block count to `target` by random halvings of the largest
    block (stops early if every block is a singleton)."""
    a = partition.assignment.copy()
    B = partition.num_blocks
    while B < target:
        sizes = np.bincount(a, minlength=B)
        big = int(np.argmax(sizes))
        idx = np.nonzero(a == big)[0]
        if len(idx) < 2:
            break
        pick = rng.random(len(idx)) < 0.5
        if not pick.any() or pick.all():
            pick[:] = False
            pick[:len(idx) // 2] = True
        a[idx[pick]] = B
        B += 1
    return Partition(a, B)


def golden_section_search(graph, config, initial_partition=None):
    """Find the partition minimizing description length across block counts.

    Starts from one-block-per-node (or the given initial partition), halves B
    via merge phases until a 3-point bracket around the minimum appears, then
    narrows with golden-section steps on integer B. Each probe warm-starts
    from the cached partition with the closest higher block count. When an
    initial partition sits below the optimum, a doubling expansion phase
    (random block splits + MCMC) climbs first.
    Returns (best_partition, best_B, best_H).
    """
    N = graph.num_nodes
    if N == 0:
        raise ValueError("empty graph")
    E = graph.total_edge_weight
    merge_rng = np.random.default_rng([config.rng_seed, 0xB10C])
    split_rng = np.random.default_rng([config.rng_seed, 0x5B117])
    sweep_counter = [0]
    cache = {}  # probe target -> [H, assignment, actual_B]

    if initial_partition is None:
        part0 = Partition.identity(N)
    else:
        part0 = initial_partition.compact()
    state0 = recompute_block_matrix(graph, part0)
    B0 = part0.num_blocks
    cache[B0] = [description_length(state0, N, E),
                 part0.assignment.copy(), B0]

    def run_at(target):
        if target in cache:
            return cache[target][0]
        above = [(v[2], k) for k, v in cache.items() if v[2] >= target]
        if above:
            _, start_key = min(above)
            part = Partition(cache[start_key][1].copy())
            state = recompute_block_matrix(graph, part)
            if part.num_blocks > target:
                part, state = merge_blocks(graph, part, state, target, config,
                                           merge_rng)
        else:
            _, start_key = max((v[2], k) for k, v in cache.items())
            part = _split_to(Partition(cache[start_key][1].copy()),
                             target, split_rng)
            state = recompute_block_matrix(graph, part)
        part, state, H, sweeps = run_mcmc(graph, part, state, config,
                                          sweep_base=sweep_counter[0],
                                          sweep_cap=config.probe_sweeps)
        sweep_counter[0] += sweeps
        compacted = part.compact()
        if compacted.num_blocks != state.num_blocks:
            state = recompute_block_matrix(graph, compacted)
            H = description_length(state, N, E)
        entry = [H, compacted.assignment.copy(), compacted.num_blocks]
        if target not in cache or cache[target][0] > H:
            cache[target] = entry
        return cache[target][0]

    # expansion phase: an under-split start must be able to climb
    cur = B0
    while cur < N:
        up = min(N, cur * 2)
        if up == cur:
            break
        run_at(up)
        if cache[up][0] < cache[cur][0]:
            cur = up
        else:
            break

    # bracket phase: halve B until H turns upward
    probes = [cur]
    bracket = None
    while cur > 1:
        nxt = int(cur * config.merge_reduction_rate)
        if nxt >= cur:
            nxt = cur - 1
        if nxt < 1:
            nxt = 1
        run_at(nxt)
        probes.append(nxt)
        if cache[probes[-1]][0] > cache[probes[-2]][0]:
            hi = probes[-3] if len(probes) >= 3 else probes[-2]
            bracket = (probes[-1], probes[-2], hi)
            break
        cur = nxt

    if bracket is not None:
        lo, mid, hi = bracket
        while hi - lo > 2:
            if mid == hi or mid == lo:
                x = (lo + hi) // 2
            elif (hi - mid) >= (mid - lo):
                x = mid + max(1, int(round((hi - mid) * (1.0 - INVPHI))))
            else:
                x = mid - max(1, int(round((mid - lo) * (1.0 - INVPHI))))
            x = min(max(x, lo + 1), hi - 1)
            if x == mid:
                x = x + 1 if (hi - mid) >= (mid - lo) else x - 1
                if x <= lo or x >= hi:
                    break
            run_at(mid)
            Hx = run_at(x)
            if Hx < cache[mid][0]:
                if x > mid:
                    lo, mid = mid, x
                else:
                    hi, mid = mid, x
            else:
                if x > mid:
                    hi = x
                else:
                    lo = x
        for bb in range(lo, hi + 1):
            if bb >= 1:
                run_at(bb)

    # polish the winner to full convergence (probes run on a sweep budget)
    best = min(cache.values(), key=lambda v: (v[0], v[2]))
    part = Partition(best[1].copy())
    state = recompute_block_matrix(graph, part)
    part, state, H, _ = run_mcmc(graph, part, state, config,
                                 sweep_base=sweep_counter[0])
    compacted = part.compact()
    if compacted.num_blocks != state.num_blocks:
        state = recompute_block_matrix(graph, compacted)
        H = description_length(state, N, E)
    if H <= best[0]:
        return compacted, compacted.num_blocks, H
    return Partition(best[1]), best[2], best[0]


# ---------------------------------------------------------------------------
# matrix-form batch sweep

def batch_outcomes(graph, assignment, state, config, uniforms):
    """Vectorized snapshot evaluation of all nodes in matrix form.

    Proposals use matrix products M = Gamma^T A Gamma, dM_row = A Gamma and
    dM_col = A^T Gamma; per-proposal edge counts are restricted to the two
    affected rows/columns. Returns arrays keyed per node.
    """
    from scipy.sparse import csr_matrix

    N = graph.num_nodes
    B = state.num_blocks
    beta = config.beta
    b = assignment
    M = state.to_dense()
    d_out = state.d_out
    d_in = state.d_in
    d = state.d
    A = graph.adjacency_csr()
    gamma = csr_matrix((np.ones(N, dtype=np.int64), (np.arange(N), b)),
                       shape=(N, B))
    K_out = np.asarray((A @ gamma).todense(), dtype=np.int64)
    K_in = np.asarray((A.T @ gamma).todense(), dtype=np.int64)
    selfw = np.fromiter((graph.out_adj[i].get(i, 0) for i in range(N)),
                        dtype=np.int64, count=N)
    comb_cum = np.cumsum(M + M.T, axis=1)

    proposal = np.full(N, -1, dtype=np.int64)
    dS = np.zeros(N)
    p_fwd = np.zeros(N)
    p_bwd = np.zeros(N)
    p_acc = np.zeros(N)
    accept = np.zeros(N, dtype=bool)
    evaluated = np.zeros(N, dtype=bool)

    for i in range(N):
        if graph.degree[i] == 0:
            continue
        r = int(b[i])
        j = graph.draw_neighbor(i, uniforms[i, 0])
        u_blk = int(b[j])
        du = int(d[u_blk])
        if uniforms[i, 1] <= B / (du + B):
            s = min(int(uniforms[i, 2] * B), B - 1)
        else:
            s = int(np.searchsorted(comb_cum[u_blk],
                                    uniforms[i, 2] * du, side="right"))
            s = min(s, B - 1)
        proposal[i] = s
        if s == r:
            continue
        evaluated[i] = True
        ko = K_out[i]
        ki = K_in[i]
        w_self = int(selfw[i])
        out_a = ko.copy()
        in_a = ki.copy()
        if w_self:
            out_a[r] -= w_self
            out_a[s] += w_self
            in_a[r] -= w_self
            in_a[s] += w_self
        row_r_a = M[r] - ko
        row_s_a = M[s] + out_a
        col_r_a = M[:, r] - ki
        col_s_a = M[:, s] + in_a
        # cross entries appear in both a row and a column of the window
        row_r_a[r] += -ki[r] + w_self
        row_r_a[s] += in_a[r]
        row_s_a[r] += -ki[s]
        row_s_a[s] += in_a[s] - w_self
        col_r_a[r] += -ko[r] + w_self
        col_r_a[s] += out_a[r]
        col_s_a[r] += -ko[s]
        col_s_a[s] += out_a[s] - w_self
        ki_out = int(ko.sum())
        ki_in = int(ki.sum())
        dor_a = int(d_out[r]) - ki_out
        dos_a = int(d_out[s]) + ki_out
        dir_a = int(d_in[r]) - ki_in
        dis_a = int(d_in[s]) + ki_in

        # collapsed-form dS over changed cells; identical before/after values
        # cancel exactly, matching the per-node evaluation's sparse formula
        dSi = 0.0
        for before, after, is_col in ((M[r], row_r_a, False),
                                      (M[s], row_s_a, False),
                                      (M[:, r], col_r_a, True),
                                      (M[:, s], col_s_a, True)):
            chg = np.nonzero(before != after)[0]
            if is_col:
                chg = chg[(chg != r) & (chg != s)]
            for t in chg:
                w_b = int(before[t])
                w_a = int(after[t])
                if w_b:
                    dSi += w_b * math.log(w_b)
                if w_a:
                    dSi -= w_a * math.log(w_a)
        for db, da in ((int(d_out[r]), dor_a), (int(d_out[s]), dos_a),
                       (int(d_in[r]), dir_a), (int(d_in[s]), dis_a)):
            if db:
                dSi -= db * math.log(db)
            if da:
                dSi += da * math.log(da)
        dS[i] = dSi

        K = (ko + ki).astype(np.float64)
        pf = float(np.sum(K * (M[:, s] + M[s, :] + 1.0) / (d + B)))
        d_a = d.astype(np.float64).copy()
        d_a[r] = dor_a + dir_a
        d_a[s] = dos_a + dis_a
        pb = float(np.sum(K * (col_r_a + row_r_a + 1.0) / (d_a + B)))
        p_fwd[i] = pf
        p_bwd[i] = pb
        if pf <= 0.0:
            pa = 1.0 if dS[i] < 0 else 0.0
        else:
            try:
                pa = min(math.exp(-beta * dS[i]) * pb / pf, 1.0)
            except OverflowError:
                pa = 1.0
        p_acc[i] = pa
        accept[i] = uniforms[i, 3] <= pa
    return {"proposal": proposal, "delta_S": dS, "p_forward": p_fwd,
            "p_backward": p_bwd, "p_accept": p_acc, "accept": accept,
            "evaluated": evaluated}


def _batch_apply(graph, partition, state, config, uniforms):
    res = batch_outcomes(graph, partition.assignment, state, config, uniforms)
    mask = res["accept"]
    partition.assignment[mask] = res["proposal"][mask]
    state = recompute_block_matrix(graph, partition)
    return partition, state, int(mask.sum())


def batch_sweep(graph, partition, state, config, sweep_index=0, uniforms=None):
    """One matrix-form snapshot sweep; accepted moves applied at the barrier."""
    if uniforms is None:
        uniforms = _sweep_uniforms(config.rng_seed, sweep_index,
                                   graph.num_nodes)
    partition, state, _ = _batch_apply(graph, partition, state, config,
                                       uniforms)
    return partition, state


# ---------------------------------------------------------------------------
# warm starts for streaming

def warm_start(previous, graph_now, carried=None):
    """Carry a previous partition onto a grown graph.

    carried[k] is the node in graph_now holding previous.assignment[k]
    (default: the first len(previous) nodes). Carried nodes keep their
    blocks; each new node, in id order, takes the block of its
    highest-weight already-assigned neighbor (lowest id wins ties), or a
    fresh singleton block if it has none.
    """
    n_prev = len(previous.assignment)
    N = graph_now.num_nodes
    if n_prev > N:
        raise ValueError("previous partition covers more nodes than the graph")
    if carried is None:
        carried = np.arange(n_prev)
    a = np.full(N, -1, dtype=np.int64)
    a[np.asarray(carried, dtype=np.int64)] = previous.assignment
    next_block = previous.num_blocks
    for i in range(N):
        if a[i] >= 0:
            continue
        comb = {}
        for j, w in graph_now.out_adj[i].items():
            comb[j] = comb.get(j, 0) + w
        for j, w in graph_now.in_adj[i].items():
            comb[j] = comb.get(j, 0) + w
        best_j = -1
        best_w = 0
        for j in sorted(comb):
            if j != i and a[j] >= 0 and comb[j] > best_w:
                best_j = j
                best_w = comb[j]
        if best_j >= 0:
            a[i] = a[best_j]
        else:
            a[i] = next_block
            next_block += 1
    part = Partition(a, next_block)
    return part, recompute_block_matrix(graph_now, part)


def split_partition(partition, rng, factor=2):
    """Randomly split each block into up to `factor` parts.

    Gives a streaming restart headroom to probe block counts above the
    previous stage's optimum (merges can only reduce B).
    """
    sub = rng.integers(0, factor, size=len(partition.assignment))
    return Partition(partition.assignment * factor + sub).compact()
