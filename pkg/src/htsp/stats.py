"""Vectorized Monte Carlo harness and the statistic suites.

Trials are embarrassingly parallel, so the engine draws whole chunks of
piece choices at once: each compiled piece distribution is a categorical
lookup, even-at-last flags and cut parities are boolean matrix work, and
the join arithmetic runs in integers after scaling every charge quantum
by a common denominator (so feasibility checks are exact, not float).
Chunk randomness derives from (seed, chunk index), which makes any
(instance, seed, config) run byte-reproducible regardless of chunking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import HalfIntegralInstance
from .hierarchy import build_hierarchy, min_cuts_via_hierarchy
from .join import (
    ReductionParams,
    build_charge_sites,
    classify,
    coin_groups,
    coin_rates,
    exact_eal_probabilities,
    min_cost_perfect_matching,
)
from .pipeline import (
    CyclePieceSampler,
    SamplerParams,
    build_piece_samplers,
)

DELTA_STAR = Fraction(6866, 100000) / 81  # decrease floor at the default mix


# ---------------------------------------------------------------------------
# report model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatRow:
    suite: str
    name: str
    sampler: str
    context: str
    kind: str  # 'lower' | 'two-sided' | 'upper' | 'exact'
    bound: float
    estimate: float
    stderr: float
    trials: int
    passed: bool

    @property
    def slack(self) -> float:
        if self.kind == "lower":
            return self.estimate - self.bound
        if self.kind == "upper":
            return self.bound - self.estimate
        return abs(self.estimate - self.bound)


@dataclass
class StatReport:
    rows: list[StatRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def extend(self, rows: Iterable[StatRow]) -> None:
        self.rows.extend(rows)

    def to_csv(self) -> str:
        head = "suite,name,sampler,context,kind,bound,estimate,stderr,trials,passed,slack"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.suite},{r.name},{r.sampler},{r.context},{r.kind},"
                f"{r.bound:.10g},{r.estimate:.10g},{r.stderr:.10g},"
                f"{r.trials},{int(r.passed)},{r.slack:.10g}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "meta": self.meta,
                "rows": [
                    {
                        "suite": r.suite,
                        "name": r.name,
                        "sampler": r.sampler,
                        "context": r.context,
                        "kind": r.kind,
                        "bound": r.bound,
                        "estimate": r.estimate,
                        "stderr": r.stderr,
                        "trials": r.trials,
                        "passed": r.passed,
                        "slack": r.slack,
                    }
                    for r in self.rows
                ],
            },
            indent=2,
        )


def binom_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 1e-12) / max(n, 1))


def lower_row(suite, name, sampler, context, bound, count, n) -> StatRow:
    est = count / n
    sd = binom_sigma(est, n)
    return StatRow(suite, name, sampler, context, "lower", float(bound), est, sd,
                   n, est >= float(bound) - 3 * sd)


def twosided_row(suite, name, sampler, context, target, count, n) -> StatRow:
    est = count / n
    sd = binom_sigma(est, n)
    return StatRow(suite, name, sampler, context, "two-sided", float(target), est,
                   sd, n, abs(est - float(target)) <= 3 * sd)


# ---------------------------------------------------------------------------
# the batch engine
# ---------------------------------------------------------------------------

def _lcm_denominator(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d


@dataclass
class BatchStats:
    trials: int = 0
    aborted: int = 0
    incl: Optional[np.ndarray] = None
    eal: Optional[np.ndarray] = None
    reduced: Optional[np.ndarray] = None
    z_sum: Optional[list] = None
    z_sumsq: Optional[list] = None
    zc_sum: int = 0
    zc_sumsq: float = 0.0
    tree_sum: int = 0
    tree_sumsq: float = 0.0
    total_sum: int = 0
    total_sumsq: float = 0.0
    feasibility_failures: int = 0
    verified: bool = False
    integral: bool = False
    sym_counts: dict = field(default_factory=dict)
    z_denom: int = 1
    cost_denom: int = 1


class BatchEngine:
    """Reusable vectorized trial runner for one instance and one config."""

    def __init__(
        self,
        inst: HalfIntegralInstance,
        sampler_params: Optional[SamplerParams] = None,
        reduction_params: Optional[ReductionParams] = None,
        *,
        calibration: str = "exact",
        calibration_trials: int = 100_000,
        calibration_seed: int = 987_654_321,
    ):
        self.inst = inst
        self.sp = sampler_params or SamplerParams()
        self.rp = reduction_params or ReductionParams.default(self.sp.effective_lambda)
        self.h = build_hierarchy(inst)
        self.samplers = build_piece_samplers(self.h, self.sp)
        self.classes = classify(self.h)
        self.m = inst.graph.m
        self.n = inst.graph.n
        self._build_sampling_plan()
        self._build_eal_plan()
        self._build_cut_masks()
        self._build_costs()
        if calibration == "exact":
            self.eal_probability = exact_eal_probabilities(
                self.h, self.classes, self.samplers
            )
        elif calibration == "mc":
            self.eal_probability = self._mc_calibration(
                calibration_trials, calibration_seed
            )
        else:
            raise ValueError(f"unknown calibration {calibration!r}")
        self.rates = coin_rates(self.classes, self.rp, self.eal_probability)
        self._build_join_plan()
        self._metric_int: Optional[np.ndarray] = None
        self._join_cache: dict[bytes, int] = {}
        g = inst.graph
        self._inc_full = np.zeros((self.m, self.n), dtype=np.uint8)
        for eid, (u, v) in zip(g.edge_ids, g.endpoints):
            self._inc_full[eid, u] = 1
            self._inc_full[eid, v] = 1

    # -- plans ------------------------------------------------------------

    def _build_sampling_plan(self) -> None:
        self.enum_plan = []
        self.cycle_plan = []
        for nid in sorted(self.samplers):
            s = self.samplers[nid]
            if isinstance(s, CyclePieceSampler):
                pairs = np.array(s.pairs, dtype=np.int64)
                self.cycle_plan.append((nid, pairs))
            else:
                cols = sorted({e for t in s.trees for e in t})
                col_of = {e: i for i, e in enumerate(cols)}
                mat = np.zeros((len(s.trees), len(cols)), dtype=bool)
                for i, t in enumerate(s.trees):
                    for e in t:
                        mat[i, col_of[e]] = True
                self.enum_plan.append(
                    (nid, np.array(cols, dtype=np.int64), mat, np.cumsum(s.probs))
                )

    def _build_eal_plan(self) -> None:
        self.eal_degree = []
        self.eal_cycle = []
        for nd in self.h.non_leaves():
            piece = nd.piece
            g = piece.graph
            if nd.kind == "cycle":
                ext_pairs = [tuple(p) for p in piece.external_pairs()]
                settled = [
                    e for e in g.edge_ids
                    if self.classes[e].settled == nd.node_id
                ]
                self.eal_cycle.append(
                    (np.array(ext_pairs, dtype=np.int64),
                     np.array(settled, dtype=np.int64))
                )
            else:
                cols = sorted(g.edge_ids)
                col_of = {e: i for i, e in enumerate(cols)}
                inc = np.zeros((len(cols), g.n), dtype=np.uint8)
                for e, (u, v) in zip(g.edge_ids, g.endpoints):
                    inc[col_of[e], u] = 1
                    inc[col_of[e], v] = 1
                settled = [
                    (e, *g.endpoints[g.edge_index(e)])
                    for e in piece.internal_edge_ids
                ]
                self.eal_degree.append(
                    (np.array(cols, dtype=np.int64), inc, settled)
                )

    def _build_cut_masks(self) -> None:
        self.min_cuts = min_cuts_via_hierarchy(self.h)
        self.cut_cols = [
            np.array(sorted(c.edge_ids), dtype=np.int64) for c in self.min_cuts
        ]

    def _build_costs(self) -> None:
        self.cost_denom = _lcm_denominator(self.inst.costs)
        self.cost_int = np.array(
            [int(c * self.cost_denom) for c in self.inst.costs], dtype=np.int64
        )
        self.lp_cost = self.inst.lp_cost()

    def _build_join_plan(self) -> None:
        degree_sites, pair_sites = build_charge_sites(self.h, self.classes, self.rp)
        quanta = [Fraction(1, 4), Fraction(1, 6)]
        for e, cl in self.classes.items():
            quanta.append(self.rp.amount(cl.kind))
        for site in degree_sites:
            for f, frac in site.targets:
                quanta.append(site.amount * frac)
        for site in pair_sites:
            for grp in site.groups:
                quanta.append(grp.amount / 2)
        self.z_denom = _lcm_denominator(quanta)
        assert self.z_denom < 2 ** 40, "charge denominators blew up"
        D = self.z_denom
        self.amount_int = np.zeros(self.m, dtype=np.int64)
        for e, cl in self.classes.items():
            self.amount_int[e] = int(self.rp.amount(cl.kind) * D)
        self.groups = []
        for grp, members in sorted(coin_groups(self.classes).items()):
            self.groups.append(
                (np.array(members, dtype=np.int64), self.rates[grp])
            )
        self.degree_site_plan = [
            (
                site.source,
                np.array(site.cut_ids, dtype=np.int64),
                [(f, int(site.amount * frac * D)) for f, frac in site.targets],
            )
            for site in degree_sites
        ]
        self.pair_site_plan = [
            (
                site.targets,
                [
                    (
                        int(grp.amount * D) // 2,
                        [(s, np.array(cut, dtype=np.int64)) for s, cut in grp.members],
                    )
                    for grp in site.groups
                ],
            )
            for site in pair_sites
        ]

    # -- calibration --------------------------------------------------------

    def _mc_calibration(self, trials: int, seed: int) -> dict[int, float]:
        counts = np.zeros(self.m, dtype=np.int64)
        done = 0
        chunk = 1 << 14
        idx = 0
        while done < trials:
            n = min(chunk, trials - done)
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(idx,))
            )
            T = self._draw_trees(n, rng)
            counts += self._eal_flags(T).sum(0)
            done += n
            idx += 1
        return {e: counts[e] / trials for e in range(self.m)}

    # -- chunk primitives ----------------------------------------------------

    def _draw_trees(self, n: int, rng: np.random.Generator) -> np.ndarray:
        T = np.zeros((n, self.m), dtype=bool)
        for nid, cols, mat, cdf in self.enum_plan:
            idx = np.searchsorted(cdf, rng.random(n), side="right")
            idx = np.minimum(idx, len(cdf) - 1)
            T[:, cols] = mat[idx]
        for nid, pairs in self.cycle_plan:
            if len(pairs) == 0:
                continue
            pick = rng.random((n, len(pairs))) < 0.5
            T[np.arange(n)[:, None], pairs[:, 0][None, :]] = pick
            T[np.arange(n)[:, None], pairs[:, 1][None, :]] = ~pick
        return T

    def _eal_flags(self, T: np.ndarray) -> np.ndarray:
        n = T.shape[0]
        eal = np.zeros((n, self.m), dtype=bool)
        for cols, inc, settled in self.eal_degree:
            par = (T[:, cols].astype(np.uint8) @ inc) % 2
            for e, u, v in settled:
                eal[:, e] = (par[:, u] == 0) & (par[:, v] == 0)
        for ext_pairs, settled in self.eal_cycle:
            flag = np.ones(n, dtype=bool)
            for a, b in ext_pairs:
                cnt = T[:, a].astype(np.int8) + T[:, b].astype(np.int8)
                flag &= cnt == 1
            eal[:, settled] = flag[:, None]
        return eal

    # -- main loop ------------------------------------------------------------

    def run(
        self,
        trials: int,
        seed: int,
        *,
        chunk: int = 1 << 14,
        join: bool = True,
        verify: bool = False,
        integral: bool = False,
        symmetry_pairs: Sequence[tuple[int, int]] = (),
    ) -> BatchStats:
        st = BatchStats()
        st.incl = np.zeros(self.m, dtype=np.int64)
        st.eal = np.zeros(self.m, dtype=np.int64)
        st.reduced = np.zeros(self.m, dtype=np.int64)
        st.z_sum = [0] * self.m
        st.z_sumsq = [0.0] * self.m
        st.z_denom = self.z_denom
        st.cost_denom = self.cost_denom
        st.verified = verify
        st.integral = integral
        for a, b in symmetry_pairs:
            st.sym_counts[(a, b)] = np.zeros(4, dtype=np.int64)
        done = 0
        idx = 0
        while done < trials:
            n = min(chunk, trials - done)
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(idx,))
            )
            self._run_chunk(n, rng, st, join, verify, integral, symmetry_pairs,
                            first=(idx == 0))
            done += n
            idx += 1
        st.trials = trials
        return st

    def _run_chunk(self, n, rng, st, join, verify, integral, symmetry_pairs, first):
        T = self._draw_trees(n, rng)
        if first:
            counts = T.sum(1)
            assert np.all(counts == self.n), "assembled samples are not trees"
        st.incl += T.sum(0)
        for a, b in symmetry_pairs:
            ta, tb = T[:, a], T[:, b]
            c = st.sym_counts[(a, b)]
            c[0] += int(np.sum(~ta & ~tb))
            c[1] += int(np.sum(~ta & tb))
            c[2] += int(np.sum(ta & ~tb))
            c[3] += int(np.sum(ta & tb))
        if not join:
            return
        eal = self._eal_flags(T)
        st.eal += eal.sum(0)
        reduced = np.zeros((n, self.m), dtype=bool)
        for members, rate in self.groups:
            coin = rng.random(n) < rate
            reduced[:, members] = eal[:, members] & coin[:, None]
        st.reduced += reduced.sum(0)
        D = self.z_denom
        z = np.full((n, self.m), D // 4, dtype=np.int64)
        z -= reduced * self.amount_int[None, :]
        for src, cut_cols, targets in self.degree_site_plan:
            oddc = (T[:, cut_cols].sum(1) % 2).astype(bool)
            active = reduced[:, src] & oddc
            for f, amt in targets:
                z[:, f] += active * amt
        for targets, groups in self.pair_site_plan:
            for half_amt, members in groups:
                act = np.zeros(n, dtype=bool)
                for s, cut_cols in members:
                    act |= reduced[:, s] & (T[:, cut_cols].sum(1) % 2).astype(bool)
                t0, t1 = targets
                z[:, t0] += act * half_amt
                z[:, t1] += act * half_amt
        st.z_sum = [a + int(b) for a, b in zip(st.z_sum, z.sum(0, dtype=np.int64))]
        # squares can overflow int64 when the charge denominator is large;
        # they only feed sigma estimates, so float accumulation suffices
        zf = z / D
        st.z_sumsq = [
            a + float(b) for a, b in zip(st.z_sumsq, (zf * zf).sum(0))
        ]
        zc = z @ self.cost_int
        st.zc_sum += int(zc.sum())
        st.zc_sumsq += float((zc.astype(float) ** 2).sum())
        tree_cost = T.astype(np.int64) @ self.cost_int
        st.tree_sum += int(tree_cost.sum())
        st.tree_sumsq += float((tree_cost.astype(float) ** 2).sum())
        if verify:
            bad = np.zeros(n, dtype=bool)
            bad |= (z < D // 6).any(axis=1)
            for cut_cols in self.cut_cols:
                oddc = (T[:, cut_cols].sum(1) % 2).astype(bool)
                short = z[:, cut_cols].sum(1) < D
                bad |= oddc & short
            st.feasibility_failures += int(bad.sum())
        if integral:
            ij = self._integral_costs(T)
            total = tree_cost + ij
            st.total_sum += int(total.sum())
            st.total_sumsq += float((total.astype(float) ** 2).sum())

    # -- integral joins --------------------------------------------------------

    def _metric(self) -> np.ndarray:
        if self._metric_int is None:
            n = self.n
            INF = np.iinfo(np.int64).max // 4
            d = np.full((n, n), INF, dtype=np.int64)
            np.fill_diagonal(d, 0)
            g = self.inst.graph
            for eid, (u, v) in zip(g.edge_ids, g.endpoints):
                c = self.cost_int[eid]
                if c < d[u, v]:
                    d[u, v] = d[v, u] = c
            for k in range(n):
                d = np.minimum(d, d[:, k][:, None] + d[k, :][None, :])
            self._metric_int = d
        return self._metric_int

    def _integral_costs(self, T: np.ndarray) -> np.ndarray:
        par = (T.astype(np.uint8) @ self._inc_full) % 2
        packed = np.packbits(par, axis=1)
        keys = [row.tobytes() for row in packed]
        d = self._metric()
        if not hasattr(self, "_dp_memo"):
            self._dp_memo = {}
        out = np.empty(T.shape[0], dtype=np.int64)
        for i, key in enumerate(keys):
            cost = self._join_cache.get(key)
            if cost is None:
                odd = [v for v in range(self.n) if par[i, v]]
                c, _ = min_cost_perfect_matching(odd, d, memo=self._dp_memo)
                cost = int(c)
                self._join_cache[key] = cost
            out[i] = cost
        return out


# ---------------------------------------------------------------------------
# derived statistics
# ---------------------------------------------------------------------------

def mean_and_sigma(total: int, sumsq: float, n: int, scale: float) -> tuple[float, float]:
    mean = total / n * scale
    var = max(sumsq / n * scale * scale - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


# ---------------------------------------------------------------------------
# piece-level batch (correlation rows)
# ---------------------------------------------------------------------------

class PieceBatch:
    """Monte Carlo over a single piece's compiled interior-tree mixture."""

    def __init__(self, piece, sampler_params: SamplerParams):
        from .pipeline import DegreePieceSampler, k5_sampler

        if piece.graph.n == 5:
            self.sampler = k5_sampler(piece)
        else:
            self.sampler = DegreePieceSampler(piece, sampler_params).compiled()
        self.piece = piece

    def event_counts(self, events: Sequence, trials: int, seed: int,
                     chunk: int = 1 << 16) -> np.ndarray:
        mat = np.zeros((len(self.sampler.trees), len(events)), dtype=bool)
        for i, t in enumerate(self.sampler.trees):
            for j, pred in enumerate(events):
                mat[i, j] = pred(t)
        cdf = np.cumsum(self.sampler.probs)
        counts = np.zeros(len(events), dtype=np.int64)
        done = 0
        idx = 0
        while done < trials:
            k = min(chunk, trials - done)
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx,)))
            draws = np.minimum(
                np.searchsorted(cdf, rng.random(k), side="right"), len(cdf) - 1
            )
            counts += mat[draws].sum(0)
            done += k
            idx += 1
        return counts


def suite_correlations(piece, sampler: str, trials: int, seed: int,
                       piece_label: str = "piece") -> StatReport:
    """Joint-inclusion lower bounds for every qualifying edge tuple."""
    from .oracle import CORRELATION_BOUNDS, correlation_event_probability, correlation_tuples

    sp = SamplerParams(sampler=sampler)
    batch = PieceBatch(piece, sp)
    bounds = CORRELATION_BOUNDS[sampler]
    tuples = correlation_tuples(piece)
    report = StatReport(meta={"piece": piece_label, "sampler": sampler, "trials": trials})
    events = []
    labels = []
    exacts = []
    for row, tups in tuples.items():
        for tup in tups:
            exact, pred = correlation_event_probability(batch.sampler, piece, row, tup)
            events.append(pred)
            labels.append((row, tup))
            exacts.append(exact)
    counts = batch.event_counts(events, trials, seed)
    for (row, tup), cnt, exact in zip(labels, counts, exacts):
        report.rows.append(
            lower_row("correlations", row, sampler, f"{piece_label}:{tup}",
                      bounds[row], int(cnt), trials)
        )
        report.rows.append(
            StatRow("correlations", row + "/exact", sampler,
                    f"{piece_label}:{tup}", "lower", float(bounds[row]),
                    float(exact), 0.0, 0, float(exact) >= float(bounds[row]) - 1e-12)
        )
    return report


# ---------------------------------------------------------------------------
# instance-level suites
# ---------------------------------------------------------------------------

EAL_TABLE = {
    "mi": {
        "special": Fraction(1, 36),
        "half-special": Fraction(1, 21),
        "other-degree": Fraction(1, 18),
        "k5-degree": Fraction(1, 18),
        "cycle": Fraction(1, 18),
    },
    "maxent": {
        "special": Fraction(128, 6561),
        "half-special": Fraction(4, 27),
        "other-degree": Fraction(1, 12),
        "k5-degree": Fraction(1, 12),
        "cycle": Fraction(1, 12),
    },
}


def eal_bounds_for(sp: SamplerParams, rp: ReductionParams) -> dict[str, Fraction]:
    if sp.sampler in ("mi", "maxent"):
        return EAL_TABLE[sp.sampler]
    return {
        "special": rp.p_special,
        "half-special": rp.p_half_special,
        "other-degree": rp.p_other,
        "k5-degree": rp.p_other,
        "cycle": rp.p_other,
    }


def suite_marginals(engine: BatchEngine, trials: int, seed: int,
                    stats: Optional[BatchStats] = None) -> StatReport:
    """Every edge's inclusion frequency against one half (plus exact rows)."""
    st = stats or engine.run(trials, seed, join=False)
    report = StatReport(meta={"suite": "marginals", "trials": trials})
    for e in range(engine.m):
        report.rows.append(
            twosided_row("marginals", "edge-in-tree", engine.sp.sampler,
                         f"edge:{e}", 0.5, int(st.incl[e]), trials)
        )
    from .oracle import exact_marginals

    exact = exact_marginals(engine.h, engine.samplers, engine.classes)
    for e in range(engine.m):
        val = exact[e]
        is_exact = isinstance(val, Fraction)
        ok = (val == Fraction(1, 2)) if is_exact else abs(val - 0.5) <= 1e-5
        report.rows.append(
            StatRow("marginals", "edge-in-tree/exact", engine.sp.sampler,
                    f"edge:{e}", "exact", 0.5, float(val), 0.0, 0, bool(ok))
        )
    return report


def suite_eal(engine: BatchEngine, trials: int, seed: int,
              stats: Optional[BatchStats] = None) -> StatReport:
    """Even-at-last frequencies per class against the guaranteed table."""
    st = stats or engine.run(trials, seed, join=True)
    bounds = eal_bounds_for(engine.sp, engine.rp)
    report = StatReport(meta={"suite": "eal", "sampler": engine.sp.sampler,
                              "trials": trials})
    by_class: dict[str, list[int]] = {}
    for e, cl in engine.classes.items():
        by_class.setdefault(cl.kind, []).append(e)
    for kind, edges in sorted(by_class.items()):
        worst = min(edges, key=lambda e: st.eal[e])
        report.rows.append(
            lower_row("eal", f"even-at-last/{kind}", engine.sp.sampler,
                      f"worst-edge:{worst}(n={len(edges)})",
                      bounds[kind], int(st.eal[worst]), trials)
        )
    return report


def suite_reduction(engine: BatchEngine, trials: int, seed: int,
                    delta_floor: Optional[float] = None,
                    stats: Optional[BatchStats] = None) -> StatReport:
    """Reduction-rate flattening and per-edge mean net decrease."""
    st = stats or engine.run(trials, seed, join=True)
    rp = engine.rp
    targets = {
        "special": rp.p_special,
        "half-special": rp.p_half_special,
        "other-degree": rp.p_other,
        "k5-degree": rp.p_other,
        "cycle": rp.p_other,
    }
    report = StatReport(meta={"suite": "reduction", "trials": trials})
    for e in range(engine.m):
        kind = engine.classes[e].kind
        report.rows.append(
            twosided_row("reduction", f"reduction-rate/{kind}", engine.sp.sampler,
                         f"edge:{e}", float(targets[kind]), int(st.reduced[e]),
                         trials)
        )
    if delta_floor is not None:
        D = st.z_denom
        for e in range(engine.m):
            mean_z = st.z_sum[e] / trials / D
            var = max(st.z_sumsq[e] / trials - mean_z * mean_z, 0.0)
            sd = math.sqrt(var / trials)
            net = 0.25 - mean_z
            report.rows.append(
                StatRow("reduction", "net-decrease", engine.sp.sampler,
                        f"edge:{e}", "lower", float(delta_floor), net, sd,
                        trials, net >= float(delta_floor) - 3 * sd)
            )
    return report


def suite_cost(engine: BatchEngine, trials: int, seed: int,
               epsilon: float = 0.001695,
               stats: Optional[BatchStats] = None) -> StatReport:
    """Fractional and integral cost bounds plus join feasibility."""
    st = stats or engine.run(trials, seed, join=True, verify=True, integral=True)
    cx = float(engine.lp_cost)
    report = StatReport(meta={"suite": "cost", "trials": trials, "lp_cost": cx})
    zc_mean, zc_sig = mean_and_sigma(
        st.zc_sum, st.zc_sumsq, trials, 1.0 / (st.z_denom * st.cost_denom)
    )
    bound = (0.5 - epsilon) * cx
    report.rows.append(
        StatRow("cost", "fractional-join-cost", engine.sp.sampler, "mean",
                "upper", bound, zc_mean, zc_sig, trials,
                zc_mean <= bound + 3 * zc_sig)
    )
    tot_mean, tot_sig = mean_and_sigma(
        st.total_sum, st.total_sumsq, trials, 1.0 / st.cost_denom
    )
    bound2 = 1.4983 * cx
    report.rows.append(
        StatRow("cost", "tree-plus-join-cost", engine.sp.sampler, "mean",
                "upper", bound2, tot_mean, tot_sig, trials,
                tot_mean <= bound2 + 3 * tot_sig)
    )
    report.rows.append(
        StatRow("cost", "join-feasibility", engine.sp.sampler,
                f"failures:{st.feasibility_failures}", "exact", 0.0,
                float(st.feasibility_failures), 0.0, trials,
                st.feasibility_failures == 0)
    )
    tree_mean, tree_sig = mean_and_sigma(
        st.tree_sum, st.tree_sumsq, trials, 1.0 / st.cost_denom
    )
    report.rows.append(
        StatRow("cost", "tree-cost", engine.sp.sampler, "mean", "two-sided",
                cx, tree_mean, tree_sig, trials,
                abs(tree_mean - cx) <= 3 * tree_sig)
    )
    return report


def suite_symmetry(engine: BatchEngine, trials: int, seed: int,
                   n_pairs: int = 20, pair_seed: int = 20_24) -> StatReport:
    """Swap symmetry of half-marginal indicators for random edge pairs."""
    rng = np.random.default_rng(pair_seed)
    pairs = set()
    while len(pairs) < min(n_pairs, engine.m * (engine.m - 1) // 2):
        a, b = sorted(map(int, rng.choice(engine.m, size=2, replace=False)))
        pairs.add((a, b))
    pairs = sorted(pairs)
    st = engine.run(trials, seed, join=False, symmetry_pairs=pairs)
    report = StatReport(meta={"suite": "symmetry", "trials": trials})
    for (a, b), c in st.sym_counts.items():
        n00, n01, n10, n11 = (int(x) for x in c)
        for name, x, y in (("p00-vs-p11", n00, n11), ("p01-vs-p10", n01, n10)):
            px, py = x / trials, y / trials
            # disjoint outcomes of one multinomial: the covariance term
            # enters the variance of the difference
            sd = math.sqrt(max(px + py - (px - py) ** 2, 1e-12) / trials)
            report.rows.append(
                StatRow("symmetry", name, engine.sp.sampler, f"pair:{a},{b}",
                        "two-sided", 0.0, px - py, sd, trials,
                        abs(px - py) <= 3 * sd)
            )
    return report


def oracle_check(inst: HalfIntegralInstance,
                 sampler_params: Optional[SamplerParams] = None,
                 reduction_params: Optional[ReductionParams] = None) -> StatReport:
    """Exact rows: marginals, even-at-last bounds, flattened reduction
    rates, and per-edge expected net decrease, all without sampling."""
    from . import oracle as orc

    sp = sampler_params or SamplerParams()
    h = build_hierarchy(inst)
    rp = reduction_params or ReductionParams.default(sp.effective_lambda)
    samplers = build_piece_samplers(h, sp)
    classes = classify(h)
    report = StatReport(meta={"suite": "oracle", "sampler": sp.sampler})
    exact = orc.exact_marginals(h, samplers, classes)
    for e in range(inst.graph.m):
        val = exact[e]
        is_exact = isinstance(val, Fraction)
        ok = (val == Fraction(1, 2)) if is_exact else abs(val - 0.5) <= 1e-5
        report.rows.append(
            StatRow("oracle", "marginal" + ("/rational" if is_exact else ""),
                    sp.sampler, f"edge:{e}", "exact", 0.5, float(val), 0.0, 0,
                    bool(ok))
        )
    probs = exact_eal_probabilities(h, classes, samplers)
    bounds = eal_bounds_for(sp, rp)
    for e in range(inst.graph.m):
        kind = classes[e].kind
        report.rows.append(
            StatRow("oracle", f"even-at-last/{kind}", sp.sampler, f"edge:{e}",
                    "exact", float(bounds[kind]), float(probs[e]), 0.0, 0,
                    float(probs[e]) >= float(bounds[kind]) - 1e-12)
        )
    red = orc.exact_reduction_probability(classes, rp, probs)
    for e in range(inst.graph.m):
        target = rp.coin_bound(classes[e].coin_kind)
        val = red[e]
        ok = (val == target) if isinstance(val, Fraction) else abs(val - float(target)) <= 1e-9
        report.rows.append(
            StatRow("oracle", "reduction-rate-flattened", sp.sampler,
                    f"edge:{e}", "exact", float(target), float(val), 0.0, 0,
                    bool(ok))
        )
    net = orc.exact_expected_net_decrease(h, classes, rp, samplers)
    for e in range(inst.graph.m):
        report.rows.append(
            StatRow("oracle", "expected-net-decrease", sp.sampler, f"edge:{e}",
                    "exact", 0.0, float(net[e]), 0.0, 0, float(net[e]) > 0)
        )
    return report


# ---------------------------------------------------------------------------
# experiment configuration and dispatch
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment: an instance source, a sampler, and a suite."""

    instance: Optional[str] = None  # instance file path
    family: Optional[str] = None  # or a generator family name
    k: int = 7
    n: int = 12
    depth: int = 2
    unit_costs: bool = False
    gen_seed: int = 1
    piece: Optional[str] = None  # named piece for the correlation suite
    sampler: str = "mix"
    mix_lambda: float = 0.4715
    trials: int = 100_000
    seed: int = 0
    suite: str = "all"
    calibration: str = "exact"
    delta_floor: Optional[float] = None
    out: Optional[str] = None
    fmt: str = "csv"

    def sampler_params(self) -> SamplerParams:
        return SamplerParams(
            sampler=self.sampler,
            mix_lambda=Fraction(self.mix_lambda).limit_denominator(10 ** 9),
        )


def load_instance(cfg: ExperimentConfig) -> HalfIntegralInstance:
    from . import generators
    from .graph import parse_instance

    if cfg.instance:
        with open(cfg.instance, "r", encoding="utf-8") as fh:
            return parse_instance(fh.read())
    if cfg.family:
        rng = np.random.default_rng(cfg.gen_seed)
        return generators.generate(
            cfg.family, rng, k=cfg.k, n=cfg.n, depth=cfg.depth,
            unit_costs=cfg.unit_costs,
        )
    raise ValueError("config needs an instance path or a generator family")


def run_suite(cfg: ExperimentConfig) -> StatReport:
    """Run the configured statistic suite and return its report."""
    from . import generators

    report = StatReport(meta={
        "suite": cfg.suite, "sampler": cfg.sampler, "trials": cfg.trials,
        "seed": cfg.seed,
    })
    routes = ("mi", "maxent") if cfg.sampler == "mix" else (cfg.sampler,)
    if cfg.suite == "correlations" and cfg.piece:
        piece = generators.standalone_piece(cfg.piece)
        for route in routes:
            sub = suite_correlations(piece, route, cfg.trials, cfg.seed,
                                     piece_label=cfg.piece)
            report.extend(sub.rows)
        return report

    inst = load_instance(cfg)
    sp = cfg.sampler_params()
    engine = BatchEngine(inst, sp, calibration=cfg.calibration)
    suites = (
        ("marginals", "eal", "reduction", "cost", "symmetry")
        if cfg.suite == "all"
        else (cfg.suite,)
    )
    for name in suites:
        if name == "marginals":
            report.extend(suite_marginals(engine, cfg.trials, cfg.seed).rows)
        elif name == "eal":
            report.extend(suite_eal(engine, cfg.trials, cfg.seed).rows)
        elif name == "reduction":
            report.extend(
                suite_reduction(engine, cfg.trials, cfg.seed,
                                delta_floor=cfg.delta_floor).rows
            )
        elif name == "cost":
            report.extend(suite_cost(engine, cfg.trials, cfg.seed).rows)
        elif name == "symmetry":
            report.extend(suite_symmetry(engine, cfg.trials, cfg.seed).rows)
        elif name == "correlations":
            for nd in engine.h.non_leaves():
                if nd.kind != "cycle" and nd.piece.graph.n > 5:
                    for route in routes:
                        sub = suite_correlations(nd.piece, route, cfg.trials,
                                                 cfg.seed,
                                                 piece_label=f"node{nd.node_id}")
                        report.extend(sub.rows)
        else:
            raise ValueError(f"unknown suite {name!r}")
    return report
