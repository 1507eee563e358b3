"""Compile sum-of-ratios instances into block moment SDPs.

Five builders share one assembly engine:

  dense       one pseudo-moment vector per ratio on the full variable set
  signsym     dense plus per-measure sign-symmetry masks (block splits and
              variable restriction to the parity closure)
  cs          per-clique measures with overlap linking equalities
  cs-signsym  cs plus the global sign-symmetry mask
  epigraph    lifted polynomial problem with one shared moment vector

The moment form is assembled once per method; the solver's dual value
certifies the SOS side, so the dual programs are never built separately.
Equality constraints become per-monomial localizing equalities (one row per
distinct monomial sum), and variables are rescaled so that derivable bounds
put every feasible point in the unit box; both the feasible set mapping and
the bound are unchanged by that substitution.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corrsparse import build_cliques
from .errors import BuildError, OrderTooSmallError, SolveError
from .poly import Polynomial, basis, grlex_key, mono_mul
from .problem import SrfoProblem, variable_bounds
from .sdp import PsdBlockData, SolveReport, solve_internal, to_standard_form
from .signsym import (
    SignSymmetryGroup,
    block_partition,
    in_closure,
    sign_symmetries,
    support_sets,
)

METHODS = ("dense", "signsym", "cs", "cs-signsym", "epigraph")


@dataclass(frozen=True)
class RelaxationSpec:
    method: str
    order: int
    ratio_order: tuple | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise BuildError(f"unknown method {self.method!r}")


class QuotientReducer:
    """Rewrite moments modulo diagonal-quadric equality constraints.

    A constraint c0 - sum_v a_v x_v^2 = 0 lets the squared pivot variable
    (the largest index in the constraint) be substituted away:
    x_p^2 = c0/a_p - sum (a_v/a_p) x_v^2.  Measures supported on the variety
    satisfy the induced moment identities exactly, and each substitution is
    one of the localizing equality rows, so eliminating the reducible
    moments leaves the relaxation value unchanged while restoring a
    strictly feasible moment block (the full basis is linearly dependent on
    the variety, which otherwise kills the interior).
    """

    def __init__(self, nvars):
        self.nvars = nvars
        self.relations = {}
        self._pivots_desc = []
        self._memo = {}

    def try_add(self, poly):
        """Absorb a diagonal-quadric equality; None if unusable or cyclic."""
        from .problem import diag_quadratic_pattern

        pat = diag_quadratic_pattern(poly)
        if pat is None:
            return None
        c0, coefs = pat
        pivot = None
        for v in sorted(coefs, reverse=True):
            if v not in self.relations:
                pivot = v
                break
        if pivot is None:
            return None
        ap = coefs[pivot]
        terms = [((0,) * self.nvars, c0 / ap)]
        for v, a in coefs.items():
            if v != pivot:
                mono = tuple(2 if u == v else 0 for u in range(self.nvars))
                terms.append((mono, -a / ap))
        self.relations[pivot] = tuple(terms)
        if self._cyclic():
            del self.relations[pivot]
            return None
        self._pivots_desc = sorted(self.relations, reverse=True)
        self._memo.clear()
        return pivot

    def _cyclic(self):
        deps = {
            p: {v for mono, _ in rel for v, e in enumerate(mono)
                if e and v in self.relations}
            for p, rel in self.relations.items()
        }
        seen = {}

        def visit(p):
            state = seen.get(p)
            if state == 1:
                return True
            if state == 2:
                return False
            seen[p] = 1
            if any(visit(q) for q in deps[p]):
                return True
            seen[p] = 2
            return False

        return any(visit(p) for p in deps)

    def is_kept(self, mono):
        return all(mono[p] < 2 for p in self.relations)

    def reduce(self, mono):
        """Expansion of a moment into kept-basis moments."""
        if not self.relations:
            return ((mono, 1.0),)
        hit = self._memo.get(mono)
        if hit is not None:
            return hit
        pivot = next((p for p in self._pivots_desc if mono[p] >= 2), None)
        if pivot is None:
            out = ((mono, 1.0),)
        else:
            base = tuple(
                e - 2 if v == pivot else e for v, e in enumerate(mono)
            )
            acc = {}
            for rm, rc in self.relations[pivot]:
                for m2, c2 in self.reduce(mono_mul(base, rm)):
                    s = acc.get(m2, 0.0) + rc * c2
                    if s == 0.0:
                        acc.pop(m2, None)
                    else:
                        acc[m2] = s
            out = tuple(sorted(acc.items(), key=lambda kv: grlex_key(kv[0])))
        self._memo[mono] = out
        return out


@dataclass
class MeasureLayout:
    label: str
    var_indices: tuple
    monomials: tuple
    offset: int
    index: dict
    q_scaled: Polynomial | None = None
    reducer: QuotientReducer | None = None

    def global_id(self, mono):
        return self.index[mono]

    def expand(self, mono):
        if self.reducer is None:
            return ((mono, 1.0),)
        return self.reducer.reduce(mono)

    def __len__(self):
        return len(self.monomials)


class RelaxationSdp:
    """Block SDP produced by a builder, plus the layout to read moments back."""

    def __init__(self, method, order, d_min, problem, var_scale):
        self.method = method
        self.order = order
        self.d_min = d_min
        self.problem = problem
        self.var_scale = np.asarray(var_scale, dtype=float)
        self.measures = []
        self.blocks = []
        self.block_measure = []
        self.block_kind = []
        self.eq_rows = []
        self.eq_keys = []
        self.objective = None
        self.num_decision = 0
        self.maximize = problem.maximize

    def add_measure(self, layout):
        self.measures.append(layout)
        self.num_decision += len(layout.monomials)

    def add_block(self, block, measure, kind):
        self.blocks.append(block)
        self.block_measure.append(measure)
        self.block_kind.append(kind)

    def add_eq(self, cols, vals, rhs, key):
        self.eq_rows.append((tuple(cols), tuple(vals), float(rhs)))
        self.eq_keys.append(key)

    def block_size_histogram(self):
        return dict(sorted(Counter(b.size for b in self.blocks).items()))

    def moment_matrix(self, report, measure, order):
        """Masked moment matrix of one measure at a given order."""
        lay = self.measures[measure]
        mb = basis(self.problem_extended_nvars(), lay.var_indices, order)
        M = np.zeros((len(mb), len(mb)))
        y = report.y
        for a, beta in enumerate(mb):
            for b in range(a, len(mb)):
                val = 0.0
                known = True
                for m2, c2 in lay.expand(mono_mul(beta, mb[b])):
                    gid = lay.index.get(m2)
                    if gid is None:
                        known = False
                        break
                    val += c2 * y[gid]
                if known:
                    M[a, b] = M[b, a] = val
        return M

    def problem_extended_nvars(self):
        return len(self.var_scale)


def _half_deg(poly):
    return (poly.degree() + 1) // 2


def min_order(prob, method="dense", cs=None):
    """Smallest admissible relaxation order for a method on a problem."""
    if method == "epigraph":
        degs = [1]
        for p, q in prob.ratios:
            degs.append((max(p.degree(), q.degree() + 1) + 1) // 2)
        for con in prob.constraints:
            degs.append(_half_deg(con.poly))
        return max(degs)
    degs = []
    for p, q in prob.ratios:
        degs.append(_half_deg(p))
        degs.append(_half_deg(q))
    for con in prob.constraints:
        degs.append(_half_deg(con.poly))
    return max(degs) if degs else 1


def _scale_factors(prob):
    bounds = variable_bounds(prob)
    return np.array([math.sqrt(b) if b is not None else 1.0 for b in bounds])


def _anchor_point(nvars, scaled_cons):
    """Deterministic near-feasible point in the scaled unit box.

    Used only to normalize each ratio (divide p and q by q(anchor)), which
    keeps measure masses and dual multipliers near unit scale.  Starts from
    a uniform interior point and projects onto any diagonal-quadric
    equalities.
    """
    from .problem import diag_quadratic_pattern

    u = np.full(nvars, 0.5)
    votes = {}
    for g, is_eq, _ in scaled_cons:
        if not is_eq:
            continue
        pat = diag_quadratic_pattern(g)
        if pat is None:
            continue
        c0, coefs = pat
        # constant-coordinate solution of the sphere; symmetric, so chained
        # instances keep their symmetry in the normalization
        t = math.sqrt(c0 / sum(coefs.values()))
        for v in coefs:
            votes.setdefault(v, []).append(t)
    for v, ts in votes.items():
        u[v] = sum(ts) / len(ts)
    return u


@dataclass
class _Plan:
    label: str
    vars: tuple
    p: Polynomial
    q: Polynomial
    cons: list            # (g_scaled, equality, name)
    group: SignSymmetryGroup | None
    reducer: QuotientReducer | None = None

    def keeps(self, mono):
        if self.group is not None and not in_closure(self.group, mono):
            return False
        return self.reducer is None or self.reducer.is_kept(mono)

    def expand(self, mono):
        if self.reducer is None:
            return ((mono, 1.0),)
        return self.reducer.reduce(mono)


def _block_basis(plan, nvars, order):
    """Block index basis: quotient representatives only.

    Dropping reducible monomials is an exact congruence (the full matrix is
    T M~ T' with T of full column rank) and restores a strictly feasible
    moment block, which the full basis never has on an equality variety.
    """
    full = basis(nvars, plan.vars, order)
    if plan.reducer is None:
        return list(full)
    return [m for m in full if plan.reducer.is_kept(m)]


def _emit_measure_blocks(rsdp, mi, plan, k, nvars):
    lay = rsdp.measures[mi]
    mbasis = _block_basis(plan, nvars, k)
    classes = (
        block_partition(plan.group, mbasis).classes
        if plan.group is not None
        else (tuple(range(len(mbasis))),)
    )
    for ci, cls in enumerate(classes):
        rows, cols, vids, coefs = [], [], [], []
        for a in range(len(cls)):
            beta = mbasis[cls[a]]
            for b in range(a, len(cls)):
                mono = mono_mul(beta, mbasis[cls[b]])
                for m2, c2 in plan.expand(mono):
                    rows.append(a)
                    cols.append(b)
                    vids.append(lay.index[m2])
                    coefs.append(c2)
        rsdp.add_block(
            _psd_block(f"{plan.label}:moment:{ci}", len(cls), rows, cols, vids, coefs),
            mi,
            "moment",
        )
    for g, is_eq, gname in plan.cons:
        dg = _half_deg(g)
        if k < dg:
            raise OrderTooSmallError(k, dg)
        sub = _block_basis(plan, nvars, k - dg)
        if is_eq:
            for sigma in _block_basis(plan, nvars, 2 * (k - dg)):
                if plan.group is not None and not in_closure(plan.group, sigma):
                    continue
                acc = {}
                for alpha, ca in g.sorted_terms():
                    for m2, c2 in plan.expand(mono_mul(alpha, sigma)):
                        gid = lay.index[m2]
                        acc[gid] = acc.get(gid, 0.0) + ca * c2
                cols_ = sorted(acc)
                vals_ = [acc[gid] for gid in cols_]
                if any(v != 0.0 for v in vals_):
                    rsdp.add_eq(
                        cols_, vals_, 0.0, ("loc-eq", plan.label, gname, sigma)
                    )
        else:
            classes = (
                block_partition(plan.group, sub).classes
                if plan.group is not None
                else (tuple(range(len(sub))),)
            )
            for ci, cls in enumerate(classes):
                rows, cols, vids, coefs = [], [], [], []
                for a in range(len(cls)):
                    beta = sub[cls[a]]
                    for b in range(a, len(cls)):
                        gamma = sub[cls[b]]
                        base = mono_mul(beta, gamma)
                        for alpha, ca in g.sorted_terms():
                            for m2, c2 in plan.expand(mono_mul(alpha, base)):
                                rows.append(a)
                                cols.append(b)
                                vids.append(lay.index[m2])
                                coefs.append(ca * c2)
                rsdp.add_block(
                    _psd_block(
                        f"{plan.label}:loc[{gname}]:{ci}",
                        len(cls), rows, cols, vids, coefs,
                    ),
                    mi,
                    "localizing",
                )


def _psd_block(label, size, rows, cols, vids, coefs):
    return PsdBlockData(
        label=label,
        size=size,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        varids=np.asarray(vids, dtype=np.int64),
        coefs=np.asarray(coefs, dtype=float),
        const_rows=np.zeros(0, dtype=np.int64),
        const_cols=np.zeros(0, dtype=np.int64),
        const_vals=np.zeros(0),
    )


def _riesz_cols(lay, q, alpha):
    """Columns and values of L_y(x^alpha * q) in one measure's layout."""
    acc = {}
    for delta, cq in q.sorted_terms():
        for m2, c2 in lay.expand(mono_mul(alpha, delta)):
            gid = lay.index[m2]
            s = acc.get(gid, 0.0) + cq * c2
            acc[gid] = s
    cols = sorted(acc)
    return cols, [acc[gid] for gid in cols]


def _assemble_ratio_sdp(prob, k, plans, linking_pairs, normalize_all, method,
                        mass_norm="anchor"):
    """Shared engine for the four ratio-indexed methods.

    `linking_pairs` yields (i, j, alphas): rows L_{y_i}(x^a q_i) =
    L_{y_j}(x^a q_j).  Normalization is either every measure or the first.
    """
    n = prob.nvars
    tau = _scale_factors(prob)
    d_min = min_order(prob, "dense")
    if k < d_min:
        raise OrderTooSmallError(k, d_min)
    rsdp = RelaxationSdp(method, k, d_min, prob, tau)

    scaled_plans = []
    for plan in plans:
        p = plan.p.rescale_vars(tau)
        q = plan.q.rescale_vars(tau)
        cons = [(g.rescale_vars(tau), e, nm) for g, e, nm in plan.cons]
        # p/q is invariant under joint positive scaling: "anchor" divides by
        # the denominator's value at a near-feasible point (keeps measure
        # masses near one), "coef" by the largest coefficient (keeps row
        # scales near one); degenerate instances can prefer either, so the
        # driver may try both
        kappa = None
        if mass_norm == "anchor":
            anchor = _anchor_point(n, cons)
            qa = q.evaluate(anchor)
            if abs(qa) > 1e-8 * max(abs(cq) for cq in q.terms.values()):
                kappa = 1.0 / abs(qa)
        elif mass_norm == "coef":
            kappa = 1.0 / max(abs(cq) for cq in q.terms.values())
        if kappa is not None:
            p = p * kappa
            q = q * kappa
        # absorb diagonal-quadric equalities into the measure's quotient
        # basis; anything else stays as localizing equality rows
        reducer = QuotientReducer(n)
        kept_cons = []
        for g, e, nm in cons:
            if e and reducer.try_add(g) is not None:
                continue
            kept_cons.append((g, e, nm))
        if not reducer.relations:
            reducer = None
        scaled_plans.append(
            _Plan(plan.label, plan.vars, p, q, kept_cons, plan.group, reducer)
        )

    for plan in scaled_plans:
        monos = [m for m in basis(n, plan.vars, 2 * k) if plan.keeps(m)]
        lay = MeasureLayout(
            label=plan.label,
            var_indices=plan.vars,
            monomials=tuple(monos),
            offset=rsdp.num_decision,
            index={},
            q_scaled=plan.q,
            reducer=plan.reducer,
        )
        lay.index = {m: lay.offset + i for i, m in enumerate(monos)}
        rsdp.add_measure(lay)

    obj = np.zeros(rsdp.num_decision)
    for mi, plan in enumerate(scaled_plans):
        lay = rsdp.measures[mi]
        for mono, c in plan.p.sorted_terms():
            for m2, c2 in plan.expand(mono):
                obj[lay.index[m2]] += c * c2
    rsdp.objective = obj

    for mi, plan in enumerate(scaled_plans):
        _emit_measure_blocks(rsdp, mi, plan, k, n)

    if normalize_all:
        targets = range(len(scaled_plans))
    else:
        targets = (0,)
    for mi in targets:
        lay = rsdp.measures[mi]
        cols, vals = _riesz_cols(lay, scaled_plans[mi].q, (0,) * n)
        rsdp.add_eq(cols, vals, 1.0, ("norm", mi))

    for i, j, alphas in linking_pairs:
        li, lj = rsdp.measures[i], rsdp.measures[j]
        qi, qj = scaled_plans[i].q, scaled_plans[j].q
        for alpha in alphas:
            ci, vi = _riesz_cols(li, qi, alpha)
            cj, vj = _riesz_cols(lj, qj, alpha)
            rsdp.add_eq(
                ci + cj, vi + [-v for v in vj], 0.0, ("link", i, j, alpha)
            )
    return rsdp


def _ordered_ratios(prob, ratio_order):
    N = prob.num_ratios
    order = list(ratio_order) if ratio_order is not None else list(range(N))
    if sorted(order) != list(range(N)):
        raise BuildError(f"ratio_order {order} is not a permutation of 0..{N - 1}")
    sign = -1.0 if prob.maximize else 1.0
    return [(sign * prob.ratios[i][0], prob.ratios[i][1]) for i in order], order


def build_dense(prob, k, ratio_order=None, mass_norm="anchor"):
    """Full moment relaxation: one measure per ratio on all variables."""
    ratios, _ = _ordered_ratios(prob, ratio_order)
    n = prob.nvars
    all_vars = tuple(range(n))
    cons = [(c.poly, c.equality, f"g{j + 1}") for j, c in enumerate(prob.constraints)]
    plans = [
        _Plan(f"m{i + 1}", all_vars, p, q, list(cons), None)
        for i, (p, q) in enumerate(ratios)
    ]
    q0_deg = ratios[0][1].degree()
    linking = []
    for i in range(1, len(ratios)):
        trunc = 2 * k - max(q0_deg, ratios[i][1].degree())
        alphas = list(basis(n, all_vars, trunc)) if trunc >= 0 else []
        linking.append((i, 0, alphas))
    return _assemble_ratio_sdp(prob, k, plans, linking, False, "dense",
                               mass_norm=mass_norm)


def build_signsym(prob, k, ratio_order=None, mass_norm="anchor"):
    """Dense relaxation with per-measure sign-symmetry block reduction."""
    ratios, order = _ordered_ratios(prob, ratio_order)
    n = prob.nvars
    all_vars = tuple(range(n))
    supports = support_sets(prob, ratio_order=order)
    groups = [sign_symmetries(s, n) for s in supports]
    cons = [(c.poly, c.equality, f"g{j + 1}") for j, c in enumerate(prob.constraints)]
    plans = [
        _Plan(f"m{i + 1}", all_vars, p, q, list(cons), groups[i])
        for i, (p, q) in enumerate(ratios)
    ]
    q0_deg = ratios[0][1].degree()
    linking = []
    for i in range(1, len(ratios)):
        trunc = 2 * k - max(q0_deg, ratios[i][1].degree())
        alphas = (
            [m for m in basis(n, all_vars, trunc) if in_closure(groups[i], m)]
            if trunc >= 0
            else []
        )
        linking.append((i, 0, alphas))
    return _assemble_ratio_sdp(prob, k, plans, linking, False, "signsym",
                               mass_norm=mass_norm)


def _cs_plans(prob, cs, group):
    ratios = [
        ((-1.0 if prob.maximize else 1.0) * p, q) for p, q in prob.ratios
    ]
    plans = []
    for i, (p, q) in enumerate(ratios):
        cons = [
            (prob.constraints[j].poly, prob.constraints[j].equality, f"g{j + 1}")
            for j in cs.assign[i]
        ]
        plans.append(_Plan(f"m{i + 1}", cs.cliques[i], p, q, cons, group))
    return plans, ratios


def _cs_linking(prob, cs, ratios, k, group):
    n = prob.nvars
    zero = (0,) * n
    linking = []
    for i in range(cs.num_cliques):
        for j in cs.U[i]:
            trunc = 2 * k - max(ratios[i][1].degree(), ratios[j][1].degree())
            if trunc < 0:
                alphas = []
            else:
                # alpha = 0 duplicates the two normalization rows exactly
                # (every clique is normalized), so it is dropped here
                alphas = [
                    m
                    for m in basis(n, cs.shared_vars(i, j), trunc)
                    if m != zero
                    and (group is None or in_closure(group, m))
                ]
            linking.append((i, j, alphas))
    return linking


def build_cs(prob, k, cs=None, mass_norm="anchor"):
    """Correlative-sparse relaxation: per-clique measures, overlap linking."""
    if cs is None:
        cs = build_cliques(prob)
    plans, ratios = _cs_plans(prob, cs, None)
    linking = _cs_linking(prob, cs, ratios, k, None)
    return _assemble_ratio_sdp(prob, k, plans, linking, True, "cs",
                               mass_norm=mass_norm)


def build_cs_signsym(prob, k, cs=None, mass_norm="anchor"):
    """Correlative sparsity combined with the global sign-symmetry mask."""
    if cs is None:
        cs = build_cliques(prob)
    from .signsym import global_support

    group = sign_symmetries(global_support(prob), prob.nvars)
    plans, ratios = _cs_plans(prob, cs, group)
    linking = _cs_linking(prob, cs, ratios, k, group)
    return _assemble_ratio_sdp(prob, k, plans, linking, True, "cs-signsym",
                               mass_norm=mass_norm)


def build_epigraph(prob, k, cs=None):
    """Moment relaxation of the lifted problem with one value variable per
    ratio constrained by p_i - c_i q_i = 0; exploits cliques and the sign
    symmetries of the lifted support over one shared moment vector."""
    n = prob.nvars
    N = prob.num_ratios
    ne = n + N
    if cs is None and prob.cliques is not None:
        cs = build_cliques(prob)
    sign = -1.0 if prob.maximize else 1.0

    def lift(poly):
        return Polynomial(
            ne, {m + (0,) * N: c for m, c in poly.terms.items()}
        )

    eq_polys = []
    for i, (p, q) in enumerate(prob.ratios):
        ci_var = Polynomial.variable(ne, n + i)
        eq_polys.append(lift(sign * p) - ci_var * lift(q))
    lifted_cons = [lift(c.poly) for c in prob.constraints]

    d_min = min_order(prob, "epigraph")
    if k < d_min:
        raise OrderTooSmallError(k, d_min)

    if cs is not None:
        ext_cliques = [
            tuple(sorted(set(cl) | {n + i})) for i, cl in enumerate(cs.cliques)
        ]
    else:
        ext_cliques = [tuple(range(ne))]

    supp = set()
    for f in eq_polys + lifted_cons:
        supp |= set(f.support)
    for i in range(N):
        supp.add(tuple(0 if v != n + i else 1 for v in range(ne)))
    group = sign_symmetries(supp, ne)

    tau = np.concatenate([_scale_factors(prob), np.ones(N)])
    rsdp = RelaxationSdp("epigraph", k, d_min, prob, tau)

    def unit_scale(f):
        return f * (1.0 / max(abs(cf) for cf in f.terms.values()))

    eq_scaled = [unit_scale(f.rescale_vars(tau)) for f in eq_polys]
    cons_scaled = [unit_scale(g.rescale_vars(tau)) for g in lifted_cons]

    # quotient reduction by diagonal-quadric equalities; only safe with a
    # single clique, where expansions cannot leave the monomial layout
    # (the lifted value equalities are never of that shape)
    reducer = QuotientReducer(ne) if len(ext_cliques) == 1 else None
    cons_kept = []
    for j, g in enumerate(cons_scaled):
        if (
            reducer is not None
            and prob.constraints[j].equality
            and reducer.try_add(g) is not None
        ):
            continue
        cons_kept.append((g, prob.constraints[j].equality, f"g{j + 1}"))
    if reducer is not None and not reducer.relations:
        reducer = None

    def keeps(mono):
        if not in_closure(group, mono):
            return False
        return reducer is None or reducer.is_kept(mono)

    # one shared decision vector across cliques
    seen = {}
    for cl in ext_cliques:
        for mono in basis(ne, cl, 2 * k):
            if mono not in seen and keeps(mono):
                seen[mono] = True
    monos = sorted(seen, key=grlex_key)
    lay = MeasureLayout(
        label="lift",
        var_indices=tuple(range(ne)),
        monomials=tuple(monos),
        offset=0,
        index={m: i for i, m in enumerate(monos)},
        q_scaled=None,
        reducer=reducer,
    )
    rsdp.add_measure(lay)
    rsdp.num_decision = len(monos)

    obj = np.zeros(rsdp.num_decision)
    for i in range(N):
        ci_mono = tuple(0 if v != n + i else 1 for v in range(ne))
        obj[lay.index[ci_mono]] += 1.0
    rsdp.objective = obj

    # constraint ownership: lifted g_j to the first fitting clique, the
    # value-equality of ratio i to clique i
    owners = [[] for _ in ext_cliques]
    for g, is_eq, gname in cons_kept:
        used = g.vars_used()
        home = next(
            (ci for ci, cl in enumerate(ext_cliques) if used <= set(cl)), None
        )
        if home is None:
            raise BuildError(f"constraint {gname} fits no extended clique")
        owners[home].append((g, is_eq, gname))
    for i, f in enumerate(eq_scaled):
        home = i if cs is not None else 0
        owners[home].append((f, True, f"lift{i + 1}"))

    for ci, cl in enumerate(ext_cliques):
        plan = _Plan(
            f"c{ci + 1}", cl, Polynomial.zero(ne), Polynomial.zero(ne),
            owners[ci], group, reducer,
        )
        _emit_measure_blocks(rsdp, 0, plan, k, ne)

    zero = (0,) * ne
    rsdp.add_eq([lay.index[zero]], [1.0], 1.0, ("norm", 0))
    return rsdp


BUILDERS = {
    "dense": build_dense,
    "signsym": build_signsym,
    "cs": build_cs,
    "cs-signsym": build_cs_signsym,
    "epigraph": build_epigraph,
}


def build(prob, method, k, ratio_order=None, cs=None, mass_norm="anchor"):
    if method == "epigraph":
        return build_epigraph(prob, k, cs=cs)
    if method in ("dense", "signsym"):
        return BUILDERS[method](prob, k, ratio_order=ratio_order, mass_norm=mass_norm)
    return BUILDERS[method](prob, k, cs=cs, mass_norm=mass_norm)


# ---------------------------------------------------------------------------
# solution handling


def extract_bound(report):
    """Moment-side and SOS-side objective values of a usable solve."""
    if not report.ok():
        raise SolveError(f"solver status {report.status}: no usable bound")
    return report.primal, report.dual


def reported_bound(report, maximize=False):
    """Conservative bound: the SOS value minus any positive dual excess.

    Both solver values estimate the relaxation optimum; near-degenerate
    instances can leave the dual with a small infeasibility bias above the
    primal, so the slack max(0, dual - primal) is subtracted, which keeps
    the smaller of the two estimates.
    """
    slack = max(0.0, report.dual - report.primal)
    bound = report.dual - slack
    return -bound if maximize else bound


def dirac_decision_vector(rsdp, point):
    """Decision vector of the point mass at a feasible point.

    Each ratio measure is the Dirac measure scaled so L_y(q_i) = 1; the
    epigraph layout gets the lifted point with unit mass.
    """
    point = np.asarray(point, dtype=float)
    prob = rsdp.problem
    y = np.zeros(rsdp.num_decision)
    if rsdp.method == "epigraph":
        sign = -1.0 if prob.maximize else 1.0
        cvals = [
            sign * p.evaluate(point) / q.evaluate(point) for p, q in prob.ratios
        ]
        ext = np.concatenate([point, cvals]) / rsdp.var_scale
        lay = rsdp.measures[0]
        for mono, gid in lay.index.items():
            y[gid] = float(np.prod([x ** e for x, e in zip(ext, mono)]))
        return y
    scaled = point / rsdp.var_scale
    for lay in rsdp.measures:
        t = 1.0 / lay.q_scaled.evaluate(scaled)
        for mono, gid in lay.index.items():
            y[gid] = t * float(np.prod([x ** e for x, e in zip(scaled, mono)]))
    return y


def _numerical_rank(M, rank_tol):
    if M.size == 0:
        return 0
    svals = np.linalg.svd(M, compute_uv=False)
    top = svals.max()
    if top <= 0.0:
        return 0
    return int((svals > rank_tol * top).sum())


def flatness_certificate(rsdp, report, rank_tol=1e-6):
    """Flat-truncation check on the first measure's moment matrix.

    Requires the numerical rank of M_s(y_1) to stabilize across the last
    truncations: rank M_k = rank M_{k-d} = rank M_{k-d-1} (d the largest
    constraint half-degree; the lowest pair is skipped when k-d-1 < 0).
    The one-pair equality alone admits false positives when a sub-optimal
    pseudo-moment vector is itself atomic, so the certificate insists the
    rank has settled rather than merely repeated once.  Only meaningful for
    dense and signsym relaxations.
    """
    if rsdp.method not in ("dense", "signsym"):
        raise BuildError("flatness check applies to dense/signsym relaxations")
    if report.y is None:
        raise SolveError("report carries no moment vector")
    d = max(
        [1]
        + [_half_deg(c.poly) for c in rsdp.problem.constraints]
    )
    k = rsdp.order
    orders = [k, k - d]
    if k - d - 1 >= 0:
        orders.append(k - d - 1)
    ranks = [
        _numerical_rank(rsdp.moment_matrix(report, 0, s), rank_tol)
        for s in orders
    ]
    return all(r == ranks[0] for r in ranks)


@dataclass
class RunResult:
    problem: SrfoProblem
    method: str
    order: int
    rsdp: RelaxationSdp
    report: SolveReport
    bound: float
    primal: float
    dual: float
    certified: bool
    build_ms: float
    solve_ms: float


def solve_relaxation(
    prob,
    method,
    k,
    ratio_order=None,
    cs=None,
    tol=1e-8,
    max_iter=200,
    psd_cap=None,
    rank_tol=1e-6,
):
    """Build, solve and package one relaxation; the pipeline used by the CLI.

    Two equivalent assemblies differing only in the per-ratio mass
    normalization are tried when the first solve falls short of tolerance;
    the better-converged run is kept (deterministic order, so results are
    reproducible).
    """
    t0 = time.perf_counter()
    rsdp = build(prob, method, k, ratio_order=ratio_order, cs=cs)
    sf = to_standard_form(rsdp)
    build_ms = 1000.0 * (time.perf_counter() - t0)
    t1 = time.perf_counter()
    report = solve_internal(sf, tol=tol, max_iter=max_iter, psd_cap=psd_cap)
    solve_ms = 1000.0 * (time.perf_counter() - t1)

    def quality(rep):
        rank = {"optimal": 0, "near_optimal": 1}.get(rep.status, 2)
        return (rank, max(rep.gap, rep.pinf, rep.dinf))

    if method != "epigraph" and quality(report)[1] > tol:
        t2 = time.perf_counter()
        rsdp_alt = build(
            prob, method, k, ratio_order=ratio_order, cs=cs, mass_norm="coef"
        )
        sf_alt = to_standard_form(rsdp_alt)
        report_alt = solve_internal(
            sf_alt, tol=tol, max_iter=max_iter, psd_cap=psd_cap
        )
        solve_ms += 1000.0 * (time.perf_counter() - t2)
        if quality(report_alt) < quality(report):
            rsdp, sf, report = rsdp_alt, sf_alt, report_alt
    certified = False
    if report.ok() and method in ("dense", "signsym"):
        certified = bool(flatness_certificate(rsdp, report, rank_tol))
    return RunResult(
        problem=prob,
        method=method,
        order=k,
        rsdp=rsdp,
        report=report,
        bound=reported_bound(report, prob.maximize) if report.ok() else float("nan"),
        primal=report.primal,
        dual=report.dual,
        certified=certified,
        build_ms=build_ms,
        solve_ms=solve_ms,
    )
