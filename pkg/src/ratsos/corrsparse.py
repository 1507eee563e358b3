"""Clique structure validation for ratio-indexed correlative sparsity.

Each ratio owns a variable clique; constraints are assigned to the first
clique containing their variables, and the running intersection property
(RIP) is verified on the given order with a maximum-cardinality-search
reordering attempted before reporting a violation.  Overlap bookkeeping
(U/V sets and pairwise shared variables) drives the linking equalities of
the sparse relaxations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CliqueStructureError
from .poly import Polynomial
from .problem import Constraint, SrfoProblem, diag_quadratic_pattern


@dataclass(frozen=True)
class CliqueStructure:
    cliques: tuple
    assign: tuple            # J_i: constraint indices owned by clique i
    U: tuple                 # later overlapping cliques per clique
    V: tuple                 # earlier overlapping cliques per clique
    shared: dict             # (i, j) with i < j -> shared variable tuple
    rip_ok: bool
    rip_order: tuple         # clique order certifying RIP (identity if given order works)
    given_order_witness: tuple | None = None  # (clique, overlap) when the given order fails

    @property
    def num_cliques(self):
        return len(self.cliques)

    def shared_vars(self, i, j):
        return self.shared[(min(i, j), max(i, j))]


def _rip_holds(cliques, order):
    sets = [set(cliques[i]) for i in order]
    for pos in range(1, len(sets)):
        earlier = set().union(*sets[:pos])
        overlap = sets[pos] & earlier
        if not overlap:
            continue
        if not any(overlap <= sets[j] for j in range(pos)):
            return False, (order[pos], sorted(overlap))
    return True, None


def _mcs_order(cliques):
    """Greedy max-overlap ordering (maximum cardinality search on cliques)."""
    n = len(cliques)
    remaining = set(range(1, n))
    order = [0]
    covered = set(cliques[0])
    while remaining:
        best = max(
            sorted(remaining),
            key=lambda i: (len(set(cliques[i]) & covered), -i),
        )
        order.append(best)
        covered |= set(cliques[best])
        remaining.discard(best)
    return order


def build_cliques(prob):
    """Validate (or derive) the clique structure of a problem.

    Cliques default to the variables of each ratio when the problem does not
    supply them.  Raises with a witness on coverage failures, on a ratio not
    contained in its clique, and on RIP violations that survive reordering.
    """
    n = prob.nvars
    if prob.cliques is not None:
        cliques = [tuple(sorted(c)) for c in prob.cliques]
    else:
        cliques = [
            tuple(sorted(p.vars_used() | q.vars_used()))
            for p, q in prob.ratios
        ]
    covered = set().union(*(set(c) for c in cliques)) if cliques else set()
    if covered != set(range(n)):
        missing = sorted(set(range(n)) - covered)
        raise CliqueStructureError(
            f"variables {[v + 1 for v in missing]} are covered by no clique"
        )
    for i, ((p, q), cl) in enumerate(zip(prob.ratios, cliques)):
        used = p.vars_used() | q.vars_used()
        if not used <= set(cl):
            extra = sorted(used - set(cl))
            raise CliqueStructureError(
                f"ratio {i + 1} uses variables {[v + 1 for v in extra]} "
                f"outside its clique"
            )

    assign = [[] for _ in cliques]
    for j, con in enumerate(prob.constraints):
        used = con.poly.vars_used()
        home = next(
            (i for i, cl in enumerate(cliques) if used <= set(cl)), None
        )
        if home is None:
            raise CliqueStructureError(
                f"constraint {j + 1} on variables "
                f"{[v + 1 for v in sorted(used)]} fits in no clique"
            )
        assign[home].append(j)

    N = len(cliques)
    shared = {}
    U = [[] for _ in range(N)]
    V = [[] for _ in range(N)]
    for i in range(N):
        for j in range(i + 1, N):
            common = tuple(sorted(set(cliques[i]) & set(cliques[j])))
            if common:
                shared[(i, j)] = common
                U[i].append(j)
                V[j].append(i)

    rip_ok, witness = _rip_holds(cliques, list(range(N)))
    rip_order = tuple(range(N))
    if not rip_ok:
        candidate = _mcs_order(cliques)
        ok2, _ = _rip_holds(cliques, candidate)
        if ok2:
            rip_ok, rip_order = True, tuple(candidate)
        else:
            bad, overlap = witness
            raise CliqueStructureError(
                f"running intersection property fails at clique {bad + 1}: "
                f"overlap {[v + 1 for v in overlap]} with earlier cliques "
                f"is contained in none of them (no repair order found)"
            )

    return CliqueStructure(
        cliques=tuple(cliques),
        assign=tuple(tuple(a) for a in assign),
        U=tuple(tuple(u) for u in U),
        V=tuple(tuple(v) for v in V),
        shared=shared,
        rip_ok=rip_ok,
        rip_order=rip_order,
        given_order_witness=(
            None if witness is None else (witness[0], tuple(witness[1]))
        ),
    )


def _has_ball(prob, cs, i):
    """True if some assigned inequality is M - sum of squares over clique i."""
    want = set(cs.cliques[i])
    for j in cs.assign[i]:
        con = prob.constraints[j]
        if con.equality:
            continue
        pat = diag_quadratic_pattern(con.poly)
        if pat is None:
            continue
        c0, coefs = pat
        if set(coefs) == want and all(a == 1.0 for a in coefs.values()):
            return True
    return False


def _auto_radius(prob, clique):
    """Bound on sum of squares over a clique derived from the constraints."""
    want = set(clique)
    best = None
    for con in prob.constraints:
        pat = diag_quadratic_pattern(con.poly)
        if pat is None:
            continue
        c0, coefs = pat
        if want <= set(coefs):
            cand = c0 / min(coefs[v] for v in want)
            best = cand if best is None else min(best, cand)
    if best is not None:
        return best
    from .problem import variable_bounds

    bounds = variable_bounds(prob)
    if all(bounds[v] is not None for v in clique):
        return sum(bounds[v] for v in clique)
    return None


def ensure_ball_constraints(prob, cs, radii="auto"):
    """Append per-clique ball constraints where missing.

    `radii` is either "auto" (derive each bound from existing ball, sphere or
    box constraints), a single number, or one number per clique.  Returns a
    new problem; re-run build_cliques on it to refresh the assignment.
    """
    N = cs.num_cliques
    if radii == "auto":
        wanted = [None] * N
    elif isinstance(radii, (int, float)):
        wanted = [float(radii)] * N
    else:
        wanted = [float(r) for r in radii]
        if len(wanted) != N:
            raise CliqueStructureError(f"{len(wanted)} radii for {N} cliques")
    new_cons = list(prob.constraints)
    added = False
    for i in range(N):
        if _has_ball(prob, cs, i):
            continue
        M = wanted[i]
        if M is None:
            M = _auto_radius(prob, cs.cliques[i])
            if M is None:
                raise CliqueStructureError(
                    f"no bound derivable for clique {i + 1}; pass an explicit radius"
                )
        if M <= 0:
            raise CliqueStructureError(f"clique {i + 1} radius must be positive")
        ball = Polynomial.constant(prob.nvars, M)
        for v in cs.cliques[i]:
            ball = ball - Polynomial.variable(prob.nvars, v, 2)
        new_cons.append(Constraint(ball, False))
        added = True
    if not added:
        return prob
    return SrfoProblem(
        nvars=prob.nvars,
        ratios=list(prob.ratios),
        constraints=new_cons,
        cliques=list(prob.cliques) if prob.cliques is not None else None,
        name=prob.name,
        var_names=prob.var_names,
        maximize=prob.maximize,
        known_optimum=prob.known_optimum,
    )
