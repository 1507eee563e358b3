"""Benchmark-family generators and the complex Rayleigh-quotient realifier.

Each generator builds its defining formulas exactly; chained families come
with their variable cliques filled in.  `known_optimum` carries the
analytically known objective value where one exists (in the stated
objective sense, so a maximum for maximize-flagged families).
"""

from __future__ import annotations

import numpy as np

from .errors import BuildError
from .poly import Polynomial
from .problem import Constraint, SrfoProblem


def _mono(n, pairs, coef=1.0):
    expo = [0] * n
    for v, e in pairs:
        expo[v] = e
    return Polynomial(n, {tuple(expo): coef})


def gen_reznick_chain(M, d):
    """Chained even-degree family on the sphere of radius sqrt(3).

    M-1 ratios indexed by a = 1/M, ..., (M-1)/M in three variables; the
    optimum is M-1.  Minimum usable relaxation order is 3*d.
    """
    if M < 2 or d < 1:
        raise ValueError("need M >= 2 and d >= 1")
    n = 3
    cyc1 = [((0, 4 * d), (1, 2 * d)), ((1, 4 * d), (2, 2 * d)), ((2, 4 * d), (0, 2 * d))]
    cyc2 = [((0, 2 * d), (1, 4 * d)), ((1, 2 * d), (2, 4 * d)), ((2, 2 * d), (0, 4 * d))]
    pure = [((v, 6 * d),) for v in range(3)]
    center = ((0, 2 * d), (1, 2 * d), (2, 2 * d))
    ratios = []
    for j in range(1, M):
        a = j / M
        p = Polynomial.zero(n)
        for pairs in pure:
            p = p + _mono(n, pairs, a ** 4)
        for pairs in cyc1:
            p = p + _mono(n, pairs, 1.0)
        for pairs in cyc2:
            p = p + _mono(n, pairs, a ** 8)
        q = Polynomial.zero(n)
        for pairs in cyc1:
            q = q + _mono(n, pairs, 2 * a ** 6)
        for pairs in cyc2:
            q = q + _mono(n, pairs, 2 * a ** 2)
        q = q + _mono(n, center, 3 * (1 - 2 * a ** 2 + a ** 4 - 2 * a ** 6 + a ** 8))
        ratios.append((p, q))
    sphere = Polynomial(n, {(0, 0, 0): 3.0, (2, 0, 0): -1.0, (0, 2, 0): -1.0, (0, 0, 2): -1.0})
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=[Constraint(sphere, True)],
        name=f"reznick-chain-M{M}-d{d}",
        known_optimum=float(M - 1),
    )


# 30 x 10 well matrix and weight vector of the classical Shekel foxholes
# test function (Ali, Khompatraporn & Zabinsky 2005 data set).
SHEKEL_A = np.array([
    [9.681, 0.667, 4.783, 9.095, 3.517, 9.325, 6.544, 0.211, 5.122, 2.020],
    [9.400, 2.041, 3.788, 7.931, 2.882, 2.672, 3.568, 1.284, 7.033, 7.374],
    [8.025, 9.152, 5.114, 7.621, 4.564, 4.711, 2.996, 6.126, 0.734, 4.982],
    [2.196, 0.415, 5.649, 6.979, 9.510, 9.166, 6.304, 6.054, 9.377, 1.426],
    [8.074, 8.777, 3.467, 1.863, 6.708, 6.349, 4.534, 0.276, 7.633, 1.567],
    [7.650, 5.658, 0.720, 2.764, 3.278, 5.283, 7.474, 6.274, 1.409, 8.208],
    [1.256, 3.605, 8.623, 6.905, 0.584, 8.133, 6.071, 6.888, 4.187, 5.448],
    [8.314, 2.261, 4.224, 1.781, 4.124, 0.932, 8.129, 8.658, 1.208, 5.762],
    [0.226, 8.858, 1.420, 0.945, 1.622, 4.698, 6.228, 9.096, 0.972, 7.637],
    [7.305, 2.228, 1.242, 5.928, 9.133, 1.826, 4.060, 5.204, 8.713, 8.247],
    [0.652, 7.027, 0.508, 4.876, 8.807, 4.632, 5.808, 6.937, 3.291, 7.016],
    [2.699, 3.516, 5.874, 4.119, 4.461, 7.496, 8.817, 0.690, 6.593, 9.789],
    [8.327, 3.897, 2.017, 9.570, 9.825, 1.150, 1.395, 3.885, 6.354, 0.109],
    [2.132, 7.006, 7.136, 2.641, 1.882, 5.943, 7.273, 7.691, 2.880, 0.564],
    [4.707, 5.579, 4.080, 0.581, 9.698, 8.542, 8.077, 8.515, 9.231, 4.670],
    [8.304, 7.559, 8.567, 0.322, 7.128, 8.392, 1.472, 8.524, 2.277, 7.826],
    [8.632, 4.409, 4.832, 5.768, 7.050, 6.715, 1.711, 4.323, 4.405, 4.591],
    [4.887, 9.112, 0.170, 8.967, 9.693, 9.867, 7.508, 7.770, 8.382, 6.740],
    [2.440, 6.686, 4.299, 1.007, 7.008, 1.427, 9.398, 8.480, 9.950, 1.675],
    [6.306, 8.583, 6.084, 1.138, 4.350, 3.134, 7.853, 6.061, 7.457, 2.258],
    [0.652, 2.343, 1.370, 0.821, 1.310, 1.063, 0.689, 8.819, 8.833, 9.070],
    [5.558, 1.272, 5.756, 9.857, 2.279, 2.764, 1.284, 1.677, 1.244, 1.234],
    [3.352, 7.549, 9.817, 9.437, 8.687, 4.167, 2.570, 6.540, 0.228, 0.027],
    [8.798, 0.880, 2.370, 0.168, 1.701, 3.680, 1.231, 2.390, 2.499, 0.064],
    [1.460, 8.057, 1.336, 7.217, 7.914, 3.615, 9.981, 9.198, 5.292, 1.224],
    [0.432, 8.645, 8.774, 0.249, 8.081, 7.461, 4.416, 0.652, 4.002, 4.644],
    [0.679, 2.800, 5.523, 3.049, 2.968, 7.225, 6.730, 4.199, 9.614, 9.229],
    [4.263, 1.074, 7.286, 5.599, 8.291, 5.200, 9.214, 8.272, 4.398, 4.506],
    [9.496, 4.830, 3.150, 8.270, 5.079, 1.231, 5.731, 9.494, 1.883, 9.732],
    [4.138, 2.562, 2.532, 9.661, 5.611, 5.500, 6.886, 2.341, 9.699, 6.500],
])
SHEKEL_C = np.array([
    0.806, 0.517, 0.100, 0.908, 0.965, 0.669, 0.524, 0.902, 0.531, 0.876,
    0.462, 0.491, 0.463, 0.714, 0.352, 0.869, 0.813, 0.811, 0.828, 0.964,
    0.789, 0.360, 0.369, 0.992, 0.332, 0.817, 0.632, 0.883, 0.608, 0.326,
])


def gen_shekel(n):
    """Inverted-well sum in squared variables, 30 ratios, all supports even."""
    if not 1 <= n <= 10:
        raise ValueError("n must be in 1..10")
    ratios = []
    for i in range(SHEKEL_A.shape[0]):
        q = Polynomial.constant(n, float(SHEKEL_C[i]))
        for j in range(n):
            xj2 = Polynomial.variable(n, j, 2)
            q = q + (xj2 - float(SHEKEL_A[i, j])) ** 2
        ratios.append((Polynomial.constant(n, -1.0), q))
    g = Polynomial.constant(n, 60.0)
    for j in range(n):
        g = g - (Polynomial.variable(n, j, 2) - 5.0) ** 2
    known = {5: -10.4056, 10: -10.2088}.get(n)
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=[Constraint(g, False)],
        name=f"shekel-n{n}",
        known_optimum=known,
    )


def gen_rand_srfo(N, n, d, xi, seed):
    """Random inverted-peak instance on the unit ball; optimum is -N at 0.

    A pool of nonconstant monomials of degree <= d is kept with probability
    xi; each inner polynomial picks three of them with uniform coefficients.
    If the pool ends up smaller than three, the lowest graded-lex monomials
    are added so the construction stays well defined.
    """
    if N < 1 or n < 1 or d < 1 or not 0 < xi <= 1:
        raise ValueError("bad RandSRFO parameters")
    from .poly import full_basis

    rng = np.random.default_rng(seed)
    nonconst = [m for m in full_basis(n, d) if sum(m) > 0]
    keep = rng.random(len(nonconst)) < xi
    pool = [m for m, kept in zip(nonconst, keep) if kept]
    for m in nonconst:
        if len(pool) >= 3:
            break
        if m not in pool:
            pool.append(m)
    ratios = []
    take = min(3, len(pool))
    for _ in range(N):
        picks = rng.choice(len(pool), size=take, replace=False)
        coefs = rng.random(take)
        f = Polynomial(n, {pool[j]: float(c) for j, c in zip(picks, coefs)})
        q = f * f + 1.0
        ratios.append((Polynomial.constant(n, -1.0), q))
    ball = Polynomial.constant(n, 1.0)
    for v in range(n):
        ball = ball - Polynomial.variable(n, v, 2)
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=[Constraint(ball, False)],
        name=f"rand-srfo-N{N}-n{n}-d{d}-xi{xi}-s{seed}",
        known_optimum=float(-N),
    )


def gen_motzkin_chain(N):
    """Chained Motzkin-style ratios on overlapping 4-spheres; optimum 4N."""
    if N < 1:
        raise ValueError("N must be positive")
    n = 2 * N + 2
    ratios = []
    constraints = []
    cliques = []
    for i in range(N):
        a, b, c, e = 2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3
        sq = lambda v: Polynomial.variable(n, v, 2)
        triple = sq(a) * sq(b) * sq(c)
        p = (sq(a) + sq(b) + sq(c)) * triple + Polynomial.variable(n, e, 8)
        q = triple * sq(e)
        ratios.append((p, q))
        sphere = Polynomial.constant(n, 4.0) - sq(a) - sq(b) - sq(c) - sq(e)
        constraints.append(Constraint(sphere, True))
        cliques.append((a, b, c, e))
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=constraints,
        cliques=cliques,
        name=f"motzkin-chain-N{N}",
        known_optimum=4.0 * N,
    )


def gen_reznick_sparse_chain(N, d):
    """Chained three-variable even ratios on overlapping spheres; optimum N."""
    if N < 1 or d < 1:
        raise ValueError("need N >= 1 and d >= 1")
    n = 2 * N + 1
    ratios = []
    constraints = []
    cliques = []
    for i in range(N):
        a, b, c = 2 * i, 2 * i + 1, 2 * i + 2
        p = (
            _mono(n, ((a, 6 * d),))
            + _mono(n, ((b, 6 * d),))
            + _mono(n, ((c, 6 * d),))
            + _mono(n, ((a, 2 * d), (b, 2 * d), (c, 2 * d)), 3.0)
        )
        q = Polynomial.zero(n)
        for u, v in ((a, b), (a, c), (b, c)):
            q = q + _mono(n, ((u, 4 * d), (v, 2 * d)))
            q = q + _mono(n, ((u, 2 * d), (v, 4 * d)))
        ratios.append((p, q))
        sphere = (
            Polynomial.constant(n, 3.0)
            - Polynomial.variable(n, a, 2)
            - Polynomial.variable(n, b, 2)
            - Polynomial.variable(n, c, 2)
        )
        constraints.append(Constraint(sphere, True))
        cliques.append((a, b, c))
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=constraints,
        cliques=cliques,
        name=f"reznick-sparse-chain-N{N}-d{d}",
        known_optimum=float(N),
    )


def gen_rosenbrock_ratio(N):
    """Banana-valley reciprocal chain, a maximization; optimum N at x = +-1."""
    if N < 1:
        raise ValueError("N must be positive")
    n = N + 1
    ratios = []
    constraints = []
    cliques = []
    for i in range(N):
        xi2 = Polynomial.variable(n, i, 2)
        xj2 = Polynomial.variable(n, i + 1, 2)
        q = 100.0 * (xj2 - xi2) ** 2 + (xi2 - 1.0) ** 2 + 1.0
        ratios.append((Polynomial.constant(n, 1.0), q))
        cliques.append((i, i + 1))
    for i in range(n):
        constraints.append(
            Constraint(Polynomial.constant(n, 16.0) - Polynomial.variable(n, i, 2), False)
        )
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=constraints,
        cliques=cliques,
        name=f"rosenbrock-ratio-N{N}",
        maximize=True,
        known_optimum=float(N),
    )


def gen_overlap_chain(N, s):
    """Sliding-window bilinear/quadratic chain on the unit box (minimization)."""
    if N < 1 or s < 1:
        raise ValueError("need N >= 1 and s >= 1")
    n = N + s
    ratios = []
    constraints = []
    cliques = []
    for i in range(N):
        p = Polynomial.zero(n)
        for j in range(s):
            p = p + _mono(n, ((i + j, 1), (i + j + 1, 1)))
        q = Polynomial.constant(n, 1.0)
        for j in range(1, s + 2):
            q = q + float(j) * Polynomial.variable(n, i + j - 1, 2)
        ratios.append((p, q))
        cliques.append(tuple(range(i, i + s + 1)))
    for v in range(n):
        constraints.append(
            Constraint(Polynomial.constant(n, 1.0) - Polynomial.variable(n, v, 2), False)
        )
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=constraints,
        cliques=cliques,
        name=f"overlap-chain-N{N}-s{s}",
    )


def gen_unit_ball_mix():
    """Three mixed-parity rational terms over the unit ball (demo instance)."""
    n = 3
    x2 = Polynomial.variable(n, 0, 2)
    y2 = Polynomial.variable(n, 1, 2)
    z2 = Polynomial.variable(n, 2, 2)
    x = Polynomial.variable(n, 0)
    y = Polynomial.variable(n, 1)
    z = Polynomial.variable(n, 2)
    ratios = [
        (x2 + y2 - y * z, 1.0 + 2.0 * x2 + y2 + z2),
        (y2 + x2 * z, 1.0 + x2 + 2.0 * y2 + z2),
        (z2 - x + y, 1.0 + x2 + y2 + 2.0 * z2),
    ]
    ball = Polynomial.constant(n, 1.0) - x2 - y2 - z2
    return SrfoProblem(
        nvars=n,
        ratios=ratios,
        constraints=[Constraint(ball, False)],
        name="unit-ball-mix",
        known_optimum=-0.3465,
    )


# ---------------------------------------------------------------------------
# generalized Rayleigh quotients


def _quad_form(mat, n, row_block, col_block, scale=1.0):
    """Polynomial u^T mat v where u, v are variable blocks of length n."""
    poly = Polynomial.zero(2 * n)
    terms = {}
    for r in range(n):
        for c in range(n):
            coef = scale * float(mat[r, c])
            if coef == 0.0:
                continue
            expo = [0] * (2 * n)
            expo[row_block * n + r] += 1
            expo[col_block * n + c] += 1
            key = tuple(expo)
            terms[key] = terms.get(key, 0.0) + coef
    return poly + Polynomial(2 * n, terms)


def rayleigh_to_real(A_list, B_list, hermitian_tol=1e-10):
    """Realify max sum z^H A_i z / z^H B_i z over the complex unit sphere.

    Splitting z = x + iy turns each quotient into a ratio of real quadratic
    forms in 2n variables with the single constraint |x|^2 + |y|^2 = 1.  The
    result is a maximize-flagged problem; the relaxation pipeline negates
    numerators internally and reports the negated bound.
    """
    if len(A_list) != len(B_list) or not A_list:
        raise BuildError("need matching nonempty matrix lists")
    n = np.asarray(A_list[0]).shape[0]
    ratios = []
    for which, mats in (("A", A_list), ("B", B_list)):
        for i, M in enumerate(mats):
            M = np.asarray(M, dtype=complex)
            if M.shape != (n, n):
                raise BuildError(f"{which}_{i + 1} is not {n}x{n}")
            scale = max(1.0, np.abs(M).max())
            if np.abs(M - M.conj().T).max() > hermitian_tol * scale:
                raise BuildError(f"{which}_{i + 1} is not Hermitian")
    for B in B_list:
        B = np.asarray(B, dtype=complex)
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            raise BuildError("a B matrix is not positive definite")
    for A, B in zip(A_list, B_list):
        A = np.asarray(A, dtype=complex)
        B = np.asarray(B, dtype=complex)
        # A = A1 + i*A2 with A1 symmetric and A2 antisymmetric (A Hermitian)
        A1, A2 = 0.5 * (A.real + A.real.T), 0.5 * (A.imag - A.imag.T)
        B1, B2 = 0.5 * (B.real + B.real.T), 0.5 * (B.imag - B.imag.T)
        p = (
            _quad_form(A1, n, 0, 0)
            + _quad_form(A2, n, 0, 1, scale=-2.0)
            + _quad_form(A1, n, 1, 1)
        )
        q = (
            _quad_form(B1, n, 0, 0)
            + _quad_form(B2, n, 0, 1, scale=-2.0)
            + _quad_form(B1, n, 1, 1)
        )
        ratios.append((p, q))
    sphere = Polynomial.constant(2 * n, 1.0)
    for v in range(2 * n):
        sphere = sphere - Polynomial.variable(2 * n, v, 2)
    names = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
    return SrfoProblem(
        nvars=2 * n,
        ratios=ratios,
        constraints=[Constraint(sphere, True)],
        name=f"rayleigh-n{n}-N{len(A_list)}",
        var_names=names,
        maximize=True,
    )


def gen_rayleigh(n, N, seed):
    """Random Hermitian/positive-definite quotient stack, realified.

    Component matrices have uniform [0, 1] entries: A_i = C + C^H and
    B_i = D^H D for complex C, D assembled from two real draws each.
    """
    rng = np.random.default_rng(seed)
    A_list = []
    B_list = []
    for _ in range(N):
        C = rng.random((n, n)) + 1j * rng.random((n, n))
        D = rng.random((n, n)) + 1j * rng.random((n, n))
        A_list.append(C + C.conj().T)
        B_list.append(D.conj().T @ D)
    prob = rayleigh_to_real(A_list, B_list)
    prob.name = f"rayleigh-n{n}-N{N}-s{seed}"
    return prob


FAMILIES = {
    "reznick": gen_reznick_chain,
    "shekel": gen_shekel,
    "rand": gen_rand_srfo,
    "motzkin": gen_motzkin_chain,
    "reznick-sparse": gen_reznick_sparse_chain,
    "rosenbrock": gen_rosenbrock_ratio,
    "overlap": gen_overlap_chain,
    "ballmix": gen_unit_ball_mix,
    "rayleigh": gen_rayleigh,
}
