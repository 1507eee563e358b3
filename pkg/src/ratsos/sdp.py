"""Block-SDP standard form, a dense primal-dual interior-point solver,
and SDPA sparse-format import/export.

The hosted problem is the linear-matrix-inequality orientation natural for
moment relaxations:

    minimize    c'y
    subject to  E y = d
                S_b(y) = C_b + sum_l y_l F_{b,l}  PSD   for every block b

The solver is a path-following method with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step, run from an infeasible start.  It returns
both the moment-side value (primal) and the certifying SOS-side value (dual)
of one solve.  Linear algebra is dense per block; the method is intended for
desk-scale instances, larger ones go through the SDPA exporter.
"""

from __future__ import annotations

import os
import re
import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ProblemTooLargeError, SolveError

DEFAULT_PSD_CAP = 3000


@dataclass
class PsdBlockData:
    """One PSD block of the LMI map, entries stored for i <= j only."""

    label: str
    size: int
    rows: np.ndarray
    cols: np.ndarray
    varids: np.ndarray
    coefs: np.ndarray
    const_rows: np.ndarray
    const_cols: np.ndarray
    const_vals: np.ndarray


@dataclass
class DiagBlockData:
    """Folded 1x1 blocks: positionwise c + A y >= 0."""

    size: int
    pos: np.ndarray
    varids: np.ndarray
    coefs: np.ndarray
    const: np.ndarray  # dense, length size


@dataclass
class SdpStandardForm:
    num_vars: int
    objective: np.ndarray
    blocks: list
    diag: DiagBlockData | None = None
    eq_mat: sp.csr_matrix | None = None
    eq_rhs: np.ndarray | None = None
    origin: object = None

    @property
    def num_eq(self):
        return 0 if self.eq_mat is None else self.eq_mat.shape[0]

    def total_psd_dim(self):
        return sum(b.size for b in self.blocks) + (
            self.diag.size if self.diag else 0
        )

    def block_sizes(self):
        sizes = [b.size for b in self.blocks]
        if self.diag and self.diag.size:
            sizes += [1] * self.diag.size
        return tuple(sizes)


@dataclass
class SolveReport:
    status: str
    primal: float
    dual: float
    gap: float
    iterations: int
    block_sizes: tuple
    wall_time: float
    pinf: float = float("nan")
    dinf: float = float("nan")
    y: np.ndarray | None = None

    def ok(self):
        return self.status in ("optimal", "near_optimal")


def _dedupe_rows(rows_cols_vals, rhs):
    """Drop exact duplicate equality rows (same normalized content)."""
    seen = {}
    keep = []
    for i, (cols, vals, b) in enumerate(rows_cols_vals):
        if len(vals) == 0:
            continue
        lead = vals[0]
        key = (
            tuple(cols),
            tuple(v / lead for v in vals),
            b / lead,
        )
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return keep


def to_standard_form(rsdp, fold_unit_blocks=True, dedupe=True):
    """Repack a relaxation into solver form.

    Size-1 PSD blocks are folded into one diagonal block; exact duplicate
    equality rows are dropped.  The relaxation object is retained so moment
    values can be read back per monomial.
    """
    blocks = []
    diag_pos = []
    diag_var = []
    diag_coef = []
    diag_const = []
    ndiag = 0
    for blk in rsdp.blocks:
        if fold_unit_blocks and blk.size == 1:
            for v, c in zip(blk.varids, blk.coefs):
                diag_pos.append(ndiag)
                diag_var.append(v)
                diag_coef.append(c)
            cval = float(blk.const_vals.sum()) if len(blk.const_vals) else 0.0
            diag_const.append(cval)
            ndiag += 1
        else:
            blocks.append(blk)
    diag = None
    if ndiag:
        diag = DiagBlockData(
            size=ndiag,
            pos=np.asarray(diag_pos, dtype=np.int64),
            varids=np.asarray(diag_var, dtype=np.int64),
            coefs=np.asarray(diag_coef, dtype=float),
            const=np.asarray(diag_const, dtype=float),
        )

    eq_mat = None
    eq_rhs = None
    if rsdp.eq_rows:
        triples = []
        rhs = []
        for cols, vals, b in rsdp.eq_rows:
            triples.append((list(cols), list(vals), float(b)))
            rhs.append(float(b))
        if dedupe:
            keep = _dedupe_rows(triples, rhs)
        else:
            keep = [i for i, t in enumerate(triples) if len(t[1])]
        data, ri, ci, rb = [], [], [], []
        for new_r, old_r in enumerate(keep):
            cols, vals, b = triples[old_r]
            # row equilibration: unit max-abs coefficient per equality
            scale = max(abs(v) for v in vals)
            for ccol, v in zip(cols, vals):
                ri.append(new_r)
                ci.append(ccol)
                data.append(v / scale)
            rb.append(b / scale)
        eq_mat = sp.csr_matrix(
            (data, (ri, ci)), shape=(len(keep), rsdp.num_decision)
        )
        eq_rhs = np.asarray(rb, dtype=float)

    return SdpStandardForm(
        num_vars=rsdp.num_decision,
        objective=np.asarray(rsdp.objective, dtype=float).copy(),
        blocks=blocks,
        diag=diag,
        eq_mat=eq_mat,
        eq_rhs=eq_rhs,
        origin=rsdp,
    )


# ---------------------------------------------------------------------------
# interior-point solver


class _SizeGroup:
    """All PSD blocks of one size, stacked for batched linear algebra.

    Per-block F tensors feed the Schur assembly (real BLAS work); everything
    else (residuals, scalings, step lengths) runs on (B, s, s) stacks, so
    many small blocks cost barely more than one large one.
    """

    def __init__(self, size, blocks, m):
        self.s = size
        self.B = len(blocks)
        self.vars_list = []
        self.F_list = []
        self.Fm_list = []
        C = np.zeros((self.B, size, size))
        g_rows, g_cols, g_vals = [], [], []
        ss = size * size
        for b, blk in enumerate(blocks):
            vars_b = np.unique(blk.varids)
            local = {g: i for i, g in enumerate(vars_b)}
            F = np.zeros((len(vars_b), size, size))
            for r, cc, v, a in zip(blk.rows, blk.cols, blk.varids, blk.coefs):
                li = local[v]
                F[li, r, cc] += a
                g_rows.append(b * ss + r * size + cc)
                g_cols.append(v)
                g_vals.append(a)
                if r != cc:
                    F[li, cc, r] += a
                    g_rows.append(b * ss + cc * size + r)
                    g_cols.append(v)
                    g_vals.append(a)
            for r, cc, a in zip(blk.const_rows, blk.const_cols, blk.const_vals):
                C[b, r, cc] += a
                if r != cc:
                    C[b, cc, r] += a
            self.vars_list.append(vars_b)
            self.F_list.append(F)
            self.Fm_list.append(sp.csr_matrix(F.reshape(len(vars_b), ss)))
        self.C = C
        self.G = sp.csr_matrix(
            (g_vals, (g_rows, g_cols)), shape=(self.B * ss, m)
        )
        self.GT = self.G.T.tocsr()
        counts = [len(v) for v in self.vars_list]
        self.block_of_row = np.repeat(np.arange(self.B), counts)
        self.row_splits = np.cumsum([0] + counts)
        self.Fcat = (
            np.concatenate(self.F_list) if counts else
            np.zeros((0, size, size))
        )

    def lmi(self, y):
        return (self.G @ y).reshape(self.B, self.s, self.s) + self.C

    def adjoint(self, Tstack):
        """Accumulated <F_l, T_b> over all blocks, as a length-m vector."""
        return self.GT @ Tstack.ravel()

    def add_schur(self, W, Mmat):
        Wrows = W[self.block_of_row]
        T = np.matmul(Wrows, np.matmul(self.Fcat, Wrows))
        ss = self.s * self.s
        for b in range(self.B):
            lo, hi = self.row_splits[b], self.row_splits[b + 1]
            Mloc = self.Fm_list[b] @ T[lo:hi].reshape(hi - lo, ss).T
            idx = self.vars_list[b]
            Mmat[np.ix_(idx, idx)] += Mloc


def _nt_factor_stack(X, S):
    """Batched NT scaling: R R' = W with W S W = X, lam the scaled spectrum."""
    Lx = np.linalg.cholesky(X)
    Ls = np.linalg.cholesky(S)
    _, lam, Vt = np.linalg.svd(np.transpose(Ls, (0, 2, 1)) @ Lx)
    lam = np.maximum(lam, 1e-300)
    R = (Lx @ np.transpose(Vt, (0, 2, 1))) / np.sqrt(lam)[:, None, :]
    Rinv = (np.sqrt(lam)[:, :, None] * Vt) @ np.linalg.inv(Lx)
    W = R @ np.transpose(R, (0, 2, 1))
    return R, Rinv, lam, W


def _min_step_stack(lam, D):
    """Largest alpha keeping diag(lam_b) + alpha * D_b PSD for all b."""
    root = np.sqrt(lam)
    scaled = D / root[:, :, None] / root[:, None, :]
    sym = 0.5 * (scaled + np.transpose(scaled, (0, 2, 1)))
    emin = np.linalg.eigvalsh(sym)[:, 0]
    bad = emin < -1e-14
    if not bad.any():
        return np.inf
    return float((-1.0 / emin[bad]).min())


def solve_internal(sf, tol=1e-8, max_iter=200, psd_cap=None, verbose=False):
    """Solve the block SDP with the built-in interior-point method.

    Nesterov-Todd scaled path following with a Mehrotra predictor-corrector
    step from an infeasible start.  Deterministic: fixed initialization and
    iteration rule, no randomness.  Raises ProblemTooLargeError above the
    size cap (RATSOS_PSD_CAP or `psd_cap` overrides the default of 3000).
    """
    t0 = time.perf_counter()
    if psd_cap is None:
        psd_cap = int(os.environ.get("RATSOS_PSD_CAP", DEFAULT_PSD_CAP))
    total_dim = sf.total_psd_dim()
    if total_dim > psd_cap:
        raise ProblemTooLargeError(
            f"total PSD dimension {total_dim} exceeds cap {psd_cap}; "
            "export the instance with the SDPA writer instead"
        )

    m = sf.num_vars
    # solve with a unit-scale objective; duals scale linearly, so the
    # reported values are simply multiplied back
    c_raw = sf.objective
    c_gamma = max(1.0, float(np.abs(c_raw).max()) if m else 1.0)
    c = c_raw / c_gamma
    by_size = {}
    for blk in sf.blocks:
        by_size.setdefault(blk.size, []).append(blk)
    groups = [
        _SizeGroup(size, blks, m) for size, blks in sorted(by_size.items())
    ]
    dg = sf.diag
    if dg is not None:
        A_dg = sp.csr_matrix(
            (dg.coefs, (dg.pos, dg.varids)), shape=(dg.size, m)
        )
        A_dgT = A_dg.T.tocsr()
        dg_const = dg.const
    E = sf.eq_mat
    nf = sf.num_eq
    d = sf.eq_rhs if nf else np.zeros(0)
    ET = E.T.toarray() if nf else None

    dim = total_dim
    data_scale = 1.0 + max(
        [float(np.abs(g.C).max()) if g.C.size else 0.0 for g in groups]
        + [float(np.abs(dg_const).max()) if dg is not None else 0.0]
        + [float(np.abs(d).max()) if nf else 0.0]
    )
    obj_scale = 1.0 + float(np.abs(c).max()) if m else 1.0

    # infeasible start: identity-like matrices scaled to dominate the data
    eye = {g.s: np.eye(g.s) for g in groups}
    S = {}
    X = {}
    for gi, g in enumerate(groups):
        eta = np.maximum(
            10.0, 1.5 * np.sqrt((g.C ** 2).sum(axis=(1, 2)))
        )
        S[gi] = eta[:, None, None] * eye[g.s]
        X[gi] = max(10.0, obj_scale) * np.tile(eye[g.s], (g.B, 1, 1))
    if dg is not None:
        s_vec = np.full(dg.size, max(10.0, 1.5 * float(np.abs(dg_const).max())))
        x_vec = np.full(dg.size, max(10.0, obj_scale))
    y = np.zeros(m)
    nu = np.zeros(nf)

    K = np.zeros((m + nf, m + nf))
    if nf:
        K[:m, m:] = ET
        K[m:, :m] = ET.T
    # static Tikhonov weight: the linking rows are nearly dependent by
    # construction, and a fixed tiny shift beats rank detection here
    reg = 1e-10 * max(
        1.0,
        float(np.abs(E.data).max()) if nf and E.nnz else 1.0,
        obj_scale,
    )

    best = None
    slow = 0
    status = "max_iter"
    iters_done = 0

    for it in range(1, max_iter + 1):
        iters_done = it
        Rlmi = {gi: g.lmi(y) - S[gi] for gi, g in enumerate(groups)}
        r_dg = (dg_const + A_dg @ y - s_vec) if dg is not None else None
        r_e = d - E @ y if nf else np.zeros(0)
        Ax = np.zeros(m)
        for gi, g in enumerate(groups):
            Ax += g.adjoint(X[gi])
        if dg is not None:
            Ax += A_dgT @ x_vec
        r_d = c - Ax - (ET @ nu if nf else 0.0)

        gap_inner = sum(
            float(np.einsum("bij,bij->", X[gi], S[gi]))
            for gi in range(len(groups))
        )
        if dg is not None:
            gap_inner += float(x_vec @ s_vec)
        mu = gap_inner / dim

        pobj = c_gamma * float(c @ y)
        dobj = c_gamma * float(
            (nu @ d if nf else 0.0)
            - sum(
                float(np.einsum("bij,bij->", X[gi], g.C))
                for gi, g in enumerate(groups)
            )
            - (float(x_vec @ dg_const) if dg is not None else 0.0)
        )
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = max(
            [float(np.abs(r_e).max()) if nf else 0.0]
            + [float(np.abs(Rb).max()) if Rb.size else 0.0 for Rb in Rlmi.values()]
            + [float(np.abs(r_dg).max()) if dg is not None else 0.0]
        ) / data_scale
        dinf = (float(np.abs(r_d).max()) if m else 0.0) / obj_scale

        err = max(relgap, pinf, dinf)
        if best is None or err < best[0]:
            best = (
                err, pobj, dobj, relgap, pinf, dinf, y.copy(),
                nu.copy(),
                {gi: X[gi].copy() for gi in range(len(groups))},
                x_vec.copy() if dg is not None else None,
            )
            slow = 0
        else:
            slow += 1
        if verbose:
            print(
                f"  it {it:3d}  mu {mu:9.2e}  gap {relgap:9.2e} "
                f"pinf {pinf:9.2e}  dinf {dinf:9.2e}"
            )
        if err <= tol:
            status = "optimal"
            break
        if slow >= 12:
            status = "stalled"
            break
        if not np.isfinite(err) or not np.isfinite(mu):
            status = "numerical_issue"
            break
        # complementarity at its numerical floor: further steps only erode
        # feasibility (typical for the paired-inequality equality encoding)
        if mu < 1e-3 * tol * (1.0 + abs(pobj) + abs(dobj)) / dim:
            status = "stalled"
            break
        # divergence heuristics for infeasible/unbounded instances
        if dobj > 1e13 * data_scale and dinf < 1e-6:
            status = "infeasible"
            break
        if pobj < -1e13 * obj_scale and pinf < 1e-6:
            status = "unbounded"
            break

        try:
            nts = {
                gi: _nt_factor_stack(X[gi], S[gi])
                for gi in range(len(groups))
            }
        except np.linalg.LinAlgError:
            status = "numerical_issue"
            break
        if dg is not None:
            w_dg = np.sqrt(x_vec / s_vec)
            lam_dg = np.sqrt(x_vec * s_vec)

        Mmat = np.zeros((m, m))
        for gi, g in enumerate(groups):
            g.add_schur(nts[gi][3], Mmat)
        if dg is not None:
            Mmat += (A_dgT @ sp.diags(w_dg ** 2) @ A_dg).toarray()
        K[:m, :m] = Mmat
        diag_idx = np.arange(m)
        K[diag_idx, diag_idx] += reg
        if nf:
            K[m:, m:] = -reg * np.eye(nf)
        try:
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lu = sla.lu_factor(K, check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            status = "numerical_issue"
            break

        def kkt_solve(rhs1, rhs2):
            rhs = np.concatenate([rhs1, rhs2])
            with np.errstate(all="ignore"):
                sol = sla.lu_solve(lu, rhs, check_finite=False)
                for _ in range(3):
                    r = rhs - K @ sol
                    sol += sla.lu_solve(lu, r, check_finite=False)
            return sol[:m], sol[m:]

        def direction(Rc, rc_dg):
            """Newton system solve for a complementarity target per group."""
            rhs1 = -r_d.copy()
            for gi, g in enumerate(groups):
                W = nts[gi][3]
                rhs1 += g.adjoint(Rc[gi] - W @ Rlmi[gi] @ W)
            if dg is not None:
                rhs1 += A_dgT @ (rc_dg - w_dg ** 2 * r_dg)
            dy, dnu_neg = kkt_solve(rhs1, r_e)
            dnu = -dnu_neg
            dS = {}
            dX = {}
            for gi, g in enumerate(groups):
                W = nts[gi][3]
                dSg = (g.G @ dy).reshape(g.B, g.s, g.s) + Rlmi[gi]
                dSg = 0.5 * (dSg + np.transpose(dSg, (0, 2, 1)))
                dXg = Rc[gi] - W @ dSg @ W
                dS[gi] = dSg
                dX[gi] = 0.5 * (dXg + np.transpose(dXg, (0, 2, 1)))
            if dg is not None:
                ds_dg = A_dg @ dy + r_dg
                dx_dg = rc_dg - w_dg ** 2 * ds_dg
            else:
                ds_dg = dx_dg = None
            return dy, dnu, dS, dX, ds_dg, dx_dg

        def step_lengths(dS, dX, ds_dg, dx_dg):
            ap = ad = np.inf
            for gi in range(len(groups)):
                R, Rinv, lam, _ = nts[gi]
                Ds = np.transpose(R, (0, 2, 1)) @ dS[gi] @ R
                Dx = Rinv @ dX[gi] @ np.transpose(Rinv, (0, 2, 1))
                ap = min(ap, _min_step_stack(lam, Ds))
                ad = min(ad, _min_step_stack(lam, Dx))
            if dg is not None:
                neg = ds_dg < 0
                if neg.any():
                    ap = min(ap, float((s_vec[neg] / -ds_dg[neg]).min()))
                neg = dx_dg < 0
                if neg.any():
                    ad = min(ad, float((x_vec[neg] / -dx_dg[neg]).min()))
            # step fraction approaches 1 as full steps become possible
            gamma = 0.9 + 0.09 * min(1.0, ap, ad)
            return min(1.0, gamma * ap), min(1.0, gamma * ad)

        try:
            Rc_aff = {gi: -X[gi] for gi in range(len(groups))}
            rc_aff = -x_vec if dg is not None else None
            dy_a, dnu_a, dS_a, dX_a, ds_a, dx_a = direction(Rc_aff, rc_aff)
            ap_a, ad_a = step_lengths(dS_a, dX_a, ds_a, dx_a)
            gap_aff = sum(
                float(np.einsum(
                    "bij,bij->",
                    X[gi] + ad_a * dX_a[gi],
                    S[gi] + ap_a * dS_a[gi],
                ))
                for gi in range(len(groups))
            )
            if dg is not None:
                gap_aff += float(
                    (x_vec + ad_a * dx_a) @ (s_vec + ap_a * ds_a)
                )
            mu_aff = max(gap_aff / dim, 0.0)
            sigma = (mu_aff / mu) ** 3
            # keep complementarity commensurate with the remaining objective
            # gap: collapsing mu early leaves the iterate drifting to the
            # optimum through increasingly ill-conditioned systems
            gap_scaled = abs(pobj - dobj) / c_gamma
            sigma_floor = min(0.5, 0.05 * gap_scaled / max(dim * mu, 1e-300))
            sigma = min(0.999, max(1e-12, sigma, sigma_floor))

            # corrector with second-order term in the scaled space
            Rc_corr = {}
            for gi, g in enumerate(groups):
                R, Rinv, lam, _ = nts[gi]
                Ds = np.transpose(R, (0, 2, 1)) @ dS_a[gi] @ R
                Dx = Rinv @ dX_a[gi] @ np.transpose(Rinv, (0, 2, 1))
                T = -0.5 * (Dx @ Ds + Ds @ Dx)
                ar = np.arange(g.s)
                T[:, ar, ar] += sigma * mu - lam ** 2
                G = 2.0 * T / (lam[:, :, None] + lam[:, None, :])
                Rc_corr[gi] = R @ G @ np.transpose(R, (0, 2, 1))
            if dg is not None:
                Dx = dx_a / w_dg
                Ds = w_dg * ds_a
                t_dg = sigma * mu - lam_dg ** 2 - Dx * Ds
                rc_corr = w_dg * t_dg / lam_dg
            else:
                rc_corr = None
            dy, dnu, dS, dX, ds_dg, dx_dg = direction(Rc_corr, rc_corr)
            ap, ad = step_lengths(dS, dX, ds_dg, dx_dg)
            if min(ap, ad) < 0.2 * min(ap_a, ad_a):
                # the second-order correction overshoots on degenerate
                # faces; retreat to plain predictor-plus-centering
                sigma_c = max(sigma, 0.1)
                Rc_cent = {}
                for gi, g in enumerate(groups):
                    R, _, lam, _ = nts[gi]
                    T = np.zeros((g.B, g.s, g.s))
                    ar = np.arange(g.s)
                    T[:, ar, ar] = sigma_c * mu - lam ** 2
                    G = 2.0 * T / (lam[:, :, None] + lam[:, None, :])
                    Rc_cent[gi] = R @ G @ np.transpose(R, (0, 2, 1))
                if dg is not None:
                    rc_cent = w_dg * (sigma_c * mu - lam_dg ** 2) / lam_dg
                else:
                    rc_cent = None
                cand = direction(Rc_cent, rc_cent)
                ap2, ad2 = step_lengths(cand[2], cand[3], cand[4], cand[5])
                if min(ap2, ad2) > min(ap, ad):
                    dy, dnu, dS, dX, ds_dg, dx_dg = cand
                    ap, ad = ap2, ad2
        except (np.linalg.LinAlgError, ValueError):
            status = "numerical_issue"
            break
        if not (np.isfinite(ap) and np.isfinite(ad)):
            status = "numerical_issue"
            break
        if min(ap, ad) < 1e-8:
            status = "stalled"
            break
        y += ap * dy
        nu += ad * dnu
        for gi in range(len(groups)):
            Snew = S[gi] + ap * dS[gi]
            Xnew = X[gi] + ad * dX[gi]
            S[gi] = 0.5 * (Snew + np.transpose(Snew, (0, 2, 1)))
            X[gi] = 0.5 * (Xnew + np.transpose(Xnew, (0, 2, 1)))
        if dg is not None:
            s_vec = s_vec + ap * ds_dg
            x_vec = x_vec + ad * dx_dg

    err, pobj, dobj, relgap, pinf, dinf, y_best, nu_best, X_best, xv_best = best

    # --- polish the best iterate ---------------------------------------
    # Dual side: alternate minimal-norm affine correction with projection
    # onto the PSD cone until (X, nu) is numerically dual feasible; the
    # affine step reuses one Gram factorization of the constraint operator.
    # Primal side: project y onto the equality manifold and round it onto
    # the active face read off the slack eigenstructure (the objective is
    # constant on the optimal face, so rounding removes centering error).
    try:
        gram = np.zeros((m, m))
        for g in groups:
            gram += (g.GT @ g.G).toarray()
        if dg is not None:
            gram += (A_dgT @ A_dg).toarray()
        if nf:
            gram += (E.T @ E).toarray()
        gram[np.arange(m), np.arange(m)] += 1e-12 * max(1.0, gram.max())
        gram_cho = sla.cho_factor(gram, check_finite=False)

        X_fit = {gi: X_best[gi].copy() for gi in range(len(groups))}
        xv_fit = xv_best.copy() if dg is not None else None
        nu_fit = nu_best.copy()
        for _ in range(8):
            Ax = np.zeros(m)
            for gi, g in enumerate(groups):
                Ax += g.adjoint(X_fit[gi])
            if dg is not None:
                Ax += A_dgT @ xv_fit
            r_d_fit = c - Ax - (ET @ nu_fit if nf else 0.0)
            if np.abs(r_d_fit).max() <= 1e-14 * obj_scale:
                break
            lam = sla.cho_solve(gram_cho, r_d_fit, check_finite=False)
            clipped = False
            for gi, g in enumerate(groups):
                upd = X_fit[gi] + (g.G @ lam).reshape(g.B, g.s, g.s)
                upd = 0.5 * (upd + np.transpose(upd, (0, 2, 1)))
                evals, evecs = np.linalg.eigh(upd)
                if evals.min() < 0.0:
                    clipped = True
                evals = np.maximum(evals, 0.0)
                X_fit[gi] = evecs @ (evals[:, :, None] * np.transpose(evecs, (0, 2, 1)))
            if dg is not None:
                xv_fit = xv_fit + A_dg @ lam
                if xv_fit.min() < 0.0:
                    clipped = True
                xv_fit = np.maximum(xv_fit, 0.0)
            if nf:
                nu_fit = nu_fit + E @ lam
            if not clipped:
                break
        def dual_pack(Xd, xvd, nud):
            Ax = np.zeros(m)
            for gi, g in enumerate(groups):
                Ax += g.adjoint(Xd[gi])
            if dg is not None:
                Ax += A_dgT @ xvd
            if nf:
                nud = nud + np.linalg.lstsq(ET, c - Ax - ET @ nud, rcond=None)[0]
                r = c - Ax - ET @ nud
            else:
                r = c - Ax
            base = (
                (nud @ d if nf else 0.0)
                - sum(
                    float(np.einsum("bij,bij->", Xd[gi], g.C))
                    for gi, g in enumerate(groups)
                )
                - (float(xvd @ dg_const) if dg is not None else 0.0)
            )
            return base, r, (float(np.abs(r).max()) if m else 0.0) / obj_scale

        # two dual estimates: the raw best iterate and its PSD-projected
        # counterpart; both get the first-order residual correction later
        duals = [dual_pack(X_best, xv_best, nu_best)]
        duals.append(dual_pack(X_fit, xv_fit, nu_fit))

        y_fit = y_best.copy()
        if nf:
            r_e_fit = d - E @ y_fit
            EE = (E @ E.T).toarray() + 1e-14 * np.eye(nf)
            y_fit += E.T @ np.linalg.solve(EE, r_e_fit)
        pobj_fit = c_gamma * float(c @ y_fit)

        def dual_value(y_ref, pobj_ref):
            # corrected dual estimates; report the one nearest the primal
            # (they coincide at the optimum, and the residual correction
            # makes each estimate accurate to the complementarity term)
            cands = [
                (c_gamma * float(base + r @ y_ref), di)
                for base, r, di in duals
            ]
            return min(cands, key=lambda t: abs(pobj_ref - t[0]))

        # face rounding of the primal point
        y_round = None
        face_rows = []
        face_rhs = []
        for gi, g in enumerate(groups):
            Sb = g.lmi(y_fit)
            evals, evecs = np.linalg.eigh(Sb)
            for b in range(g.B):
                lam_max = max(evals[b, -1], 1e-12)
                act = evecs[b][:, evals[b] < 1e-5 * lam_max]
                if act.shape[1] == 0:
                    continue
                lo, hi = g.row_splits[b], g.row_splits[b + 1]
                Fb = g.Fcat[lo:hi]
                rows_loc = np.tensordot(Fb, act, axes=([2], [0]))
                block_rows = rows_loc.reshape(hi - lo, -1).T
                full = np.zeros((block_rows.shape[0], m))
                full[:, g.vars_list[b]] = block_rows
                face_rows.append(full)
                face_rhs.append(-(g.C[b] @ act).T.ravel())
        if face_rows:
            A_face = np.vstack(face_rows)
            b_face = np.concatenate(face_rhs)
            if nf:
                A_face = np.vstack([A_face, E.toarray()])
                b_face = np.concatenate([b_face, d])
            anchor_w = 1e-6
            A_ls = np.vstack([A_face, anchor_w * np.eye(m)])
            b_ls = np.concatenate([b_face, anchor_w * y_fit])
            y_round = np.linalg.lstsq(A_ls, b_ls, rcond=None)[0]

        candidates = [(y_fit, pobj_fit)]
        if y_round is not None:
            candidates.append((y_round, c_gamma * float(c @ y_round)))

        # among primal-feasible candidates the lowest objective wins: the
        # moment form is a minimization and the dual estimate can carry a
        # small infeasibility bias, so it must not veto a better point
        scored = []
        for y_c, pobj_c in candidates:
            eig_floor = 0.0
            for gi, g in enumerate(groups):
                evs = np.linalg.eigvalsh(g.lmi(y_c))
                eig_floor = max(eig_floor, float(max(0.0, -evs[:, 0].min())))
            if dg is not None:
                dvals = dg_const + A_dg @ y_c
                eig_floor = max(eig_floor, float(max(0.0, -dvals.min())))
            pinf_c = max(
                float(np.abs(d - E @ y_c).max()) if nf else 0.0, eig_floor
            ) / data_scale
            scored.append((y_c, pobj_c, pinf_c))
        feas_tol = max(10.0 * pinf, tol)
        usable = [s for s in scored if s[2] <= feas_tol] or scored[:1]
        y_c, pobj_c, pinf_c = min(usable, key=lambda s: s[1])
        dobj_c, dinf_c = dual_value(y_c, pobj_c)
        relgap_c = abs(pobj_c - dobj_c) / (1.0 + abs(pobj_c) + abs(dobj_c))
        err_c = max(relgap_c, pinf_c, dinf_c)
        if err_c < err or pobj_c < pobj:
            err, pobj, dobj = err_c, pobj_c, dobj_c
            relgap, pinf, dinf = relgap_c, pinf_c, dinf_c
            y_best = y_c
    except (np.linalg.LinAlgError, ValueError):
        pass

    if status in ("max_iter", "stalled", "numerical_issue"):
        if err <= tol:
            status = "optimal"
        elif err <= max(1e-5, 1e3 * tol):
            status = "near_optimal"
        elif status == "stalled":
            status = "numerical_issue"

    return SolveReport(
        status=status,
        primal=pobj,
        dual=dobj,
        gap=relgap,
        iterations=iters_done,
        block_sizes=sf.block_sizes(),
        wall_time=time.perf_counter() - t0,
        pinf=pinf,
        dinf=dinf,
        y=y_best,
    )


# ---------------------------------------------------------------------------
# SDPA sparse format


def _fmt(value):
    return f"{value:.17g}"


def export_sdpa(sf, path):
    """Write the instance in SDPA sparse format (.dat-s).

    Equality rows are encoded as paired entries of a trailing diagonal block
    (negative block size); folded 1x1 blocks land in the same diagonal block.
    Quintuples are emitted in (matno, blkno, i, j) lexicographic order with
    one-based indices, i <= j, 17 significant digits and LF line endings.
    """
    nf = sf.num_eq
    diag_size = (sf.diag.size if sf.diag else 0) + 2 * nf
    sizes = [b.size for b in sf.blocks]
    nblock = len(sizes) + (1 if diag_size else 0)

    entries = []  # (matno, blkno, i, j, value)

    for bi, blk in enumerate(sf.blocks, start=1):
        for r, c, v in zip(blk.const_rows, blk.const_cols, blk.const_vals):
            if v != 0.0:
                entries.append((0, bi, int(r) + 1, int(c) + 1, -v))
        agg = {}
        for r, c, vid, a in zip(blk.rows, blk.cols, blk.varids, blk.coefs):
            key = (int(vid) + 1, bi, int(r) + 1, int(c) + 1)
            agg[key] = agg.get(key, 0.0) + a
        for (mno, bno, i, j), v in agg.items():
            if v != 0.0:
                entries.append((mno, bno, i, j, v))

    if diag_size:
        dbi = len(sizes) + 1
        offset = 0
        if sf.diag:
            dgc = {}
            for p, v, a in zip(sf.diag.pos, sf.diag.varids, sf.diag.coefs):
                key = (int(v) + 1, int(p) + 1)
                dgc[key] = dgc.get(key, 0.0) + a
            for (mno, p), v in dgc.items():
                if v != 0.0:
                    entries.append((mno, dbi, p, p, v))
            for p, v in enumerate(sf.diag.const):
                if v != 0.0:
                    entries.append((0, dbi, p + 1, p + 1, -v))
            offset = sf.diag.size
        if nf:
            coo = sf.eq_mat.tocoo()
            for r, ccol, v in zip(coo.row, coo.col, coo.data):
                if v == 0.0:
                    continue
                p_plus = offset + 2 * int(r) + 1
                p_minus = p_plus + 1
                entries.append((int(ccol) + 1, dbi, p_plus, p_plus, v))
                entries.append((int(ccol) + 1, dbi, p_minus, p_minus, -v))
            for r, b in enumerate(sf.eq_rhs):
                if b != 0.0:
                    p_plus = offset + 2 * r + 1
                    entries.append((0, dbi, p_plus, p_plus, b))
                    entries.append((0, dbi, p_plus + 1, p_plus + 1, -b))

    entries.sort(key=lambda e: e[:4])
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{sf.num_vars}\n")
        fh.write(f"{nblock}\n")
        size_strs = [str(s) for s in sizes]
        if diag_size:
            size_strs.append(str(-diag_size))
        fh.write(" ".join(size_strs) + "\n")
        fh.write(" ".join(_fmt(v) for v in sf.objective) + "\n")
        for mno, bno, i, j, v in entries:
            fh.write(f"{mno} {bno} {i} {j} {_fmt(v)}\n")
    return path


def read_sdpa(path):
    """Parse a .dat-s file back into an SdpStandardForm (no equality rows).

    Diagonal blocks become a DiagBlockData; the file encodes
    min c'x s.t. sum x_l F_l - F0 PSD, which maps to C = -F0 here.
    """
    with open(path) as fh:
        lines = [
            ln for ln in fh.read().splitlines()
            if ln.strip() and not ln.lstrip().startswith(("*", '"'))
        ]
    mdim = int(lines[0].split()[0])
    nblock = int(lines[1].split()[0])
    clean = lines[2].replace("{", " ").replace("}", " ").replace(",", " ")
    sizes = [int(tok) for tok in clean.split()][:nblock]
    cvec = np.array(
        [float(t) for t in
         lines[3].replace("{", " ").replace("}", " ").replace(",", " ").split()]
    )
    if len(cvec) != mdim:
        raise SolveError(f"objective length {len(cvec)} != mDIM {mdim}")

    mat_blocks = [i for i, s in enumerate(sizes) if s > 1]
    diag_blocks = {i: abs(s) for i, s in enumerate(sizes) if s < 0}
    one_blocks = [i for i, s in enumerate(sizes) if s == 1]

    per = {
        i: {"rows": [], "cols": [], "vids": [], "coefs": [],
            "crows": [], "ccols": [], "cvals": []}
        for i in mat_blocks
    }
    diag_offsets = {}
    off = 0
    for i in sorted(list(diag_blocks) + one_blocks):
        diag_offsets[i] = off
        off += diag_blocks.get(i, 1)
    dsize = off
    dpos, dvid, dcoef = [], [], []
    dconst = np.zeros(dsize)

    for ln in lines[4:]:
        toks = ln.split()
        if len(toks) != 5:
            raise SolveError(f"malformed entry line: {ln!r}")
        mno, bno, i, j, v = (
            int(toks[0]), int(toks[1]) - 1, int(toks[2]) - 1,
            int(toks[3]) - 1, float(toks[4]),
        )
        if bno in per:
            tgt = per[bno]
            r, c = min(i, j), max(i, j)
            if mno == 0:
                tgt["crows"].append(r)
                tgt["ccols"].append(c)
                tgt["cvals"].append(-v)
            else:
                tgt["rows"].append(r)
                tgt["cols"].append(c)
                tgt["vids"].append(mno - 1)
                tgt["coefs"].append(v)
        else:
            if i != j:
                raise SolveError("off-diagonal entry in a diagonal block")
            p = diag_offsets[bno] + i
            if mno == 0:
                dconst[p] += -v
            else:
                dpos.append(p)
                dvid.append(mno - 1)
                dcoef.append(v)

    blocks = []
    for i in mat_blocks:
        t = per[i]
        blocks.append(
            PsdBlockData(
                label=f"b{i + 1}",
                size=sizes[i],
                rows=np.asarray(t["rows"], dtype=np.int64),
                cols=np.asarray(t["cols"], dtype=np.int64),
                varids=np.asarray(t["vids"], dtype=np.int64),
                coefs=np.asarray(t["coefs"], dtype=float),
                const_rows=np.asarray(t["crows"], dtype=np.int64),
                const_cols=np.asarray(t["ccols"], dtype=np.int64),
                const_vals=np.asarray(t["cvals"], dtype=float),
            )
        )
    diag = None
    eq_mat = None
    eq_rhs = None
    if dsize:
        # opposed consecutive diagonal entries encode equality rows (our
        # writer's convention); rebuilding them keeps the solve
        # well-conditioned and is an equivalent problem either way
        per_pos = {}
        for p, v, a in zip(dpos, dvid, dcoef):
            per_pos.setdefault(p, {})[v] = per_pos.setdefault(p, {}).get(v, 0.0) + a
        paired = set()
        eq_rows = []
        for p in range(dsize - 1):
            if p in paired or (p + 1) in paired:
                continue
            row = per_pos.get(p)
            mate = per_pos.get(p + 1)
            if not row or not mate or set(row) != set(mate):
                continue
            if all(abs(row[v] + mate[v]) <= 0.0 for v in row) and (
                dconst[p] == -dconst[p + 1]
            ):
                eq_rows.append((row, -dconst[p]))
                paired.add(p)
                paired.add(p + 1)
        if eq_rows:
            data, ri, ci, rb = [], [], [], []
            for r, (row, b) in enumerate(eq_rows):
                for v, a in sorted(row.items()):
                    ri.append(r)
                    ci.append(v)
                    data.append(a)
                rb.append(b)
            eq_mat = sp.csr_matrix((data, (ri, ci)), shape=(len(eq_rows), mdim))
            eq_rhs = np.asarray(rb)
        keep = [i for i, p in enumerate(dpos) if p not in paired]
        remap = {}
        for p in range(dsize):
            if p not in paired:
                remap[p] = len(remap)
        if remap:
            diag = DiagBlockData(
                size=len(remap),
                pos=np.asarray([remap[dpos[i]] for i in keep], dtype=np.int64),
                varids=np.asarray([dvid[i] for i in keep], dtype=np.int64),
                coefs=np.asarray([dcoef[i] for i in keep], dtype=float),
                const=np.asarray(
                    [dconst[p] for p in range(dsize) if p not in paired]
                ),
            )
    return SdpStandardForm(
        num_vars=mdim,
        objective=cvec,
        blocks=blocks,
        diag=diag,
        eq_mat=eq_mat,
        eq_rhs=eq_rhs,
    )


_PHASE_MAP = {
    "pdOPT": "optimal",
    "pdFEAS": "near_optimal",
    "pFEAS": "numerical_issue",
    "dFEAS": "numerical_issue",
    "noINFO": "numerical_issue",
    "pdINF": "infeasible",
    "pINF_dFEAS": "infeasible",
    "pINF_dUNBD": "infeasible",
    "pUNBD_dINF": "unbounded",
    "pFEAS_dINF": "unbounded",
}


def import_sdpa_solution(path):
    """Read an SDPA output file; only objective values and phase are required."""
    with open(path) as fh:
        text = fh.read()
    phase = re.search(r"phase\.value\s*=?\s*(\S+)", text)
    primal = re.search(r"objValPrimal\s*=?\s*([-+0-9.eEdD]+)", text)
    dual = re.search(r"objValDual\s*=?\s*([-+0-9.eEdD]+)", text)
    if primal is None or dual is None:
        raise SolveError(f"no objective values found in {path}")
    pv = float(primal.group(1).replace("D", "e").replace("d", "e"))
    dv = float(dual.group(1).replace("D", "e").replace("d", "e"))
    status = _PHASE_MAP.get(phase.group(1), "numerical_issue") if phase else "numerical_issue"
    return SolveReport(
        status=status,
        primal=pv,
        dual=dv,
        gap=abs(pv - dv) / (1.0 + abs(pv) + abs(dv)),
        iterations=0,
        block_sizes=(),
        wall_time=0.0,
    )
