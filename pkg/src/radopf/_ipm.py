"""Dense primal-dual interior-point solver for cone programs.

Solves the standard conic form

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in K

where K is a product of a nonnegative orthant of dimension ``l`` followed by
second-order (Lorentz) cones of sizes ``q[0], q[1], ...``.  The algorithm is a
homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, so it returns either an optimal primal-dual pair or
a certificate of primal/dual infeasibility.

Sizes here are desk scale (a few hundred rows), so all linear algebra is dense
and the scaled KKT system is refactorized at every iteration.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "numerical_failure"

# step-back factor keeping iterates strictly interior
_STEP = 0.99
_REG_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class _Dims:
    """Cone layout: `l` nonnegative entries, then SOC blocks of sizes `q`."""

    def __init__(self, l: int, q: list[int]):
        self.l = int(l)
        self.q = [int(m) for m in q]
        self.m = self.l + sum(self.q)
        # offsets of each SOC block inside the m-vector
        self.offs = []
        off = self.l
        for size in self.q:
            self.offs.append(off)
            off += size
        # barrier degree: orthant counts per entry, each SOC block counts once
        self.degree = self.l + len(self.q)

    def blocks(self, v):
        for off, size in zip(self.offs, self.q):
            yield v[off:off + size]


def _soc_residual(v):
    return v[0] ** 2 - v[1:] @ v[1:]


def _min_eig(v, dims):
    """Smallest cone 'eigenvalue'; positive iff v is strictly interior."""
    vals = []
    if dims.l:
        vals.append(np.min(v[:dims.l]))
    for blk in dims.blocks(v):
        vals.append(blk[0] - np.linalg.norm(blk[1:]))
    return min(vals) if vals else np.inf


def _unit(dims):
    e = np.zeros(dims.m)
    e[:dims.l] = 1.0
    for off in dims.offs:
        e[off] = 1.0
    return e


def _clip_into_cone(v, dims):
    """Smallest per-block push of v into K (exact for LP, radial for SOC)."""
    out = v.copy()
    if dims.l:
        np.maximum(out[:dims.l], 0.0, out=out[:dims.l])
    for off, size in zip(dims.offs, dims.q):
        nrm = np.linalg.norm(out[off + 1:off + size])
        if out[off] < nrm:
            out[off] = nrm
    return out


def _max_step(v, dv, dims):
    """sup of alpha >= 0 with v + alpha*dv in K (v strictly interior)."""
    alpha = np.inf
    if dims.l:
        neg = dv[:dims.l] < 0
        if np.any(neg):
            alpha = np.min(-v[:dims.l][neg] / dv[:dims.l][neg])
    for off, size in zip(dims.offs, dims.q):
        s0, s1 = v[off], v[off + 1:off + size]
        d0, d1 = dv[off], dv[off + 1:off + size]
        # roots of |s0+a*d0|^2 - |s1+a*d1|^2, positive at a=0
        a = d0 * d0 - d1 @ d1
        bq = 2.0 * (s0 * d0 - s1 @ d1)
        cq = s0 * s0 - s1 @ s1
        step = np.inf
        if abs(a) < 1e-300:
            if bq < 0:
                step = -cq / bq
        else:
            disc = bq * bq - 4.0 * a * cq
            if disc >= 0.0:
                r = np.sqrt(disc)
                roots = [(-bq - r) / (2.0 * a), (-bq + r) / (2.0 * a)]
                pos = [t for t in roots if t > 0]
                if pos and (a < 0 or bq < 0):
                    step = min(pos)
        if d0 < 0:
            step = min(step, -s0 / d0)
        alpha = min(alpha, step)
    return alpha


class _Scaling:
    """Nesterov-Todd scaling W with lam = W z = W^{-1} s.

    Computed fresh from (s, z) each iteration; blow-ups at the cone boundary
    surface as non-finite entries that the caller detects and handles.
    """

    def __init__(self, s, z, dims):
        self.dims = dims
        l = dims.l
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            self.w_lp = np.sqrt(s[:l] / z[:l]) if l else np.empty(0)
            self.lam = np.empty(dims.m)
            self.lam[:l] = np.sqrt(s[:l] * z[:l])
            self.eta = []
            self.wbar = []
            for off, size in zip(dims.offs, dims.q):
                sb = s[off:off + size]
                zb = z[off:off + size]
                rs = _soc_residual(sb)
                rz = _soc_residual(zb)
                sbar = sb / np.sqrt(rs)
                zbar = zb / np.sqrt(rz)
                gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
                wb = sbar.copy()
                wb[0] += zbar[0]
                wb[1:] -= zbar[1:]
                wb /= 2.0 * gamma
                eta = (rs / rz) ** 0.25
                self.eta.append(eta)
                self.wbar.append(wb)
                self.lam[off:off + size] = eta * self._hh(wb, zb)

    @staticmethod
    def _hh(w, v):
        """Apply the hyperbolic Householder matrix of w to v."""
        out = np.empty_like(v)
        t = w[1:] @ v[1:]
        out[0] = w[0] * v[0] + t
        out[1:] = v[1:] + (v[0] + t / (1.0 + w[0])) * w[1:]
        return out

    def apply(self, v):
        """W v."""
        out = np.empty_like(v)
        l = self.dims.l
        out[:l] = self.w_lp * v[:l]
        for k, (off, size) in enumerate(zip(self.dims.offs, self.dims.q)):
            out[off:off + size] = self.eta[k] * self._hh(self.wbar[k], v[off:off + size])
        return out

    def apply_inv(self, v):
        """W^{-1} v, using W^{-1} = J W J / eta^2 per SOC block."""
        out = np.empty_like(v)
        l = self.dims.l
        out[:l] = v[:l] / self.w_lp
        for k, (off, size) in enumerate(zip(self.dims.offs, self.dims.q)):
            blk = v[off:off + size].copy()
            blk[1:] = -blk[1:]
            r = self._hh(self.wbar[k], blk)
            r[1:] = -r[1:]
            out[off:off + size] = r / self.eta[k]
        return out

    def w2_matrix(self):
        """Dense W^2 = W'W (block diagonal)."""
        m = self.dims.m
        W2 = np.zeros((m, m))
        l = self.dims.l
        if l:
            W2[np.arange(l), np.arange(l)] = self.w_lp ** 2
        for k, (off, size) in enumerate(zip(self.dims.offs, self.dims.q)):
            wb = self.wbar[k]
            J = np.diag(np.r_[1.0, -np.ones(size - 1)])
            W2[off:off + size, off:off + size] = self.eta[k] ** 2 * (2.0 * np.outer(wb, wb) - J)
        return W2


def _jprod(u, v, dims):
    """Jordan product u o v on the cone algebra."""
    out = np.empty(dims.m)
    l = dims.l
    out[:l] = u[:l] * v[:l]
    for off, size in zip(dims.offs, dims.q):
        ub, vb = u[off:off + size], v[off:off + size]
        out[off] = ub @ vb
        out[off + 1:off + size] = ub[0] * vb[1:] + vb[0] * ub[1:]
    return out


def _jsolve(lam, v, dims):
    """Solve lam o u = v for u."""
    out = np.empty(dims.m)
    l = dims.l
    out[:l] = v[:l] / lam[:l]
    for off, size in zip(dims.offs, dims.q):
        lb, vb = lam[off:off + size], v[off:off + size]
        det = lb[0] ** 2 - lb[1:] @ lb[1:]
        u0 = (lb[0] * vb[0] - lb[1:] @ vb[1:]) / det
        out[off] = u0
        out[off + 1:off + size] = (vb[1:] - u0 * lb[1:]) / lb[0]
    return out


class _KKT:
    """Factorization of [[0 A' G'],[A 0 0],[G 0 -W2]] with refinement."""

    def __init__(self, A, G, W2, n, p, m):
        self.n, self.p, self.m = n, p, m
        N = n + p + m
        M = np.zeros((N, N))
        if p:
            M[:n, n:n + p] = A.T
            M[n:n + p, :n] = A
        if m:
            M[:n, n + p:] = G.T
            M[n + p:, :n] = G
            M[n + p:, n + p:] = -W2
        self.M = M
        scale = 1.0 + np.max(np.abs(M))
        self.factor = None
        for delta in _REG_LADDER:
            R = M.copy()
            idx = np.arange(N)
            R[idx[:n], idx[:n]] += delta * scale
            R[idx[n:], idx[n:]] -= delta * scale
            try:
                lu = sla.lu_factor(R, check_finite=False)
            except (sla.LinAlgError, ValueError):
                continue
            if np.all(np.isfinite(lu[0])):
                self.factor = lu
                break
        if self.factor is None:
            raise FloatingPointError("KKT factorization failed")

    def solve(self, rhs):
        x = sla.lu_solve(self.factor, rhs, check_finite=False)
        # refine against the unregularized matrix
        for _ in range(2):
            r = rhs - self.M @ x
            x += sla.lu_solve(self.factor, r, check_finite=False)
        return x


def conelp(c, G, h, dims, A=None, b=None,
           feastol=1e-8, gaptol=1e-8, maxiter=200):
    """Solve the conic LP; returns a result dict with status and certificates.

    The objective is normalized internally (costs can be orders of magnitude
    above the constraint data in $-valued problems); duals and objective
    values are scaled back on exit.
    """
    c = np.asarray(c, dtype=float)
    c_scale = max(1.0, np.max(np.abs(c), initial=0.0))
    out = _conelp_core(c / c_scale, G, h, dims, A, b, feastol, gaptol, maxiter)
    for key in ("pobj", "dobj", "gap"):
        if out[key] is not None:
            out[key] *= c_scale
    for key in ("y", "z"):
        if out[key] is not None and out["status"] in (OPTIMAL, FAILED):
            out[key] = out[key] * c_scale
    return out


def _conelp_core(c, G, h, dims, A=None, b=None,
                 feastol=1e-8, gaptol=1e-8, maxiter=200):
    n = c.size
    G = np.asarray(G, dtype=float).reshape(dims.m, n)
    h = np.asarray(h, dtype=float)
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float)
    p, m = A.shape[0], dims.m

    e = _unit(dims)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_h = 1.0 + np.linalg.norm(h)
    norm_c = 1.0 + np.linalg.norm(c)

    def result(status, **kw):
        out = dict(status=status, x=None, y=None, z=None, s=None,
                   pobj=None, dobj=None, pres=np.inf, dres=np.inf,
                   gap=np.inf, relgap=np.inf, iterations=it,
                   certificate=None)
        out.update(kw)
        return out

    it = 0
    # --- initial point: least-squares primal/dual shifted into the cone
    try:
        kkt0 = _KKT(A, G, np.eye(m) if m else np.zeros((0, 0)), n, p, m)
    except FloatingPointError:
        return result(FAILED)
    rhs = np.zeros(n + p + m)
    rhs[n:n + p] = b
    rhs[n + p:] = h
    sol0 = kkt0.solve(rhs)
    x = sol0[:n]
    s_hat = -sol0[n + p:]
    me = _min_eig(s_hat, dims) if m else 1.0
    s = s_hat if me > 0 else s_hat + (1.0 - me) * e

    rhs = np.zeros(n + p + m)
    rhs[:n] = -c
    sol0 = kkt0.solve(rhs)
    y = sol0[n:n + p]
    z_hat = sol0[n + p:]
    me = _min_eig(z_hat, dims) if m else 1.0
    z = z_hat if me > 0 else z_hat + (1.0 - me) * e
    tau, kappa = 1.0, 1.0

    best = None
    best_score = np.inf

    for it in range(1, maxiter + 1):
        # residuals of the self-dual embedding
        hrx = -(A.T @ y) - (G.T @ z) - c * tau
        hry = A @ x - b * tau
        hrz = G @ x + s - h * tau
        hrt = kappa + c @ x + b @ y + h @ z

        mu = (s @ z + tau * kappa) / (dims.degree + 1)

        # convergence metrics of the de-homogenized iterate
        xt, yt, zt, st = x / tau, y / tau, z / tau, s / tau
        if m:
            # the embedding's slack drifts by ~|hrz|/tau; h - Gx is the actual
            # primal slack, adopted after clipping marginal cone violations
            # (the clip size then reappears honestly in the row residual)
            s_rep = _clip_into_cone(h - G @ xt, dims)
            if (np.linalg.norm(G @ xt + s_rep - h)
                    < np.linalg.norm(G @ xt + st - h)):
                st = s_rep
        pres = max(np.linalg.norm(A @ xt - b) / norm_b,
                   np.linalg.norm(G @ xt + st - h) / norm_h)
        dres = np.linalg.norm(A.T @ yt + G.T @ zt + c) / norm_c
        pobj = c @ xt
        dobj = -(b @ yt) - (h @ zt)
        # s'z picks up residual-times-dual cross terms; the objective
        # difference is the cleaner suboptimality estimate once both
        # residuals are small, so use the smaller consistent measure
        gap = min(st @ zt, abs(pobj - dobj))
        relgap = gap / max(1.0, abs(pobj), abs(dobj))

        score = max(pres, dres, relgap)
        if score < best_score:
            best_score = score
            best = (xt.copy(), yt.copy(), zt.copy(), st.copy(),
                    pobj, dobj, pres, dres, gap, relgap)

        if pres <= feastol and dres <= feastol and (relgap <= gaptol or gap <= gaptol * 1e-2):
            return result(OPTIMAL, x=xt, y=yt, z=zt, s=st, pobj=pobj, dobj=dobj,
                          pres=pres, dres=dres, gap=gap, relgap=relgap)

        # infeasibility certificates (rays, not scaled by tau)
        by_hz = b @ y + h @ z
        if by_hz < -1e-12:
            yc, zc = y / (-by_hz), z / (-by_hz)
            if np.linalg.norm(A.T @ yc + G.T @ zc) / norm_c <= feastol:
                return result(INFEASIBLE, y=yc, z=zc, pres=pres, dres=dres,
                              certificate={"kind": "primal", "y": yc, "z": zc})
        cx = c @ x
        if cx < -1e-12:
            xc, sc = x / (-cx), s / (-cx)
            if (np.linalg.norm(A @ xc) / norm_b <= feastol
                    and np.linalg.norm(G @ xc + sc) / norm_h <= feastol):
                return result(UNBOUNDED, x=xc, s=sc, pres=pres, dres=dres,
                              certificate={"kind": "dual", "x": xc, "s": sc})

        try:
            scal = _Scaling(s, z, dims) if m else None
            lam = scal.lam if m else np.empty(0)
            W2 = scal.w2_matrix() if m else np.zeros((0, 0))
            if m and not np.all(np.isfinite(W2)):
                raise FloatingPointError("scaling blow-up at the boundary")
            kkt = _KKT(A, G, W2, n, p, m)
        except FloatingPointError:
            break

        rhs_v = np.concatenate([-c, b, h])
        v = kkt.solve(rhs_v)
        vx, vy, vz = v[:n], v[n:n + p], v[n + p:]
        denom = c @ vx + b @ vy + h @ vz - kappa / tau

        def newton(bx, by, bz, bt, bs, bk):
            g = _jsolve(lam, bs, dims) if m else np.empty(0)
            bz_t = bz - (scal.apply(g) if m else 0.0)
            u = kkt.solve(np.concatenate([-bx, by, bz_t]))
            ux, uy, uz = u[:n], u[n:n + p], u[n + p:]
            dtau = (bt - bk / tau - c @ ux - b @ uy - h @ uz) / denom
            dx = ux + dtau * vx
            dy = uy + dtau * vy
            dz = uz + dtau * vz
            ds = scal.apply(g - scal.apply(dz)) if m else np.empty(0)
            dk = (bk - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dk

        # predictor
        lam2 = _jprod(lam, lam, dims) if m else np.empty(0)
        dxa, dya, dza, dsa, dta, dka = newton(
            -hrx, -hry, -hrz, -hrt, -lam2, -tau * kappa)
        alpha = _max_step(s, dsa, dims) if m else np.inf
        alpha = min(alpha, _max_step(z, dza, dims) if m else np.inf)
        if dta < 0:
            alpha = min(alpha, -tau / dta)
        if dka < 0:
            alpha = min(alpha, -kappa / dka)
        a_aff = min(1.0, alpha)
        mu_aff = ((s + a_aff * dsa) @ (z + a_aff * dza)
                  + (tau + a_aff * dta) * (kappa + a_aff * dka)) / (dims.degree + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        corr = _jprod(scal.apply_inv(dsa), scal.apply(dza), dims) if m else np.empty(0)
        bs = -lam2 - corr + sigma * mu * e
        bk = -tau * kappa - dta * dka + sigma * mu
        f = 1.0 - sigma
        dx, dy, dz, ds, dt, dk = newton(
            -f * hrx, -f * hry, -f * hrz, -f * hrt, bs, bk)

        def feasible_step(ds, dz, dt, dk):
            alpha = _max_step(s, ds, dims) if m else np.inf
            alpha = min(alpha, _max_step(z, dz, dims) if m else np.inf)
            if dt < 0:
                alpha = min(alpha, -tau / dt)
            if dk < 0:
                alpha = min(alpha, -kappa / dk)
            return min(1.0, _STEP * alpha)

        step = feasible_step(ds, dz, dt, dk)
        if step < 1e-4:
            # blocked by the corrector near a degenerate face: retake a plain
            # centering-biased step without the second-order term
            sigma2 = max(sigma, 0.5)
            f = 1.0 - sigma2
            dx2, dy2, dz2, ds2, dt2, dk2 = newton(
                -f * hrx, -f * hry, -f * hrz, -f * hrt,
                -lam2 + sigma2 * mu * e, -tau * kappa + sigma2 * mu)
            step2 = feasible_step(ds2, dz2, dt2, dk2)
            if step2 > step:
                dx, dy, dz, ds, dt, dk = dx2, dy2, dz2, ds2, dt2, dk2
                step = step2
        if not np.isfinite(step) or step <= 1e-10:
            break

        x += step * dx
        y += step * dy
        z += step * dz
        s += step * ds
        tau += step * dt
        kappa += step * dk

    xt, yt, zt, st, pobj, dobj, pres, dres, gap, relgap = best
    return result(FAILED, x=xt, y=yt, z=zt, s=st, pobj=pobj, dobj=dobj,
                  pres=pres, dres=dres, gap=gap, relgap=relgap)


def make_dims(l, q):
    return _Dims(l, q)
