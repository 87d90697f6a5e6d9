"""Weighted Lichnerowicz operator on U(2)-symmetric 2-tensors.

A U(2)-symmetric symmetric 2-tensor has orthonormal-frame components
(h00, h11, h33, h03) with h22 = h11 and h03 odd across the bolt, the rest
even; smoothness at the bolt additionally couples h00(0) = h33(0).  The
operator

    L h = Delta h - nabla_{grad f} h + 2 Rm(h)

is discretized through its quadratic form on a cell-centred grid, so the
matrix is symmetric in the weighted inner product

    (S, T) = int (S00 T00 + 2 S11 T11 + S33 T33 + 2 S03 T03) e^{-f} b^2 c ds

to machine precision (orbit volume normalized to one).  Because the frame
is parallel along radial geodesics, nabla_{e_0} acts as a plain derivative
on components while the orbital directions act algebraically through the
connection coefficients; no first-order component mixing appears.  The
domain is truncated where the Gaussian weight is negligible, with
homogeneous Dirichlet data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded

MULT = np.array([1.0, 2.0, 1.0, 2.0])
PAIR_SLOTS = ((0, 0), (1, 1), (3, 3), (0, 3))


class AssemblyError(RuntimeError):
    pass


class ParityError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass
class SymTensorU2:
    """Frame components of a U(2)-symmetric 2-tensor on a radial grid."""

    s: np.ndarray
    h00: np.ndarray
    h11: np.ndarray
    h33: np.ndarray
    h03: np.ndarray

    def stack(self):
        return np.stack([self.h00, self.h11, self.h33, self.h03])

    @classmethod
    def from_stack(cls, s, v):
        return cls(s=s, h00=v[0], h11=v[1], h33=v[2], h03=v[3])

    def frame_norm(self):
        """Pointwise |h|_g in the orthonormal frame."""
        return np.sqrt(self.h00**2 + 2 * self.h11**2 + self.h33**2 + 2 * self.h03**2)


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigentensors: list
    residuals: np.ndarray
    lambda_star: float
    K: int


def _pack(v):
    """(4, n) component stack -> (n, 4, 4) symmetric frame matrices."""
    n = v.shape[1]
    H = np.zeros((n, 4, 4))
    H[:, 0, 0] = v[0]
    H[:, 1, 1] = v[1]
    H[:, 2, 2] = v[1]
    H[:, 3, 3] = v[2]
    H[:, 0, 3] = H[:, 3, 0] = v[3]
    return H


def connection_coefficients(b, c, bs, cs):
    """Gam[k, i, j](s) with nabla_{e_k} e_i = Gam[k, i, j] e_j.

    Orthonormal frame e0 = d/ds, e1, e2 tangent to the base sphere, e3 the
    Hopf fiber; nabla_{e_0} of the frame vanishes.
    """
    n = b.size
    G = np.zeros((4, 4, 4, n))
    A = bs / b
    C = cs / c
    q = c / b**2
    p = 2.0 / c - q
    G[1, 0, 1] = A
    G[1, 1, 0] = -A
    G[1, 2, 3] = q
    G[1, 3, 2] = -q
    G[2, 0, 2] = A
    G[2, 2, 0] = -A
    G[2, 1, 3] = -q
    G[2, 3, 1] = q
    G[3, 0, 3] = C
    G[3, 3, 0] = -C
    G[3, 1, 2] = p
    G[3, 2, 1] = -p
    return G


def riemann_array(K01, K03, K12, K13, W):
    """Full frame R[i,j,k,l] with R(e_i,e_j,e_j,e_i) = K_ij conventions."""
    n = K01.size
    R = np.zeros((n, 4, 4, 4, 4))
    Ktab = np.zeros((n, 4, 4))
    for (i, j), val in (((0, 1), K01), ((0, 2), K01), ((0, 3), K03),
                        ((1, 2), K12), ((1, 3), K13), ((2, 3), K13)):
        Ktab[:, i, j] = Ktab[:, j, i] = val
    for i in range(4):
        for j in range(4):
            if i != j:
                R[:, i, j, j, i] = Ktab[:, i, j]
                R[:, i, j, i, j] = -Ktab[:, i, j]

    def set_mixed(a, b, cc, d, val):
        for (p, q, r, t, sg) in ((a, b, cc, d, 1), (b, a, cc, d, -1),
                                 (a, b, d, cc, -1), (b, a, d, cc, 1),
                                 (cc, d, a, b, 1), (d, cc, a, b, -1),
                                 (cc, d, b, a, -1), (d, cc, b, a, 1)):
            R[:, p, q, r, t] = sg * val

    set_mixed(0, 1, 2, 3, W)
    set_mixed(0, 2, 3, 1, W)
    set_mixed(0, 3, 1, 2, -2 * W)
    return R


def _orbital_maps(G):
    """L_k as (n, 4, 4, 4comp) arrays: (nabla_{e_k} h)_{ij} for unit comps."""
    n = G.shape[3]
    maps = []
    for k in (1, 2, 3):
        Mk = np.zeros((n, 4, 4, 4))
        for comp in range(4):
            e = np.zeros((4, n))
            e[comp] = 1.0
            H = _pack(e)
            T = (-np.einsum("imn,nmj->nij", G[k], H)
                 - np.einsum("jmn,nim->nij", G[k], H))
            Mk[:, :, :, comp] = T
        maps.append(Mk)
    return maps


def _rm_map(R):
    """(Rm h) as a (n, 4, 4) matrix acting on component stacks."""
    n = R.shape[0]
    M = np.zeros((n, 4, 4))
    for comp in range(4):
        e = np.zeros((4, n))
        e[comp] = 1.0
        out = np.einsum("niklj,nkl->nij", R, _pack(e))
        for a, (i, j) in enumerate(PAIR_SLOTS):
            M[:, a, comp] = out[:, i, j]
    return M


class LichOperator:
    """Discrete weighted Lichnerowicz operator over one background.

    Cell-centred nodes s_i = (i + 1/2) h on [0, s_max]; Dirichlet data at
    s_max, parity ghosts at the axis.  ``band`` stores the lower band of
    the symmetric form matrix; ``weights`` is the diagonal mass matrix of
    the weighted inner product.
    """

    HALF_BW = 4

    def __init__(self, bg, n_nodes=900, s_max=14.0):
        self.bg = bg
        self.n = int(n_nodes)
        self.s_max = float(s_max)
        self.h = self.s_max / self.n
        self.s = (np.arange(self.n) + 0.5) * self.h
        self._assemble()

    # -- assembly --------------------------------------------------------
    def _background(self, s):
        b, c, bs, cs, bss, css, fs = self.bg.eval(s)
        f = self.bg.f_of(s)
        return b, c, bs, cs, bss, css, fs, f

    def _assemble(self):
        n, h, s = self.n, self.h, self.s
        b, c, bs, cs, bss, css, fs, f = self._background(s)
        u = c / b
        w = b * b * c * np.exp(-f)
        smid = s[:-1] + h / 2
        bm, cm, *_ , fm = self._background(smid)
        wmid = bm * bm * cm * np.exp(-fm)

        G = connection_coefficients(b, c, bs, cs)
        self._G = G
        orb = _orbital_maps(G)
        self._orb = orb
        K01 = -bss / b
        K03 = -css / c
        K12 = (4 - 3 * u**2 - bs**2) / b**2
        K13 = c**2 / b**4 - bs * cs / (b * c)
        W = (cs - u * bs) / b**2
        R = riemann_array(K01, K03, K12, K13, W)
        self._Riem = R
        Rm = _rm_map(R)
        self._Rm = Rm

        # orbital quadratic form (full Frobenius already carries multiplicities)
        Gq = np.zeros((n, 4, 4))
        for Mk in orb:
            Gq += np.einsum("nija,nijb->nab", Mk, Mk)
        alg = -Gq + 2 * MULT[:, None] * Rm
        asym = float(np.max(np.abs(alg - alg.transpose(0, 2, 1))))
        scale = float(np.max(np.abs(alg))) + 1e-300
        if asym > 1e-12 * scale:
            raise AssemblyError(
                f"algebraic block asymmetry {asym:.3e} exceeds tolerance; "
                "connection or curvature data inconsistent")
        alg = 0.5 * (alg + alg.transpose(0, 2, 1))

        ndof = 4 * n
        band = np.zeros((self.HALF_BW + 1, ndof))
        idx = np.arange(n)

        def add_diag(j, val):
            band[0, j] += val

        # gradient term: cells between nodes
        for comp in range(4):
            mcell = MULT[comp] * wmid / h
            jl = 4 * idx[:-1] + comp
            jr = 4 * idx[1:] + comp
            np.add.at(band[0], jl, -mcell)
            np.add.at(band[0], jr, -mcell)
            np.add.at(band[4], jl, mcell)
        # axis strip: only the odd component h03 carries a gradient there
        b0, c0, *_ , f0 = self._background(np.array([h / 4]))
        w0 = float(b0 * b0 * c0 * np.exp(-f0))
        add_diag(3, -MULT[3] * w0 * (2.0 / h) ** 2 * (h / 2))
        # outer strip: Dirichlet at s_max
        for comp in range(4):
            add_diag(4 * (n - 1) + comp,
                     -MULT[comp] * w[-1] * (2.0 / h) ** 2 * (h / 2))
        # algebraic terms
        for a in range(4):
            for bcomp in range(a, 4):
                val = alg[:, a, bcomp] * w * h
                if a == bcomp:
                    np.add.at(band[0], 4 * idx + a, val)
                else:
                    np.add.at(band[bcomp - a], 4 * idx + a, val)

        self.band = band
        self.weights = np.repeat(w * h, 4) * np.tile(MULT, n)
        self.w_node = w

    # -- linear algebra ---------------------------------------------------
    def _check_grid(self, T: SymTensorU2):
        if T.s.shape != self.s.shape or not np.allclose(T.s, self.s):
            raise GridMismatchError("tensor grid does not match the operator grid")

    def _form_matvec(self, x):
        y = self.band[0] * x
        for d in range(1, self.HALF_BW + 1):
            y[d:] += self.band[d, :-d] * x[:-d]
            y[:-d] += self.band[d, :-d] * x[d:]
        return y

    def parity_check(self, T: SymTensorU2, tol=0.2):
        """Flag gross parity violations near the axis.

        The odd component must vanish at s = 0 and smoothness couples
        h00(0) = h33(0); both are tested by even extrapolation of the
        first two nodes against the tensor's overall scale.
        """
        s0, s1 = self.s[0], self.s[1]
        scale = float(np.max(T.frame_norm())) + 1e-300

        def extrap(arr):
            return (arr[0] * s1**2 - arr[1] * s0**2) / (s1**2 - s0**2)

        bad_odd = abs(extrap(T.h03)) > tol * scale
        bad_pair = abs(extrap(T.h00) - extrap(T.h33)) > 2 * tol * scale
        if bad_odd or bad_pair:
            raise ParityError("tensor violates the bolt parity conditions")

    def apply(self, T: SymTensorU2) -> SymTensorU2:
        self._check_grid(T)
        self.parity_check(T)
        x = T.stack().T.reshape(-1)
        y = self._form_matvec(x) / self.weights
        v = y.reshape(self.n, 4).T
        return SymTensorU2.from_stack(self.s, v)

    def inner(self, S: SymTensorU2, T: SymTensorU2) -> float:
        self._check_grid(S)
        self._check_grid(T)
        return float(np.sum(self.weights * (S.stack().T.reshape(-1) * T.stack().T.reshape(-1))))

    def norm(self, T: SymTensorU2) -> float:
        return np.sqrt(max(self.inner(T, T), 0.0))

    def eigensolve(self, count=8) -> SpectralResult:
        if count < 2:
            raise ValueError("need at least two modes")
        ndof = 4 * self.n
        sq = np.sqrt(self.weights)
        bandN = np.empty_like(self.band)
        bandN[0] = self.band[0] / (sq * sq)
        for d in range(1, self.HALF_BW + 1):
            bandN[d, :-d] = self.band[d, :-d] / (sq[d:] * sq[:-d])
            bandN[d, -d:] = 0.0
        vals, vecs = eig_banded(bandN, lower=True,
                                select="i", select_range=(ndof - count, ndof - 1))
        order = np.argsort(vals)[::-1]
        vals = vals[order]
        vecs = vecs[:, order]
        tensors = []
        residuals = np.empty(count)
        for k in range(count):
            x = vecs[:, k] / sq
            nrm = np.sqrt(np.sum(self.weights * x * x))
            x = x / nrm
            v = x.reshape(self.n, 4).T
            # deterministic orientation, anchored at the bolt: positive
            # h11 there means a positive coefficient grows the bolt
            probe = float(np.mean(v[1, :8]))
            if abs(probe) < 1e-10 * float(np.max(np.abs(x))):
                j = int(np.argmax(np.abs(x)))
                probe = x[j]
            if probe < 0:
                v = -v
            T = SymTensorU2.from_stack(self.s, v)
            tensors.append(T)
            Lx = self._form_matvec(x) / self.weights
            residuals[k] = np.sqrt(np.sum(self.weights * (Lx - vals[k] * x) ** 2))
        K = int(np.sum(vals >= 0.0))
        lam_star = _choose_lambda_star(vals, K)
        return SpectralResult(eigenvalues=vals, eigentensors=tensors,
                              residuals=residuals, lambda_star=lam_star, K=K)

    def project(self, T: SymTensorU2, result: SpectralResult):
        """Coefficients against the basis and the (unstable, stable) split."""
        self._check_grid(T)
        coeffs = np.array([self.inner(T, hj) for hj in result.eigentensors])
        x = T.stack()
        hu = np.zeros_like(x)
        hs = np.zeros_like(x)
        for j, hj in enumerate(result.eigentensors):
            target = hu if j < result.K else hs
            target += coeffs[j] * hj.stack()
        rem = x - hu - hs
        rem_T = SymTensorU2.from_stack(self.s, rem)
        return coeffs, SymTensorU2.from_stack(self.s, hu), \
            SymTensorU2.from_stack(self.s, hs), self.norm(rem_T)

    # -- covariant derivative norms (for the box C^1/C^2 bounds) ---------
    def gradient(self, T: SymTensorU2):
        """(nabla h) as (4dir, n, 4, 4) frame array."""
        self._check_grid(T)
        v = T.stack()
        n = self.n
        dv = np.empty_like(v)
        h = self.h
        dv[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
        par = np.array([1.0, 1.0, 1.0, -1.0])
        ghost = par[:, None] * v[:, :1]
        dv[:, 0] = (v[:, 1] - ghost[:, 0]) / (2 * h)
        dv[:, -1] = (0.0 - v[:, -2]) / (2 * h)
        out = np.zeros((4, n, 4, 4))
        out[0] = _pack(dv)
        H = _pack(v)
        for k in (1, 2, 3):
            out[k] = (-np.einsum("imn,nmj->nij", self._G[k], H)
                      - np.einsum("jmn,nim->nij", self._G[k], H))
        return out

    def grad_norm(self, T: SymTensorU2):
        g = self.gradient(T)
        return np.sqrt(np.einsum("knij,knij->n", g, g))

    def hessian_norm(self, T: SymTensorU2):
        """Pointwise |nabla^2 h| by differentiating the gradient 3-tensor.

        nabla_m (nabla h)[k,i,j] = delta_{m0} d_s g[k,i,j] - Gam[m,k,l] g[l,i,j]
                                   - Gam[m,i,l] g[k,l,j] - Gam[m,j,l] g[k,i,l]
        """
        g = self.gradient(T)          # (k, n, i, j)
        n, h = self.n, self.h
        dgs = np.empty_like(g)
        dgs[:, 1:-1] = (g[:, 2:] - g[:, :-2]) / (2 * h)
        dgs[:, 0] = (g[:, 1] - g[:, 0]) / h
        dgs[:, -1] = (g[:, -1] - g[:, -2]) / h
        G = self._G
        out2 = np.zeros((4, 4, n, 4, 4))
        out2[0] = dgs
        for m in (1, 2, 3):
            t1 = -np.einsum("kln,lnij->knij", G[m], g)
            t2 = -np.einsum("iln,knlj->knij", G[m], g)
            t3 = -np.einsum("jln,knil->knij", G[m], g)
            out2[m] = t1 + t2 + t3
        return np.sqrt(np.einsum("mknij,mknij->n", out2, out2))


def _choose_lambda_star(vals, K):
    """A negative non-eigenvalue between lambda_K and lambda_{K+1}."""
    if K == 0 or K >= vals.size:
        return -0.5
    lo, hi = vals[K], vals[K - 1]
    mid = 0.5 * (lo + hi)
    if mid >= 0.0:
        mid = 0.5 * lo
    return float(mid)


# ----------------------------------------------------------------------
# background-level convenience API with a small operator cache
# ----------------------------------------------------------------------

def _operator(bg, n_nodes=900, s_max=14.0) -> LichOperator:
    cache = getattr(bg, "_lich_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(bg, "_lich_cache", cache)
    key = (int(n_nodes), float(s_max))
    if key not in cache:
        cache[key] = LichOperator(bg, n_nodes, s_max)
    return cache[key]


def apply_L(bg, h: SymTensorU2, n_nodes=900, s_max=14.0) -> SymTensorU2:
    return _operator(bg, n_nodes, s_max).apply(h)


def inner_f(bg, S: SymTensorU2, T: SymTensorU2, n_nodes=900, s_max=14.0) -> float:
    return _operator(bg, n_nodes, s_max).inner(S, T)


def eigensolve(bg, count=8, n_nodes=900, s_max=14.0) -> SpectralResult:
    return _operator(bg, n_nodes, s_max).eigensolve(count)


def project(bg, h: SymTensorU2, result: SpectralResult, n_nodes=900, s_max=14.0):
    return _operator(bg, n_nodes, s_max).project(h, result)


def ricci_tensor(bg, n_nodes=900, s_max=14.0) -> SymTensorU2:
    """Ric of the background as a U(2) tensor on the operator grid."""
    op = _operator(bg, n_nodes, s_max)
    s = op.s
    b, c, bs, cs, bss, css, fs = bg.eval(s)
    u = c / b
    K01 = -bss / b
    K03 = -css / c
    K12 = (4 - 3 * u**2 - bs**2) / b**2
    K13 = c**2 / b**4 - bs * cs / (b * c)
    return SymTensorU2(s=s, h00=2 * K01 + K03, h11=K01 + K12 + K13,
                       h33=K03 + 2 * K13, h03=np.zeros_like(s))


def hessian_f(bg, n_nodes=900, s_max=14.0) -> SymTensorU2:
    """Hess f of the background; f_ss from the radial soliton relation."""
    op = _operator(bg, n_nodes, s_max)
    s = op.s
    b, c, bs, cs, bss, css, fs = bg.eval(s)
    ric00 = 2 * (-bss / b) + (-css / c)
    fss = bg.lam - ric00
    return SymTensorU2(s=s, h00=fss, h11=fs * bs / b, h33=fs * cs / c,
                       h03=np.zeros_like(s))
