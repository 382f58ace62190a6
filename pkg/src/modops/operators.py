"""Domains, graphs, adjoints, bounded transforms, and the restriction /
extension calculus on finite-dimensional spaces.

Operators carry an explicit domain as an orthonormal frame; all domain
comparisons are subspace comparisons through projections.  The bounded
transform ``z = T (1 + T*T)^{-1/2}`` is computed through the Hermitian
eigendecomposition of ``1 + T*T`` restricted to the domain, which also serves
operators given on a proper (truncation) subspace.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement
from .errors import (
    ExtensionIdentityViolated,
    NotCoisometry,
    NotDense,
    NotIsometry,
    NotRestriction,
    RestrictionIdentityViolated,
    SingularResolvent,
)
from .tolerances import RESOLVENT_COND_MAX, TOL_ALG, TOL_GAP, TOL_GRAPH

__all__ = [
    "DomainedOperator",
    "ZTransform",
    "GraphPair",
    "InclusionResult",
    "WitnessResult",
    "z_transform",
    "from_z",
    "adjoint_via_graph",
    "graph_inclusion",
    "restrict_via_isometry",
    "extend_via_coisometry",
    "restriction_witness",
    "hermitian_sqrt",
    "orthonormal_frame",
]


def _as_matrix(u):
    if isinstance(u, AlgebraElement):
        return u.direct_sum_matrix()
    return np.asarray(u, dtype=complex)


def hermitian_sqrt(m, inverse=False, floor=0.0):
    """Principal square root (or inverse square root) of a Hermitian PSD matrix."""
    lam, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    lam = np.clip(lam, floor, None)
    vals = 1.0 / np.sqrt(lam) if inverse else np.sqrt(lam)
    return (v * vals) @ v.conj().T


def orthonormal_frame(columns, tol=1e-12):
    """Orthonormal basis of the column span, rank-truncated at ``tol`` (relative)."""
    cols = np.atleast_2d(np.asarray(columns, dtype=complex))
    if cols.size == 0:
        return np.zeros((cols.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((cols.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank]


class DomainedOperator:
    """A linear action together with an orthonormal frame spanning its domain.

    The action matrix is defined on the whole ambient space but is read only
    on the domain.  At finite scale a dense domain is a full frame.
    """

    __slots__ = ("action", "frame", "ambient_dim")

    def __init__(self, action, frame=None):
        action = np.array(action, dtype=complex)
        if action.ndim != 2 or action.shape[0] != action.shape[1]:
            raise ValueError("action must be a square matrix")
        n = action.shape[0]
        if frame is None:
            frame = np.eye(n, dtype=complex)
        frame = np.array(frame, dtype=complex)
        if frame.ndim != 2 or frame.shape[0] != n:
            raise ValueError("frame rows must match the ambient dimension")
        gram = frame.conj().T @ frame
        if not np.allclose(gram, np.eye(frame.shape[1]), atol=1e-10):
            raise ValueError("frame columns must be orthonormal")
        action.flags.writeable = False
        frame.flags.writeable = False
        self.action = action
        self.frame = frame
        self.ambient_dim = n

    @classmethod
    def full(cls, action):
        return cls(action, None)

    @property
    def domain_dim(self):
        return self.frame.shape[1]

    @property
    def is_full_domain(self):
        return self.domain_dim == self.ambient_dim

    def domain_projector(self):
        return self.frame @ self.frame.conj().T

    def restricted(self):
        """Action composed with the domain frame: ambient x domain matrix."""
        return self.action @ self.frame

    def apply(self, v):
        return self.action @ np.asarray(v, dtype=complex)

    def contains(self, v, tol=TOL_GRAPH):
        v = np.asarray(v, dtype=complex)
        res = np.linalg.norm(v - self.frame @ (self.frame.conj().T @ v))
        return res <= tol * (1.0 + np.linalg.norm(v)), float(res)

    def graph_frame(self):
        """Orthonormal frame of the graph inside ambient + ambient."""
        return orthonormal_frame(np.vstack([self.frame, self.restricted()]))

    def __repr__(self):
        return (f"DomainedOperator(ambient={self.ambient_dim}, "
                f"domain={self.domain_dim})")


@dataclass(frozen=True)
class GraphPair:
    """A candidate member (left, right) of an operator graph."""

    left: np.ndarray
    right: np.ndarray

    def in_graph(self, T: DomainedOperator, tol=TOL_GRAPH):
        ok, _ = T.contains(self.left, tol)
        if not ok:
            return False
        res = np.linalg.norm(T.apply(self.left) - self.right)
        return res <= tol * (1.0 + np.linalg.norm(self.right))


class ZTransform:
    """A contraction together with the density certificate for (1 - z*z)."""

    __slots__ = ("z", "density_gap")

    def __init__(self, z, tol=TOL_ALG):
        z = np.asarray(z, dtype=complex)
        nz = np.linalg.norm(z, 2)
        if nz > 1.0 + tol:
            raise ValueError(f"not a contraction: ||z|| = {nz:.6f}")
        gap = float(np.linalg.eigvalsh(np.eye(z.shape[1]) - z.conj().T @ z)[0])
        self.z = z
        self.density_gap = max(gap, 0.0)

    def is_regular_certificate(self, tol_gap=TOL_GAP):
        return self.density_gap > tol_gap

    def __repr__(self):
        return f"ZTransform(n={self.z.shape[0]}, gap={self.density_gap:.3e})"


def z_transform(T: DomainedOperator) -> ZTransform:
    """Bounded transform ``z = T (1 + T*T)^{-1/2}`` of a domained operator.

    For a proper (truncation) domain the transform is assembled from the
    restricted action ``B = T . frame``: ``z = B (1 + B*B)^{-1/2} frame*``,
    which vanishes on the orthogonal complement of the domain.
    """
    B = T.restricted()
    d = T.domain_dim
    H = np.eye(d) + B.conj().T @ B
    lam, v = np.linalg.eigh(H)
    if lam[-1] / lam[0] > RESOLVENT_COND_MAX:
        raise SingularResolvent(
            f"condition number of (1 + T*T) is {lam[-1] / lam[0]:.3e}")
    inv_sqrt = (v / np.sqrt(lam)) @ v.conj().T
    return ZTransform(B @ inv_sqrt @ T.frame.conj().T)


def from_z(zt: ZTransform, tol_gap=TOL_GAP) -> DomainedOperator:
    """Inverse of the bounded transform: ``T = z (1 - z*z)^{-1/2}``.

    Requires a positive density gap; the returned operator carries the frame
    spanning the range of ``(1 - z*z)^{1/2}``, which is everything once the
    gap clears tolerance.
    """
    if zt.density_gap <= tol_gap:
        raise NotDense(f"density gap {zt.density_gap:.3e} <= {tol_gap:.1e}")
    z = zt.z
    R2 = np.eye(z.shape[1]) - z.conj().T @ z
    return DomainedOperator.full(z @ hermitian_sqrt(R2, inverse=True, floor=tol_gap))


def adjoint_via_graph(T: DomainedOperator) -> DomainedOperator:
    """Adjoint computed from the orthogonal complement of the graph.

    The complement of the graph in ambient + ambient is pulled back through
    the flip ``a + b -> b + (-a)``; the result is the operator part of the
    adjoint relation.  With a full (dense-at-finite-scale) domain this equals
    the conjugate transpose; with a proper domain the relation acquires a
    multivalued part supported on the domain's orthocomplement, which is
    projected away.
    """
    n = T.ambient_dim
    g = T.graph_frame()
    u, _, _ = np.linalg.svd(g, full_matrices=True)
    comp = u[:, g.shape[1]:]
    # flip inverse: (w1, w2) -> (-w2, w1)
    X = -comp[n:, :]
    Y = comp[:n, :]
    ux, sx, vxh = np.linalg.svd(X, full_matrices=False)
    cutoff = 1e-12 * (sx[0] if sx.size and sx[0] > 0 else 1.0)
    rank = int(np.sum(sx > cutoff))
    dom = ux[:, :rank]
    coeff = vxh.conj().T[:, :rank] / sx[:rank]
    act = Y @ coeff @ dom.conj().T
    mul = orthonormal_frame(Y @ vxh.conj().T[:, rank:])
    if mul.shape[1]:
        act = act - mul @ (mul.conj().T @ act)
    return DomainedOperator(act, dom)


@dataclass(frozen=True)
class InclusionResult:
    """Outcome of a graph-inclusion test S within T."""

    included: bool
    residual: float

    def __bool__(self):
        return self.included


def graph_inclusion(S: DomainedOperator, T: DomainedOperator,
                    tol=TOL_GRAPH) -> InclusionResult:
    """Check ``S`` is a restriction of ``T``: every domain frame vector of
    ``S`` lies in the domain of ``T`` and the actions agree there."""
    if S.ambient_dim != T.ambient_dim:
        raise ValueError("operators must share the ambient space")
    FS = S.frame
    if FS.shape[1] == 0:
        return InclusionResult(True, 0.0)
    mem = FS - T.frame @ (T.frame.conj().T @ FS)
    mem_res = np.linalg.norm(mem, axis=0)
    SD = S.action @ FS
    act_res = np.linalg.norm(T.action @ FS - SD, axis=0)
    scales = 1.0 + np.linalg.norm(SD, axis=0)
    # decision is relative-guarded; the reported residual is absolute
    ok = bool(np.all(mem_res <= 2.0 * tol) and np.all(act_res <= tol * scales))
    worst = float(max(mem_res.max(), act_res.max()))
    return InclusionResult(ok, worst)


def _check_sqrt_identity(left_inner, right, tol, exc, label):
    lhs = hermitian_sqrt(left_inner)
    residual = np.linalg.norm(lhs - right, 2)
    scale = 1.0 + np.linalg.norm(right, 2)
    if residual > tol * scale:
        raise exc(f"{label} residual {residual:.3e} exceeds {tol:.1e} (relative)",
                  residual=float(residual))
    return float(residual)


def restrict_via_isometry(zt: ZTransform, u, tol=TOL_ALG) -> ZTransform:
    """Transform of the restriction cut out by an isometry ``u``.

    Requires ``u*u = 1`` and the square-root intertwining hypothesis
    ``(u*(1-z*z)u)^{1/2} = (1-z*z)^{1/2} u``, both within tolerance; returns
    the transform ``z u``.
    """
    u = _as_matrix(u)
    z = zt.z
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]), 2) > tol * 10:
        raise NotIsometry("u*u differs from the identity")
    R2 = np.eye(z.shape[1]) - z.conj().T @ z
    _check_sqrt_identity(u.conj().T @ R2 @ u, hermitian_sqrt(R2) @ u,
                         tol, RestrictionIdentityViolated, "restriction identity")
    return ZTransform(z @ u)


def extend_via_coisometry(zt: ZTransform, u, tol=TOL_ALG) -> ZTransform:
    """Transform of the extension induced by a coisometry ``u`` (``u u* = 1``),
    under the mirrored square-root identity ``(u(1-zz*)u*)^{1/2} = u (1-zz*)^{1/2}``."""
    u = _as_matrix(u)
    z = zt.z
    if np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0]), 2) > tol * 10:
        raise NotCoisometry("u u* differs from the identity")
    R2 = np.eye(z.shape[0]) - z @ z.conj().T
    _check_sqrt_identity(u @ R2 @ u.conj().T, u @ hermitian_sqrt(R2),
                         tol, ExtensionIdentityViolated, "extension identity")
    return ZTransform(u @ z)


@dataclass(frozen=True)
class WitnessResult:
    """Restriction witness ``w`` with its certification residuals."""

    w: np.ndarray
    is_isometry: bool
    factor_residual: float
    gram_residual: float


def restriction_witness(z_t: ZTransform, z_s: ZTransform,
                        tol=TOL_ALG, tol_gap=TOL_GAP) -> WitnessResult:
    """Witness ``w = (1-z_T*z_T)^{-1/2} (1-z_S*z_S)^{1/2}`` certifying that
    ``z_S`` transforms a restriction of ``z_T``'s operator.

    Certifies ``z_S = z_T w`` and ``w*(1-z_T*z_T)w = 1-z_S*z_S`` within
    tolerance and reports whether ``w`` is an isometry; raises
    :class:`NotRestriction` with the worst residual otherwise.
    """
    if z_t.density_gap <= tol_gap or z_s.density_gap <= tol_gap:
        raise NotDense("both transforms need a positive density gap")
    zt, zs = z_t.z, z_s.z
    Rt2 = np.eye(zt.shape[1]) - zt.conj().T @ zt
    Rs2 = np.eye(zs.shape[1]) - zs.conj().T @ zs
    w = hermitian_sqrt(Rt2, inverse=True, floor=tol_gap) @ hermitian_sqrt(Rs2)
    r1 = np.linalg.norm(zt @ w - zs, 2)
    r2 = np.linalg.norm(w.conj().T @ Rt2 @ w - Rs2, 2)
    scale = 1.0 + np.linalg.norm(w, 2)
    if r1 > tol * scale or r2 > tol * scale:
        raise NotRestriction(
            f"witness identities fail: factor {r1:.3e}, gram {r2:.3e}",
            residual=float(max(r1, r2)))
    iso = np.linalg.norm(w.conj().T @ w - np.eye(w.shape[1]), 2) <= tol * scale
    return WitnessResult(w=w, is_isometry=bool(iso),
                         factor_residual=float(r1), gram_residual=float(r2))
