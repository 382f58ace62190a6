"""Operator fields over a grid of base points in [0, 1].

A :class:`FiberedOperator` stores one domained operator per grid point: the
fibers of an operator on a module of operator-valued functions.  The module
provides the nonregular counterexample field (minimal condition at the base
point 0, periodic elsewhere), bounded-transform fields and their jump
detector, the glued ("tilde") extension whose admitted elements have
continuously varying image fields, and gauge-conjugated regular fields.

Continuity of a field over a finite grid has no literal meaning, so it is
surrogated everywhere by an adjacent-fiber deviation modulus; the modulus is
a caller-visible parameter, never a hidden constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraElement, FiberIndex
from .diffops import (
    MINIMAL,
    PERIODIC,
    BoundaryTag,
    GridOperator,
    trapezoid_weights,
)
from .errors import (
    DomainViolation,
    GaugeNotContinuous,
    GridTooCoarse,
    NotDense,
)
from .operators import (
    DomainedOperator,
    ZTransform,
    adjoint_via_graph,
    graph_inclusion,
    orthonormal_frame,
    z_transform,
)
from .tolerances import TOL_ALG, TOL_GAP, TOL_GRAPH

__all__ = [
    "FiberedOperator",
    "GaugeField",
    "ZFieldReport",
    "GaugeExtensionResult",
    "ExtensionReport",
    "build_counterexample_t",
    "adjoint_field",
    "zfield",
    "fiber_identity_check",
    "tilde_extension",
    "gauge_extension",
    "extension_inclusion_check",
    "operator_closure",
]

# fields flagged as discontinuous when a deviation exceeds 10x the median,
# guarded by an absolute floor so constant fields with roundoff never flag
JUMP_MEDIAN_FACTOR = 10.0
JUMP_FLOOR = 1e-10

# smooth-probe summation-by-parts defect allowance, units of h^2 (measured
# constant is ~22 for the stencils in use; factor three of headroom)
PAIRING_DEFECT_C = 60.0


class FiberedOperator:
    """Grid-indexed family of domained operators sharing one ambient space."""

    def __init__(self, pi_grid, fibers, tags=None, grid_ops=None, symbol=None,
                 algebra_index=None):
        pi_grid = np.asarray(pi_grid, dtype=float)
        if pi_grid.ndim != 1 or pi_grid.size < 1:
            raise ValueError("pi_grid must be a nonempty 1-d array")
        if pi_grid[0] != 0.0:
            raise ValueError("pi_grid must start at 0")
        if np.any(np.diff(pi_grid) <= 0):
            raise ValueError("pi_grid must be strictly increasing")
        fibers = list(fibers)
        if len(fibers) != pi_grid.size:
            raise ValueError("need one fiber per grid point")
        amb = {f.ambient_dim for f in fibers}
        if len(amb) != 1:
            raise ValueError("all fibers must share one ambient dimension")
        self.pi_grid = pi_grid
        self.fibers = fibers
        self.tags = list(tags) if tags is not None else None
        self.grid_ops = list(grid_ops) if grid_ops is not None else None
        self.symbol = symbol
        self.algebra_index = algebra_index
        self.continuity_profile = None
        self.coupled_frame = None

    @property
    def n_fibers(self):
        return len(self.fibers)

    @property
    def ambient_dim(self):
        return self.fibers[0].ambient_dim

    @classmethod
    def from_grid_operators(cls, pi_grid, grid_ops):
        ops = list(grid_ops)
        return cls(pi_grid, [g.as_domained() for g in ops],
                   tags=[g.tag for g in ops], grid_ops=ops)

    @classmethod
    def from_algebra_symbol(cls, index: FiberIndex, symbol: AlgebraElement,
                            domain_columns=None):
        """Left multiplication by a matrix field on a finite function algebra.

        Fibers act on the flattened matrix fiber (row-major); a domain given
        as per-label column frames V yields the right-ideal domain of all
        matrices with range inside V.
        """
        dims = set(index.dims)
        if len(dims) != 1:
            raise ValueError("fibered models need one common fiber dimension")
        k = dims.pop()
        fibers = []
        for lab in index.labels:
            act = np.kron(symbol.fibers[lab], np.eye(k))
            frame = None
            if domain_columns is not None and domain_columns.get(lab) is not None:
                frame = np.kron(domain_columns[lab], np.eye(k))
            fibers.append(DomainedOperator(act, frame))
        npts = len(index.labels)
        grid = np.arange(npts) / max(npts - 1, 1)
        return cls(grid, fibers, symbol=symbol, algebra_index=index)

    def fiber(self, i) -> DomainedOperator:
        return self.fibers[i]

    def apply_algebra(self, a: AlgebraElement) -> AlgebraElement:
        """Apply a symbol-backed field to an algebra element, fiber by fiber."""
        if self.algebra_index is None:
            raise ValueError("fibered operator is not algebra-backed")
        out = {}
        for i, lab in enumerate(self.algebra_index.labels):
            d = self.algebra_index.dim(lab)
            out[lab] = (self.fibers[i].apply(a.fibers[lab].ravel())).reshape(d, d)
        return AlgebraElement(self.algebra_index, out)

    def __repr__(self):
        return (f"FiberedOperator(n_fibers={self.n_fibers}, "
                f"ambient={self.ambient_dim})")


class GaugeField:
    """Family of unitaries over the grid, the identity at the base point."""

    def __init__(self, pi_grid, unitaries, base_point_identity=True,
                 tol=TOL_ALG, twists=None):
        pi_grid = np.asarray(pi_grid, dtype=float)
        self.pi_grid = pi_grid
        self.unitaries = [np.asarray(u, dtype=complex) for u in unitaries]
        if len(self.unitaries) != pi_grid.size:
            raise ValueError("need one unitary per grid point")
        n = self.unitaries[0].shape[0]
        for u in self.unitaries:
            if u.shape != (n, n):
                raise ValueError("gauge unitaries must share one dimension")
            if np.linalg.norm(u.conj().T @ u - np.eye(n), 2) > tol * 10:
                raise ValueError("gauge entries must be unitary within tolerance")
        if base_point_identity and np.linalg.norm(
                self.unitaries[0] - np.eye(n), 2) > tol * 10:
            raise ValueError("gauge is flagged base_point_identity but U_0 != 1")
        self.base_point_identity = base_point_identity
        self.twists = twists

    @classmethod
    def identity(cls, pi_grid, dim):
        return cls(pi_grid, [np.eye(dim, dtype=complex)] * len(pi_grid))

    @classmethod
    def from_phase_samples(cls, pi_grid, g_samples):
        """Multiplication gauges ``exp(i g(pi, .))`` from real phase samples.

        ``g_samples[i]`` holds g(pi_i, x_j) on the space grid; the base row
        must vanish so the base-point gauge is the identity.  The induced
        endpoint twist g(pi, 1) - g(pi, 0) is recorded per fiber.
        """
        g = np.asarray(g_samples, dtype=float)
        if g.ndim != 2 or g.shape[0] != len(pi_grid):
            raise ValueError("phase sample table must be (n_pi, n_x + 1)")
        if np.max(np.abs(g[0])) > 0:
            raise ValueError("base-point phase row must vanish")
        unitaries = [np.diag(np.exp(1j * row)) for row in g]
        twists = [float(row[-1] - row[0]) for row in g]
        return cls(pi_grid, unitaries, twists=twists)

    @classmethod
    def linear_phase(cls, pi_grid, n_x):
        """The winding gauge: U_pi = multiplication by e^{i pi x}."""
        x = np.linspace(0.0, 1.0, n_x + 1)
        g = np.outer(np.asarray(pi_grid, dtype=float), x)
        return cls.from_phase_samples(pi_grid, g)

    def __len__(self):
        return len(self.unitaries)


# --------------------------------------------------------------------------
# counterexample field and its adjoint
# --------------------------------------------------------------------------
def build_counterexample_t(n_pi, n_x) -> FiberedOperator:
    """The closed nonregular field: minimal condition at the base point,
    periodic at every other grid point, action ``i d/dx`` throughout.

    The positive-base fibers share one matrix by construction, so constancy
    tests over them are exact and isolate the jump at the base point.
    """
    if n_pi < 2:
        raise GridTooCoarse(f"need n_pi >= 2 base points, got {n_pi}")
    if n_x < 32:
        raise GridTooCoarse(f"need n_x >= 32 space steps, got {n_x}")
    periodic = GridOperator(n_x, PERIODIC)
    # the base fiber shares the bulk's wrap action so the ladder
    # "minimal inside periodic" is exact on the grid, not just in the limit
    minimal = GridOperator(n_x, MINIMAL, action_style="wrap")
    ops = [minimal] + [periodic] * (n_pi - 1)
    return FiberedOperator.from_grid_operators(np.linspace(0.0, 1.0, n_pi), ops)


_PROBES = {
    "minimal": [lambda x: x * (1 - x), lambda x: np.sin(np.pi * x),
                lambda x: (x * (1 - x)) ** 2 * np.exp(x)],
    "periodic": [lambda x: np.exp(2j * np.pi * x),
                 lambda x: np.cos(2 * np.pi * x) + 0.3,
                 lambda x: np.exp(np.cos(2 * np.pi * x))],
    "maximal": [lambda x: np.exp(x), lambda x: x ** 2, lambda x: np.cos(x)],
}


def _smooth_probes(tag: BoundaryTag, n):
    x = np.linspace(0.0, 1.0, n + 1)
    if tag.kind == "twisted":
        phase = np.exp(1j * tag.theta * x)
        return [phase * p(x) for p in _PROBES["periodic"]]
    return [np.asarray(p(x), dtype=complex) for p in _PROBES[tag.kind]]


def _pairing_defect(local: GridOperator, candidate: GridOperator):
    """Worst normalized defect of <A f, g> = <f, B g> over smooth probes
    f in the local domain, g in the candidate domain."""
    n = local.n
    w = trapezoid_weights(n)
    worst = 0.0
    for f in _smooth_probes(local.tag, n):
        for g in _smooth_probes(candidate.tag, n):
            lhs = np.sum(w * np.conj(local.matrix @ f) * g)
            rhs = np.sum(w * np.conj(f) * (candidate.matrix @ g))
            nf = np.sqrt(np.sum(w * np.abs(f) ** 2))
            ng = np.sqrt(np.sum(w * np.abs(g) ** 2))
            worst = max(worst, abs(lhs - rhs) / (nf * ng))
    return worst


def adjoint_field(F: FiberedOperator) -> FiberedOperator:
    """Adjoint of a fibered operator, fiber by fiber, with the module
    continuity correction at isolated exceptional fibers.

    For algebra-backed fields this is the graph adjoint per fiber.  For
    grid-backed fields the boundary tags map to their adjoint tags; then any
    fiber whose neighbors all carry one common adjoint operator different
    from the local one is pinned to that neighbor operator, because over a
    connected base the adjoint's image field must glue continuously and the
    isolated fiber's freedom is cut down to the neighbors' limit.  Pinning is
    only applied after verifying the discrete pairing identity on smooth
    probes at second-order accuracy.
    """
    if F.grid_ops is None:
        # the adjoint symbol is the conjugate field only while every fiber is
        # everywhere defined; operator-part extraction breaks the match else
        sym = None
        if F.symbol is not None and all(f.is_full_domain for f in F.fibers):
            sym = F.symbol.H
        return FiberedOperator(F.pi_grid, [adjoint_via_graph(f) for f in F.fibers],
                               symbol=sym, algebra_index=F.algebra_index)
    adj_ops = [g.adjoint() for g in F.grid_ops]
    pinned = list(adj_ops)
    n = F.grid_ops[0].n
    h2 = (1.0 / n) ** 2
    for i, local in enumerate(adj_ops):
        neighbors = [adj_ops[j] for j in (i - 1, i + 1) if 0 <= j < len(adj_ops)]
        if not neighbors:
            continue
        ref = neighbors[0]
        if any(nb.tag != ref.tag for nb in neighbors) or ref.tag == local.tag:
            continue
        defect = _pairing_defect(F.grid_ops[i], ref)
        if defect <= PAIRING_DEFECT_C * h2:
            pinned[i] = ref
    return FiberedOperator.from_grid_operators(F.pi_grid, pinned)


# --------------------------------------------------------------------------
# bounded-transform fields
# --------------------------------------------------------------------------
@dataclass
class ZFieldReport:
    """Per-fiber transforms with the adjacent-deviation profile."""

    transforms: list
    profile: np.ndarray
    median: float
    flagged: list = field(default_factory=list)

    @property
    def gaps(self):
        return np.asarray([t.density_gap for t in self.transforms])


def zfield(F: FiberedOperator) -> ZFieldReport:
    """Bounded transform of every fiber plus the adjacent jump report.

    Deviations ``J_i = ||z_{i+1} - z_i||`` are flagged as discontinuities
    when they exceed ten times the median profile value; an absolute floor
    keeps constant fields with roundoff from flagging.
    """
    transforms = [z_transform(f) for f in F.fibers]
    devs = []
    for i in range(len(transforms) - 1):
        devs.append(np.linalg.norm(transforms[i + 1].z - transforms[i].z, 2))
    profile = np.asarray(devs)
    F.continuity_profile = profile
    med = float(np.median(profile)) if profile.size else 0.0
    scale = max(1.0, max((np.linalg.norm(t.z, 2) for t in transforms), default=1.0))
    floor = JUMP_FLOOR * scale
    flagged = [i for i, d in enumerate(profile)
               if d > JUMP_MEDIAN_FACTOR * med and d > floor]
    return ZFieldReport(transforms=transforms, profile=profile, median=med,
                        flagged=flagged)


# --------------------------------------------------------------------------
# fiber identity on finite models
# --------------------------------------------------------------------------
def fiber_identity_check(T: FiberedOperator, a: AlgebraElement,
                         tol=TOL_GRAPH) -> float:
    """Residual of the fiberwise identity (1 + T_x* T_x) a_x = ((1 + T*T) a)_x.

    The left side goes through the per-fiber matrices and graph adjoints; the
    right side goes through plain algebra arithmetic with the field's symbol.
    The element must sit in the fibered domain (and its image in the adjoint
    domain), otherwise :class:`DomainViolation` is raised.
    """
    if T.algebra_index is None or T.symbol is None:
        raise ValueError("fiber identity check needs an algebra-backed field")
    index = T.algebra_index
    if a.index != index:
        raise ValueError("element lives over a different index")
    worst = 0.0
    adjoints = [adjoint_via_graph(f) for f in T.fibers]
    for i, lab in enumerate(index.labels):
        d = index.dim(lab)
        vec = a.fibers[lab].ravel()
        ok, res = T.fibers[i].contains(vec, tol)
        if not ok:
            raise DomainViolation(f"element is outside the domain at fiber {lab!r}",
                                  residual=res)
        image = T.fibers[i].apply(vec)
        ok, res = adjoints[i].contains(image, tol)
        if not ok:
            raise DomainViolation(
                f"image leaves the adjoint domain at fiber {lab!r}", residual=res)
        lhs = (vec + adjoints[i].apply(image)).reshape(d, d)
        rhs = (a + T.symbol.H @ (T.symbol @ a)).fibers[lab]
        worst = max(worst, np.linalg.norm(lhs - rhs, 2))
    return float(worst)


# --------------------------------------------------------------------------
# glued (tilde) extension
# --------------------------------------------------------------------------
def operator_closure(op: DomainedOperator) -> DomainedOperator:
    """Finite-scale closure used by the gluing machinery.

    A matrix restricted to an explicit subspace is already a closed operator,
    so this is the identity map; it exists as the named hook where the
    machinery conceptually passes to fiber closures.
    """
    return op


def tilde_extension(F: FiberedOperator, modulus=None) -> FiberedOperator:
    """Largest fibered extension whose image fields glue within a modulus.

    The fibers of the result are the closures of ``F``'s fibers.  Admitted
    elements are fields in the product of the closure domains whose image
    fields have adjacent-fiber deviation at most ``modulus`` — the finite
    surrogate for the image field being one global algebra element.  The
    elements of ``F``'s own domain are always admitted (their image fields
    are bona fide elements by construction), so the result extends ``F``
    fiberwise.  ``modulus=None`` means no gluing constraint, the right
    reading on a finite discrete base where every field is an element.
    """
    closures = [operator_closure(f) for f in F.fibers]
    N = len(closures)
    amb = F.ambient_dim
    if modulus is None:
        # no gluing constraint: the admitted set is the whole product, left
        # implicit (coupled_frame None) to keep large grids cheap
        return FiberedOperator(F.pi_grid, closures, symbol=F.symbol,
                               algebra_index=F.algebra_index)

    pool = _block_diag_frames([c.frame for c in closures])
    dev_rows = np.zeros(((N - 1) * amb, pool.shape[1]), dtype=complex)
    col = 0
    images = []
    for i, c in enumerate(closures):
        images.append((i, col, c.restricted()))
        col += c.domain_dim
    for i in range(N - 1):
        r = slice(i * amb, (i + 1) * amb)
        _, c0, B0 = images[i]
        _, c1, B1 = images[i + 1]
        dev_rows[r, c0:c0 + B0.shape[1]] -= B0
        dev_rows[r, c1:c1 + B1.shape[1]] += B1
    u, s, vh = np.linalg.svd(dev_rows, full_matrices=True)
    keep = vh.conj().T[:, np.concatenate([s <= modulus,
                                          np.ones(pool.shape[1] - s.size, bool)])]
    filtered = pool @ keep

    granted = F.coupled_frame
    if granted is None:
        granted = _block_diag_frames([f.frame for f in F.fibers])
    coupled = orthonormal_frame(np.hstack([granted, filtered]))

    fibers = []
    for i, c in enumerate(closures):
        block = coupled[i * amb:(i + 1) * amb, :]
        fibers.append(DomainedOperator(c.action, orthonormal_frame(block)))
    out = FiberedOperator(F.pi_grid, fibers, symbol=F.symbol,
                          algebra_index=F.algebra_index)
    out.coupled_frame = coupled
    return out


def _block_diag_frames(frames):
    rows = sum(f.shape[0] for f in frames)
    cols = sum(f.shape[1] for f in frames)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for f in frames:
        out[r:r + f.shape[0], c:c + f.shape[1]] = f
        r += f.shape[0]
        c += f.shape[1]
    return out


# --------------------------------------------------------------------------
# gauge extensions
# --------------------------------------------------------------------------
@dataclass
class GaugeExtensionResult:
    field: FiberedOperator
    transforms: list
    deviations: np.ndarray

    @property
    def max_deviation(self):
        return float(self.deviations.max()) if self.deviations.size else 0.0


def gauge_extension(t0: GridOperator, U: GaugeField,
                    tol_gap=TOL_GAP) -> GaugeExtensionResult:
    """Conjugate one regular grid operator into a fibered field, ``T_pi =
    U_pi t0 U_pi*`` with domain ``U_pi D(t0)``, plus its transform field
    ``z_pi = U_pi w U_pi*`` where ``w`` transforms ``t0``.

    The gauge must be the identity at the base point and its conjugation
    field must look linear in the grid step: the maximal adjacent deviation
    of ``pi -> U_pi S U_pi*`` over probe compacts has to drop by roughly half
    when the grid step does, else :class:`GaugeNotContinuous` is raised.
    """
    if not U.base_point_identity:
        raise ValueError("gauge extension needs the base-point identity gauge")
    base = t0.as_domained()
    w = z_transform(base)
    if w.density_gap <= tol_gap:
        raise NotDense("base operator is not regular at this resolution")

    fibers, transforms = [], []
    for u in U.unitaries:
        act = u @ base.action @ u.conj().T
        frame = orthonormal_frame(u @ base.frame)
        fibers.append(DomainedOperator(act, frame))
        transforms.append(ZTransform(u @ w.z @ u.conj().T))

    probes = [w.z, np.eye(base.ambient_dim, dtype=complex)]
    rng = np.random.default_rng(7)
    v1 = rng.standard_normal(base.ambient_dim) + 1j * rng.standard_normal(base.ambient_dim)
    v2 = rng.standard_normal(base.ambient_dim) + 1j * rng.standard_normal(base.ambient_dim)
    probes.append(np.outer(v1 / np.linalg.norm(v1), (v2 / np.linalg.norm(v2)).conj()))
    _gauge_continuity_check(U, probes)

    devs = np.asarray([np.linalg.norm(transforms[i + 1].z - transforms[i].z, 2)
                       for i in range(len(transforms) - 1)])
    field = FiberedOperator(U.pi_grid, fibers)
    return GaugeExtensionResult(field=field, transforms=transforms, deviations=devs)


def _gauge_continuity_check(U: GaugeField, probes):
    """Linear-in-step bound checked against the twice-coarsened subgrid."""
    if len(U) < 5:
        return
    def max_dev(unitaries):
        worst = 0.0
        for S in probes:
            conj = [u @ S @ u.conj().T for u in unitaries]
            for a, b in zip(conj, conj[1:]):
                worst = max(worst, np.linalg.norm(b - a, 2))
        return worst

    fine = max_dev(U.unitaries)
    coarse = max_dev(U.unitaries[::2])
    if fine <= JUMP_FLOOR:
        return
    if fine / coarse > 0.85:
        raise GaugeNotContinuous(
            f"adjacent deviation {fine:.3e} does not halve under step halving "
            f"(coarse {coarse:.3e})")


# --------------------------------------------------------------------------
# extension verification
# --------------------------------------------------------------------------
@dataclass
class ExtensionReport:
    rows: list                    # (pi, included: bool, residual: float)
    included: bool
    tilde_chain_ok: bool
    failing: list

    def __bool__(self):
        return self.included and self.tilde_chain_ok


def extension_inclusion_check(S: FiberedOperator, T: FiberedOperator,
                              tol=TOL_GRAPH, gauge: GaugeField | None = None,
                              modulus=None) -> ExtensionReport:
    """Fiberwise graph inclusion of ``S`` in ``T`` plus the gluing chain.

    With a gauge, the comparison runs in the gauge frame: fiber ``i`` of
    ``S`` is conjugated by ``U_i`` before the inclusion test (the two fields
    are then expressed over one trivialization).  The gluing chain verifies
    S inside tilde(S), tilde(S) inside tilde(T), and tilde(T) = T fiberwise.
    """
    if S.n_fibers != T.n_fibers or S.ambient_dim != T.ambient_dim:
        raise ValueError("fields must share the grid and ambient dimension")
    if not np.allclose(S.pi_grid, T.pi_grid):
        raise ValueError("fields must share the base grid")

    s_fibers = S.fibers
    if gauge is not None:
        if len(gauge) != S.n_fibers:
            raise ValueError("gauge must match the grid")
        s_fibers = [DomainedOperator(u @ f.action @ u.conj().T,
                                     orthonormal_frame(u @ f.frame))
                    for u, f in zip(gauge.unitaries, S.fibers)]
    gauged_S = FiberedOperator(S.pi_grid, s_fibers)

    rows, failing = [], []
    for pi, sf, tf in zip(S.pi_grid, s_fibers, T.fibers):
        res = graph_inclusion(sf, tf, tol)
        rows.append((float(pi), res.included, res.residual))
        if not res.included:
            failing.append(float(pi))

    s_tilde = tilde_extension(gauged_S, modulus)
    t_tilde = tilde_extension(T, modulus)
    chain = True
    for sf, st, tt, tf in zip(s_fibers, s_tilde.fibers, t_tilde.fibers, T.fibers):
        if not graph_inclusion(sf, st, tol).included:
            chain = False
        if not graph_inclusion(st, tt, tol).included:
            chain = False
        same_dom = np.linalg.norm(tt.domain_projector() - tf.domain_projector(),
                                  2) <= 10 * tol
        same_act = graph_inclusion(tf, tt, tol).included
        if not (same_dom and same_act):
            chain = False
    return ExtensionReport(rows=rows, included=not failing,
                           tilde_chain_ok=chain, failing=failing)
