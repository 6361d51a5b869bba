"""Built-in algebra fixtures: disks, cylinders, spheres, and a synthetic
orphaned pair exercising the duality-repair pipeline."""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Tuple

from .cdga import (
    CDGAMorphism,
    CDGAPresentation,
    DiagonalData,
    PLDModelBundle,
    PLDPair,
    PoincareDualityCDGA,
    SurjectivePairModel,
    Tensor2,
    mapping_cone_model,
    pld_quotient,
)

Q = Fraction


def sphere_cohomology(n: int) -> PoincareDualityCDGA:
    """H*(S^n) = span{1, vol}, vol^2 = 0."""
    alg = CDGAPresentation(
        names=["1", "vol"],
        degrees=[0, n],
        unit=0,
        mult={(0, 0): {0: Q(1)}, (0, 1): {1: Q(1)}, (1, 0): {1: Q(1)}},
        diff={},
    )
    return PoincareDualityCDGA(alg, n, {1: Q(1)})


def point_algebra() -> CDGAPresentation:
    return CDGAPresentation(["1"], [0], 0, {(0, 0): {0: Q(1)}}, {})


def zero_algebra() -> CDGAPresentation:
    return CDGAPresentation([], [], None, {}, {})


def torus_cohomology() -> PoincareDualityCDGA:
    """H*(S^1 x S^1): generators a, b in degree 1, vol = ab."""
    names = ["1", "a", "b", "v"]
    degrees = [0, 1, 1, 2]
    mult = {
        (0, 0): {0: Q(1)}, (0, 1): {1: Q(1)}, (0, 2): {2: Q(1)}, (0, 3): {3: Q(1)},
        (1, 0): {1: Q(1)}, (2, 0): {2: Q(1)}, (3, 0): {3: Q(1)},
        (1, 2): {3: Q(1)}, (2, 1): {3: Q(-1)},
    }
    alg = CDGAPresentation(names, degrees, 0, mult, {})
    return PoincareDualityCDGA(alg, 2, {3: Q(1)})


def circle_cohomology() -> CDGAPresentation:
    return CDGAPresentation(
        ["1", "c"], [0, 1], 0,
        {(0, 0): {0: Q(1)}, (0, 1): {1: Q(1)}, (1, 0): {1: Q(1)}},
        {},
    )


def disk_pair(n: int) -> PLDPair:
    """Pretty model of the n-disk: P~ = H*(S^n), Q = H*(pt), psi = augmentation."""
    pd = sphere_cohomology(n)
    Qalg = point_algebra()
    psi = CDGAMorphism(pd.algebra, Qalg, {0: {0: Q(1)}})
    return mapping_cone_model(psi, pd)


def disk_bundle(n: int) -> PLDModelBundle:
    return pld_quotient(disk_pair(n))


def cylinder_pair() -> PLDPair:
    """PLD pair for S^1 x [0,1], from the torus with a thickened circle removed.

    P~ = H*(T^2), Q = H*(S^1), psi(a) = c, psi(b) = 0.  The resulting boundary
    algebra is a Poincare duality algebra of formal dimension 1 (it is not the
    honest cohomology ring of two circles, but the pair passes every PLD
    axiom and P = H*(S^1) with Delta_P = 0).
    """
    pd = torus_cohomology()
    Qalg = circle_cohomology()
    psi = CDGAMorphism(pd.algebra, Qalg, {0: {0: Q(1)}, 1: {1: Q(1)}})
    return mapping_cone_model(psi, pd)


def cylinder_bundle() -> PLDModelBundle:
    return pld_quotient(cylinder_pair())


def closed_bundle(n: int) -> PLDModelBundle:
    """Closed-manifold degenerate input: B = H*(S^n), B_del = 0."""
    pd = sphere_cohomology(n)
    pair = mapping_cone_model(CDGAMorphism(pd.algebra, zero_algebra(), {}), pd)
    return pld_quotient(pair)


# ---------------------------------------------------------------------------
# the paper-style cylinder bundle with the honest boundary algebra


def boundary_two_circles() -> Tuple[CDGAPresentation, Dict[int, Q]]:
    """H*(S^1 u S^1) = Q[t]/(t^2=t) (x) (f), with eps(tf) = 1, eps(f) = 0."""
    names = ["1", "t", "f", "tf"]
    degrees = [0, 0, 1, 1]
    mult = {
        (0, 0): {0: Q(1)}, (0, 1): {1: Q(1)}, (0, 2): {2: Q(1)}, (0, 3): {3: Q(1)},
        (1, 0): {1: Q(1)}, (2, 0): {2: Q(1)}, (3, 0): {3: Q(1)},
        (1, 1): {1: Q(1)},
        (1, 2): {3: Q(1)}, (2, 1): {3: Q(1)},
        (1, 3): {3: Q(1)}, (3, 1): {3: Q(1)},
    }
    alg = CDGAPresentation(names, degrees, 0, mult, {})
    return alg, {3: Q(1)}


def circle_as_p() -> CDGAPresentation:
    """P = H*(S^1) with basis 1, dphi."""
    return CDGAPresentation(
        ["1", "dphi"], [0, 1], 0,
        {(0, 0): {0: Q(1)}, (0, 1): {1: Q(1)}, (1, 0): {1: Q(1)}},
        {},
    )


def cylinder_paper_bundle() -> PLDModelBundle:
    """Bundle-level data for S^1 x I with B_del = H*(two circles).

    There is no small honest CDGA B surjecting onto this boundary algebra
    (degree-0 idempotents cannot coexist with d != 0 in a finite model), so
    the bundle components are given directly: P = H*(S^1), Delta_P = 0,
    sigma_P = dphi (x) t + 1 (x) tf.
    """
    P = circle_as_p()
    Bd, eps_bd = boundary_two_circles()
    sigma: Tensor2 = {(1, 1): Q(1), (0, 3): Q(1)}
    return PLDModelBundle(pair=None, P=P, Bd=Bd, eps_bd=eps_bd, n=2,
                          Delta_P={}, sigma_P=sigma)


# ---------------------------------------------------------------------------
# combinatorial diagonal data


def disk_diagonal_data(n: int) -> DiagonalData:
    """Diagonal data on the disk cone model: Delta_A = vol (x) 1, sigma_A = q (x) 1."""
    pair = disk_pair(n)
    B, Bd = pair.B, pair.Bd
    # basis order in B: 1, vol, 1_Q^
    i_vol = B.names.index("vol")
    i_q = B.names.index("1^")
    delta: Tensor2 = {(i_vol, B.unit): Q(1)}
    sigma: Tensor2 = {(i_q, Bd.unit): Q(1)}
    return DiagonalData(A=B, Ad=Bd, rho=pair.lam, delta=delta, sigma=sigma)


def disk_p_level_data(n: int) -> DiagonalData:
    """The P-level disk data: A = Q, Delta_A = 0, sigma_A = 0."""
    pair = disk_pair(n)
    P = point_algebra()
    rho = CDGAMorphism(P, pair.Bd, {0: pair.Bd.unit_vec()})
    return DiagonalData(A=P, Ad=pair.Bd, rho=rho, delta={}, sigma={})


def cylinder_combinatorial_data() -> DiagonalData:
    """Combinatorial diagonal data for S^1 x [0,1].

    A carries the cohomology of the cylinder, the relative classes dt and
    dtdphi, and primitives b (degree 0) and y = b*dphi (degree 1) for them.
    The primitives live in ker(rho) -- a degree-0 lift of the boundary class
    t would force an infinite polynomial tower, while a kernel-valued
    primitive closes in six dimensions -- and make the section axiom
    d sigma = (id (x) rho)(Delta) hold on the nose.
    """
    names = ["1", "dphi", "dt", "dtdphi", "b", "y"]
    degrees = [0, 1, 1, 2, 0, 1]
    mult: Dict[Tuple[int, int], Dict[int, Q]] = {
        (0, 0): {0: Q(1)},
        (2, 1): {3: Q(1)}, (1, 2): {3: Q(-1)},   # dt*dphi = dtdphi
        (4, 1): {5: Q(1)}, (1, 4): {5: Q(1)},    # b*dphi = y
    }
    for i in range(1, 6):
        mult[(0, i)] = {i: Q(1)}
        mult[(i, 0)] = {i: Q(1)}
    diff = {4: {2: Q(1)}, 5: {3: Q(1)}}          # db = dt, dy = dtdphi
    A = CDGAPresentation(names, degrees, 0, mult, diff)
    Ad, _eps = boundary_two_circles()
    rho = CDGAMorphism(A, Ad, {0: {0: Q(1)}, 1: {2: Q(1)}})
    # Delta_A = dtdphi (x) 1 - dt (x) dphi (the dbeta_i (x) alpha_i element)
    delta: Tensor2 = {(3, 0): Q(1), (2, 1): Q(-1)}
    # sigma_A = y (x) 1 - b (x) f, so d sigma = dtdphi (x) 1 - dt (x) f
    sigma: Tensor2 = {(5, 0): Q(1), (4, 2): Q(-1)}
    return DiagonalData(A=A, Ad=Ad, rho=rho, delta=delta, sigma=sigma)


# ---------------------------------------------------------------------------
# synthetic orphaned good pair (n = 7)


def synthetic_orphan_pair() -> SurjectivePairModel:
    """A good pair whose orphan ideal is not acyclic.

    Built on the D^7 cone model with extra cells z3, o4 (dz = o), x3, s4
    (dx = s) and the single pairing x3 * z4... see tests for the exact
    obstruction pattern: the orphan cycle o5 = dz4 is not a boundary inside
    the ideal, so one extension step at k = 5 is required.
    """
    # degrees: 1 (0), z (4), o (5, = dz), x (3), s (4, = dx), q (6), vol (7)
    names = ["1", "x", "z", "s", "o", "q", "vol"]
    degrees = [0, 3, 4, 4, 5, 6, 7]
    mult: Dict[Tuple[int, int], Dict[int, Q]] = {(0, 0): {0: Q(1)}}
    for i in range(1, 7):
        mult[(0, i)] = {i: Q(1)}
        mult[(i, 0)] = {i: Q(1)}
    # x * z = vol (degree 3 + 4 = 7); graded commutativity: z * x = (-1)^{12} x z = vol
    mult[(1, 2)] = {6: Q(1)}
    mult[(2, 1)] = {6: Q(1)}
    diff = {1: {3: Q(1)}, 2: {4: Q(1)}, 5: {6: Q(1)}}  # dx = s, dz = o, dq = vol
    R = CDGAPresentation(names, degrees, 0, mult, diff)
    Rd = sphere_cohomology(6).algebra
    rho = CDGAMorphism(R, Rd, {0: {0: Q(1)}, 5: {1: Q(1)}})
    eps_r = {6: Q(1)}
    eps_rd = {1: Q(1)}
    return SurjectivePairModel(rho, eps_r, eps_rd, 7)


def disk_good_pair(n: int) -> SurjectivePairModel:
    pair = disk_pair(n)
    return SurjectivePairModel(pair.lam, pair.eps_b, pair.eps_bd, n)
