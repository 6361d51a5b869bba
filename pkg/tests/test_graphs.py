import random
from fractions import Fraction as Q

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confbound.graphs import (
    AERIAL,
    TERRESTRIAL,
    DegreeTable,
    GraphCanonicalizer,
    GraphVector,
    OrientedGraph,
    UnboundedEnumeration,
    VertexKind,
    enumerate_graphs,
    graph_degree,
    hopf_product,
    koszul_sign,
)


def canon(n, directed=False, **kw):
    return GraphCanonicalizer(DegreeTable(n, **kw), directed)


def ivert(k, color=AERIAL):
    return [VertexKind(color, 0)] * k


def cycle(n, v):
    return OrientedGraph(n, ivert(v), [(i, (i + 1) % v) for i in range(v)])


class TestDegrees:
    def test_theta_graph_degree(self):
        # 2 internal aerial vertices, 3 parallel edges, n = 2: 3*1 - 2*2 + 2 = 1
        t = DegreeTable(2, shift=2)
        g = OrientedGraph(2, ivert(2), [(0, 1)] * 3)
        assert graph_degree(g, t) == 1

    def test_single_vertex_degree(self):
        t = DegreeTable(3, shift=3)
        g = OrientedGraph(3, ivert(1), [])
        assert graph_degree(g, t) == 0

    def test_cycle_degree(self):
        # v-cycle in the fGC_n table has degree n - v
        for n in (2, 3):
            for v in (3, 5):
                t = DegreeTable(n, shift=n)
                assert graph_degree(cycle(n, v), t) == n - v


class TestCanonicalize:
    def test_idempotent(self):
        c = canon(3)
        g = cycle(3, 3)
        cg, s = c.canonicalize(g)
        assert s != 0
        cg2, s2 = c.canonicalize(cg)
        assert cg2 == cg and s2 == 1

    def test_tadpole_parity(self):
        for n, expect in ((2, 1), (3, 0)):
            g = OrientedGraph(n, ivert(1), [(0, 0)])
            _, s = canon(n).canonicalize(g)
            assert abs(s) == expect

    def test_double_edge_parity_external(self):
        # e12 * e12 between externals: odd generators square to zero (n even)
        for n, expect in ((2, 0), (3, 1)):
            vs = [VertexKind(AERIAL, 1), VertexKind(AERIAL, 2)]
            g = OrientedGraph(n, vs, [(0, 1), (0, 1)])
            _, s = canon(n).canonicalize(g)
            assert abs(s) == expect

    def test_internal_double_edge_dies_both_parities(self):
        # for odd n the vertex swap kills it, for even n the edge square
        for n in (2, 3):
            g = OrientedGraph(n, ivert(2), [(0, 1), (0, 1)])
            _, s = canon(n).canonicalize(g)
            assert s == 0

    def test_edge_flip_sign(self):
        c = canon(3)
        g = cycle(3, 3)  # edges (0,1),(1,2),(2,0)
        flipped = OrientedGraph(3, ivert(3), [(1, 0), (1, 2), (2, 0)])
        cg, s = c.canonicalize(g)
        cg2, s2 = c.canonicalize(flipped)
        assert cg2 == cg and s2 == -s

    def test_cycle_survival_pattern(self):
        # n even: v = 1 mod 4 survive; n odd: v = 3 mod 4 survive
        for n, residue in ((2, 1), (3, 3), (4, 1), (5, 3)):
            for v in range(3, 10):
                _, s = canon(n).canonicalize(cycle(n, v))
                assert (s != 0) == (v % 4 == residue), (n, v)

    def test_sign_equivariance_random(self):
        rng = random.Random(7)
        c3 = canon(3)
        for _ in range(40):
            v = rng.randint(2, 5)
            e = rng.randint(1, 6)
            edges = []
            for _ in range(e):
                a, b = rng.randrange(v), rng.randrange(v)
                if a != b:
                    edges.append((a, b))
            if not edges:
                continue
            g = OrientedGraph(3, ivert(v), edges)
            cg, s = c3.canonicalize(g)
            # permute edge list: even edge degree for n=3, no sign from order
            perm = list(edges)
            rng.shuffle(perm)
            cg2, s2 = c3.canonicalize(OrientedGraph(3, ivert(v), perm))
            assert cg2 == cg and s2 == s

    def test_decoration_swap_sign(self):
        # two odd decorations on one vertex: swapping costs a sign
        t = DegreeTable(2, aerial_degrees=(1, 1))
        c = GraphCanonicalizer(t, directed=False)
        g1 = OrientedGraph(2, ivert(1), [], [(0, 1)])
        g2 = OrientedGraph(2, ivert(1), [], [(1, 0)])
        c1, s1 = c.canonicalize(g1)
        c2, s2 = c.canonicalize(g2)
        assert c1 == c2 and s1 == -s2
        # repeated odd decoration vanishes
        g3 = OrientedGraph(2, ivert(1), [], [(0, 0)])
        _, s3 = c.canonicalize(g3)
        assert s3 == 0


class TestVector:
    def test_add_scaled_zero(self):
        c = canon(2)
        g, _ = c.canonicalize(cycle(2, 5))
        a = GraphVector.single(g)
        assert a.add_scaled(Q(0), a) == a
        assert a.add_scaled(Q(-1), a).is_zero()
        assert a.scale(Q(2, 3)).add_scaled(Q(1), a.scale(Q(1, 3))) == a


class TestHopfProduct:
    def test_unit(self):
        c = canon(2)
        ext = [VertexKind(AERIAL, 1), VertexKind(AERIAL, 2)]
        unit = OrientedGraph(2, ext, [])
        e12 = OrientedGraph(2, ext, [(0, 1)])
        out = hopf_product(GraphVector.single(unit), GraphVector.single(e12), c)
        assert out == GraphVector.single(e12)

    def test_square_even_vanishes(self):
        c = canon(2)
        ext = [VertexKind(AERIAL, 1), VertexKind(AERIAL, 2)]
        e12 = GraphVector.single(OrientedGraph(2, ext, [(0, 1)]))
        assert hopf_product(e12, e12, c).is_zero()

    def test_square_odd_survives(self):
        c = canon(3)
        ext = [VertexKind(AERIAL, 1), VertexKind(AERIAL, 2)]
        e12 = GraphVector.single(OrientedGraph(3, ext, [(0, 1)]))
        out = hopf_product(e12, e12, c)
        assert list(out.terms.values()) == [Q(1)]

    def test_graded_commutative(self):
        for n in (2, 3):
            c = canon(n)
            ext = [VertexKind(AERIAL, 1), VertexKind(AERIAL, 2), VertexKind(AERIAL, 3)]
            a = GraphVector.single(OrientedGraph(n, ext, [(0, 1)]))
            b = GraphVector.single(OrientedGraph(n, ext, [(1, 2)]))
            ab = hopf_product(a, b, c)
            ba = hopf_product(b, a, c)
            sign = Q((-1) ** ((n - 1) * (n - 1)))
            assert ba == GraphVector({g: sign * v for g, v in ab.terms.items()})


class TestEnumerate:
    def test_unbounded_raises(self):
        with pytest.raises(UnboundedEnumeration):
            list(enumerate_graphs(n=2, canon=canon(2)))

    def test_single_vertex(self):
        out = list(enumerate_graphs(n=2, canon=canon(2), exact_internal=(1, 0),
                                    max_edges=0, connected=True))
        assert len(out) == 1

    def test_two_vertex_even(self):
        out = list(enumerate_graphs(n=2, canon=canon(2), exact_internal=(2, 0),
                                    max_edges=3, connected=True, allow_tadpoles=False))
        assert [g.serialize() for g in out] == ["n=2; V=a0,a0; E=(0,1); D="]

    def test_loop_order_cycles(self):
        # all-bivalent one-loop graphs are exactly the surviving cycles
        out = list(enumerate_graphs(n=2, canon=canon(2), max_internal_aerial=9,
                                    max_edges=9, connected=True, loop_order=1,
                                    min_internal_valence=2, allow_tadpoles=False))
        lengths = sorted(g.num_vertices() for g in out)
        assert lengths == [5, 9]

    def test_enumerated_graphs_have_positive_sign(self):
        out = list(enumerate_graphs(n=3, canon=canon(3), max_internal_aerial=4,
                                    max_edges=5, connected=True, allow_tadpoles=False))
        c = canon(3)
        for g in out:
            cg, s = c.canonicalize(g)
            assert cg == g and s == 1


class TestSerialization:
    def test_roundtrip(self):
        t = DegreeTable(3, aerial_degrees=(0, 2), terrestrial_degrees=(0, 1))
        c = GraphCanonicalizer(t, directed=True)
        g = OrientedGraph(
            3,
            [VertexKind(AERIAL, 1), VertexKind(TERRESTRIAL, 1), VertexKind(AERIAL, 0)],
            [(0, 1), (2, 0)],
            [(1,), (0, 1), ()],
        )
        s = g.serialize()
        assert OrientedGraph.deserialize(s) == g


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1_000_000))
def test_koszul_sign_is_group_hom(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 6)
    degs = [rng.randint(0, 3) for _ in range(k)]
    p1 = list(range(k))
    rng.shuffle(p1)
    p2 = list(range(k))
    rng.shuffle(p2)
    # compose: item at new pos i under p2 then p1: perm[i] = p2[p1[i]]
    comp = [p2[p1[i]] for i in range(k)]
    s_comp = koszul_sign(degs, comp)
    s2 = koszul_sign(degs, p2)
    s1 = koszul_sign([degs[p2[i]] for i in range(k)], p1)
    assert s_comp == s1 * s2
