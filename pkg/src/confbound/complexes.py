"""Graph complex families, their differentials, dual Lie structure, and the
structural maps between complexes.

Every family shares one representation (colored decorated oriented graphs)
and one sign mechanism: a differential piece rewrites the orientation word
explicitly -- consumed items move to the front, created items are declared
in place -- and picks up the Koszul sign of that rewrite; canonical forms
contribute their own signs.  d^2 = 0 is asserted on every built slice.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .cdga import CDGAPresentation, Tensor2, Vec
from .graphs import (
    AERIAL,
    TERRESTRIAL,
    DegreeTable,
    GraphCanonicalizer,
    GraphVector,
    OrientedGraph,
    VertexKind,
    enumerate_graphs,
    graph_degree,
    koszul_sign,
)
from .linalg import BettiTable, SparseMatrix, betti_at

Q = Fraction


class WindowNotClosed(Exception):
    pass


class MissingBasis(Exception):
    pass


class InadmissibleK(Exception):
    pass


# ---------------------------------------------------------------------------
# orientation-word calculus

Ident = Tuple


def _word(g: OrientedGraph, table: DegreeTable) -> List[Tuple[Ident, int]]:
    items: List[Tuple[Ident, int]] = []
    for i, v in enumerate(g.vertices):
        items.append((("v", i), table.vertex_degree(v)))
    for k in range(len(g.edges)):
        items.append((("e", k), table.edge_degree()))
    for i, v in enumerate(g.vertices):
        for p in range(len(g.decorations[i])):
            items.append((("d", i, p), table.decoration_degree(v.color, g.decorations[i][p])))
    return items


def _deg_of(word, ident):
    for i, d in word:
        if i == ident:
            return d
    raise KeyError(ident)


def word_sign(old_items: List[Tuple[Ident, int]], new_order_ids: List[Ident]) -> int:
    pos = {item[0]: k for k, item in enumerate(old_items)}
    degs = [item[1] for item in old_items]
    perm = [pos[i] for i in new_order_ids]
    return koszul_sign(degs, perm)


# ---------------------------------------------------------------------------
# MC elements


class MCElement:
    """Graded coefficient functional canonical graph -> Q[E]/(E^2).

    Values are pairs (a, b) meaning a + b E, E the Euler parameter of degree
    n-1 (used only by the Euler-corrected Swiss-Cheese element).
    """

    def __init__(self, family: "Family", coeffs: Dict[OrientedGraph, Tuple[Q, Q]], name: str = ""):
        self.family = family
        self.coeffs = {g: (Q(a), Q(b)) for g, (a, b) in coeffs.items() if a or b}
        self.name = name
        self._aut_cache: Dict[OrientedGraph, int] = {}

    @classmethod
    def from_plain(cls, family: "Family", coeffs: Dict[OrientedGraph, Q], name: str = ""):
        return cls(family, {g: (c, Q(0)) for g, c in coeffs.items()}, name)

    def value(self, g: OrientedGraph) -> Tuple[Q, Q]:
        return self.coeffs.get(g, (Q(0), Q(0)))

    def pair(self, g: OrientedGraph) -> Tuple[Q, Q]:
        """Automorphism-weighted pairing <z, Gamma> = |Aut(Gamma)| z_Gamma.

        Coefficients are stored in the symmetry-factor normalization (the
        1/n! fan weights); dual pairings against single canonical graphs
        carry the full automorphism count.
        """
        a, b = self.coeffs.get(g, (Q(0), Q(0)))
        if not a and not b:
            return (a, b)
        if g not in self._aut_cache:
            from .graphs import aut_order
            self._aut_cache[g] = aut_order(g, self.family.canon)
        k = self._aut_cache[g]
        return (a * k, b * k)

    def support(self) -> List[OrientedGraph]:
        return sorted(self.coeffs, key=lambda g: (g.size(), g.serialize()))

    def perturb(self, g: OrientedGraph, delta: Q) -> "MCElement":
        c = dict(self.coeffs)
        a, b = c.get(g, (Q(0), Q(0)))
        c[g] = (a + delta, b)
        return MCElement(self.family, c, self.name + "+perturbed")

    def add(self, other: "MCElement") -> "MCElement":
        c = dict(self.coeffs)
        for g, (a, b) in other.coeffs.items():
            x, y = c.get(g, (Q(0), Q(0)))
            c[g] = (x + a, y + b)
        return MCElement(self.family, c, f"{self.name}+{other.name}")

    def to_json(self) -> list:
        return [[g.serialize(), f"{a}", f"{b}"] for g in self.support()
                for (a, b) in [self.coeffs[g]]]

    @classmethod
    def from_json(cls, family: "Family", rows: list, name: str = "") -> "MCElement":
        coeffs = {}
        for row in rows:
            g = OrientedGraph.deserialize(row[0])
            coeffs[g] = (Q(row[1]), Q(row[2]) if len(row) > 2 else Q(0))
        return cls(family, coeffs, name)


def ecoef_scale(x: Tuple[Q, Q], c: Q) -> Tuple[Q, Q]:
    return (c * x[0], c * x[1])


def ecoef_mul(x: Tuple[Q, Q], y: Tuple[Q, Q]) -> Tuple[Q, Q]:
    return (x[0] * y[0], x[0] * y[1] + x[1] * y[0])


# ---------------------------------------------------------------------------
# families


@dataclass
class Family:
    name: str
    n: int
    directed: bool
    table: DegreeTable
    canon: GraphCanonicalizer
    aerial_algebra: Optional[CDGAPresentation] = None
    terrestrial_algebra: Optional[CDGAPresentation] = None
    symmetric_decorations: bool = True
    swiss: bool = False
    connected: bool = False
    no_internal_components: bool = False
    min_internal_valence: int = 0
    tadpoles: bool = True
    dead_end_contraction: bool = True
    contract: bool = True
    cut_delta: Optional[Tensor2] = None
    cut_delta_mixed: Optional[Tensor2] = None
    internal_d: bool = False
    rho: Optional[Dict[int, Vec]] = None
    sigma: Optional[Tensor2] = None
    sigma_boundary: Optional[Tensor2] = None
    twist_zd: Optional["MCElement"] = None
    twist_w: Optional["MCElement"] = None     # boundary-collapse coefficients
    twist_W: Optional["MCElement"] = None     # bulk component coefficients
    boundary_eval: Optional[Callable[[Vec], Q]] = None
    bulk_eval: Optional[Callable[[Vec], Q]] = None
    boundary_twist: bool = False
    min_edges: int = 0

    def algebra(self, color: str) -> Optional[CDGAPresentation]:
        return self.aerial_algebra if color == AERIAL else self.terrestrial_algebra

    def unit_index(self, color: str) -> Optional[int]:
        alg = self.algebra(color)
        return alg.unit if alg is not None else None

    def rho_apply(self, x: Vec) -> Vec:
        out: Vec = {}
        for i, c in x.items():
            for j, cj in (self.rho or {}).get(i, {}).items():
                out[j] = out.get(j, Q(0)) + c * cj
        return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------------
# decoration handling


def _vertex_label(fam: Family, g: OrientedGraph, i: int) -> Vec:
    alg = fam.algebra(g.vertices[i].color)
    x: Vec = alg.unit_vec()
    for idx in g.decorations[i]:
        x = alg.mul(x, {idx: Q(1)})
    return x


def reduce_decorations(fam: Family, vec: GraphVector) -> GraphVector:
    """Algebra mode: multiply out decoration tuples (unit labels dropped).
    Symmetric mode: drop unit decorations only."""
    def strip_sym(g: OrientedGraph, c: Q) -> GraphVector:
        decs = []
        changed = False
        for i, v in enumerate(g.vertices):
            unit = fam.unit_index(v.color)
            d = tuple(x for x in g.decorations[i] if x != unit)
            changed |= d != g.decorations[i]
            decs.append(d)
        gg = OrientedGraph(g.n, g.vertices, g.edges, decs) if changed else g
        cg, s = fam.canon.canonicalize(gg, fam.symmetric_decorations)
        return GraphVector.single(cg, c * s) if s else GraphVector.zero()

    def red_alg(g: OrientedGraph, c: Q) -> GraphVector:
        per_vertex: List[Vec] = []
        for i in range(len(g.vertices)):
            if len(g.decorations[i]) <= 1:
                per_vertex.append(None)  # type: ignore[arg-type]
                continue
            per_vertex.append(_vertex_label(fam, g, i))
        if all(x is None for x in per_vertex):
            cg, s = fam.canon.canonicalize(g, fam.symmetric_decorations)
            return GraphVector.single(cg, c * s) if s else GraphVector.zero()
        out = GraphVector.zero()
        choices = []
        for i, x in enumerate(per_vertex):
            if x is None:
                choices.append([(g.decorations[i], Q(1))])
            else:
                alg = fam.algebra(g.vertices[i].color)
                opts = []
                for idx, coeff in x.items():
                    opts.append(((() if idx == alg.unit else (idx,)), coeff))
                if not opts:
                    return GraphVector.zero()
                choices.append(opts)
        for combo in itertools.product(*choices):
            coeff = c
            decs = []
            for d, cc in combo:
                coeff *= cc
                decs.append(d)
            if not coeff:
                continue
            gg = OrientedGraph(g.n, g.vertices, g.edges, decs)
            cg, s = fam.canon.canonicalize(gg, fam.symmetric_decorations)
            if s:
                out = out.add_scaled(Q(1), GraphVector.single(cg, coeff * s))
        return out

    if fam.symmetric_decorations:
        return vec.map_terms(strip_sym)
    return vec.map_terms(red_alg)


# ---------------------------------------------------------------------------
# differential pieces


def _is_dead_end(g: OrientedGraph, e_idx: int) -> bool:
    s, t = g.edges[e_idx]
    if s == t:
        return False
    for v in (t, s):
        if not g.vertices[v].is_external() and g.valence(v) == 1 and not g.decorations[v]:
            return True
    return False


def _std_ids(vertex_ids: List[Ident], edge_ids: List[Ident],
             dec_ids_per_vertex: List[List[Ident]]) -> List[Ident]:
    out = list(vertex_ids) + list(edge_ids)
    for block in dec_ids_per_vertex:
        out.extend(block)
    return out


def d_contract(fam: Family, g: OrientedGraph) -> GraphVector:
    """The mu part of the twist: collapse a two-vertex aerial subgraph whose
    stripped form is the single edge.  (Parallel edges make the stripped
    subgraph a multi-edge, which pairs to zero against mu, so contracting one
    copy of a multiple edge vanishes, and tadpoles at the absorbed vertex are
    likewise part of the collapsed subgraph.)"""
    out = GraphVector.zero()
    for comb in _connected_subsets(g):
        if len(comb) != 2:
            continue
        va, vb = (g.vertices[v] for v in comb)
        if va.color != AERIAL or vb.color != AERIAL:
            continue
        if va.is_external() and vb.is_external():
            continue
        inner = [k for k, (a, b) in enumerate(g.edges) if a in comb and b in comb]
        if len(inner) != 1:
            continue
        if not fam.dead_end_contraction and _is_dead_end(g, inner[0]):
            continue
        res = _collapse_subgraph(fam, g, comb, AERIAL)
        if res is None:
            continue
        quotient, sub, sign = res
        if sub.num_edges() != 1 or sub.edges[0][0] == sub.edges[0][1]:
            continue
        out = _accumulate(fam, out, quotient, Q(sign))
    return out


def d_cut(fam: Family, g: OrientedGraph) -> GraphVector:
    out = GraphVector.zero()
    word = _word(g, fam.table)
    for k, (s, t) in enumerate(g.edges):
        if s == t:
            continue  # tadpole differential vanishes (twist convention)
        vs, vt = g.vertices[s], g.vertices[t]
        if vs.color == TERRESTRIAL:
            continue
        delta = fam.cut_delta if vt.color == AERIAL else fam.cut_delta_mixed
        if not delta:
            continue
        for (i, j), c in delta.items():
            di = fam.table.decoration_degree(vs.color, i)
            dj = fam.table.decoration_degree(vt.color, j)
            items = []
            for ident, d in word:
                if ident == ("e", k):
                    items.append((("n", 1), di))
                    items.append((("n", 2), dj))
                else:
                    items.append((ident, d))
            # new graph plan: edge k removed, i appended to s-block, j to t-block
            vertex_ids = [("v", a) for a in range(len(g.vertices))]
            edge_ids = [("e", j2) for j2 in range(len(g.edges)) if j2 != k]
            dec_ids: List[List[Ident]] = []
            new_decs: List[List[int]] = []
            for a in range(len(g.vertices)):
                ids = [("d", a, p) for p in range(len(g.decorations[a]))]
                dd = list(g.decorations[a])
                if a == s:
                    ids = ids + [("n", 1)]
                    dd = dd + [i]
                if a == t:
                    ids = ids + [("n", 2)]
                    dd = dd + [j]
                dec_ids.append(ids)
                new_decs.append(dd)
            tgt = _std_ids(vertex_ids, edge_ids, dec_ids)
            # Leibniz: the operator passes items before the edge
            pref = 0
            for ident, d in word:
                if ident == ("e", k):
                    break
                pref ^= d & 1
            sign = word_sign(items, tgt) * (-1 if pref else 1)
            new_edges = [e for j2, e in enumerate(g.edges) if j2 != k]
            gg = OrientedGraph(g.n, g.vertices, new_edges, new_decs)
            out = _accumulate(fam, out, gg, Q(sign) * c)
    return out


def d_internal(fam: Family, g: OrientedGraph) -> GraphVector:
    out = GraphVector.zero()
    word = _word(g, fam.table)
    for i, v in enumerate(g.vertices):
        alg = fam.algebra(v.color)
        if alg is None:
            continue
        for p, x in enumerate(g.decorations[i]):
            dx = alg.diff.get(x)
            if not dx:
                continue
            pref = 0
            for ident, d in word:
                if ident == ("d", i, p):
                    break
                pref ^= d & 1
            sign = -1 if pref else 1
            for y, c in dx.items():
                decs = [list(d) for d in g.decorations]
                decs[i][p] = y
                gg = OrientedGraph(g.n, g.vertices, g.edges, decs)
                out = _accumulate(fam, out, gg, Q(sign) * c)
    return out


def d_boundary_twist(fam: Family, g: OrientedGraph) -> GraphVector:
    """Send a connected set of internal aerial vertices to the boundary.

    Incoming edges become sigma-insertions (sigma\' at the source, sigma\'\'
    multiplying the target\'s label); edges leaving the set kill the term.
    The boundary part, with labels pushed by rho, pairs against the
    boundary Maurer-Cartan element (w0 by default).
    """
    w = fam.twist_w
    if w is None or fam.rho is None:
        return GraphVector.zero()
    out = GraphVector.zero()
    word = _word(g, fam.table)
    wfam = w.family
    ad = wfam.aerial_algebra  # the boundary complex carries A_del on vertices
    for comb in _connected_subsets(g):
        if any(g.vertices[v].is_external() or g.vertices[v].color != AERIAL for v in comb):
            continue
        cset = set(comb)
        if any(a in cset and b not in cset for (a, b) in g.edges):
            continue  # an edge leaves the boundary-bound part: term dies
        in_edges = [k for k, (a, b) in enumerate(g.edges) if b in cset and a not in cset]
        inner_edges = [k for k, (a, b) in enumerate(g.edges) if a in cset and b in cset]
        sigma_terms = list((fam.sigma or {}).items())
        if in_edges and not sigma_terms:
            continue
        for assign in itertools.product(sigma_terms, repeat=len(in_edges)):
            coeff = Q(1)
            # boundary labels per collapsed vertex: rho(label) * sigma\'\'-factors
            bd_label: Dict[int, Vec] = {}
            ok = True
            for v in comb:
                lab = fam.rho_apply(_vertex_label(fam, g, v))
                if not lab:
                    ok = False
                    break
                bd_label[v] = lab
            if not ok:
                continue
            for (k_e, ((sp, spp), c)) in zip(in_edges, assign):
                coeff *= c
                tgt_v = g.edges[k_e][1]
                bd_label[tgt_v] = ad.mul(bd_label[tgt_v], {spp: Q(1)})
                if not bd_label[tgt_v]:
                    ok = False
                    break
            if not ok or not coeff:
                continue
            # word rewrite: in-edges replaced in place by (sigma\', sigma\'\');
            # the boundary block (vertices, inner edges, sigma\'\'-parts, old
            # decorations) moves to the front and is consumed by the pairing
            items = []
            sp_store = {}
            for ident, d in word:
                if ident[0] == "e" and ident[1] in in_edges:
                    k_e = ident[1]
                    pos = in_edges.index(k_e)
                    (sp, spp), _c = assign[pos]
                    dsp = fam.table.decoration_degree(AERIAL, sp)
                    dspp = wfam.table.decoration_degree(AERIAL, spp)
                    sp_store[k_e] = sp
                    items.append(((("s", k_e)), dsp))
                    items.append(((("z", k_e)), dspp))
                else:
                    items.append((ident, d))
            front: List[Ident] = [("v", v) for v in sorted(comb)]
            front += [("e", k) for k in inner_edges]
            front += [("z", k) for k in in_edges]
            for v in sorted(comb):
                front += [("d", v, p) for p in range(len(g.decorations[v]))]
            idx_map: Dict[int, int] = {}
            new_vertices: List[VertexKind] = []
            vertex_ids: List[Ident] = []
            for jj, vv in enumerate(g.vertices):
                if jj in cset:
                    continue
                idx_map[jj] = len(new_vertices)
                new_vertices.append(vv)
                vertex_ids.append(("v", jj))
            edge_ids = []
            new_edges = []
            for kk, (a, b) in enumerate(g.edges):
                if kk in in_edges or kk in inner_edges:
                    continue
                new_edges.append((idx_map[a], idx_map[b]))
                edge_ids.append(("e", kk))
            dec_ids: List[List[Ident]] = []
            new_decs: List[List[int]] = []
            for jj, vv in enumerate(g.vertices):
                if jj in cset:
                    continue
                ids = [("d", jj, p) for p in range(len(g.decorations[jj]))]
                dd = list(g.decorations[jj])
                for k_e in in_edges:
                    if g.edges[k_e][0] == jj:
                        ids.append(("s", k_e))
                        dd.append(sp_store[k_e])
                dec_ids.append(ids)
                new_decs.append(dd)
            tgt = front + _std_ids(vertex_ids, edge_ids, dec_ids)
            sign = word_sign(items, tgt)
            # boundary part in the w-family: expand each label in the basis
            sub_map = {v: j for j, v in enumerate(sorted(comb))}
            bd_edges = [(sub_map[g.edges[k][0]], sub_map[g.edges[k][1]]) for k in inner_edges]
            combos = [[(idx, c) for idx, c in bd_label[v].items()] for v in sorted(comb)]
            for choice in itertools.product(*combos):
                cc = Q(1)
                wdecs = []
                for idx, c in choice:
                    cc *= c
                    unit = ad.unit if ad is not None else None
                    wdecs.append(() if idx == unit else (idx,))
                bd_g = OrientedGraph(g.n, [VertexKind(AERIAL, 0)] * len(comb), bd_edges, wdecs)
                cbd, sbd = wfam.canon.canonicalize(bd_g, wfam.symmetric_decorations)
                if not sbd:
                    continue
                aw, bw = w.pair(cbd)
                if not aw and not bw:
                    continue
                gg = OrientedGraph(g.n, new_vertices, new_edges, new_decs)
                out = _accumulate(fam, out, gg, Q(sign * sbd) * coeff * cc * aw)
    return out


def d_swiss_collapse(fam: Family, g: OrientedGraph, twist: Optional[MCElement] = None,
                     euler_part: bool = False) -> GraphVector:
    """Collapse a subgraph to a terrestrial vertex, weighted by the SC twist.

    The collapsed part has at most one external vertex (terrestrial); labels
    multiply onto the new vertex with rho applied to aerial labels; the
    coefficient is the twist functional on the stripped collapsed graph.
    Terms producing a terrestrial-source edge vanish.
    """
    z = twist if twist is not None else fam.twist_zd
    if z is None:
        return GraphVector.zero()
    out = GraphVector.zero()
    word = _word(g, fam.table)
    ad = fam.terrestrial_algebra
    for comb in _connected_subsets(g):
        ext = [i for i in comb if g.vertices[i].is_external()]
        if len(ext) > 1:
            continue
        if ext and g.vertices[ext[0]].color != TERRESTRIAL:
            continue
        if len(comb) == 1 and g.vertices[comb[0]].color == TERRESTRIAL \
                and not any(a in comb and b in comb for a, b in g.edges):
            continue  # identity collapse
        inner_edges = [k for k, (a, b) in enumerate(g.edges) if a in comb and b in comb]
        sub_map = {v: j for j, v in enumerate(sorted(comb))}
        sub = OrientedGraph(g.n, [VertexKind(g.vertices[v].color, 0) for v in sorted(comb)],
                            [(sub_map[g.edges[k][0]], sub_map[g.edges[k][1]]) for k in inner_edges])
        csub, ssub = z.family.canon.canonicalize(sub, True)
        if not ssub:
            continue
        a_val, b_val = z.pair(csub)
        if euler_part:
            a_val = b_val
        if not a_val:
            continue
        # bad edge check: any edge with source inside and target outside dies
        if any(a in comb and b not in comb for (a, b) in g.edges):
            continue
        out_label: Optional[Vec] = None
        if ad is not None:
            out_label = ad.unit_vec()
            for v in sorted(comb):
                lv = _vertex_label(fam, g, v)
                if g.vertices[v].color == AERIAL:
                    lv = fam.rho_apply(lv)
                out_label = ad.mul(out_label, lv)
                if not out_label:
                    break
            if not out_label:
                continue
        # word rewrite: the sub-block moves to the front and is consumed; the
        # new terrestrial vertex (+ its label decoration) is created at the
        # front of the new standard layout and moved into final position.
        front: List[Ident] = [("v", v) for v in sorted(comb)]
        front += [("e", k) for k in inner_edges]
        for v in sorted(comb):
            front += [("d", v, p) for p in range(len(g.decorations[v]))]
        idx_map: Dict[int, int] = {}
        new_vertices: List[VertexKind] = []
        vertex_ids: List[Ident] = []
        for i, v in enumerate(g.vertices):
            if i in comb:
                continue
            idx_map[i] = len(new_vertices)
            new_vertices.append(v)
            vertex_ids.append(("v", i))
        new_idx = len(new_vertices)
        if ext:
            new_vertices.append(g.vertices[ext[0]])
        else:
            new_vertices.append(VertexKind(TERRESTRIAL, 0))
        vertex_ids.append(("nv",))
        edge_ids = []
        new_edges = []
        for k, (a, b) in enumerate(g.edges):
            if k in inner_edges:
                continue
            a2 = idx_map.get(a, new_idx)
            b2 = idx_map.get(b, new_idx)
            new_edges.append((a2, b2))
            edge_ids.append(("e", k))
        dec_ids: List[List[Ident]] = [
            [("d", i, p) for p in range(len(g.decorations[i]))]
            for i in range(len(g.vertices)) if i not in comb
        ]
        new_decs: List[List[int]] = [list(g.decorations[i]) for i in range(len(g.vertices))
                                     if i not in comb]
        # the new vertex's decoration slot; label distributed below
        nv_deg = fam.table.vertex_degree(new_vertices[new_idx])
        front_set = set(front)
        rest = [(ident, d) for ident, d in word if ident not in front_set]
        s1 = word_sign(word, front + [ident for ident, _d in rest])
        front_items = [(ident, _deg_of(word, ident)) for ident in front]
        if out_label is None:
            dec_ids.append([])
            new_decs.append([])
            items2 = front_items + [(("nv",), nv_deg)] + rest
            tgt = front + _std_ids(vertex_ids, edge_ids, dec_ids)
            sign = s1 * word_sign(items2, tgt)
            gg = OrientedGraph(g.n, new_vertices, new_edges, new_decs)
            out = _accumulate(fam, out, gg, a_val * Q(sign * ssub))
            continue
        for bidx, c in out_label.items():
            dd: List[int] = [] if bidx == ad.unit else [bidx]
            ids: List[Ident] = [] if bidx == ad.unit else [("nd",)]
            dec_ids2 = dec_ids + [ids]
            new_decs2 = new_decs + [dd]
            created = [(("nv",), nv_deg)]
            if dd:
                created.append((("nd",), ad.degrees[bidx]))
            items2 = front_items + created + rest
            tgt = front + _std_ids(vertex_ids, edge_ids, dec_ids2)
            sign = s1 * word_sign(items2, tgt)
            gg = OrientedGraph(g.n, new_vertices, new_edges, new_decs2)
            out = _accumulate(fam, out, gg, a_val * c * Q(sign * ssub))
    return out


def d_keep_subgraph(fam: Family, g: OrientedGraph, twist: Optional[MCElement] = None,
                    connected_only: bool = True) -> GraphVector:
    """Forget internal vertices, keeping a subgraph; the coefficient is the
    twist functional on the quotient (kept part collapsed to a terrestrial
    vertex).  The left-coaction part of the Swiss-Cheese twist."""
    z = twist if twist is not None else fam.twist_zd
    if z is None:
        return GraphVector.zero()
    out = GraphVector.zero()
    word = _word(g, fam.table)
    nv = len(g.vertices)
    all_v = tuple(range(nv))
    for keep in _connected_subsets(g):
        if len(keep) == nv:
            continue
        kset = set(keep)
        if any(g.vertices[v].is_external() for v in all_v if v not in kset):
            continue  # only internal vertices may be forgotten
        # quotient: keep collapsed to a terrestrial vertex inside g
        res = _collapse_subgraph(fam, g, keep, TERRESTRIAL)
        if res is None:
            continue
        quotient, _sub, _sign_q = res
        cq, sq = z.family.canon.canonicalize(
            OrientedGraph(g.n, quotient.vertices, quotient.edges), True)
        if not sq:
            continue
        a_val, b_val = z.pair(cq)
        if not a_val and not b_val:
            continue
        # decorated quotient must carry no labels (the coefficient is scalar)
        if any(quotient.decorations[i] for i in range(len(quotient.vertices) - 1)):
            continue
        # kept part: induced subgraph; forgotten items move to the front
        inner = [k for k, (a, b) in enumerate(g.edges) if a in kset and b in kset]
        crossing_or_out = [k for k in range(len(g.edges)) if k not in inner]
        front: List[Ident] = [("v", v) for v in all_v if v not in kset]
        front += [("e", k) for k in crossing_or_out]
        for v in all_v:
            if v not in kset:
                front += [("d", v, p) for p in range(len(g.decorations[v]))]
        kmap = {v: j for j, v in enumerate(sorted(keep))}
        vertex_ids = [("v", v) for v in sorted(keep)]
        edge_ids = [("e", k) for k in inner]
        dec_ids = [[("d", v, p) for p in range(len(g.decorations[v]))] for v in sorted(keep)]
        tgt = front + _std_ids(vertex_ids, edge_ids, dec_ids)
        sign = word_sign(word, tgt)
        kept = OrientedGraph(g.n, [g.vertices[v] for v in sorted(keep)],
                             [(kmap[g.edges[k][0]], kmap[g.edges[k][1]]) for k in inner],
                             [g.decorations[v] for v in sorted(keep)])
        if connected_only and not kept.is_connected():
            continue
        out = _accumulate(fam, out, kept, a_val * Q(sign * sq))
    return out


def _connected_subsets(g: OrientedGraph) -> List[Tuple[int, ...]]:
    nv = len(g.vertices)
    adj: List[Set[int]] = [set() for _ in range(nv)]
    for a, b in g.edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    seen: Set[frozenset] = set()
    out: List[Tuple[int, ...]] = []
    frontier = [frozenset([i]) for i in range(nv)]
    seen.update(frontier)
    while frontier:
        nxt = []
        for s in frontier:
            out.append(tuple(sorted(s)))
            for v in s:
                for w in adj[v]:
                    if w not in s:
                        s2 = s | {w}
                        if s2 not in seen:
                            seen.add(s2)
                            nxt.append(s2)
        frontier = nxt
    out.sort(key=lambda t: (len(t), t))
    return out


# accumulation with decoration reduction and internal-component evaluation


def _accumulate(fam: Family, acc: GraphVector, g: OrientedGraph, c: Q) -> GraphVector:
    piece = reduce_decorations(fam, GraphVector.single(g, c))
    piece = reduce_internal_components(fam, piece)
    return acc.add_scaled(Q(1), piece)


def reduce_internal_components(fam: Family, vec: GraphVector) -> GraphVector:
    if not fam.no_internal_components:
        return vec

    def red(g: OrientedGraph, c: Q) -> GraphVector:
        comps = g.components()
        internal_comps = [comp for comp in comps
                          if comp and all(not g.vertices[i].is_external() for i in comp)]
        if not internal_comps:
            return GraphVector.single(g, c)
        coeff = Q(1)
        kill: Set[int] = set()
        word = _word(g, fam.table)
        for comp in internal_comps:
            val = _eval_component(fam, g, comp)
            if val == 0:
                return GraphVector.zero()
            coeff *= val
            kill.update(comp)
        front = []
        for ident, _d in word:
            if (ident[0] == "v" and ident[1] in kill) or \
               (ident[0] == "e" and g.edges[ident[1]][0] in kill) or \
               (ident[0] == "d" and ident[1] in kill):
                front.append(ident)
        rest = [ident for ident, _d in word if ident not in front]
        sign = word_sign(word, front + rest)
        idx_map = {}
        new_vertices = []
        new_decs = []
        for i, v in enumerate(g.vertices):
            if i in kill:
                continue
            idx_map[i] = len(new_vertices)
            new_vertices.append(v)
            new_decs.append(g.decorations[i])
        new_edges = [(idx_map[a], idx_map[b]) for (a, b) in g.edges if a not in kill]
        gg = OrientedGraph(g.n, new_vertices, new_edges, new_decs)
        cg, s = fam.canon.canonicalize(gg, fam.symmetric_decorations)
        if not s:
            return GraphVector.zero()
        return GraphVector.single(cg, c * coeff * Q(sign * s))

    return vec.map_terms(red)


def _eval_component(fam: Family, g: OrientedGraph, comp: Tuple[int, ...]) -> Q:
    """Partition-function value of an internal component.

    The component pairs against the family\'s bulk Maurer-Cartan element
    (the gamma-class piece W0 by default; higher pieces are gauge-trivial
    for the bundled data).  Undecorated families evaluate to zero.
    """
    W = fam.twist_W
    if W is not None:
        sub_map = {v: j for j, v in enumerate(comp)}
        inner = [(sub_map[a], sub_map[b]) for (a, b) in g.edges if a in comp and b in comp]
        decs = [g.decorations[v] for v in comp]
        cg = OrientedGraph(g.n, [VertexKind(g.vertices[v].color, 0) for v in comp], inner, decs)
        red = reduce_decorations(fam, GraphVector.single(cg, Q(1)))
        val = Q(0)
        for q, c in red.terms.items():
            a, _b = W.pair(q)
            val += c * a
        return val
    if len(comp) != 1 or any(a in comp for (a, b) in g.edges) or \
            any(b in comp for (a, b) in g.edges):
        return Q(0)
    i = comp[0]
    v = g.vertices[i]
    if fam.algebra(v.color) is None:
        return Q(0)
    x = _vertex_label(fam, g, i)
    if v.color == TERRESTRIAL and fam.boundary_eval is not None:
        return fam.boundary_eval(x)
    if v.color == AERIAL and fam.bulk_eval is not None:
        return fam.bulk_eval(x)
    return Q(0)


def differential(fam: Family, g: OrientedGraph) -> GraphVector:
    out = GraphVector.zero()
    if fam.contract:
        out = out.add_scaled(Q(1), d_contract(fam, g))
    if fam.cut_delta is not None or fam.cut_delta_mixed is not None:
        out = out.add_scaled(Q(1), d_cut(fam, g))
    if fam.internal_d:
        out = out.add_scaled(Q(1), d_internal(fam, g))
    if fam.boundary_twist and fam.twist_w is not None:
        out = out.add_scaled(Q(1), d_boundary_twist(fam, g))
    if fam.twist_zd is not None:
        out = out.add_scaled(Q(1), d_swiss_collapse(fam, g))
    tz = getattr(fam, "twist_aerial", None)
    if tz is not None:
        out = out.add_scaled(Q(1), d_aerial_collapse(fam, g, tz))
    return out


def apply_differential(fam: Family, vec: GraphVector) -> GraphVector:
    out = GraphVector.zero()
    for g, c in vec.terms.items():
        out = out.add_scaled(c, differential(fam, g))
    return out


# ---------------------------------------------------------------------------
# family registry


def _eps_fn(eps: Vec) -> Callable[[Vec], Q]:
    def fn(x: Vec) -> Q:
        return sum((eps[i] * c for i, c in x.items() if i in eps), Q(0))
    return fn


def make_family(name: str, n: int, *, data=None, valence: int = 0,
                tadpoles: Optional[bool] = None, decoration_space: Optional[Sequence[int]] = None,
                twist: Optional[MCElement] = None) -> Family:
    """Build the named complex family.

    data: a DiagonalData (for SGra/SGraphs/mGraphs/aGraphs/Graphs_A) or a
    PLDModelBundle-like object carrying (P, Bd, eps_bd, sigma_P) where noted;
    decoration_space: degree list for GC_{n,V}-type decorations.
    """
    if name in ("Gra", "Graphs"):
        table = DegreeTable(n)
        fam = Family(name=name, n=n, directed=False, table=table,
                     canon=GraphCanonicalizer(table, directed=False),
                     connected=False, no_internal_components=True,
                     dead_end_contraction=False, contract=(name == "Graphs"),
                     tadpoles=True)
        if name == "Gra":
            fam.contract = False
        return fam
    if name in ("GC", "GC2", "GCo", "fGC"):
        table = DegreeTable(n, shift=n)
        return Family(name=name, n=n, directed=False, table=table,
                      canon=GraphCanonicalizer(table, directed=False),
                      connected=(name != "fGC"),
                      min_internal_valence={"GC": 3, "GC2": 2, "GCo": 0, "fGC": 0}[name],
                      tadpoles=(name == "GCo") if tadpoles is None else tadpoles,
                      dead_end_contraction=False)
    if name in ("dGC", "dGCp"):
        table = DegreeTable(n, shift=n)
        return Family(name=name, n=n, directed=True, table=table,
                      canon=GraphCanonicalizer(table, directed=True),
                      connected=True, tadpoles=False if tadpoles is None else tadpoles,
                      dead_end_contraction=False)
    if name == "GCV":
        degs = tuple(decoration_space or ())
        table = DegreeTable(n, aerial_degrees=degs, shift=n)
        return Family(name=name, n=n, directed=False, table=table,
                      canon=GraphCanonicalizer(table, directed=False),
                      connected=True, tadpoles=False if tadpoles is None else tadpoles,
                      dead_end_contraction=False, symmetric_decorations=True)
    if name == "fGCAV":
        # A-decorated graphs with a pairing-induced edge cut, plus inert
        # V-decorations; A is data.A with data.delta the diagonal of eps-pairing
        A = data["A"]
        vdegs = tuple(decoration_space or ())
        degs = tuple(A.degrees) + vdegs
        table = DegreeTable(n, aerial_degrees=degs, shift=n)
        delta = {(i, j): c for (i, j), c in data["delta"].items()}
        return Family(name=name, n=n, directed=False, table=table,
                      canon=GraphCanonicalizer(table, directed=False),
                      connected=False, tadpoles=False if tadpoles is None else tadpoles,
                      dead_end_contraction=False, symmetric_decorations=True,
                      cut_delta=delta)
    if name in ("SGra", "SGraphs_op"):
        # the operadic Swiss-Cheese graphs (undecorated)
        table = DegreeTable(n, shift=(n - 1) if name == "SGraphs_op" else 0)
        fam = Family(name=name, n=n, directed=True, table=table,
                     canon=GraphCanonicalizer(table, directed=True),
                     swiss=True, connected=False,
                     no_internal_components=(name == "SGraphs_op"),
                     dead_end_contraction=False, contract=(name == "SGraphs_op"),
                     tadpoles=True)
        return fam
    if name in ("SGC", "KGC"):
        # connected part of Tw SGra(0,0); KGC is its dual (same basis)
        table = DegreeTable(n, shift=n - 1)
        return Family(name=name, n=n, directed=True, table=table,
                      canon=GraphCanonicalizer(table, directed=True),
                      swiss=True, connected=True, tadpoles=True,
                      dead_end_contraction=False)
    if name in ("SGraA", "SGraphsA"):
        dd = data  # DiagonalData
        table = DegreeTable(n, aerial_degrees=tuple(dd.A.degrees),
                            terrestrial_degrees=tuple(dd.Ad.degrees))
        fam = Family(name=name, n=n, directed=True, table=table,
                     canon=GraphCanonicalizer(table, directed=True),
                     aerial_algebra=dd.A, terrestrial_algebra=dd.Ad,
                     symmetric_decorations=False, swiss=True,
                     no_internal_components=(name == "SGraphsA"),
                     dead_end_contraction=True,
                     contract=(name == "SGraphsA"),
                     cut_delta=dict(dd.delta), cut_delta_mixed=dd.delta_mixed(),
                     internal_d=True,
                     rho={i: dict(v) for i, v in dd.rho.images.items()},
                     sigma=dict(dd.sigma), tadpoles=True)
        if name == "SGraphsA":
            kfam = make_family("KGC", n)
            fam.twist_zd = builtin_mc("z0_partial", kfam, max_legs=6)
        return fam
    if name == "GraphsA":
        dd = data
        table = DegreeTable(n, aerial_degrees=tuple(dd.A.degrees))
        return Family(name=name, n=n, directed=False, table=table,
                      canon=GraphCanonicalizer(table, directed=False),
                      aerial_algebra=dd.A, symmetric_decorations=False,
                      no_internal_components=True, dead_end_contraction=True,
                      contract=True, cut_delta=dict(dd.delta), internal_d=True,
                      tadpoles=True)
    if name in ("mGraphs", "mGC"):
        dd = data
        table = DegreeTable(n, aerial_degrees=tuple(dd.A.degrees),
                            terrestrial_degrees=tuple(dd.Ad.degrees))
        eps_bd = data_eps(dd)
        fam = Family(name=name, n=n, directed=False, table=table,
                     canon=GraphCanonicalizer(table, directed=False),
                     aerial_algebra=dd.A, terrestrial_algebra=dd.Ad,
                     symmetric_decorations=False,
                     connected=(name == "mGC"),
                     no_internal_components=True,
                     dead_end_contraction=(name == "mGraphs"),
                     contract=True, cut_delta=dict(dd.delta), internal_d=True,
                     rho={i: dict(v) for i, v in dd.rho.images.items()},
                     sigma=dict(dd.sigma),
                     boundary_twist=True,
                     min_internal_valence=valence,
                     tadpoles=True if tadpoles is None else tadpoles)
        if eps_bd is not None:
            afam = make_family("aGC", n, data=dd)
            fam.twist_w = builtin_mc("w0", afam, params={"eps": eps_bd})
        if twist is not None:
            fam.twist_W = twist
        return fam
    if name in ("aGraphs", "aGC"):
        dd = data
        # boundary-only: all vertices terrestrial-algebra-decorated but AERIAL
        # colored (edges run freely); internal vertices have degree -n
        table = DegreeTable(n, aerial_degrees=tuple(dd.Ad.degrees))
        eps_bd = data_eps(dd)
        sigma_b = sigma_boundary_of(dd)
        fam = Family(name=name, n=n, directed=False, table=table,
                     canon=GraphCanonicalizer(table, directed=False),
                     aerial_algebra=dd.Ad, symmetric_decorations=False,
                     connected=(name == "aGC"),
                     no_internal_components=True,
                     dead_end_contraction=(name == "aGraphs"),
                     contract=True, internal_d=True,
                     rho={i: {i: Q(1)} for i in range(dd.Ad.dim())},
                     sigma=dict(sigma_b), terrestrial_algebra=dd.Ad,
                     boundary_twist=True,
                     min_internal_valence=valence,
                     tadpoles=True if tadpoles is None else tadpoles)
        if eps_bd is not None and name == "aGraphs":
            afam = make_family("aGC", n, data=dd)
            fam.twist_w = builtin_mc("w0", afam, params={"eps": eps_bd})
        return fam
    raise ValueError(f"unknown family {name}")


def data_eps(dd) -> Optional[Vec]:
    return getattr(dd, "eps_bd", None)


def sigma_boundary_of(dd) -> Tensor2:
    """sigma_del = (rho (x) id)(sigma_A) in A_del (x) A_del."""
    out: Tensor2 = {}
    for (i, j), c in dd.sigma.items():
        for k, ck in dd.rho.images.get(i, {}).items():
            key = (k, j)
            v = out.get(key, Q(0)) + c * ck
            if v:
                out[key] = v
            else:
                out.pop(key, None)
    return out


# ---------------------------------------------------------------------------
# windows and slices


@dataclass
class Window:
    n_external_aerial: int = 0
    n_external_terrestrial: int = 0
    max_size: Optional[int] = None
    loop_order: Optional[int] = None
    max_internal_aerial: Optional[int] = None
    max_internal_terrestrial: Optional[int] = None
    max_edges: Optional[int] = None
    exact_internal: Optional[Tuple[int, int]] = None
    exact_edges: Optional[int] = None
    max_decorations: int = 0
    degree_min: Optional[int] = None
    degree_max: Optional[int] = None


@dataclass
class ComplexSlice:
    family: Family
    window: Window
    basis_by_degree: Dict[int, List[OrientedGraph]]
    d_matrices: Dict[int, SparseMatrix]   # degree d -> matrix of d: C^d -> C^{d+1}

    def dims(self) -> Dict[int, int]:
        return {d: len(b) for d, b in self.basis_by_degree.items() if b}


def enumerate_family(fam: Family, w: Window) -> List[OrientedGraph]:
    ia = w.max_internal_aerial
    it = w.max_internal_terrestrial
    size = w.max_size
    if ia is None:
        ia = (size or 0)
    if it is None:
        it = (size or 0) if fam.swiss else 0
    dec_a = list(range(fam.aerial_algebra.dim())) if fam.aerial_algebra is not None else []
    if fam.aerial_algebra is not None and fam.aerial_algebra.unit is not None:
        dec_a = [i for i in dec_a if i != fam.aerial_algebra.unit]
    if fam.name == "GCV":
        dec_a = list(range(len(fam.table.aerial_degrees)))
    dec_t = list(range(fam.terrestrial_algebra.dim())) if (fam.swiss and fam.terrestrial_algebra is not None) else []
    if fam.swiss and fam.terrestrial_algebra is not None and fam.terrestrial_algebra.unit is not None:
        dec_t = [i for i in dec_t if i != fam.terrestrial_algebra.unit]
    max_dec = w.max_decorations
    if (dec_a or dec_t) and max_dec == 0 and not fam.symmetric_decorations:
        max_dec = 0  # caller must ask for decorations explicitly
    out = list(enumerate_graphs(
        n=fam.n, canon=fam.canon,
        n_external_aerial=w.n_external_aerial,
        n_external_terrestrial=w.n_external_terrestrial,
        max_internal_aerial=ia, max_internal_terrestrial=it,
        max_edges=w.max_edges, max_size=size,
        exact_internal=w.exact_internal, exact_edges=w.exact_edges,
        connected=fam.connected,
        no_internal_components=fam.no_internal_components,
        min_internal_valence=max(fam.min_internal_valence, 0),
        allow_tadpoles=fam.tadpoles,
        terrestrial_sources=False,
        loop_order=w.loop_order,
        decoration_indices_aerial=dec_a,
        decoration_indices_terrestrial=dec_t,
        max_decorations=max_dec,
        max_edge_multiplicity=3,
    ))
    if fam.min_edges:
        out = [g for g in out if g.num_edges() >= fam.min_edges]
    if not fam.symmetric_decorations:
        out = [g for g in out if all(len(d) <= 1 for d in g.decorations)]
    return out


def build_slice(fam: Family, w: Window) -> ComplexSlice:
    """Enumerate the window's basis and assemble the differential matrices.

    d^2 = 0 is asserted; a differential term leaving the window raises
    WindowNotClosed (never silently truncated).
    """
    basis = enumerate_family(fam, w)
    by_degree: Dict[int, List[OrientedGraph]] = {}
    for g in basis:
        d = graph_degree(g, fam.table)
        by_degree.setdefault(d, []).append(g)
    for d in by_degree:
        by_degree[d].sort(key=lambda g: (g.size(), g.serialize()))
    index: Dict[OrientedGraph, Tuple[int, int]] = {}
    for d, gs in by_degree.items():
        for k, g in enumerate(gs):
            index[g] = (d, k)
    mats: Dict[int, SparseMatrix] = {}
    entries: Dict[int, Dict[Tuple[int, int], Q]] = {}
    for d, gs in sorted(by_degree.items()):
        ent: Dict[Tuple[int, int], Q] = {}
        for col, g in enumerate(gs):
            dg = differential(fam, g)
            for h, c in dg.terms.items():
                dh = graph_degree(h, fam.table)
                if dh != d + 1:
                    raise WindowNotClosed(
                        f"differential changed degree by {dh - d} on {g.serialize()}")
                if h not in index:
                    if _in_window(fam, w, h):
                        raise WindowNotClosed(f"missed basis graph {h.serialize()}")
                    raise WindowNotClosed(
                        f"differential escapes the window: {g.serialize()} -> {h.serialize()}")
                _dd, row = index[h]
                ent[(row, col)] = ent.get((row, col), Q(0)) + c
        entries[d] = {k: v for k, v in ent.items() if v}
    for d, gs in sorted(by_degree.items()):
        rows = len(by_degree.get(d + 1, []))
        mats[d] = SparseMatrix(rows, len(gs), entries.get(d, {}))
    # d^2 = 0
    for d in sorted(by_degree):
        m1 = mats.get(d)
        m2 = mats.get(d + 1)
        if m1 is not None and m2 is not None and not m2.matmul(m1).is_zero():
            raise WindowNotClosed(f"d^2 != 0 between degrees {d} and {d + 2}")
    return ComplexSlice(fam, w, by_degree, mats)


def _in_window(fam: Family, w: Window, g: OrientedGraph) -> bool:
    if w.max_size is not None and g.size() > w.max_size:
        return False
    if w.loop_order is not None and g.loop_order() != w.loop_order:
        return False
    if w.exact_internal is not None:
        ia = sum(1 for v in g.vertices if not v.is_external() and v.color == AERIAL)
        it = sum(1 for v in g.vertices if not v.is_external() and v.color == TERRESTRIAL)
        if (ia, it) != w.exact_internal:
            return False
    if w.exact_edges is not None and g.num_edges() != w.exact_edges:
        return False
    if w.max_edges is not None and g.num_edges() > w.max_edges:
        return False
    return True


def vertex_count_at(fam: Family, loop_order: int, degree: int) -> int:
    """Vertex count of a connected undecorated graph of given loop and degree."""
    # degree = e(n-1) - v n + shift with e = v + loop - 1
    n = fam.n
    return (loop_order - 1) * (n - 1) + fam.table.shift - degree


def cohomology_bidegree(fam: Family, loop_order: int, degree: int) -> int:
    """Exact dim H^(degree, loop) for a connected undecorated family.

    The three relevant strata (v-1, v, v+1 vertices) are finite and built
    completely, so the answer is exact, not a window approximation.
    """
    if not fam.connected or fam.aerial_algebra is not None:
        raise WindowNotClosed("bidegree computation needs a connected undecorated family")
    v = vertex_count_at(fam, loop_order, degree)
    if v < 1:
        return 0
    strata: Dict[int, List[OrientedGraph]] = {}
    for vv in (v - 1, v, v + 1):
        if vv < 1:
            strata[vv] = []
            continue
        w = Window(exact_internal=(vv, 0), exact_edges=vv + loop_order - 1,
                   loop_order=loop_order)
        strata[vv] = enumerate_family(fam, w)
    index = {g: k for k, g in enumerate(strata[v])}
    index_up = {g: k for k, g in enumerate(strata[v - 1])} if v - 1 >= 1 else {}
    ent_out: Dict[Tuple[int, int], Q] = {}
    for col, g in enumerate(strata[v]):
        for h, c in differential(fam, g).terms.items():
            if h in index_up:
                ent_out[(index_up[h], col)] = ent_out.get((index_up[h], col), Q(0)) + c
    m_out = SparseMatrix(len(strata.get(v - 1, [])), len(strata[v]),
                         {k: c for k, c in ent_out.items() if c})
    ent_in: Dict[Tuple[int, int], Q] = {}
    for col, g in enumerate(strata.get(v + 1, [])):
        for h, c in differential(fam, g).terms.items():
            if h in index:
                ent_in[(index[h], col)] = ent_in.get((index[h], col), Q(0)) + c
    m_in = SparseMatrix(len(strata[v]), len(strata.get(v + 1, [])),
                        {k: c for k, c in ent_in.items() if c})
    return betti_at(m_in, m_out)


def cohomology(fam: Family, w: Window) -> BettiTable:
    """Exact Betti numbers per (degree, loop order) within the window.

    When the window fixes a loop order for a connected undecorated family,
    each bidegree is computed exactly from its three finite strata; the
    window's vertex bound only selects which degrees are reported.
    Otherwise the full windowed slice is used, and the extremal degrees may
    be truncation-sensitive (interior degrees are exact).
    """
    table = BettiTable()
    if w.loop_order is not None and fam.connected and fam.aerial_algebra is None:
        max_v = w.max_internal_aerial
        if max_v is None and w.max_size is not None:
            max_v = w.max_size // 2
        if max_v is None:
            raise WindowNotClosed("need a vertex bound")
        for v in range(1, max_v + 1):
            d = (w.loop_order - 1) * (fam.n - 1) + fam.table.shift - v
            if w.degree_min is not None and d < w.degree_min:
                continue
            if w.degree_max is not None and d > w.degree_max:
                continue
            dim = cohomology_bidegree(fam, w.loop_order, d)
            if dim:
                table.set(d, w.loop_order, dim)
        return table
    sl = build_slice(fam, w)
    for d in sorted(sl.basis_by_degree):
        dim = _betti_in_slice(sl, d)
        if dim:
            lo = 0
            if all(g.loop_order() == sl.basis_by_degree[d][0].loop_order()
                   for g in sl.basis_by_degree[d]):
                lo = sl.basis_by_degree[d][0].loop_order()
            table.set(d, lo, dim)
    return table


def _betti_in_slice(sl: ComplexSlice, d: int) -> int:
    basis = sl.basis_by_degree.get(d, [])
    if not basis:
        return 0
    m_out = sl.d_matrices.get(d, SparseMatrix.zero(0, len(basis)))
    prev = sl.basis_by_degree.get(d - 1, [])
    m_in = sl.d_matrices.get(d - 1, SparseMatrix.zero(len(basis), len(prev)))
    return betti_at(m_in, m_out)


# ---------------------------------------------------------------------------
# builtin Maurer-Cartan elements


def _fan(n: int, legs: int, double_to_first: bool = False, tadpole: bool = False) -> OrientedGraph:
    """Apex aerial vertex with `legs` terrestrial targets (optionally one
    doubled edge or a tadpole at the apex)."""
    vertices = [VertexKind(AERIAL, 0)] + [VertexKind(TERRESTRIAL, 0)] * legs
    edges = [(0, i + 1) for i in range(legs)]
    if double_to_first:
        edges.append((0, 1))
    if tadpole:
        edges.append((0, 0))
    return OrientedGraph(n, vertices, edges)


def builtin_mc(name: str, fam: Family, *, max_legs: int = 6, params: Optional[dict] = None) -> MCElement:
    """The named Maurer-Cartan element, truncated to the requested size.

    mu: the single-edge two-vertex graph (dual generator), coefficient 1.
    z0_partial: fans with k legs, weight 1/k!.
    z1_partial: Euler-weighted fans with one double edge or one tadpole.
    w0: boundary integration functional (single vertex, eps_del values).
    W0: bulk gamma-classes functional (single vertex, gamma gamma^* values).
    """
    import math
    params = params or {}
    if name == "mu":
        g = OrientedGraph(fam.n, [VertexKind(AERIAL, 0)] * 2, [(0, 1)])
        cg, s = fam.canon.canonicalize(g)
        return MCElement.from_plain(fam, {cg: Q(s)}, "mu")
    if name == "z0_partial":
        coeffs: Dict[OrientedGraph, Tuple[Q, Q]] = {}
        for k in range(0, max_legs + 1):
            g = _fan(fam.n, k)
            cg, s = fam.canon.canonicalize(g)
            if s:
                coeffs[cg] = (Q(s) / math.factorial(k), Q(0))
        return MCElement(fam, coeffs, "z0_partial")
    if name == "z1_partial":
        coeffs = {}
        for k in range(0, max_legs):
            for kind in ("double", "tadpole"):
                g = _fan(fam.n, k + (1 if kind == "double" else 0),
                         double_to_first=(kind == "double"), tadpole=(kind == "tadpole"))
                cg, s = fam.canon.canonicalize(g)
                if s and cg not in coeffs:
                    legs = k + (1 if kind == "double" else 0)
                    coeffs[cg] = (Q(0), Q(s) / math.factorial(legs))
        return MCElement(fam, coeffs, "z1_partial")
    if name == "w0":
        ad = fam.aerial_algebra if not fam.swiss else fam.terrestrial_algebra
        eps = params.get("eps")
        if ad is None or eps is None:
            raise MissingBasis("w0 needs the boundary algebra and eps")
        coeffs = {}
        for i in range(ad.dim()):
            val = eps.get(i, Q(0))
            if val:
                g = OrientedGraph(fam.n, [VertexKind(AERIAL, 0)], [], [(i,)])
                cg, s = fam.canon.canonicalize(g, fam.symmetric_decorations)
                if s:
                    coeffs[cg] = (val * Q(s), Q(0))
        return MCElement(fam, coeffs, "w0")
    if name == "W0":
        # sum_i gamma_i gamma_i^*: a single aerial vertex decorated by the
        # expansion of the element in the bulk algebra
        elem: Vec = params.get("element", {})
        coeffs = {}
        for i, c in elem.items():
            g = OrientedGraph(fam.n, [VertexKind(AERIAL, 0)], [], [(i,)])
            cg, s = fam.canon.canonicalize(g, fam.symmetric_decorations)
            if s:
                coeffs[cg] = (c * Q(s), Q(0))
        return MCElement(fam, coeffs, "W0")
    raise ValueError(f"unknown MC element {name}")


# ---------------------------------------------------------------------------
# dual-side operations: functional differential, brackets, mc_check
#
# The untwisted differential of every graph (co)operad is carried by the
# generators (edge cut, internal CDGA differential); edge contraction is the
# action of mu, and the Swiss-Cheese / boundary pieces are the brackets.
# mc_check therefore evaluates, per family shape:
#     z(d_gen Gamma) + <mu . z, Gamma> + 1/2 <[z, z], Gamma>
# with the bracket given by the family's two-part cocomposition.


def _d_generators(fam: Family, g: OrientedGraph) -> GraphVector:
    out = GraphVector.zero()
    if fam.cut_delta is not None or fam.cut_delta_mixed is not None:
        out = out.add_scaled(Q(1), d_cut(fam, g))
    if fam.internal_d:
        out = out.add_scaled(Q(1), d_internal(fam, g))
    return out


def _collapse_subgraph(fam: Family, g: OrientedGraph, comb: Tuple[int, ...],
                       new_color: str) -> Optional[Tuple[OrientedGraph, OrientedGraph, int]]:
    """Collapse the connected subset comb to a single vertex.

    Returns (quotient, stripped subgraph, word sign) or None.  Decorations of
    the collapsed part move to the new vertex (kept as a tuple; the caller
    reduces them).  Edges inside comb disappear into the subgraph; edges
    across reconnect.  At most one external vertex may be collapsed; the new
    vertex then keeps its kind (with the requested color).
    """
    word = _word(g, fam.table)
    inner_edges = [k for k, (a, b) in enumerate(g.edges) if a in comb and b in comb]
    sub_map = {v: j for j, v in enumerate(sorted(comb))}
    ext = [v for v in comb if g.vertices[v].is_external()]
    if len(ext) > 1:
        return None
    sub = OrientedGraph(g.n, [VertexKind(g.vertices[v].color, 0) for v in sorted(comb)],
                        [(sub_map[g.edges[k][0]], sub_map[g.edges[k][1]]) for k in inner_edges])
    idx_map: Dict[int, int] = {}
    new_vertices: List[VertexKind] = []
    vertex_ids: List[Ident] = []
    for i, v in enumerate(g.vertices):
        if i in comb:
            continue
        idx_map[i] = len(new_vertices)
        new_vertices.append(v)
        vertex_ids.append(("v", i))
    new_idx = len(new_vertices)
    new_kind = VertexKind(new_color, ext[0] and g.vertices[ext[0]].label if False else
                          (g.vertices[ext[0]].label if ext else 0))
    new_vertices.append(new_kind)
    vertex_ids.append(("nv",))
    new_edges = []
    edge_ids = []
    for k, (a, b) in enumerate(g.edges):
        if k in inner_edges:
            continue
        a2 = idx_map.get(a, new_idx)
        b2 = idx_map.get(b, new_idx)
        if new_color == TERRESTRIAL and a2 == new_idx:
            return None  # bad edge
        new_edges.append((a2, b2))
        edge_ids.append(("e", k))
    front: List[Ident] = [("v", v) for v in sorted(comb)]
    front += [("e", k) for k in inner_edges]
    # decorations of comb move (in order) onto the new vertex
    dec_ids = [[("d", i, p) for p in range(len(g.decorations[i]))]
               for i in range(len(g.vertices)) if i not in comb]
    moved: List[Ident] = []
    moved_dec: List[int] = []
    for v in sorted(comb):
        for p in range(len(g.decorations[v])):
            moved.append(("d", v, p))
            moved_dec.append(g.decorations[v][p])
    # two-step sign: consumed block to the front, then the created vertex is
    # declared in place (right after the front) and moved to its slot
    rest = [(ident, d) for ident, d in word if ident not in set(front)]
    s1 = word_sign(word, front + [ident for ident, _d in rest])
    items2 = [(ident, d) for ident, d in word if ident in set(front)]
    items2 = [(ident, dict(word)[ident]) for ident in front]
    items2 = [(ident, _deg_of(word, ident)) for ident in front]
    items2.append((("nv",), fam.table.vertex_degree(new_kind)))
    items2.extend(rest)
    tgt = front + _std_ids(vertex_ids, edge_ids, dec_ids + [moved])
    s2 = word_sign(items2, tgt)
    sign = s1 * s2
    quotient = OrientedGraph(g.n, new_vertices, new_edges,
                             [g.decorations[i] for i in range(len(g.vertices)) if i not in comb]
                             + [tuple(moved_dec)])
    return quotient, sub, sign


def mu_action(z: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """<mu . z, Gamma>: sum over aerial connected subsets collapsing to an
    aerial vertex, pairing the stripped subgraph against mu (an edge)."""
    fam = z.family
    out = (Q(0), Q(0))
    for comb in _connected_subsets(g):
        if len(comb) != 2 or len(comb) == len(g.vertices) and False:
            continue
        if any(g.vertices[v].color != AERIAL for v in comb):
            continue
        if any(g.vertices[v].is_external() for v in comb):
            continue
        res = _collapse_subgraph(fam, g, comb, AERIAL)
        if res is None:
            continue
        quotient, sub, sign = res
        if sub.num_edges() != 1:
            continue  # mu pairs only with the single edge
        cs, ss = fam.canon.canonicalize(sub, True)
        if not ss:
            continue
        # reduce the quotient's merged decorations, then pair with z
        red = reduce_decorations(fam, GraphVector.single(quotient, Q(1)))
        for q, cq in red.terms.items():
            a, b = z.pair(q)
            if a or b:
                out = (out[0] + Q(sign * ss) * cq * a, out[1] + Q(sign * ss) * cq * b)
    return out


def sc_bracket(z1: MCElement, z2: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """<[z1, z2], Gamma> for Swiss-Cheese duals: terrestrial collapse."""
    fam = z1.family
    out = (Q(0), Q(0))
    for comb in _connected_subsets(g):
        if len(comb) == len(g.vertices):
            continue
        if any(g.vertices[v].is_external() for v in comb):
            continue
        res = _collapse_subgraph(fam, g, comb, TERRESTRIAL)
        if res is None:
            continue
        quotient, sub, sign = res
        cs, ss = fam.canon.canonicalize(sub, True)
        if not ss:
            continue
        red = reduce_decorations(fam, GraphVector.single(quotient, Q(1)))
        for q, cq in red.terms.items():
            for (za, zb) in ((z1, z2), (z2, z1)):
                prod = ecoef_mul(za.pair(q), zb.pair(cs))
                out = (out[0] + Q(sign * ss) * cq * prod[0],
                       out[1] + Q(sign * ss) * cq * prod[1])
    return out


def _partitions_two(g: OrientedGraph):
    """Ordered 2-partitions (S1, S2) of the vertex set, both nonempty."""
    nv = len(g.vertices)
    for mask in range(1, 2 ** nv - 1):
        s1 = tuple(i for i in range(nv) if mask & (1 << i))
        s2 = tuple(i for i in range(nv) if not mask & (1 << i))
        yield s1, s2


def boundary_bracket(z1: MCElement, z2: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """<[z1, z2], Gamma> for the boundary complex: ordered two-part
    splittings with every crossing edge replaced by sigma_del."""
    fam = z1.family
    ad = fam.aerial_algebra  # aGC carries the boundary algebra on its vertices
    sigma = fam.sigma or {}
    out = (Q(0), Q(0))
    word = _word(g, fam.table)
    for s1, s2 in _partitions_two(g):
        set1 = set(s1)
        crossing = [k for k, (a, b) in enumerate(g.edges)
                    if (a in set1) != (b in set1)]
        inner1 = [k for k, (a, b) in enumerate(g.edges) if a in set1 and b in set1]
        inner2 = [k for k, (a, b) in enumerate(g.edges) if a not in set1 and b not in set1]
        # both parts must be connected as graphs
        if not _part_connected(g, s1, inner1) or not _part_connected(g, s2, inner2):
            continue
        for assign in itertools.product(list(sigma.items()), repeat=len(crossing)):
            coeff = Q(1)
            decs = [list(d) for d in g.decorations]
            items = []
            ins_part: Dict[int, List[Tuple[Ident, int]]] = {}
            for ident, d in word:
                if ident[0] == "e" and ident[1] in crossing:
                    k = ident[1]
                    pos = crossing.index(k)
                    (sp, spp), c = assign[pos]
                    dsp = fam.table.decoration_degree(AERIAL, sp)
                    dspp = fam.table.decoration_degree(AERIAL, spp)
                    items.append(((("s1", k)), dsp))
                    items.append(((("s2", k)), dspp))
                else:
                    items.append((ident, d))
            for pos, k in enumerate(crossing):
                (sp, spp), c = assign[pos]
                coeff *= c
                a, b = g.edges[k]
                left, right = (a, b) if a in set1 else (b, a)
                decs[left] = decs[left] + [sp]
                decs[right] = decs[right] + [spp]
            if not coeff:
                continue
            # word sign: items reordered to (part1 standard, part2 standard)
            tgt: List[Ident] = []
            for part, inner, tag in ((s1, inner1, "s1"), (s2, inner2, "s2")):
                pset = set(part)
                for v in part:
                    tgt.append(("v", v))
                for k in inner:
                    tgt.append(("e", k))
                for v in part:
                    for p in range(len(g.decorations[v])):
                        tgt.append(("d", v, p))
                    for pos, k in enumerate(crossing):
                        a, b = g.edges[k]
                        left, right = (a, b) if a in set1 else (b, a)
                        if tag == "s1" and left == v:
                            tgt.append(("s1", k))
                        if tag == "s2" and right == v:
                            tgt.append(("s2", k))
            sign = word_sign(items, tgt)
            part_graphs = []
            ok = True
            for part, inner in ((s1, inner1), (s2, inner2)):
                pmap = {v: j for j, v in enumerate(part)}
                pg = OrientedGraph(g.n, [g.vertices[v] for v in part],
                                   [(pmap[g.edges[k][0]], pmap[g.edges[k][1]]) for k in inner],
                                   [decs[v] for v in part])
                part_graphs.append(pg)
            red1 = reduce_decorations(fam, GraphVector.single(part_graphs[0], Q(1)))
            red2 = reduce_decorations(fam, GraphVector.single(part_graphs[1], Q(1)))
            for q1, c1 in red1.terms.items():
                for q2, c2 in red2.terms.items():
                    for (za, zb) in ((z1, z2), (z2, z1)):
                        prod = ecoef_mul(za.pair(q1), zb.pair(q2))
                        out = (out[0] + Q(sign) * coeff * c1 * c2 * prod[0],
                               out[1] + Q(sign) * coeff * c1 * c2 * prod[1])
    return out


def _part_connected(g: OrientedGraph, part: Tuple[int, ...], inner: List[int]) -> bool:
    if len(part) <= 1:
        return True
    parent = {v: v for v in part}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k in inner:
        a, b = g.edges[k]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in part}) == 1


def bridge_bracket(z1: MCElement, z2: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """<[z1, z2], Gamma> for bulk duals: splittings along one cut edge.

    Dual to the component-splitting part of the edge-cut differential: a
    single crossing edge is removed and replaced by the diagonal pair.
    """
    fam = z1.family
    delta = fam.cut_delta or {}
    out = (Q(0), Q(0))
    word = _word(g, fam.table)
    for s1, s2 in _partitions_two(g):
        set1 = set(s1)
        crossing = [k for k, (a, b) in enumerate(g.edges) if (a in set1) != (b in set1)]
        if len(crossing) != 1:
            continue
        inner1 = [k for k, (a, b) in enumerate(g.edges) if a in set1 and b in set1]
        inner2 = [k for k, (a, b) in enumerate(g.edges) if a not in set1 and b not in set1]
        if not _part_connected(g, s1, inner1) or not _part_connected(g, s2, inner2):
            continue
        k = crossing[0]
        a, b = g.edges[k]
        for (i, j), c in delta.items():
            di = fam.table.decoration_degree(AERIAL, i)
            dj = fam.table.decoration_degree(AERIAL, j)
            items = []
            for ident, d in word:
                if ident == ("e", k):
                    items.append(((("n", 1)), di))
                    items.append(((("n", 2)), dj))
                else:
                    items.append((ident, d))
            decs = [list(d) for d in g.decorations]
            decs[a] = decs[a] + [i]
            decs[b] = decs[b] + [j]
            tgt: List[Ident] = []
            for part, inner in ((s1, inner1), (s2, inner2)):
                for v in part:
                    tgt.append(("v", v))
                for kk in inner:
                    tgt.append(("e", kk))
                for v in part:
                    for p in range(len(g.decorations[v])):
                        tgt.append(("d", v, p))
                    if v == a:
                        tgt.append(("n", 1))
                    if v == b:
                        tgt.append(("n", 2))
            sign = word_sign(items, tgt)
            part_graphs = []
            for part, inner in ((s1, inner1), (s2, inner2)):
                pmap = {v: jj for jj, v in enumerate(part)}
                pg = OrientedGraph(g.n, [g.vertices[v] for v in part],
                                   [(pmap[g.edges[kk][0]], pmap[g.edges[kk][1]]) for kk in inner],
                                   [decs[v] for v in part])
                part_graphs.append(pg)
            red1 = reduce_decorations(fam, GraphVector.single(part_graphs[0], Q(1)))
            red2 = reduce_decorations(fam, GraphVector.single(part_graphs[1], Q(1)))
            for q1, c1 in red1.terms.items():
                for q2, c2 in red2.terms.items():
                    for (za, zb) in ((z1, z2), (z2, z1)):
                        prod = ecoef_mul(za.pair(q1), zb.pair(q2))
                        out = (out[0] + Q(sign) * c * c1 * c2 * prod[0],
                               out[1] + Q(sign) * c * c1 * c2 * prod[1])
    return out


def boundary_action(w: MCElement, z: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """<w . z, Gamma> for the semidirect boundary action on bulk duals.

    One part of the graph goes to the boundary: crossing edges with tip in
    the boundary part become sigma-insertions, source-crossing edges vanish,
    boundary labels are pushed by rho.  The boundary part pairs with w, the
    bulk part with z.
    """
    fam = z.family
    wfam = w.family
    sigma = fam.sigma or {}
    out = (Q(0), Q(0))
    word = _word(g, fam.table)
    for s_bulk, s_bd in _partitions_two(g):
        bulk = set(s_bulk)
        crossing = [k for k, (a, b) in enumerate(g.edges) if (a in bulk) != (b in bulk)]
        if any(g.edges[k][0] not in bulk for k in crossing):
            continue  # edge source in the boundary part: term vanishes
        inner_b = [k for k, (a, b) in enumerate(g.edges) if a in bulk and b in bulk]
        inner_d = [k for k, (a, b) in enumerate(g.edges) if a not in bulk and b not in bulk]
        if inner_d:
            continue  # boundary part of an mGC graph has no surviving edges
        if not _part_connected(g, s_bulk, inner_b):
            continue
        for assign in itertools.product(list(sigma.items()), repeat=len(crossing)):
            coeff = Q(1)
            decs = [list(d) for d in g.decorations]
            items = []
            for ident, d in word:
                if ident[0] == "e" and ident[1] in crossing:
                    k = ident[1]
                    pos = crossing.index(k)
                    (sp, spp), c = assign[pos]
                    items.append(((("s1", k)), fam.table.decoration_degree(AERIAL, sp)))
                    items.append(((("s2", k)),
                                  wfam.table.decoration_degree(AERIAL, spp)))
                else:
                    items.append((ident, d))
            for pos, k in enumerate(crossing):
                (sp, spp), c = assign[pos]
                coeff *= c
                decs[g.edges[k][0]] = decs[g.edges[k][0]] + [sp]
                decs[g.edges[k][1]] = decs[g.edges[k][1]] + [spp]
            if not coeff:
                continue
            tgt: List[Ident] = []
            for v in s_bulk:
                tgt.append(("v", v))
            for k in inner_b:
                tgt.append(("e", k))
            for v in s_bulk:
                for p in range(len(g.decorations[v])):
                    tgt.append(("d", v, p))
                for pos, k in enumerate(crossing):
                    if g.edges[k][0] == v:
                        tgt.append(("s1", k))
            for v in s_bd:
                tgt.append(("v", v))
            for v in s_bd:
                for p in range(len(g.decorations[v])):
                    tgt.append(("d", v, p))
                for pos, k in enumerate(crossing):
                    if g.edges[k][1] == v:
                        tgt.append(("s2", k))
            sign = word_sign(items, tgt)
            pmap = {v: jj for jj, v in enumerate(s_bulk)}
            bulk_g = OrientedGraph(g.n, [g.vertices[v] for v in s_bulk],
                                   [(pmap[g.edges[kk][0]], pmap[g.edges[kk][1]]) for kk in inner_b],
                                   [decs[v] for v in s_bulk])
            # boundary part: vertices with rho-pushed labels, in w's family
            bd_vertices = [VertexKind(AERIAL, 0)] * len(s_bd)
            bd_dec_vecs: List[Vec] = []
            ok = True
            for v in s_bd:
                lab = _vertex_label(fam, OrientedGraph(g.n, g.vertices, g.edges, decs), v)
                lab = fam.rho_apply(lab)
                if not lab:
                    ok = False
                    break
                bd_dec_vecs.append(lab)
            if not ok:
                continue
            red_b = reduce_decorations(fam, GraphVector.single(bulk_g, Q(1)))
            # expand boundary labels in the w-family basis
            combos = [[(idx, c) for idx, c in vec.items()] for vec in bd_dec_vecs]
            for choice in itertools.product(*combos):
                cc = Q(1)
                wdecs = []
                for idx, c in choice:
                    cc *= c
                    unit = w.family.unit_index(AERIAL)
                    wdecs.append(() if idx == unit else (idx,))
                bd_g = OrientedGraph(g.n, bd_vertices, [], wdecs)
                cbd, sbd = w.family.canon.canonicalize(bd_g, w.family.symmetric_decorations)
                if not sbd:
                    continue
                aw, bw = w.value(cbd)
                if not aw and not bw:
                    continue
                for q1, c1 in red_b.terms.items():
                    aw2, bw2 = aw, bw
                    from .graphs import aut_order as _ao
                    prod = ecoef_mul(z.pair(q1), (aw2, bw2))
                    out = (out[0] + Q(sign * sbd) * coeff * cc * c1 * prod[0],
                           out[1] + Q(sign * sbd) * coeff * cc * c1 * prod[1])
    return out


def mc_residual(z: MCElement, g: OrientedGraph, *, boundary_w: Optional[MCElement] = None) -> Tuple[Q, Q]:
    """Coefficient of (delta z + [z,z]/2) on one canonical graph."""
    fam = z.family
    out = (Q(0), Q(0))
    dgen = _d_generators(fam, g)
    for h, c in dgen.terms.items():
        a, b = z.pair(h)
        if a or b:
            out = (out[0] + c * a, out[1] + c * b)
    if fam.name in ("KGC", "SGC"):
        out = _pair_add(out, mu_action(z, g))
        br = sc_bracket(z, z, g)
        out = (out[0] + br[0] / 2, out[1] + br[1] / 2)
        return out
    if fam.name in ("GC", "GC2", "GCo", "fGC", "GCV", "dGC", "dGCp"):
        br = mc_bracket_insertion(z, z, g)
        out = (out[0] + br[0] / 2, out[1] + br[1] / 2)
        return out
    if fam.name == "aGC":
        out = _pair_add(out, mu_action(z, g))
        br = boundary_bracket(z, z, g)
        out = (out[0] + br[0] / 2, out[1] + br[1] / 2)
        return out
    if fam.name == "mGC":
        out = _pair_add(out, mu_action(z, g))
        br = bridge_bracket(z, z, g)
        out = (out[0] + br[0] / 2, out[1] + br[1] / 2)
        if boundary_w is not None:
            out = _pair_add(out, boundary_action(boundary_w, z, g))
        return out
    raise ValueError(f"no Maurer-Cartan structure for family {fam.name}")


def _pair_add(x: Tuple[Q, Q], y: Tuple[Q, Q]) -> Tuple[Q, Q]:
    return (x[0] + y[0], x[1] + y[1])


def mc_bracket_insertion(z1: MCElement, z2: MCElement, g: OrientedGraph) -> Tuple[Q, Q]:
    """Insertion bracket for GC-type duals: aerial collapse splittings."""
    fam = z1.family
    out = (Q(0), Q(0))
    for comb in _connected_subsets(g):
        if len(comb) == len(g.vertices):
            continue
        if any(g.vertices[v].is_external() for v in comb):
            continue
        res = _collapse_subgraph(fam, g, comb, AERIAL)
        if res is None:
            continue
        quotient, sub, sign = res
        cs, ss = fam.canon.canonicalize(sub, True)
        if not ss:
            continue
        red = reduce_decorations(fam, GraphVector.single(quotient, Q(1)))
        for q, cq in red.terms.items():
            for (za, zb) in ((z1, z2), (z2, z1)):
                prod = ecoef_mul(za.pair(q), zb.pair(cs))
                out = (out[0] + Q(sign * ss) * cq * prod[0],
                       out[1] + Q(sign * ss) * cq * prod[1])
    return out


def lie_bracket(z1: MCElement, z2: MCElement, test_graphs: Iterable[OrientedGraph]) -> Dict[OrientedGraph, Tuple[Q, Q]]:
    """The family bracket evaluated on the given canonical graphs."""
    if z1.family.name != z2.family.name:
        raise ValueError("mixed complexes in bracket")
    fam = z1.family
    fn = {
        "KGC": sc_bracket, "SGC": sc_bracket,
        "aGC": boundary_bracket, "mGC": bridge_bracket,
    }.get(fam.name, mc_bracket_insertion)
    out = {}
    for g in test_graphs:
        v = fn(z1, z2, g)
        if v[0] or v[1]:
            out[g] = v
    return out


def _twisted_family(z: MCElement, boundary_w: Optional[MCElement]) -> Family:
    """A copy of z\'s family with z installed in the right twist slot."""
    import copy
    fam = copy.copy(z.family)
    if fam.name in ("KGC", "SGC"):
        fam = copy.copy(fam)
        fam.contract = True
        fam.dead_end_contraction = True
        fam.twist_zd = z
        return fam
    if fam.name in ("GC", "GC2", "GCo", "fGC", "GCV", "dGC", "dGCp", "Graphs", "Gra"):
        fam = copy.copy(fam)
        fam.contract = False  # the aerial collapse twist subsumes contraction
        fam.twist_zd = None
        fam.twist_aerial = z
        return fam
    if fam.name in ("aGC", "aGraphs"):
        fam = copy.copy(fam)
        fam.boundary_twist = True
        fam.twist_w = z
        fam.bulk_eval = None
        return fam
    if fam.name in ("mGC", "mGraphs"):
        fam = copy.copy(fam)
        fam.boundary_twist = boundary_w is not None
        fam.twist_w = boundary_w
        fam.twist_W = z
        return fam
    raise ValueError(f"no Maurer-Cartan structure for family {fam.name}")


def mc_check(z: MCElement, size_bound: int, *, window: Optional[Window] = None,
             boundary_w: Optional[MCElement] = None) -> Dict[OrientedGraph, GraphVector]:
    """Residual of the Maurer-Cartan equation, as coefficients of D^2.

    The element is installed as the twist of its family\'s differential and
    D^2 is expanded on every canonical graph of size <= bound: an empty
    report verifies the MC equation up to that size.  Elements with an
    Euler part (a + bE) are checked as D0^2 = 0 and the E-linear part
    D0 D1 (-1)^{n-1} + D1 D0 = 0.
    """
    fam_t = _twisted_family(z, boundary_w)
    w = window or Window(max_size=size_bound)
    graphs = enumerate_family(z.family, w)
    has_euler = any(b for (_a, b) in z.coeffs.values())
    residual: Dict[OrientedGraph, GraphVector] = {}

    def d_plain(g: OrientedGraph) -> GraphVector:
        return _twisted_differential(fam_t, g, euler=False)

    def d_euler(g: OrientedGraph) -> GraphVector:
        return _twisted_differential(fam_t, g, euler=True)

    for g in graphs:
        acc = GraphVector.zero()
        for h, c in d_plain(g).terms.items():
            acc = acc.add_scaled(c, d_plain(h))
        if not acc.is_zero():
            residual[g] = acc
            continue
        if has_euler:
            eacc = GraphVector.zero()
            s = Q((-1) ** (z.family.n - 1))
            for h, c in d_euler(g).terms.items():
                eacc = eacc.add_scaled(c * s, d_plain(h))
            for h, c in d_plain(g).terms.items():
                eacc = eacc.add_scaled(c, d_euler(h))
            if not eacc.is_zero():
                residual[g] = eacc
    return residual


def _twisted_differential(fam: Family, g: OrientedGraph, euler: bool = False) -> GraphVector:
    """The family differential with the installed twists.

    euler=True extracts the E-linear part of the Swiss-Cheese collapse.
    """
    out = GraphVector.zero()
    if not euler:
        if fam.contract:
            out = out.add_scaled(Q(1), d_contract(fam, g))
        if fam.cut_delta is not None or fam.cut_delta_mixed is not None:
            out = out.add_scaled(Q(1), d_cut(fam, g))
        if fam.internal_d:
            out = out.add_scaled(Q(1), d_internal(fam, g))
        if fam.boundary_twist and fam.twist_w is not None:
            out = out.add_scaled(Q(1), d_boundary_twist(fam, g))
        if fam.twist_zd is not None:
            out = out.add_scaled(Q(1), d_swiss_collapse(fam, g, euler_part=False))
        tz = getattr(fam, "twist_aerial", None)
        if tz is not None:
            out = out.add_scaled(Q(1), d_aerial_collapse(fam, g, tz))
        return out
    if fam.twist_zd is not None:
        out = out.add_scaled(Q(1), d_swiss_collapse(fam, g, euler_part=True))
    return out


def d_aerial_collapse(fam: Family, g: OrientedGraph, z: MCElement) -> GraphVector:
    """Collapse connected aerial subgraphs to an aerial vertex with z-weights
    (the insertion twist of GC-type complexes)."""
    out = GraphVector.zero()
    for comb in _connected_subsets(g):
        if len(comb) == 1 and not any(a == comb[0] and b == comb[0] for (a, b) in g.edges):
            continue  # bare-vertex collapse is the identity
        if any(g.vertices[v].is_external() or g.vertices[v].color != AERIAL for v in comb):
            continue
        if len(comb) == len(g.vertices) and all(not v.is_external() for v in g.vertices):
            continue
        res = _collapse_subgraph(fam, g, comb, AERIAL)
        if res is None:
            continue
        quotient, sub, sign = res
        cs, ss = fam.canon.canonicalize(sub, True)
        if not ss:
            continue
        a, _b = z.pair(cs)
        if not a:
            continue
        red = reduce_decorations(fam, GraphVector.single(quotient, Q(1)))
        red = reduce_internal_components(fam, red)
        out = out.add_scaled(Q(sign * ss) * a, red)
    return out


def gauge_flow(gamma: MCElement, z: MCElement, order: int,
               test_graphs: Optional[Iterable[OrientedGraph]] = None) -> MCElement:
    """exp(ad_gamma)(z) truncated at the given order.

    Computed coefficient-wise on the canonical graphs spanning the supports
    reachable within the truncation (the flow only moves mass to graphs of
    bounded size, enumerated from the union of supports).
    """
    fam = z.family
    if test_graphs is None:
        max_size = max([g.size() for g in z.support()] +
                       [g.size() for g in gamma.support()] + [1]) + 2 * order
        test_graphs = enumerate_family(fam, Window(max_size=max_size))
    test_graphs = list(test_graphs)
    cur = z
    total = dict(z.coeffs)
    fact = 1
    for k in range(1, order + 1):
        fact *= k
        fn = {
            "KGC": sc_bracket, "SGC": sc_bracket,
            "aGC": boundary_bracket, "mGC": bridge_bracket,
        }.get(fam.name, mc_bracket_insertion)
        nxt = {}
        for g in test_graphs:
            v = fn(gamma, cur, g)
            if v[0] or v[1]:
                nxt[g] = v
        cur = MCElement(fam, nxt, f"ad^{k}")
        for g, (a, b) in nxt.items():
            x, y = total.get(g, (Q(0), Q(0)))
            total[g] = (x + a / fact, y + b / fact)
        if not nxt:
            break
    return MCElement(fam, total, f"flow({gamma.name},{z.name})")
