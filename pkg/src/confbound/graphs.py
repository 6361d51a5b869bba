"""Colored, directed, decorated graphs with orientation data.

A graph here is the combinatorial skeleton shared by all the complexes in the
package: two vertex colors (aerial / terrestrial), external (labeled) and
internal (indistinguishable) vertices, directed edges, and per-vertex ordered
decoration lists referencing basis indices of an ambient graded algebra.

The stored order of (vertices, edges, decorations) is the orientation datum.
Any reordering is tracked by a Koszul sign computed from the degree table of
the owning complex; flipping an edge direction in an "undirected" complex
costs (-1)^n.  This one rule reproduces the usual orientation conventions in
both parities of n.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

Q = Fraction

AERIAL = "a"
TERRESTRIAL = "t"


class MixedComplex(Exception):
    """Operands belong to complexes with different parameters."""


class UnboundedEnumeration(Exception):
    """A graph enumeration was requested without finite bounds."""


@dataclass(frozen=True)
class VertexKind:
    color: str  # AERIAL or TERRESTRIAL
    label: int  # 0 for internal; external labels are 1..r within each color

    def is_external(self) -> bool:
        return self.label > 0

    def key(self) -> Tuple[int, int]:
        return (0 if self.color == AERIAL else 1, self.label)


def _par(x: int) -> int:
    return x & 1


class DegreeTable:
    """Degrees of graph constituents; drives total degree and Koszul signs.

    edge degree n-1; internal aerial vertex -n; internal terrestrial vertex
    1-n; external vertex 0; decoration degree = degree of the referenced
    basis element (per color); optional global shift.
    """

    def __init__(self, n: int, aerial_degrees: Sequence[int] = (), terrestrial_degrees: Sequence[int] = (),
                 shift: int = 0):
        self.n = n
        self.aerial_degrees = tuple(aerial_degrees)
        self.terrestrial_degrees = tuple(terrestrial_degrees)
        self.shift = shift

    def edge_degree(self) -> int:
        return self.n - 1

    def vertex_degree(self, v: VertexKind) -> int:
        if v.is_external():
            return 0
        return -self.n if v.color == AERIAL else 1 - self.n

    def decoration_degree(self, color: str, idx: int) -> int:
        table = self.aerial_degrees if color == AERIAL else self.terrestrial_degrees
        return table[idx]


class OrientedGraph:
    """Immutable colored directed decorated graph with stored orientation."""

    __slots__ = ("n", "vertices", "edges", "decorations", "_hash")

    def __init__(self, n: int, vertices: Sequence[VertexKind], edges: Sequence[Tuple[int, int]],
                 decorations: Optional[Sequence[Sequence[int]]] = None):
        self.n = n
        self.vertices = tuple(vertices)
        self.edges = tuple((int(s), int(t)) for s, t in edges)
        decs = decorations if decorations is not None else [()] * len(self.vertices)
        if len(decs) != len(self.vertices):
            raise ValueError("decoration list length mismatch")
        self.decorations = tuple(tuple(d) for d in decs)
        for s, t in self.edges:
            if not (0 <= s < len(self.vertices) and 0 <= t < len(self.vertices)):
                raise ValueError("edge endpoint out of range")
        self._hash = None

    def num_vertices(self) -> int:
        return len(self.vertices)

    def num_edges(self) -> int:
        return len(self.edges)

    def size(self) -> int:
        return len(self.vertices) + len(self.edges)

    def num_internal(self) -> int:
        return sum(1 for v in self.vertices if not v.is_external())

    def valence(self, i: int) -> int:
        val = 0
        for s, t in self.edges:
            if s == i:
                val += 1
            if t == i:
                val += 1
        return val

    def loop_order(self) -> int:
        """First Betti number: edges - vertices + components."""
        return len(self.edges) - len(self.vertices) + self.num_components()

    def components(self) -> List[Tuple[int, ...]]:
        nv = len(self.vertices)
        parent = list(range(nv))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for s, t in self.edges:
            rs, rt = find(s), find(t)
            if rs != rt:
                parent[rs] = rt
        groups: Dict[int, List[int]] = {}
        for i in range(nv):
            groups.setdefault(find(i), []).append(i)
        return [tuple(sorted(g)) for g in sorted(groups.values())]

    def num_components(self) -> int:
        return len(self.components())

    def is_connected(self) -> bool:
        return len(self.vertices) <= 1 or self.num_components() == 1

    def __eq__(self, other):
        return (
            isinstance(other, OrientedGraph)
            and self.n == other.n
            and self.vertices == other.vertices
            and self.edges == other.edges
            and self.decorations == other.decorations
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.vertices, self.edges, self.decorations))
        return self._hash

    def __repr__(self):
        return f"OrientedGraph({self.serialize()})"

    def serialize(self) -> str:
        vs = ",".join(f"{v.color}{v.label}" for v in self.vertices)
        es = ",".join(f"({s},{t})" for s, t in self.edges)
        ds = ",".join(f"{i}:{'+'.join(map(str, d))}" for i, d in enumerate(self.decorations) if d)
        return f"n={self.n}; V={vs}; E={es}; D={ds}"

    @classmethod
    def deserialize(cls, text: str) -> "OrientedGraph":
        parts: Dict[str, str] = {}
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if chunk:
                k, v = chunk.split("=", 1)
                parts[k.strip()] = v.strip()
        n = int(parts["n"])
        vs = []
        if parts.get("V"):
            for tok in parts["V"].split(","):
                vs.append(VertexKind(tok[0], int(tok[1:])))
        es = []
        etxt = parts.get("E", "")
        for tok in etxt.split("),"):
            tok = tok.strip().strip("()")
            if tok:
                s, t = tok.split(",")
                es.append((int(s), int(t)))
        decs: List[List[int]] = [[] for _ in vs]
        dtxt = parts.get("D", "")
        if dtxt:
            for tok in dtxt.split(","):
                i, rest = tok.split(":")
                decs[int(i)] = [int(x) for x in rest.split("+")] if rest else []
        return cls(n, vs, es, decs)


def koszul_sign(degrees: Sequence[int], perm: Sequence[int]) -> int:
    """Sign of reordering graded objects.

    perm[i] = the old position of the item placed at new position i; degrees
    are indexed by old positions.  Each transposition of two odd items costs
    a sign; only parities matter.
    """
    sign = 1
    par = [_par(degrees[k]) for k in perm]
    arr = list(perm)
    for i in range(len(arr)):
        if not par[i]:
            continue
        for j in range(i + 1, len(arr)):
            if par[j] and arr[i] > arr[j]:
                sign = -sign
    return sign


def perm_parity_sign(perm: Sequence[int]) -> int:
    """Sign of a permutation (all items treated as odd)."""
    sign = 1
    arr = list(perm)
    for i in range(len(arr)):
        for j in range(i + 1, len(arr)):
            if arr[i] > arr[j]:
                sign = -sign
    return sign


class GraphCanonicalizer:
    """Canonical-form search with Koszul sign tracking.

    directed=False identifies an edge with (-1)^n times its reverse; tadpoles
    and repeated parallel edges then vanish in the parities forced by the
    graded-symmetric presentation of the edge generators.
    """

    def __init__(self, table: DegreeTable, directed: bool):
        self.table = table
        self.directed = directed
        self._last_assignment_count = 1

    # -- sign helpers --------------------------------------------------------

    def _vertex_perm_sign(self, g: OrientedGraph, newpos: Sequence[int]) -> int:
        nv = len(g.vertices)
        old_of_new = [0] * nv
        for old in range(nv):
            old_of_new[newpos[old]] = old
        vdeg = [self.table.vertex_degree(v) for v in g.vertices]
        sign = koszul_sign(vdeg, old_of_new)
        # decoration blocks travel with their vertices
        flat_deg: List[int] = []
        block_start: List[int] = []
        pos = 0
        for i in range(nv):
            block_start.append(pos)
            for idx in g.decorations[i]:
                flat_deg.append(self.table.decoration_degree(g.vertices[i].color, idx))
                pos += 1
        perm: List[int] = []
        for new_i in range(nv):
            old = old_of_new[new_i]
            start = block_start[old]
            perm.extend(range(start, start + len(g.decorations[old])))
        sign *= koszul_sign(flat_deg, perm)
        return sign

    def _edge_sort_sign(self, edges: List[Tuple[int, int]]) -> Tuple[List[Tuple[int, int]], int]:
        idx = sorted(range(len(edges)), key=lambda k: edges[k])
        sign = 1
        if _par(self.table.edge_degree()):
            sign = perm_parity_sign(idx)
        return [edges[k] for k in idx], sign

    def normalize_edge(self, s: int, t: int) -> Tuple[Optional[Tuple[int, int]], int]:
        """Orient an edge canonically; sign (-1)^n per flip; None if it vanishes."""
        if self.directed:
            return (s, t), 1
        n = self.table.n
        if s == t:
            if n % 2 == 1:
                return None, 0
            return (s, t), 1
        if s > t:
            return (t, s), -1 if n % 2 == 1 else 1
        return (s, t), 1

    def _normalize_edges(self, edges: List[Tuple[int, int]]) -> Tuple[Optional[List[Tuple[int, int]]], int]:
        sign = 1
        work = []
        for s, t in edges:
            e, sg = self.normalize_edge(s, t)
            if e is None:
                return None, 0
            sign *= sg
            work.append(e)
        work, s2 = self._edge_sort_sign(work)
        sign *= s2
        if _par(self.table.edge_degree()):
            for k in range(len(work) - 1):
                if work[k] == work[k + 1]:
                    return None, 0
        return work, sign

    def _normalize_decorations(self, vertices: Sequence[VertexKind], decs: Sequence[Tuple[int, ...]],
                               symmetric: bool) -> Tuple[Optional[Tuple[Tuple[int, ...], ...]], int]:
        if not symmetric:
            return tuple(tuple(d) for d in decs), 1
        sign = 1
        out = []
        for i, d in enumerate(decs):
            color = vertices[i].color
            degs = [self.table.decoration_degree(color, x) for x in d]
            idx = sorted(range(len(d)), key=lambda k: d[k])
            sign *= koszul_sign(degs, idx)
            nd = tuple(d[k] for k in idx)
            for k in range(len(nd) - 1):
                if nd[k] == nd[k + 1] and _par(self.table.decoration_degree(color, nd[k])):
                    return None, 0
            out.append(nd)
        return tuple(out), sign

    # -- canonical form ------------------------------------------------------

    def canonicalize(self, g: OrientedGraph, symmetric_decorations: bool = True) -> Tuple[Optional[OrientedGraph], int]:
        """Minimal representative over internal relabelings, plus sign.

        The minimum is taken with respect to a slot-by-slot incremental code
        (which makes branch-and-bound pruning sound); sign = 0 exactly when
        two optimal relabelings disagree in sign (graph vanishes by symmetry).
        """
        nv = len(g.vertices)
        # labeling-independent vanishing (tadpole / double edge parity)
        probe, _s = self._normalize_edges(list(g.edges))
        if probe is None:
            return None, 0
        ext_old = [i for i in range(nv) if g.vertices[i].is_external()]
        ext_old.sort(key=lambda i: g.vertices[i].key())
        int_old = [i for i in range(nv) if not g.vertices[i].is_external()]
        int_old.sort(key=lambda i: g.vertices[i].key())
        n_ext = len(ext_old)
        # slot colors for internals: aerial slots first, then terrestrial
        slot_colors = [g.vertices[i].color for i in int_old]

        incident: List[List[Tuple[int, int]]] = [[] for _ in range(nv)]  # (other, dir)
        for s, t in g.edges:
            if s == t:
                incident[s].append((s, 2))
            else:
                incident[s].append((t, 0))
                incident[t].append((s, 1))

        newpos_base = [0] * nv
        for k, old in enumerate(ext_old):
            newpos_base[old] = k

        best_codes: List[Tuple] = []
        best_assignments: List[List[int]] = []
        directed = self.directed

        def edge_code_between(u_old: int, assigned_pos: Dict[int, int], u_pos: int) -> Tuple:
            """Code of edges between u_old and already-placed vertices (incl itself)."""
            codes = []
            for other, dr in incident[u_old]:
                if dr == 2:
                    codes.append((u_pos, u_pos))
                    continue
                p = assigned_pos.get(other)
                if p is None:
                    continue
                if dr == 0:
                    e = (u_pos, p)
                else:
                    e = (p, u_pos)
                if not directed and e[0] > e[1]:
                    e = (e[1], e[0])
                codes.append(e)
            codes.sort()
            return tuple(codes)

        def dec_code(old: int) -> Tuple:
            d = g.decorations[old]
            return tuple(sorted(d)) if symmetric_decorations else tuple(d)

        # externals first: their mutual edges form code position -1 (fixed),
        # no choice involved.
        def dfs(k: int, assigned: List[int], assigned_pos: Dict[int, int], code: List[Tuple]):
            if k == len(int_old):
                t_code = tuple(code)
                if not best_codes or t_code < best_codes[0]:
                    best_codes.clear()
                    best_codes.append(t_code)
                    best_assignments.clear()
                    best_assignments.append(list(assigned))
                elif t_code == best_codes[0]:
                    best_assignments.append(list(assigned))
                return
            want_color = slot_colors[k]
            pos = n_ext + k
            cands = []
            for old in int_old:
                if old in assigned_pos or g.vertices[old].color != want_color:
                    continue
                sig = (edge_code_between(old, assigned_pos, pos), dec_code(old))
                cands.append((sig, old))
            cands.sort(key=lambda x: x[0])
            for sig, old in cands:
                code.append(sig)
                if best_codes and tuple(code) > best_codes[0][: len(code)]:
                    code.pop()
                    continue
                assigned.append(old)
                assigned_pos[old] = pos
                dfs(k + 1, assigned, assigned_pos, code)
                del assigned_pos[old]
                assigned.pop()
                code.pop()

        base_pos = {old: k for k, old in enumerate(ext_old)}
        dfs(0, [], dict(base_pos), [])

        if not best_assignments:
            # no internal vertices
            best_assignments = [[]]
        self._last_assignment_count = len(best_assignments)

        canonical: Optional[OrientedGraph] = None
        signs = set()
        for assign in best_assignments:
            newpos = list(newpos_base)
            for k, old in enumerate(assign):
                newpos[old] = n_ext + k
            sign = self._vertex_perm_sign(g, newpos)
            verts, edges, decs = _apply_relabel(g, newpos)
            edges2, s_e = self._normalize_edges(edges)
            if edges2 is None:
                return None, 0
            decs2, s_d = self._normalize_decorations(verts, decs, symmetric_decorations)
            if decs2 is None:
                return None, 0
            sign *= s_e * s_d
            cand = OrientedGraph(g.n, verts, edges2, decs2)
            if canonical is None:
                canonical = cand
                signs = {sign}
            else:
                # all best assignments yield the same code; the stored graph can
                # nevertheless differ only in edge order, which _normalize_edges
                # already fixed, so they are equal
                signs.add(sign)
        if len(signs) > 1:
            return None, 0
        return canonical, signs.pop()

    def _best_assignment_count(self, g: OrientedGraph, symmetric_decorations: bool = True) -> int:
        """Number of optimal assignments in the canonical search = number of
        internal-vertex automorphisms."""
        saved = self.canonicalize(g, symmetric_decorations)
        return self._last_assignment_count


def aut_order(g: OrientedGraph, canon: "GraphCanonicalizer") -> int:
    """Order of the automorphism group of the (multi)graph.

    Vertex automorphisms are counted by the canonical-form search (optimal
    assignments); parallel-edge permutations contribute mult! per class, and
    in undirected complexes each tadpole contributes a flip factor 2.
    """
    nv = len(g.vertices)
    int_old = [i for i in range(nv) if not g.vertices[i].is_external()]
    if not int_old:
        vertex_count = 1
    else:
        cg, s = canon.canonicalize(g)
        if cg is None:
            # count on the underlying structure: signs are irrelevant here
            vertex_count = _count_optimal_assignments(g, canon)
        else:
            vertex_count = _count_optimal_assignments(g, canon)
    mult: Dict[Tuple[int, int], int] = {}
    tadpoles = 0
    for s_, t_ in g.edges:
        if s_ == t_:
            tadpoles += 1
        e = (s_, t_)
        if not canon.directed and s_ > t_:
            e = (t_, s_)
        mult[e] = mult.get(e, 0) + 1
    fact = 1
    for e, m in mult.items():
        for k in range(2, m + 1):
            fact *= k
    if not canon.directed:
        fact *= 2 ** tadpoles
    return vertex_count * fact


def _count_optimal_assignments(g: OrientedGraph, canon: "GraphCanonicalizer") -> int:
    """Number of internal relabelings realizing the canonical code."""
    # rerun the canonical search and count best assignments
    res = canon._best_assignment_count(g)
    return res


def _apply_relabel(g: OrientedGraph, newpos: Sequence[int]):
    nv = len(g.vertices)
    verts: List[Optional[VertexKind]] = [None] * nv
    decs: List[Tuple[int, ...]] = [()] * nv
    for old in range(nv):
        verts[newpos[old]] = g.vertices[old]
        decs[newpos[old]] = g.decorations[old]
    edges = [(newpos[s], newpos[t]) for s, t in g.edges]
    return tuple(verts), edges, tuple(decs)


class GraphVector:
    """Formal Q-linear combination of canonical graphs."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Dict[OrientedGraph, Q]] = None):
        self.terms: Dict[OrientedGraph, Q] = {}
        for g, c in (terms or {}).items():
            if c:
                self.terms[g] = Q(c)

    @classmethod
    def zero(cls) -> "GraphVector":
        return cls()

    @classmethod
    def single(cls, g: OrientedGraph, c: Q = Q(1)) -> "GraphVector":
        return cls({g: Q(c)})

    def is_zero(self) -> bool:
        return not self.terms

    def __iter__(self):
        return iter(sorted(self.terms.items(), key=lambda kv: kv[0].serialize()))

    def __eq__(self, other):
        return isinstance(other, GraphVector) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "GraphVector(0)"
        return "GraphVector(" + " + ".join(f"{c}*[{g.serialize()}]" for g, c in self) + ")"

    def add_scaled(self, c: Q, other: "GraphVector") -> "GraphVector":
        out = dict(self.terms)
        for g, a in other.terms.items():
            v = out.get(g, Q(0)) + c * a
            if v:
                out[g] = v
            else:
                out.pop(g, None)
        return GraphVector(out)

    def scale(self, c: Q) -> "GraphVector":
        if not c:
            return GraphVector()
        return GraphVector({g: c * a for g, a in self.terms.items()})

    def map_terms(self, fn) -> "GraphVector":
        out = GraphVector()
        for g, c in self.terms.items():
            out = out.add_scaled(Q(1), fn(g, c))
        return out


def add_scaled(a: GraphVector, c: Q, b: GraphVector) -> GraphVector:
    return a.add_scaled(c, b)


def graph_degree(g: OrientedGraph, table: DegreeTable) -> int:
    deg = table.shift
    deg += len(g.edges) * table.edge_degree()
    for i, v in enumerate(g.vertices):
        deg += table.vertex_degree(v)
        for idx in g.decorations[i]:
            deg += table.decoration_degree(v.color, idx)
    return deg


def external_labels(g: OrientedGraph, color: str) -> Tuple[int, ...]:
    return tuple(sorted(v.label for v in g.vertices if v.color == color and v.is_external()))


def make_external_vertices(n_terrestrial: int, n_aerial: int) -> List[VertexKind]:
    out = [VertexKind(AERIAL, i + 1) for i in range(n_aerial)]
    out += [VertexKind(TERRESTRIAL, i + 1) for i in range(n_terrestrial)]
    return out


def raw_product(ga: OrientedGraph, gb: OrientedGraph, table: DegreeTable) -> Tuple[OrientedGraph, int]:
    """Superpose externals, union internals/edges, concatenate decorations.

    Orientation: the product word is word(a) followed by word(b); we reorder
    into block form (vertices, edges, decorations per vertex slot) and track
    the Koszul signs of moving b's internal vertices past a's edges and
    decorations, b's edges past a's decorations, and the decoration merge.
    """
    if ga.n != gb.n:
        raise MixedComplex("parity parameters differ")
    table_n = table.n
    ext_map: Dict[Tuple[str, int], int] = {}
    for i, v in enumerate(ga.vertices):
        if v.is_external():
            ext_map[(v.color, v.label)] = i
    new_vertices = list(ga.vertices)
    b_map: List[int] = []
    for j, v in enumerate(gb.vertices):
        if v.is_external():
            if (v.color, v.label) not in ext_map:
                raise MixedComplex("arity patterns differ")
            b_map.append(ext_map[(v.color, v.label)])
        else:
            b_map.append(len(new_vertices))
            new_vertices.append(v)

    pa_edges = (_par(table.edge_degree()) * len(ga.edges)) & 1
    pa_decs = 0
    for i, v in enumerate(ga.vertices):
        for idx in ga.decorations[i]:
            pa_decs ^= _par(table.decoration_degree(v.color, idx))
    pb_int_verts = 0
    for v in gb.vertices:
        if not v.is_external():
            pb_int_verts ^= _par(table.vertex_degree(v))
    pb_edges = (_par(table.edge_degree()) * len(gb.edges)) & 1

    # crossing costs: b's internal vertices move past a's edges and
    # decorations; b's edges move past a's decorations
    sign = 1
    if pb_int_verts and pa_edges:
        sign = -sign
    if pb_int_verts and pa_decs:
        sign = -sign
    if pb_edges and pa_decs:
        sign = -sign

    # merge decorations: flat word = (a's decorations in a's vertex order,
    # then b's in b's vertex order); target order sorts by owner slot, stable.
    flat: List[Tuple[int, int, str, int]] = []
    seq = 0
    for i, v in enumerate(ga.vertices):
        for idx in ga.decorations[i]:
            flat.append((i, seq, v.color, idx))
            seq += 1
    for j, v in enumerate(gb.vertices):
        for idx in gb.decorations[j]:
            flat.append((b_map[j], seq, v.color, idx))
            seq += 1
    order = sorted(range(len(flat)), key=lambda k: (flat[k][0], flat[k][1]))
    degs = [table.decoration_degree(c, idx) for (_o, _s, c, idx) in flat]
    sign *= koszul_sign(degs, order)
    merged: List[List[int]] = [[] for _ in new_vertices]
    for k in order:
        owner, _s, _c, idx = flat[k]
        merged[owner].append(idx)

    new_edges = list(ga.edges) + [(b_map[s], b_map[t]) for s, t in gb.edges]
    return OrientedGraph(table_n, new_vertices, new_edges, merged), sign


def hopf_product(a_vec: GraphVector, b_vec: GraphVector, canon: GraphCanonicalizer,
                 symmetric_decorations: bool = True) -> GraphVector:
    """Glue graphs along external vertices (labels matched)."""
    out = GraphVector()
    for ga, ca in a_vec.terms.items():
        for gb, cb in b_vec.terms.items():
            g, sign = raw_product(ga, gb, canon.table)
            cg, s2 = canon.canonicalize(g, symmetric_decorations)
            if s2:
                out = out.add_scaled(Q(1), GraphVector.single(cg, ca * cb * sign * s2))
    return out


# ---------------------------------------------------------------------------
# enumeration


def _edge_multisets(slots: List[Tuple[int, int]], ne: int, nv: int,
                    min_val: List[int], max_multiplicity: int,
                    odd_edges: bool, block_rank: List[Tuple[int, int]],
                    ) -> Iterator[Tuple[Tuple[int, int], ...]]:
    """Multisets of edge slots of size ne, with valence-deficit pruning.

    block_rank[v] = (block id, rank within block) for interchangeable
    internal vertices, or (-1, -1) for externals.  The lexicographically
    minimal labeling introduces internal vertices of each block in first-use
    order, so candidates violating that order are pruned; every isomorphism
    class keeps a representative.
    """
    val = [0] * nv
    cur_deficit = sum(m for m in min_val if m > 0)
    used = {b: 0 for b, _r in block_rank if b >= 0}

    out: List[Tuple[int, int]] = []

    def bump(v: int, d: int):
        nonlocal cur_deficit
        before = max(0, min_val[v] - val[v])
        val[v] += d
        after = max(0, min_val[v] - val[v])
        cur_deficit += after - before

    def rec(start: int, remaining: int):
        if remaining == 0:
            if cur_deficit == 0:
                yield tuple(out)
            return
        if cur_deficit > 2 * remaining:
            return
        for si in range(start, len(slots)):
            s, t = slots[si]
            fresh: List[int] = []
            ok = True
            offset: Dict[int, int] = {}
            for v in (s, t) if s != t else (s,):
                b, r = block_rank[v]
                if b >= 0 and val[v] == 0 and v not in fresh:
                    if r != used[b] + offset.get(b, 0):
                        ok = False
                        break
                    offset[b] = offset.get(b, 0) + 1
                    fresh.append(v)
            if not ok:
                continue
            cap = min(remaining, 1 if odd_edges else max_multiplicity)
            for copies in range(1, cap + 1):
                for _ in range(copies):
                    out.append((s, t))
                    bump(s, 1)
                    bump(t, 1)
                for v in fresh:
                    used[block_rank[v][0]] += 1
                yield from rec(si + 1, remaining - copies)
                for v in fresh:
                    used[block_rank[v][0]] -= 1
                for _ in range(copies):
                    out.pop()
                    bump(s, -1)
                    bump(t, -1)

    if ne == 0:
        if cur_deficit == 0:
            yield ()
        return
    yield from rec(0, ne)


def enumerate_graphs(
    *,
    n: int,
    canon: GraphCanonicalizer,
    n_external_aerial: int = 0,
    n_external_terrestrial: int = 0,
    max_internal_aerial: int = 0,
    max_internal_terrestrial: int = 0,
    max_edges: Optional[int] = None,
    max_size: Optional[int] = None,
    exact_internal: Optional[Tuple[int, int]] = None,
    exact_edges: Optional[int] = None,
    connected: bool = False,
    no_internal_components: bool = False,
    min_internal_valence: int = 0,
    allow_tadpoles: bool = True,
    terrestrial_sources: bool = False,
    loop_order: Optional[int] = None,
    decoration_indices_aerial: Sequence[int] = (),
    decoration_indices_terrestrial: Sequence[int] = (),
    max_decorations: int = 0,
    max_edge_multiplicity: int = 3,
) -> Iterator[OrientedGraph]:
    """All admissible isomorphism classes, canonical, sign-zero omitted.

    Deterministic order (by size, then serialization).  Bounds must make the
    search finite, else UnboundedEnumeration is raised.
    """
    if max_edges is None and max_size is None and exact_edges is None:
        raise UnboundedEnumeration("need an edge or size bound")

    seen = set()
    results = []

    ia_range = list(range(max_internal_aerial + 1))
    it_range = list(range(max_internal_terrestrial + 1))
    if exact_internal is not None:
        ia_range = [exact_internal[0]]
        it_range = [exact_internal[1]]

    odd_edges = _par(canon.table.edge_degree()) == 1 and not canon.directed

    for ia in ia_range:
        for it in it_range:
            vertices = make_external_vertices(n_external_terrestrial, n_external_aerial)
            vertices += [VertexKind(AERIAL, 0)] * ia + [VertexKind(TERRESTRIAL, 0)] * it
            nv = len(vertices)
            if nv == 0:
                continue  # the empty graph spans the unit, not a basis class
            if max_size is not None and nv > max_size:
                continue
            slots = []
            for s in range(nv):
                if vertices[s].color == TERRESTRIAL and not terrestrial_sources:
                    continue
                for t in range(nv):
                    if s == t:
                        if not allow_tadpoles:
                            continue
                        if not canon.directed and n % 2 == 1:
                            continue
                    elif not canon.directed and t < s:
                        continue
                    slots.append((s, t))
            min_val = [0 if vertices[i].is_external() else min_internal_valence for i in range(nv)]
            n_ext = n_external_aerial + n_external_terrestrial
            block_rank: List[Tuple[int, int]] = [(-1, -1)] * nv
            for i in range(n_ext, n_ext + ia):
                block_rank[i] = (0, i - n_ext)
            for i in range(n_ext + ia, nv):
                block_rank[i] = (1, i - n_ext - ia)
            if exact_edges is not None:
                e_list = [exact_edges]
            else:
                e_hi = max_edges if max_edges is not None else (max_size - nv)
                e_list = list(range(e_hi + 1))
            for ne in e_list:
                if max_size is not None and nv + ne > max_size:
                    continue
                if loop_order is not None and connected and nv > 0 and ne != nv - 1 + loop_order:
                    continue
                for combo in _edge_multisets(slots, ne, nv, min_val, max_edge_multiplicity, odd_edges,
                                             block_rank):
                    g = OrientedGraph(n, vertices, list(combo))
                    if loop_order is not None and g.loop_order() != loop_order:
                        continue
                    if connected and not g.is_connected():
                        continue
                    if no_internal_components and not connected:
                        bad = False
                        for comp in g.components():
                            if all(not g.vertices[i].is_external() for i in comp):
                                bad = True
                                break
                        if bad:
                            continue
                    for gg in _decorate(g, decoration_indices_aerial, decoration_indices_terrestrial,
                                        max_decorations):
                        cg, sign = canon.canonicalize(gg)
                        if sign and cg not in seen:
                            seen.add(cg)
                            results.append(cg)
    results.sort(key=lambda g: (g.size(), g.serialize()))
    yield from results


def _decorate(g: OrientedGraph, aerial_idx: Sequence[int], terrestrial_idx: Sequence[int],
              max_total: int) -> Iterator[OrientedGraph]:
    if max_total <= 0 or (not aerial_idx and not terrestrial_idx):
        yield g
        return
    nv = len(g.vertices)
    per_vertex: List[List[Tuple[int, ...]]] = []
    for i in range(nv):
        pool = sorted(aerial_idx if g.vertices[i].color == AERIAL else terrestrial_idx)
        choices: List[Tuple[int, ...]] = [()]
        for k in range(1, max_total + 1):
            choices.extend(itertools.combinations_with_replacement(pool, k))
        per_vertex.append(choices)
    for assign in itertools.product(*per_vertex):
        if sum(len(a) for a in assign) > max_total:
            continue
        yield OrientedGraph(g.n, g.vertices, g.edges, assign)
