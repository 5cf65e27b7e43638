"""Finite categories and functors, given by explicit composition tables.

Everything downstream (fibration checkers, the correspondence calculus,
homology certificates) consumes the two types defined here.  A
FiniteCategory stores its objects, morphisms, identities and the *total*
composition table; validity is checked exhaustively at construction.
Object and morphism ids are opaque strings, and every construction orders
its output lexicographically so that results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .unionfind import UnionFind


class CategoryError(ValueError):
    """Raised when a composition table violates the category axioms."""


class FunctorError(ValueError):
    """Raised when a map of categories fails to preserve structure."""


class PreconditionError(ValueError):
    """Raised when an operation is invoked outside its contract."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EnumerationCapExceeded(RuntimeError):
    """Raised when an exhaustive enumeration would exceed the configured cap."""


def pair_id(a, b):
    return f"({a},{b})"


def validate_category(objects, morphisms, identities, composition):
    """Check the category axioms on raw table data.

    Violations are returned as a list of strings naming witnesses; the
    report is empty exactly when the data is a category.  Violations are
    data here, not errors: planted defects are inspected through this.
    """
    report = []
    obj_set = set(objects)
    if len(obj_set) != len(objects):
        report.append("duplicate object ids")
    mor_ids = [m for m, _, _ in morphisms]
    if len(set(mor_ids)) != len(mor_ids):
        report.append("duplicate morphism ids")
    src = {m: s for m, s, _ in morphisms}
    tgt = {m: t for m, _, t in morphisms}
    for m, s, t in morphisms:
        if s not in obj_set:
            report.append(f"morphism {m} has unknown source {s}")
        if t not in obj_set:
            report.append(f"morphism {m} has unknown target {t}")
    for x in objects:
        i = identities.get(x)
        if i is None:
            report.append(f"object {x} has no identity")
        elif i not in src:
            report.append(f"identity of {x} is not a morphism: {i}")
        elif not (src[i] == x and tgt[i] == x):
            report.append(f"identity of {x} is not an endomorphism: {i}")
    mor_set = set(src)
    for (g, f), h in composition.items():
        if g not in mor_set or f not in mor_set:
            report.append(f"composition of unknown morphisms ({g},{f})")
            continue
        if tgt[f] != src[g]:
            report.append(f"composition defined on non-composable pair ({g},{f})")
            continue
        if h not in mor_set:
            report.append(f"composite of ({g},{f}) is unknown: {h}")
        elif not (src[h] == src[f] and tgt[h] == tgt[g]):
            report.append(f"composite of ({g},{f}) has wrong endpoints: {h}")
    for f in mor_set:
        for g in mor_set:
            if tgt.get(f) == src.get(g) and (g, f) not in composition:
                report.append(f"missing composite for pair ({g},{f})")
    if report:
        return report
    # unit laws, then associativity on every composable triple
    for f in mor_set:
        if composition[(identities[tgt[f]], f)] != f:
            report.append(f"left unit law fails at {f}")
        if composition[(f, identities[src[f]])] != f:
            report.append(f"right unit law fails at {f}")
    for f in mor_set:
        for g in mor_set:
            if tgt[f] != src[g]:
                continue
            gf = composition[(g, f)]
            for h in mor_set:
                if tgt[g] != src[h]:
                    continue
                hg = composition[(h, g)]
                if composition[(h, gf)] != composition[(hg, f)]:
                    report.append(f"associativity fails on ({h},{g},{f})")
    return report


class FiniteCategory:
    """A category with finitely many objects and morphisms.

    The composition table is total on composable pairs and validated
    exhaustively; instances are immutable after construction.
    """

    __slots__ = (
        "objects", "morphisms", "src", "tgt", "identity", "_comp",
        "_from", "_to", "_hom", "_isos",
    )

    def __init__(self, objects, morphisms, identities, composition, _validate=True):
        morphisms = [tuple(m) for m in morphisms]
        if _validate:
            report = validate_category(objects, morphisms, identities, composition)
            if report:
                raise CategoryError("; ".join(report[:8]))
        self.objects = tuple(sorted(objects))
        self.morphisms = tuple(sorted(m for m, _, _ in morphisms))
        self.src = {m: s for m, s, _ in morphisms}
        self.tgt = {m: t for m, _, t in morphisms}
        self.identity = dict(identities)
        self._comp = dict(composition)
        self._from = {x: [] for x in self.objects}
        self._to = {x: [] for x in self.objects}
        self._hom = {}
        for m in self.morphisms:
            self._from[self.src[m]].append(m)
            self._to[self.tgt[m]].append(m)
            self._hom.setdefault((self.src[m], self.tgt[m]), []).append(m)
        self._isos = None

    # -- basic queries ---------------------------------------------------

    def compose(self, g, f):
        """The composite g∘f; defined exactly when tgt(f) = src(g)."""
        return self._comp[(g, f)]

    def hom(self, a, b):
        return tuple(self._hom.get((a, b), ()))

    def morphisms_from(self, a):
        return tuple(self._from[a])

    def morphisms_to(self, b):
        return tuple(self._to[b])

    def is_identity(self, m):
        return self.identity[self.src[m]] == m

    def non_identity_morphisms(self):
        return tuple(m for m in self.morphisms if not self.is_identity(m))

    def isomorphisms(self):
        """The set of invertible morphisms."""
        if self._isos is None:
            isos = set()
            for f in self.morphisms:
                a, b = self.src[f], self.tgt[f]
                for g in self.hom(b, a):
                    if (self.compose(g, f) == self.identity[a]
                            and self.compose(f, g) == self.identity[b]):
                        isos.add(f)
                        break
            self._isos = frozenset(isos)
        return self._isos

    def is_iso(self, m):
        return m in self.isomorphisms()

    def composition_table(self):
        return dict(self._comp)

    def morphism_triples(self):
        return tuple((m, self.src[m], self.tgt[m]) for m in self.morphisms)

    def __eq__(self, other):
        if not isinstance(other, FiniteCategory):
            return NotImplemented
        return (self.objects == other.objects
                and self.morphisms == other.morphisms
                and self.src == other.src and self.tgt == other.tgt
                and self.identity == other.identity
                and self._comp == other._comp)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        return hash((self.objects, self.morphisms))

    def __repr__(self):
        return (f"FiniteCategory({len(self.objects)} objects, "
                f"{len(self.morphisms)} morphisms)")


class Functor:
    """A structure-preserving map between finite categories."""

    __slots__ = ("source", "target", "ob_map", "mor_map")

    def __init__(self, source, target, ob_map, mor_map, _validate=True):
        self.source = source
        self.target = target
        self.ob_map = dict(ob_map)
        self.mor_map = dict(mor_map)
        if _validate:
            self._validate()

    def _validate(self):
        C, D = self.source, self.target
        for x in C.objects:
            if self.ob_map.get(x) not in D.identity:
                raise FunctorError(f"object {x} not mapped to an object: "
                                   f"{self.ob_map.get(x)}")
        for m in C.morphisms:
            fm = self.mor_map.get(m)
            if fm not in D.src:
                raise FunctorError(f"morphism {m} not mapped to a morphism: {fm}")
            if D.src[fm] != self.ob_map[C.src[m]] or D.tgt[fm] != self.ob_map[C.tgt[m]]:
                raise FunctorError(f"morphism {m} has incompatible image {fm}")
        for x in C.objects:
            if self.mor_map[C.identity[x]] != D.identity[self.ob_map[x]]:
                raise FunctorError(f"identity of {x} not preserved")
        for f in C.morphisms:
            for g in C.morphisms:
                if C.tgt[f] != C.src[g]:
                    continue
                if self.mor_map[C.compose(g, f)] != D.compose(
                        self.mor_map[g], self.mor_map[f]):
                    raise FunctorError(f"composition not preserved on ({g},{f})")

    def then(self, other):
        """Composite functor (self first, then other)."""
        if other.source is not self.target and other.source != self.target:
            raise FunctorError("composition of non-composable functors")
        return Functor(
            self.source, other.target,
            {x: other.ob_map[y] for x, y in self.ob_map.items()},
            {m: other.mor_map[n] for m, n in self.mor_map.items()},
            _validate=False,
        )

    def is_fully_faithful(self):
        C, D = self.source, self.target
        for a in C.objects:
            for b in C.objects:
                image = [self.mor_map[m] for m in C.hom(a, b)]
                if len(set(image)) != len(image):
                    return False
                if set(image) != set(D.hom(self.ob_map[a], self.ob_map[b])):
                    return False
        return True

    def is_isomorphism(self):
        C, D = self.source, self.target
        return (len(set(self.ob_map.values())) == len(C.objects) == len(D.objects)
                and len(set(self.mor_map.values())) == len(C.morphisms) == len(D.morphisms))

    def is_essentially_surjective(self):
        C, D = self.source, self.target
        image = set(self.ob_map.values())
        hit = set()
        for d in D.objects:
            for c in image:
                if any(D.is_iso(m) for m in D.hom(c, d)):
                    hit.add(d)
                    break
        return hit == set(D.objects)

    def is_equivalence(self):
        return self.is_fully_faithful() and self.is_essentially_surjective()

    def __eq__(self, other):
        if not isinstance(other, Functor):
            return NotImplemented
        return (self.source == other.source and self.target == other.target
                and self.ob_map == other.ob_map and self.mor_map == other.mor_map)

    def __hash__(self):
        return hash((tuple(sorted(self.ob_map.items())),
                     tuple(sorted(self.mor_map.items()))))

    def __repr__(self):
        return f"Functor({self.source!r} -> {self.target!r})"


def identity_functor(C):
    return Functor(C, C, {x: x for x in C.objects},
                   {m: m for m in C.morphisms}, _validate=False)


def constant_functor(C, D, d):
    return Functor(C, D, {x: d for x in C.objects},
                   {m: D.identity[d] for m in C.morphisms}, _validate=False)


# -- builders -----------------------------------------------------------


def terminal():
    """The category with one object and one morphism."""
    return FiniteCategory(["*"], [("id", "*", "*")], {"*": "id"},
                          {("id", "id"): "id"}, _validate=False)


def point(C, x):
    """The functor from the terminal category selecting the object x."""
    if x not in C.identity:
        raise PreconditionError(f"unknown object {x}")
    return Functor(terminal(), C, {"*": x}, {"id": C.identity[x]}, _validate=False)


def interval(n):
    """The poset [n] = {0 < 1 < ... < n} as a category.

    Morphism i -> j is named "i->j"; identities are "i->i".
    """
    if n < 0:
        raise PreconditionError("interval requires n >= 0")
    objects = [str(i) for i in range(n + 1)]
    morphisms = [(f"{i}->{j}", str(i), str(j))
                 for i in range(n + 1) for j in range(i, n + 1)]
    identities = {str(i): f"{i}->{i}" for i in range(n + 1)}
    composition = {}
    for i in range(n + 1):
        for j in range(i, n + 1):
            for k in range(j, n + 1):
                composition[(f"{j}->{k}", f"{i}->{j}")] = f"{i}->{k}"
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def poset_from_order(elements, leq):
    """The category of a poset given by a reflexive transitive leq predicate."""
    elements = sorted(elements)
    morphisms = []
    identities = {}
    for a in elements:
        for b in elements:
            if leq(a, b):
                m = f"{a}->{b}"
                morphisms.append((m, a, b))
                if a == b:
                    identities[a] = m
    composition = {}
    for m, a, b in morphisms:
        for m2, b2, c in morphisms:
            if b == b2:
                composition[(m2, m)] = f"{a}->{c}"
    return FiniteCategory(elements, morphisms, identities, composition)


def monoid_category(elements, unit, mul, object_id="*"):
    """One-object category from a monoid multiplication table.

    mul(g, f) is the composite g∘f.
    """
    morphisms = [(e, object_id, object_id) for e in elements]
    composition = {(g, f): mul(g, f) for g in elements for f in elements}
    return FiniteCategory([object_id], morphisms, {object_id: unit}, composition)


def discrete_category(objects):
    morphisms = [(f"id_{x}", x, x) for x in objects]
    identities = {x: f"id_{x}" for x in objects}
    composition = {(f"id_{x}", f"id_{x}"): f"id_{x}" for x in objects}
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def walking_isomorphism():
    """Two objects, a mutually inverse pair of morphisms between them."""
    morphisms = [("id_a", "a", "a"), ("id_b", "b", "b"),
                 ("i", "a", "b"), ("j", "b", "a")]
    identities = {"a": "id_a", "b": "id_b"}
    composition = {
        ("id_a", "id_a"): "id_a", ("id_b", "id_b"): "id_b",
        ("i", "id_a"): "i", ("id_b", "i"): "i",
        ("j", "id_b"): "j", ("id_a", "j"): "j",
        ("j", "i"): "id_a", ("i", "j"): "id_b",
    }
    return FiniteCategory(["a", "b"], morphisms, identities, composition)


def idempotent_category():
    """One object with a single non-identity idempotent endomorphism e."""
    return monoid_category(["id", "e"], "id",
                           lambda g, f: "id" if (g, f) == ("id", "id") else "e")


def retract_category():
    """Two objects x, y with s: x->y, r: y->x, r∘s = id_x.

    The fifth morphism is the induced idempotent e = s∘r on y.
    """
    morphisms = [("id_x", "x", "x"), ("id_y", "y", "y"),
                 ("s", "x", "y"), ("r", "y", "x"), ("e", "y", "y")]
    identities = {"x": "id_x", "y": "id_y"}
    composition = {}
    names = {m: (s, t) for m, s, t in morphisms}

    def mult(g, f):
        # normalize diagrammatic words in s, r using r∘s = id_x
        word = {"id_x": "", "id_y": "", "s": "s", "r": "r", "e": "rs"}
        w = word[f] + word[g]  # diagrammatic order: f first
        while "sr" in w:
            w = w.replace("sr", "")
        return {"": f"id_{names[f][0]}", "s": "s", "r": "r", "rs": "e"}[w]

    for g, gs, gt in morphisms:
        for f, fs, ft in morphisms:
            if ft == gs:
                composition[(g, f)] = mult(g, f)
    return FiniteCategory(["x", "y"], morphisms, identities, composition)


def cyclic_group_category(n, object_id="*"):
    """One-object groupoid on the cyclic group Z/n."""
    elements = [f"g{i}" for i in range(n)]
    return monoid_category(
        elements, "g0",
        lambda g, f: f"g{(int(g[1:]) + int(f[1:])) % n}",
        object_id=object_id)


def relabel(C, object_map=None, morphism_map=None):
    """A copy of C with object/morphism ids renamed by the given injections."""
    omap = object_map or {}
    mmap = morphism_map or {}
    ob = lambda x: omap.get(x, x)
    mo = lambda m: mmap.get(m, m)
    objects = [ob(x) for x in C.objects]
    morphisms = [(mo(m), ob(C.src[m]), ob(C.tgt[m])) for m in C.morphisms]
    identities = {ob(x): mo(i) for x, i in C.identity.items()}
    composition = {(mo(g), mo(f)): mo(h) for (g, f), h in C._comp.items()}
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def prefix_relabel(C, prefix):
    return relabel(C,
                   {x: prefix + x for x in C.objects},
                   {m: prefix + m for m in C.morphisms})


def disjoint_union(C, D):
    """Coproduct; ids must already be disjoint."""
    if set(C.objects) & set(D.objects) or set(C.morphisms) & set(D.morphisms):
        raise PreconditionError("disjoint_union requires disjoint ids")
    objects = list(C.objects) + list(D.objects)
    morphisms = list(C.morphism_triples()) + list(D.morphism_triples())
    identities = {**C.identity, **D.identity}
    composition = {**C.composition_table(), **D.composition_table()}
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def full_subcategory(C, objects):
    objects = sorted(objects)
    keep = set(objects)
    morphisms = [(m, C.src[m], C.tgt[m]) for m in C.morphisms
                 if C.src[m] in keep and C.tgt[m] in keep]
    mor_keep = {m for m, _, _ in morphisms}
    identities = {x: C.identity[x] for x in objects}
    composition = {(g, f): h for (g, f), h in C._comp.items()
                   if g in mor_keep and f in mor_keep}
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def inclusion_functor(C, D):
    """The inclusion of a subcategory C of D (ids shared)."""
    return Functor(C, D, {x: x for x in C.objects},
                   {m: m for m in C.morphisms})


# -- duality and products ------------------------------------------------


def opposite(C):
    """Sources and targets swapped, composition reversed.  Ids unchanged."""
    morphisms = [(m, C.tgt[m], C.src[m]) for m in C.morphisms]
    composition = {(f, g): h for (g, f), h in C._comp.items()}
    return FiniteCategory(C.objects, morphisms, dict(C.identity), composition,
                          _validate=False)


def opposite_functor(F):
    return Functor(opposite(F.source), opposite(F.target), F.ob_map, F.mor_map,
                   _validate=False)


def product(C, D):
    """Pairs of objects and morphisms with componentwise composition."""
    objects = [pair_id(a, b) for a in C.objects for b in D.objects]
    morphisms = [(pair_id(m, n), pair_id(C.src[m], D.src[n]),
                  pair_id(C.tgt[m], D.tgt[n]))
                 for m in C.morphisms for n in D.morphisms]
    identities = {pair_id(a, b): pair_id(C.identity[a], D.identity[b])
                  for a in C.objects for b in D.objects}
    composition = {}
    for m in C.morphisms:
        for m2 in C.morphisms:
            if C.tgt[m] != C.src[m2]:
                continue
            mm = C.compose(m2, m)
            for n in D.morphisms:
                for n2 in D.morphisms:
                    if D.tgt[n] != D.src[n2]:
                        continue
                    composition[(pair_id(m2, n2), pair_id(m, n))] = \
                        pair_id(mm, D.compose(n2, n))
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


def product_projections(C, D):
    P = product(C, D)
    pr1 = Functor(P, C,
                  {pair_id(a, b): a for a in C.objects for b in D.objects},
                  {pair_id(m, n): m for m in C.morphisms for n in D.morphisms},
                  _validate=False)
    pr2 = Functor(P, D,
                  {pair_id(a, b): b for a in C.objects for b in D.objects},
                  {pair_id(m, n): n for m in C.morphisms for n in D.morphisms},
                  _validate=False)
    return P, pr1, pr2


def pairing_functor(F, G):
    """The functor (F, G): X -> product(target F, target G)."""
    if F.source != G.source:
        raise PreconditionError("pairing requires a common source")
    P = product(F.target, G.target)
    return Functor(F.source, P,
                   {x: pair_id(F.ob_map[x], G.ob_map[x]) for x in F.source.objects},
                   {m: pair_id(F.mor_map[m], G.mor_map[m]) for m in F.source.morphisms},
                   _validate=False)


@dataclass(frozen=True)
class PullbackSquare:
    total: FiniteCategory
    to_left: Functor   # projection to the source of F
    to_right: Functor  # projection to the source of G


def pullback(F, G):
    """Strict fiber product of F: A -> C and G: B -> C.

    Objects are pairs (a,b) with F(a) = G(b); morphisms are pairs of
    morphisms with equal images, composed componentwise.
    """
    if F.target != G.target:
        raise PreconditionError("pullback requires a common target")
    A, B = F.source, G.source
    objects = [pair_id(a, b) for a in A.objects for b in B.objects
               if F.ob_map[a] == G.ob_map[b]]
    morphisms = []
    for m in A.morphisms:
        for n in B.morphisms:
            if F.mor_map[m] == G.mor_map[n]:
                morphisms.append((pair_id(m, n),
                                  pair_id(A.src[m], B.src[n]),
                                  pair_id(A.tgt[m], B.tgt[n])))
    mor_pairs = [(m, n) for m in A.morphisms for n in B.morphisms
                 if F.mor_map[m] == G.mor_map[n]]
    identities = {pair_id(a, b): pair_id(A.identity[a], B.identity[b])
                  for a in A.objects for b in B.objects
                  if F.ob_map[a] == G.ob_map[b]}
    composition = {}
    for (m, n) in mor_pairs:
        for (m2, n2) in mor_pairs:
            if A.tgt[m] == A.src[m2] and B.tgt[n] == B.src[n2]:
                composition[(pair_id(m2, n2), pair_id(m, n))] = \
                    pair_id(A.compose(m2, m), B.compose(n2, n))
    P = FiniteCategory(objects, morphisms, identities, composition,
                       _validate=False)
    to_left = Functor(P, A, {pair_id(a, b): a for a, b in _decode_pairs(objects)},
                      {pair_id(m, n): m for m, n in mor_pairs}, _validate=False)
    to_right = Functor(P, B, {pair_id(a, b): b for a, b in _decode_pairs(objects)},
                       {pair_id(m, n): n for m, n in mor_pairs}, _validate=False)
    return PullbackSquare(P, to_left, to_right)


def _decode_pairs(pair_ids):
    # inverse of pair_id on ids it produced; splits at the comma balancing
    # parentheses so that nested pair ids survive
    out = []
    for p in pair_ids:
        body = p[1:-1]
        depth = 0
        for i, ch in enumerate(body):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                out.append((body[:i], body[i + 1:]))
                break
    return out


def base_change(pi, g):
    """Pullback of pi: E -> K along g: J -> K, as a fibration over J.

    Returns (projection to J, functor to E, total category).
    """
    sq = pullback(g, pi)
    return sq.to_left, sq.to_right, sq.total


def fiber(pi, x):
    """The strict fiber of pi: E -> K over the object x, as a subcategory."""
    E, K = pi.source, pi.target
    objects = [e for e in E.objects if pi.ob_map[e] == x]
    idx = K.identity[x]
    keep = set(objects)
    morphisms = [(m, E.src[m], E.tgt[m]) for m in E.morphisms
                 if pi.mor_map[m] == idx and E.src[m] in keep and E.tgt[m] in keep]
    mor_keep = {m for m, _, _ in morphisms}
    identities = {e: E.identity[e] for e in objects}
    composition = {(g2, f2): h for (g2, f2), h in E._comp.items()
                   if g2 in mor_keep and f2 in mor_keep}
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


# -- slices, commas, arrows ----------------------------------------------


def tri_id(u, a, b):
    return f"({u}:{a}>{b})"


def slice_category(C, x):
    """C_{/x}: objects are morphisms into x."""
    if x not in C.identity:
        raise PreconditionError(f"unknown object {x}")
    objects = sorted(C.morphisms_to(x))
    morphisms = []
    composition = {}
    homs = {}
    for f in objects:
        for g in objects:
            for u in C.hom(C.src[f], C.src[g]):
                if C.compose(g, u) == f:
                    m = tri_id(u, f, g)
                    morphisms.append((m, f, g))
                    homs[m] = u
    identities = {f: tri_id(C.identity[C.src[f]], f, f) for f in objects}
    for m, f, g in morphisms:
        for m2, g2, h in morphisms:
            if g == g2:
                composition[(m2, m)] = tri_id(C.compose(homs[m2], homs[m]), f, h)
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    forget = Functor(cat, C, {f: C.src[f] for f in objects},
                     {m: homs[m] for m, _, _ in morphisms}, _validate=False)
    return cat, forget


def coslice_category(C, x):
    """C^{x/}: objects are morphisms out of x."""
    if x not in C.identity:
        raise PreconditionError(f"unknown object {x}")
    objects = sorted(C.morphisms_from(x))
    morphisms = []
    composition = {}
    homs = {}
    for f in objects:
        for g in objects:
            for u in C.hom(C.tgt[f], C.tgt[g]):
                if C.compose(u, f) == g:
                    m = tri_id(u, f, g)
                    morphisms.append((m, f, g))
                    homs[m] = u
    identities = {f: tri_id(C.identity[C.tgt[f]], f, f) for f in objects}
    for m, f, g in morphisms:
        for m2, g2, h in morphisms:
            if g == g2:
                composition[(m2, m)] = tri_id(C.compose(homs[m2], homs[m]), f, h)
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    forget = Functor(cat, C, {f: C.tgt[f] for f in objects},
                     {m: homs[m] for m, _, _ in morphisms}, _validate=False)
    return cat, forget


def comma_object_id(a, b, k):
    return f"({a},{b},{k})"


def comma(F, G):
    """The comma category F/G for F: A -> C and G: B -> C.

    Objects are triples (a, b, k: F(a) -> G(b)); a morphism to
    (a', b', k') is a pair (u: a -> a', v: b -> b') with k'∘F(u) = G(v)∘k.
    Returns the category with its two forgetful functors.
    """
    cat, to_A, to_B, _ = comma_with_data(F, G)
    return cat, to_A, to_B


def comma_with_data(F, G):
    """As comma, but also returns the map object -> connecting morphism."""
    if F.target != G.target:
        raise PreconditionError("comma requires a common target")
    A, B, C = F.source, G.source, F.target
    objects = []
    for a in A.objects:
        for b in B.objects:
            for k in C.hom(F.ob_map[a], G.ob_map[b]):
                objects.append(comma_object_id(a, b, k))
    obj_data = {comma_object_id(a, b, k): (a, b, k)
                for a in A.objects for b in B.objects
                for k in C.hom(F.ob_map[a], G.ob_map[b])}
    morphisms = []
    parts = {}
    for o1, (a, b, k) in obj_data.items():
        for o2, (a2, b2, k2) in obj_data.items():
            for u in A.hom(a, a2):
                fu = F.mor_map[u]
                left = C.compose(k2, fu)
                for v in B.hom(b, b2):
                    if left == C.compose(G.mor_map[v], k):
                        m = f"({u},{v}):{o1}>{o2}"
                        morphisms.append((m, o1, o2))
                        parts[m] = (u, v)
    identities = {}
    for o, (a, b, k) in obj_data.items():
        identities[o] = f"({A.identity[a]},{B.identity[b]}):{o}>{o}"
    composition = {}
    by_src = {}
    for m, o1, o2 in morphisms:
        by_src.setdefault(o1, []).append((m, o2))
    for m, o1, o2 in morphisms:
        u, v = parts[m]
        for m2, o3 in by_src.get(o2, ()):
            u2, v2 = parts[m2]
            composition[(m2, m)] = (f"({A.compose(u2, u)},{B.compose(v2, v)})"
                                    f":{o1}>{o3}")
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    to_A = Functor(cat, A, {o: obj_data[o][0] for o in objects},
                   {m: parts[m][0] for m, _, _ in morphisms}, _validate=False)
    to_B = Functor(cat, B, {o: obj_data[o][1] for o in objects},
                   {m: parts[m][1] for m, _, _ in morphisms}, _validate=False)
    connecting = {o: obj_data[o][2] for o in objects}
    return cat, to_A, to_B, connecting


def arrow_category(C):
    """Ar(C): objects are morphisms, morphisms are commutative squares.

    Returns (Ar(C), ev_s, ev_t).
    """
    objects = list(C.morphisms)
    morphisms = []
    parts = {}
    for f in objects:
        for g in objects:
            for u in C.hom(C.src[f], C.src[g]):
                gu = C.compose(g, u)
                for v in C.hom(C.tgt[f], C.tgt[g]):
                    if C.compose(v, f) == gu:
                        m = f"({u},{v}):{f}>{g}"
                        morphisms.append((m, f, g))
                        parts[m] = (u, v)
    identities = {f: (f"({C.identity[C.src[f]]},{C.identity[C.tgt[f]]}):{f}>{f}")
                  for f in objects}
    composition = {}
    by_src = {}
    for m, f, g in morphisms:
        by_src.setdefault(f, []).append((m, g))
    for m, f, g in morphisms:
        u, v = parts[m]
        for m2, h in by_src.get(g, ()):
            u2, v2 = parts[m2]
            composition[(m2, m)] = f"({C.compose(u2, u)},{C.compose(v2, v)}):{f}>{h}"
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    ev_s = Functor(cat, C, {f: C.src[f] for f in objects},
                   {m: parts[m][0] for m, _, _ in morphisms}, _validate=False)
    ev_t = Functor(cat, C, {f: C.tgt[f] for f in objects},
                   {m: parts[m][1] for m, _, _ in morphisms}, _validate=False)
    return cat, ev_s, ev_t


def twisted_arrows(C):
    """TwAr(C): a morphism f -> g is a factorization g = v∘f∘u.

    Returns (TwAr(C), projection to opposite(C) x C).
    """
    objects = list(C.morphisms)
    morphisms = []
    parts = {}
    for f in objects:
        for g in objects:
            # u: src g -> src f, v: tgt f -> tgt g with g = v∘f∘u
            for u in C.hom(C.src[g], C.src[f]):
                fu = C.compose(f, u)
                for v in C.hom(C.tgt[f], C.tgt[g]):
                    if C.compose(v, fu) == g:
                        m = f"({u},{v}):{f}>{g}"
                        morphisms.append((m, f, g))
                        parts[m] = (u, v)
    identities = {f: (f"({C.identity[C.src[f]]},{C.identity[C.tgt[f]]}):{f}>{f}")
                  for f in objects}
    composition = {}
    by_src = {}
    for m, f, g in morphisms:
        by_src.setdefault(f, []).append((m, g))
    for m, f, g in morphisms:
        u, v = parts[m]
        for m2, h in by_src.get(g, ()):
            u2, v2 = parts[m2]
            # contravariant leg composes in C, reversed
            composition[(m2, m)] = f"({C.compose(u, u2)},{C.compose(v2, v)}):{f}>{h}"
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    Cop = opposite(C)
    P = product(Cop, C)
    proj = Functor(cat, P,
                   {f: pair_id(C.src[f], C.tgt[f]) for f in objects},
                   {m: pair_id(parts[m][0], parts[m][1]) for m, _, _ in morphisms},
                   _validate=False)
    return cat, proj


# -- functor categories --------------------------------------------------


_DEFAULT_ENUM_CAP = 10 ** 6


def enumeration_cap():
    import os
    value = os.environ.get("FIBCAT_ENUM_CAP")
    return int(value) if value else _DEFAULT_ENUM_CAP


def all_functors(C, D, ob_constraint=None, mor_constraint=None, cap=None):
    """Every functor C -> D, by backtracking over generators.

    ob_constraint(x) and mor_constraint(m) restrict candidate images.
    Fails loudly when the number of explored partial assignments would
    exceed the cap.
    """
    cap = cap or enumeration_cap()
    objects = list(C.objects)
    non_id = [m for m in C.morphisms if not C.is_identity(m)]
    results = []
    budget = [cap]

    def candidates_obj(x):
        return ob_constraint(x) if ob_constraint else D.objects

    def candidates_mor(m, fsrc, ftgt):
        base = D.hom(fsrc, ftgt)
        if mor_constraint:
            allowed = set(mor_constraint(m))
            return [n for n in base if n in allowed]
        return list(base)

    def extend_morphisms(ob_map):
        mor_map = {C.identity[x]: D.identity[ob_map[x]] for x in objects}

        def backtrack(i):
            budget[0] -= 1
            if budget[0] < 0:
                raise EnumerationCapExceeded(
                    f"functor enumeration exceeded cap {cap}")
            if i == len(non_id):
                cand = Functor(C, D, dict(ob_map), dict(mor_map), _validate=False)
                # only composition needs rechecking; typing is by construction
                ok = all(
                    mor_map[C.compose(g, f)] == D.compose(mor_map[g], mor_map[f])
                    for f in C.morphisms for g in C.morphisms
                    if C.tgt[f] == C.src[g])
                if ok:
                    results.append(cand)
                return
            m = non_id[i]
            for n in candidates_mor(m, ob_map[C.src[m]], ob_map[C.tgt[m]]):
                mor_map[m] = n
                # prune: any composite already fully assigned must match
                consistent = True
                for f in list(mor_map):
                    for g, h in ((m, f), (f, m)):
                        if C.tgt[h] == C.src[g] and g in mor_map and h in mor_map:
                            c = C.compose(g, h)
                            if c in mor_map and mor_map[c] != D.compose(
                                    mor_map[g], mor_map[h]):
                                consistent = False
                                break
                    if not consistent:
                        break
                if consistent:
                    backtrack(i + 1)
                del mor_map[m]

        backtrack(0)

    def assign_objects(i, ob_map):
        budget[0] -= 1
        if budget[0] < 0:
            raise EnumerationCapExceeded(f"functor enumeration exceeded cap {cap}")
        if i == len(objects):
            extend_morphisms(ob_map)
            return
        x = objects[i]
        for d in candidates_obj(x):
            # prune object choices with an empty required hom
            ob_map[x] = d
            ok = True
            for y, dy in ob_map.items():
                if y == x:
                    continue
                if C.hom(x, y) and not D.hom(d, dy):
                    ok = False
                    break
                if C.hom(y, x) and not D.hom(dy, d):
                    ok = False
                    break
            if ok:
                assign_objects(i + 1, ob_map)
            del ob_map[x]

    assign_objects(0, {})
    return results


def functors_over(p, q, cap=None):
    """All functors F: J -> E with pi∘F = p, for p: J -> K and q: E -> K."""
    J, E = p.source, q.source
    by_image_obj = {}
    for e in E.objects:
        by_image_obj.setdefault(q.ob_map[e], []).append(e)
    by_image_mor = {}
    for m in E.morphisms:
        by_image_mor.setdefault(q.mor_map[m], []).append(m)
    return all_functors(
        J, E,
        ob_constraint=lambda x: by_image_obj.get(p.ob_map[x], []),
        mor_constraint=lambda m: by_image_mor.get(p.mor_map[m], []),
        cap=cap)


def functor_object_id(F):
    """Deterministic id for a functor, from its graph."""
    ob = ";".join(f"{x}:{F.ob_map[x]}" for x in sorted(F.ob_map))
    mo = ";".join(f"{m}:{F.mor_map[m]}" for m in sorted(F.mor_map))
    return f"<{ob}|{mo}>"


def natural_transformations(F, G, component_filter=None):
    """All natural transformations F => G as component dicts."""
    C, D = F.source, F.target
    objects = list(C.objects)
    results = []

    def backtrack(i, comps):
        if i == len(objects):
            results.append(dict(comps))
            return
        x = objects[i]
        for eta in D.hom(F.ob_map[x], G.ob_map[x]):
            if component_filter and not component_filter(x, eta):
                continue
            comps[x] = eta
            ok = True
            for m in C.morphisms:
                a, b = C.src[m], C.tgt[m]
                if a in comps and b in comps:
                    if D.compose(comps[b], F.mor_map[m]) != \
                            D.compose(G.mor_map[m], comps[a]):
                        ok = False
                        break
            if ok:
                backtrack(i + 1, comps)
            del comps[x]

    backtrack(0, {})
    return results


def functor_category(C, D, cap=None):
    """Fun(C, D) as a finite category of functors and natural transformations."""
    funs = all_functors(C, D, cap=cap)
    return _functor_category_from(funs, C, D)


def sections_category(p, q, cap=None):
    """Fun_{/K}(J, E): functors over K and transformations over K.

    Natural transformation components are required to project to
    identities in K.
    """
    funs = functors_over(p, q, cap=cap)
    K = p.target
    E = q.source

    def over_K(x, eta):
        return q.mor_map[eta] == K.identity[p.ob_map[x]]

    return _functor_category_from(funs, p.source, E, component_filter=over_K)


def _functor_category_from(funs, C, D, component_filter=None):
    ids = {}
    for F in funs:
        ids[functor_object_id(F)] = F
    objects = sorted(ids)
    morphisms = []
    comps = {}
    for o1 in objects:
        for o2 in objects:
            for eta in natural_transformations(ids[o1], ids[o2],
                                               component_filter=component_filter):
                enc = ";".join(f"{x}:{eta[x]}" for x in sorted(eta))
                m = f"[{enc}]:{o1}>{o2}"
                morphisms.append((m, o1, o2))
                comps[m] = eta
    identities = {}
    for o in objects:
        F = ids[o]
        eta = {x: D.identity[F.ob_map[x]] for x in C.objects}
        enc = ";".join(f"{x}:{eta[x]}" for x in sorted(eta))
        identities[o] = f"[{enc}]:{o}>{o}"
    composition = {}
    by_src = {}
    for m, o1, o2 in morphisms:
        by_src.setdefault(o1, []).append((m, o2))
    for m, o1, o2 in morphisms:
        for m2, o3 in by_src.get(o2, ()):
            eta = comps[m]
            eta2 = comps[m2]
            comp = {x: D.compose(eta2[x], eta[x]) for x in eta}
            enc = ";".join(f"{x}:{comp[x]}" for x in sorted(comp))
            composition[(m2, m)] = f"[{enc}]:{o1}>{o3}"
    cat = FiniteCategory(objects, morphisms, identities, composition,
                         _validate=False)
    return cat, ids, comps


def evaluation_functor(sections, ids, comps, at_object, E):
    """Evaluate a category of functors at a fixed source object."""
    ob_map = {o: ids[o].ob_map[at_object] for o in sections.objects}
    mor_map = {m: comps[m][at_object] for m in sections.morphisms
               if m in comps}
    for o in sections.objects:
        mor_map[sections.identity[o]] = E.identity[ob_map[o]]
    return Functor(sections, E, ob_map, mor_map, _validate=False)


# -- connectivity --------------------------------------------------------


def connected_components(C):
    """Components under the zigzag equivalence generated by all morphisms."""
    uf = UnionFind(C.objects)
    for m in C.morphisms:
        uf.union(C.src[m], C.tgt[m])
    return uf.classes()


def is_connected(C):
    return len(connected_components(C)) == 1


def is_nonempty_connected(C):
    return len(C.objects) > 0 and is_connected(C)
