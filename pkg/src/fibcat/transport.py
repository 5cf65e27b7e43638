"""Replacement and (un)straightening constructions.

CoCartesian/Cartesian replacement by arrows out of/into the image,
left/right fibration replacement by fiberwise components of the comma,
relative classifying spaces for left-final/right-initial fibrations,
Grothendieck constructions in set- and category-valued flavors with
cleavage extraction, maximal sub-left/right fibrations, pushforward along
exponentiable fibrations, and fiberwise Kan extension of set-valued
diagrams.

Choices (cleavages, class representatives, factorizations) are always the
lexicographically least candidate, so outputs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from . import core, fibrations, homology
from .core import FiniteCategory, Functor, PreconditionError, pair_id
from .fibrations import InternalInvariantError
from .homology import SetValuedFunctor
from .unionfind import UnionFind


@dataclass
class CatValuedFunctor:
    """A strictly functorial assignment of categories and functors.

    Models split fibrations only: transports[m] for composable pairs must
    compose on the nose.
    """
    base: FiniteCategory
    values: dict       # object -> FiniteCategory
    transports: dict   # morphism -> Functor

    def validate(self):
        K = self.base
        for x in K.objects:
            if x not in self.values:
                raise PreconditionError(f"missing fiber at {x}")
        for m in K.morphisms:
            t = self.transports.get(m)
            if t is None:
                raise PreconditionError(f"missing transport at {m}")
            if t.source != self.values[K.src[m]] or t.target != self.values[K.tgt[m]]:
                raise PreconditionError(f"transport at {m} has wrong endpoints")
        for x in K.objects:
            if self.transports[K.identity[x]] != core.identity_functor(self.values[x]):
                raise PreconditionError(f"identity transport fails at {x}")
        for f in K.morphisms:
            for g in K.morphisms:
                if K.tgt[f] != K.src[g]:
                    continue
                if self.transports[K.compose(g, f)] != \
                        self.transports[f].then(self.transports[g]):
                    raise PreconditionError(
                        f"strict functoriality fails on ({g},{f})")
        return self


@dataclass
class CleavageReport:
    chosen_lifts: dict      # (object, base morphism) -> morphism id
    comparisons: dict       # (phi, psi, object) -> comparison iso in a fiber
    split: bool


class Replacement(NamedTuple):
    projection: Functor     # the replaced fibration over K
    unit: Functor           # from the input total category


class RelativeClassifyingSpace(NamedTuple):
    projection: Functor
    quotient: Functor       # from the input total category
    straightened: object    # SetValuedFunctor (covariant or contravariant data)
    handed: str             # "left" or "right"


# -- coCartesian / Cartesian replacement -----------------------------------


def cocart_replacement(pi):
    """Arrows of the base out of the image: objects (e, phi: pi(e) -> y),
    projected by the arrow target.

    The output is verified coCartesian; the unit e |-> (e, id) is verified
    fully faithful, and a right adjoint when pi was already coCartesian.
    """
    E, K = pi.source, pi.target
    objects = []
    data = {}
    for e in E.objects:
        for phi in K.morphisms_from(pi.ob_map[e]):
            o = pair_id(e, phi)
            objects.append(o)
            data[o] = (e, phi)
    morphisms = []
    parts = {}
    for o1, (e, phi) in data.items():
        for o2, (e2, phi2) in data.items():
            for u in E.hom(e, e2):
                lhs = K.compose(phi2, pi.mor_map[u])
                for v in K.hom(K.tgt[phi], K.tgt[phi2]):
                    if lhs == K.compose(v, phi):
                        m = f"({u},{v}):{o1}>{o2}"
                        morphisms.append((m, o1, o2))
                        parts[m] = (u, v)
    identities = {o: (f"({E.identity[data[o][0]]},{K.identity[K.tgt[data[o][1]]]})"
                      f":{o}>{o}") for o in objects}
    composition = {}
    by_src = {}
    for m, o1, o2 in morphisms:
        by_src.setdefault(o1, []).append((m, o2))
    for m, o1, o2 in morphisms:
        u, v = parts[m]
        for m2, o3 in by_src.get(o2, ()):
            u2, v2 = parts[m2]
            composition[(m2, m)] = \
                f"({E.compose(u2, u)},{K.compose(v2, v)}):{o1}>{o3}"
    total = FiniteCategory(objects, morphisms, identities, composition,
                           _validate=False)
    proj = Functor(total, K, {o: K.tgt[data[o][1]] for o in objects},
                   {m: parts[m][1] for m, _, _ in morphisms}, _validate=False)
    unit = Functor(E, total,
                   {e: pair_id(e, K.identity[pi.ob_map[e]]) for e in E.objects},
                   {u: (f"({u},{pi.mor_map[u]})"
                        f":{pair_id(E.src[u], K.identity[pi.ob_map[E.src[u]]])}"
                        f">{pair_id(E.tgt[u], K.identity[pi.ob_map[E.tgt[u]]])}")
                    for u in E.morphisms})
    if not fibrations.is_cocartesian_fibration(proj).ok:
        raise InternalInvariantError("replacement is not coCartesian")
    if not unit.is_fully_faithful():
        raise InternalInvariantError("replacement unit is not fully faithful")
    return Replacement(proj, unit)


def cart_replacement(pi):
    """Arrows of the base into the image, projected by the arrow source."""
    E, K = pi.source, pi.target
    objects = []
    data = {}
    for e in E.objects:
        for phi in K.morphisms_to(pi.ob_map[e]):
            o = pair_id(phi, e)
            objects.append(o)
            data[o] = (phi, e)
    morphisms = []
    parts = {}
    for o1, (phi, e) in data.items():
        for o2, (phi2, e2) in data.items():
            for u in E.hom(e, e2):
                lhs = K.compose(pi.mor_map[u], phi)
                for v in K.hom(K.src[phi], K.src[phi2]):
                    if lhs == K.compose(phi2, v):
                        m = f"({v},{u}):{o1}>{o2}"
                        morphisms.append((m, o1, o2))
                        parts[m] = (v, u)
    identities = {o: (f"({K.identity[K.src[data[o][0]]]},{E.identity[data[o][1]]})"
                      f":{o}>{o}") for o in objects}
    composition = {}
    by_src = {}
    for m, o1, o2 in morphisms:
        by_src.setdefault(o1, []).append((m, o2))
    for m, o1, o2 in morphisms:
        v, u = parts[m]
        for m2, o3 in by_src.get(o2, ()):
            v2, u2 = parts[m2]
            composition[(m2, m)] = \
                f"({K.compose(v2, v)},{E.compose(u2, u)}):{o1}>{o3}"
    total = FiniteCategory(objects, morphisms, identities, composition,
                           _validate=False)
    proj = Functor(total, K, {o: K.src[data[o][0]] for o in objects},
                   {m: parts[m][0] for m, _, _ in morphisms}, _validate=False)
    unit = Functor(E, total,
                   {e: pair_id(K.identity[pi.ob_map[e]], e) for e in E.objects},
                   {u: (f"({pi.mor_map[u]},{u})"
                        f":{pair_id(K.identity[pi.ob_map[E.src[u]]], E.src[u])}"
                        f">{pair_id(K.identity[pi.ob_map[E.tgt[u]]], E.tgt[u])}")
                    for u in E.morphisms})
    if not fibrations.is_cartesian_fibration(proj).ok:
        raise InternalInvariantError("replacement is not Cartesian")
    if not unit.is_fully_faithful():
        raise InternalInvariantError("replacement unit is not fully faithful")
    return Replacement(proj, unit)


# -- set-valued straightening -----------------------------------------------


def unstraighten(F):
    """Total category of a set-valued functor: a discrete opfibration."""
    F.validate()
    K = F.base
    objects = []
    for x in K.objects:
        for a in F.values[x]:
            objects.append(pair_id(x, a))
    morphisms = []
    for m in K.morphisms:
        x, y = K.src[m], K.tgt[m]
        for a in F.values[x]:
            morphisms.append((f"({m}@{a})", pair_id(x, a),
                              pair_id(y, F.transports[m][a])))
    identities = {pair_id(x, a): f"({K.identity[x]}@{a})"
                  for x in K.objects for a in F.values[x]}
    composition = {}
    for m in K.morphisms:
        for m2 in K.morphisms:
            if K.tgt[m] != K.src[m2]:
                continue
            comp = K.compose(m2, m)
            for a in F.values[K.src[m]]:
                composition[(f"({m2}@{F.transports[m][a]})", f"({m}@{a})")] = \
                    f"({comp}@{a})"
    total = FiniteCategory(objects, morphisms, identities, composition,
                           _validate=False)
    ob_map = {}
    mor_map = {}
    for x in K.objects:
        for a in F.values[x]:
            ob_map[pair_id(x, a)] = x
    for m in K.morphisms:
        for a in F.values[K.src[m]]:
            mor_map[f"({m}@{a})"] = m
    proj = Functor(total, K, ob_map, mor_map)
    v = fibrations.is_strict_discrete_opfibration(proj)
    if not v.ok:
        raise InternalInvariantError(f"unstraightening not discrete: {v.witness}")
    return proj


def straighten_discrete_opfib(pi):
    """Fiber objects and unique-lift targets; requires strict unique lifts."""
    v = fibrations.is_strict_discrete_opfibration(pi)
    if not v.ok:
        raise PreconditionError("not a discrete opfibration", v.witness)
    E, K = pi.source, pi.target
    values = {x: tuple(sorted(e for e in E.objects if pi.ob_map[e] == x))
              for x in K.objects}
    transports = {}
    for m in K.morphisms:
        x = K.src[m]
        t = {}
        for e in values[x]:
            lift = [f for f in E.morphisms_from(e) if pi.mor_map[f] == m][0]
            t[e] = E.tgt[lift]
        transports[m] = t
    return SetValuedFunctor(K, values, transports).validate()


# -- category-valued straightening -------------------------------------------


def _cat_mor_id(phi, e, rho, identity_rho):
    # canonical lifts sort before every other lift of the same (phi, e)
    return f"({phi}@{e})" if rho == identity_rho else f"({phi}@{e};{rho})"


def unstraighten_cat(F):
    """Classical total category of a category-valued functor.

    Objects are pairs (x, fiber object); a morphism (x,e) -> (y,e') is a
    pair (phi: x -> y, rho: F(phi)(e) -> e').  The projection is a split
    coCartesian fibration whose canonical cleavage is recovered by
    straighten_cocart.
    """
    F.validate()
    K = F.base
    objects = []
    for x in K.objects:
        for e in F.values[x].objects:
            objects.append(pair_id(x, e))
    morphisms = []
    data = {}
    for phi in K.morphisms:
        x, y = K.src[phi], K.tgt[phi]
        T = F.transports[phi]
        fib_y = F.values[y]
        for e in F.values[x].objects:
            te = T.ob_map[e]
            for rho in fib_y.morphisms_from(te):
                m = _cat_mor_id(phi, e, rho, fib_y.identity[te])
                morphisms.append((m, pair_id(x, e), pair_id(y, fib_y.tgt[rho])))
                data[m] = (phi, e, rho)
    identities = {}
    for x in K.objects:
        fib = F.values[x]
        for e in fib.objects:
            identities[pair_id(x, e)] = _cat_mor_id(
                K.identity[x], e, fib.identity[e], fib.identity[e])
    composition = {}
    for m, o1, o2 in morphisms:
        phi, e, rho = data[m]
        y = K.tgt[phi]
        for m2, o2b, o3 in morphisms:
            if o2b != o2:
                continue
            psi, e2, sigma = data[m2]
            if K.src[psi] != y:
                continue
            comp = K.compose(psi, phi)
            z = K.tgt[psi]
            T_psi = F.transports[psi]
            fib_z = F.values[z]
            rho_pushed = T_psi.mor_map[rho]
            total_rho = fib_z.compose(sigma, rho_pushed)
            te = F.transports[comp].ob_map[e]
            composition[(m2, m)] = _cat_mor_id(
                comp, e, total_rho, fib_z.identity[te])
    total = FiniteCategory(objects, morphisms, identities, composition)
    proj = Functor(total, K,
                   {o: o_x for o, o_x in
                    ((pair_id(x, e), x) for x in K.objects
                     for e in F.values[x].objects)},
                   {m: data[m][0] for m, _, _ in morphisms})
    v = fibrations.is_cocartesian_fibration(proj)
    if not v.ok:
        raise InternalInvariantError(f"unstraightening not coCartesian: {v.witness}")
    return proj


def straighten_cocart(pi):
    """Choose a cleavage (lexicographically least coCartesian lift, with
    identities at identity morphisms) and extract the transport data.

    Returns (CatValuedFunctor or None, CleavageReport): strict data only
    when the cleavage is split; otherwise the comparison isomorphisms are
    the output.
    """
    v = fibrations.is_cocartesian_fibration(pi)
    if not v.ok:
        raise PreconditionError("not a coCartesian fibration", v.witness)
    E, K = pi.source, pi.target
    fibers = {x: core.fiber(pi, x) for x in K.objects}
    chosen = {}
    for e in E.objects:
        x = pi.ob_map[e]
        for phi in K.morphisms_from(x):
            if K.is_identity(phi):
                chosen[(e, phi)] = E.identity[e]
            else:
                chosen[(e, phi)] = fibrations.cocartesian_lifts(pi, e, phi)[0]

    def transport_of(phi):
        x, y = K.src[phi], K.tgt[phi]
        fib_x, fib_y = fibers[x], fibers[y]
        ob_map = {e: E.tgt[chosen[(e, phi)]] for e in fib_x.objects}
        mor_map = {}
        for vmor in fib_x.morphisms:
            e, e2 = fib_x.src[vmor], fib_x.tgt[vmor]
            want = E.compose(chosen[(e2, phi)], vmor)
            fillers = [w for w in E.hom(ob_map[e], ob_map[e2])
                       if pi.mor_map[w] == K.identity[y]
                       and E.compose(w, chosen[(e, phi)]) == want]
            if len(fillers) != 1:
                raise InternalInvariantError(
                    f"coCartesian filler not unique for {vmor} over {phi}")
            mor_map[vmor] = fillers[0]
        return Functor(fib_x, fib_y, ob_map, mor_map)

    transports = {phi: transport_of(phi) for phi in K.morphisms}
    comparisons = {}
    split = True
    for phi in K.morphisms:
        for psi in K.morphisms:
            if K.tgt[phi] != K.src[psi]:
                continue
            comp = K.compose(psi, phi)
            z = K.tgt[psi]
            for e in fibers[K.src[phi]].objects:
                via = E.compose(chosen[(E.tgt[chosen[(e, phi)]], psi)],
                                chosen[(e, phi)])
                direct = chosen[(e, comp)]
                fillers = [w for w in E.hom(E.tgt[direct], E.tgt[via])
                           if pi.mor_map[w] == K.identity[z]
                           and E.compose(w, direct) == via]
                if len(fillers) != 1:
                    raise InternalInvariantError(
                        f"comparison not unique over ({psi},{phi}) at {e}")
                w = fillers[0]
                comparisons[(phi, psi, e)] = w
                if not E.is_iso(w):
                    raise InternalInvariantError(
                        f"comparison over ({psi},{phi}) at {e} is not invertible")
                if w != E.identity[E.tgt[direct]]:
                    split = False
    _check_cleavage_cocycle(pi, K, E, fibers, chosen, transports, comparisons)
    report = CleavageReport(chosen, comparisons, split)
    if not split:
        return None, report
    F = CatValuedFunctor(K, fibers, transports).validate()
    return F, report


def _check_cleavage_cocycle(pi, K, E, fibers, chosen, transports, comparisons):
    # the two regroupings of a triple composite agree up to the recorded isos
    for phi in K.morphisms:
        for psi in K.morphisms:
            if K.tgt[phi] != K.src[psi]:
                continue
            for chi in K.morphisms:
                if K.tgt[psi] != K.src[chi]:
                    continue
                psiphi = K.compose(psi, phi)
                chipsi = K.compose(chi, psi)
                for e in fibers[K.src[phi]].objects:
                    one = E.compose(
                        _push_vertical(pi, E, K, chosen, chi,
                                       comparisons[(phi, psi, e)]),
                        comparisons[(psiphi, chi, e)])
                    other = E.compose(
                        comparisons[(psi, chi, transports[phi].ob_map[e])],
                        comparisons[(phi, chipsi, e)])
                    if one != other:
                        raise InternalInvariantError(
                            f"cleavage cocycle fails on ({chi},{psi},{phi}) at {e}")


def _push_vertical(pi, E, K, chosen, chi, w):
    """Image of a vertical morphism under the chosen transport along chi."""
    e, e2 = E.src[w], E.tgt[w]
    z = K.tgt[chi]
    want = E.compose(chosen[(e2, chi)], w)
    fillers = [u for u in E.hom(E.tgt[chosen[(e, chi)]], E.tgt[chosen[(e2, chi)]])
               if pi.mor_map[u] == K.identity[z]
               and E.compose(u, chosen[(e, chi)]) == want]
    if len(fillers) != 1:
        raise InternalInvariantError("transport of a vertical morphism not unique")
    return fillers[0]


# -- left/right fibration replacement ----------------------------------------


class LfibReplacement(NamedTuple):
    straightened: SetValuedFunctor
    projection: Functor      # the unstraightened discrete opfibration
    unit: Functor            # canonical functor from the input total


def lfib_replacement(pi):
    """Value at x: components of the comma over x; transports by
    postcomposition."""
    J, K = pi.source, pi.target
    commas = {}
    reps = {}
    for x in K.objects:
        cat, _, _ = core.comma(pi, core.point(K, x))
        uf = UnionFind(cat.objects)
        for m in cat.morphisms:
            uf.union(cat.src[m], cat.tgt[m])
        commas[x] = cat
        reps[x] = uf.class_map()
    values = {x: tuple(sorted(set(reps[x].values()))) for x in K.objects}

    def comma_obj(j, phi):
        return core.comma_object_id(j, "*", phi)

    transports = {}
    for xi in K.morphisms:
        x, y = K.src[xi], K.tgt[xi]
        t = {}
        for rep in values[x]:
            # decode the representative comma object: (j, *, phi)
            for j in J.objects:
                for phi in K.hom(pi.ob_map[j], x):
                    if comma_obj(j, phi) == rep:
                        t[rep] = reps[y][comma_obj(j, K.compose(xi, phi))]
        transports[xi] = t
    F = SetValuedFunctor(K, values, transports).validate()
    proj = unstraighten(F)
    unit_ob = {}
    unit_mor = {}
    for j in J.objects:
        x = pi.ob_map[j]
        unit_ob[j] = pair_id(x, reps[x][comma_obj(j, K.identity[x])])
    for u in J.morphisms:
        phi = pi.mor_map[u]
        j = J.src[u]
        x = pi.ob_map[j]
        unit_mor[u] = f"({phi}@{reps[x][comma_obj(j, K.identity[x])]})"
    unit = Functor(J, proj.source, unit_ob, unit_mor)
    return LfibReplacement(F, proj, unit)


def rfib_replacement(pi):
    """Dual construction: components of the comma under x, transports by
    precomposition; packaged on the opposite so the output is a discrete
    fibration over K."""
    op = core.opposite_functor(pi)
    rep = lfib_replacement(op)
    proj = core.opposite_functor(rep.projection)
    unit = Functor(pi.source, proj.source, rep.unit.ob_map, rep.unit.mor_map)
    return LfibReplacement(rep.straightened, proj, unit)


# -- relative classifying space ----------------------------------------------


def relative_classifying_space(pi):
    """Fiberwise component collapse, defined when pi is left final or right
    initial (otherwise the localization may leave the finite world; the
    refusal carries the failing finality witness)."""
    left = fibrations.is_left_final_fibration(pi)
    right = None
    if not left.ok:
        right = fibrations.is_right_initial_fibration(pi)
        if not right.ok:
            raise PreconditionError(
                "relative classifying space needs a left-final or "
                "right-initial fibration",
                {"left_final": left.witness, "right_initial": right.witness})
    E, K = pi.source, pi.target
    fibers = {x: core.fiber(pi, x) for x in K.objects}
    comp = {x: homology.pi0_map(fibers[x]) for x in K.objects}
    values = {x: tuple(sorted(set(comp[x].values()))) for x in K.objects}
    handed = "left" if left.ok else "right"

    def transport(phi, e):
        x, y = K.src[phi], K.tgt[phi]
        targets = {comp[y][E.tgt[u]] for u in E.morphisms_from(e)
                   if pi.mor_map[u] == phi}
        if len(targets) != 1:
            raise InternalInvariantError(
                f"component transport along {phi} not single-valued at {e}")
        return targets.pop()

    def transport_back(phi, e):
        x, y = K.src[phi], K.tgt[phi]
        sources = {comp[x][E.src[u]] for u in E.morphisms_to(e)
                   if pi.mor_map[u] == phi}
        if len(sources) != 1:
            raise InternalInvariantError(
                f"component transport back along {phi} not single-valued at {e}")
        return sources.pop()

    if handed == "left":
        transports = {}
        for phi in K.morphisms:
            x = K.src[phi]
            t = {}
            for rep in values[x]:
                t[rep] = transport(phi, rep)
            transports[phi] = t
        F = SetValuedFunctor(K, values, transports).validate()
        proj = unstraighten(F)
        quotient = Functor(
            E, proj.source,
            {e: pair_id(pi.ob_map[e], comp[pi.ob_map[e]][e]) for e in E.objects},
            {u: (f"({pi.mor_map[u]}@{comp[pi.ob_map[E.src[u]]][E.src[u]]})")
             for u in E.morphisms})
        straightened = F
    else:
        # contravariant data; total category built directly
        back = {}
        for phi in K.morphisms:
            y = K.tgt[phi]
            back[phi] = {rep: transport_back(phi, rep) for rep in values[y]}
        objects = [pair_id(x, r) for x in K.objects for r in values[x]]
        morphisms = []
        base_of = {}
        for phi in K.morphisms:
            x, y = K.src[phi], K.tgt[phi]
            for r in values[y]:
                m = f"({phi}@{r})"
                morphisms.append((m, pair_id(x, back[phi][r]), pair_id(y, r)))
                base_of[m] = phi
        identities = {pair_id(x, r): f"({K.identity[x]}@{r})"
                      for x in K.objects for r in values[x]}
        composition = {}
        for phi in K.morphisms:
            for psi in K.morphisms:
                if K.tgt[phi] != K.src[psi]:
                    continue
                comp_m = K.compose(psi, phi)
                for r in values[K.tgt[psi]]:
                    composition[(f"({psi}@{r})", f"({phi}@{back[psi][r]})")] = \
                        f"({comp_m}@{r})"
        total = FiniteCategory(objects, morphisms, identities, composition)
        proj = Functor(total, K,
                       {pair_id(x, r): x for x in K.objects for r in values[x]},
                       base_of)
        quotient = Functor(
            E, total,
            {e: pair_id(pi.ob_map[e], comp[pi.ob_map[e]][e]) for e in E.objects},
            {u: (f"({pi.mor_map[u]}@{comp[pi.ob_map[E.tgt[u]]][E.tgt[u]]})")
             for u in E.morphisms})
        straightened = SetValuedFunctor(core.opposite(K), values, {
            phi: dict(back[phi]) for phi in K.morphisms}).validate()
    if not fibrations.is_conservative(proj).ok:
        raise InternalInvariantError("relative classifying space not conservative")
    for x in K.objects:
        got = sorted(core.fiber(proj, x).objects)
        want = sorted(pair_id(x, r) for r in values[x])
        if got != want:
            raise InternalInvariantError("fiber of the collapse is wrong")
    return RelativeClassifyingSpace(proj, quotient, straightened, handed)


# -- maximal sub-left/right fibrations ----------------------------------------


def maximal_left_subfibration(pi):
    """Wide subcategory on the pi-coCartesian morphisms, same projection."""
    v = fibrations.is_cocartesian_fibration(pi)
    if not v.ok:
        raise PreconditionError("not a coCartesian fibration", v.witness)
    E, K = pi.source, pi.target
    keep = [f for f in E.morphisms if is_cocart(pi, f)]
    keep_set = set(keep)
    for f in keep:
        for g in keep:
            if E.tgt[f] == E.src[g] and E.compose(g, f) not in keep_set:
                raise InternalInvariantError(
                    f"coCartesian morphisms do not compose: ({g},{f})")
    morphisms = [(m, E.src[m], E.tgt[m]) for m in keep]
    composition = {(g, f): h for (g, f), h in E.composition_table().items()
                   if g in keep_set and f in keep_set}
    total = FiniteCategory(E.objects, morphisms, dict(E.identity), composition)
    proj = Functor(total, K, dict(pi.ob_map),
                   {m: pi.mor_map[m] for m in keep})
    if not fibrations.is_left_fibration(proj).ok:
        raise InternalInvariantError("maximal subfibration is not a left fibration")
    return proj


def is_cocart(pi, f):
    return fibrations.is_cocartesian_morphism(pi, f).ok


def maximal_right_subfibration(pi):
    v = fibrations.is_cartesian_fibration(pi)
    if not v.ok:
        raise PreconditionError("not a Cartesian fibration", v.witness)
    op = maximal_left_subfibration(core.opposite_functor(pi))
    total = core.opposite(op.source)
    return Functor(total, pi.target, op.ob_map, op.mor_map)


# -- pushforward along an exponentiable fibration ------------------------------


class Pushforward(NamedTuple):
    projection: Functor     # pi_* Z -> K
    obj_functors: dict      # object id -> Functor (fiber -> Z)
    mor_functors: dict      # morphism id -> Functor (base-changed arrow -> Z)


def _base_change_over_arrow(pi, phi):
    K = pi.target
    arrow = fibrations._arrow_functor(K, phi)
    proj, to_E, total = core.base_change(pi, arrow)
    return proj, to_E, total


def pushforward_exponentiable(pi, zeta, cap=None):
    """Objects over x are functors from the fiber to Z over E; morphisms
    over phi are functors from the base change over phi to Z over E;
    composition glues along the middle fiber through a factorization,
    well-defined because factorization categories are nonempty and
    connected.
    """
    v = fibrations.is_exponentiable(pi)
    if not v.ok:
        raise PreconditionError("pushforward needs an exponentiable fibration",
                                v.witness)
    E, K = pi.source, pi.target
    Z = zeta.source
    fibers = {x: core.fiber(pi, x) for x in K.objects}
    obj_functors = {}
    objects_over = {}
    for x in K.objects:
        inc = core.inclusion_functor(fibers[x], E)
        funs = core.functors_over(inc, zeta, cap=cap)
        objects_over[x] = []
        for F in funs:
            oid = f"{core.functor_object_id(F)}@{x}"
            objects_over[x].append(oid)
            obj_functors[oid] = F
    base_of_obj = {oid: x for x in K.objects for oid in objects_over[x]}
    arrow_data = {}
    mor_functors = {}
    base_of_mor = {}
    morphisms = []
    for phi in K.morphisms:
        x, y = K.src[phi], K.tgt[phi]
        proj, to_E, total = _base_change_over_arrow(pi, phi)
        funs = core.functors_over(to_E, zeta, cap=cap)
        arrow_data[phi] = (proj, to_E, total)
        for H in funs:
            mid = f"{core.functor_object_id(H)}@{phi}"
            src = _restrict_end(H, fibers[x], "0")
            tgt = _restrict_end(H, fibers[y], "1")
            src_id = f"{core.functor_object_id(src)}@{x}"
            tgt_id = f"{core.functor_object_id(tgt)}@{y}"
            morphisms.append((mid, src_id, tgt_id))
            mor_functors[mid] = H
            base_of_mor[mid] = phi
    objects = sorted(obj_functors)
    identities = {}
    for x in K.objects:
        for oid in objects_over[x]:
            identities[oid] = _degenerate_morphism_id(
                K, x, obj_functors[oid], arrow_data, fibers)
    composition = {}
    by_src = {}
    for mid, s, t in morphisms:
        by_src.setdefault(s, []).append((mid, t))
    for mid, s, t in morphisms:
        phi = base_of_mor[mid]
        for mid2, t2 in by_src.get(t, ()):
            psi = base_of_mor[mid2]
            if pi.target.tgt[phi] != pi.target.src[psi]:
                continue
            composition[(mid2, mid)] = _glue_morphisms(
                pi, zeta, arrow_data, mor_functors[mid], mor_functors[mid2],
                phi, psi)
    total_cat = FiniteCategory(objects, morphisms, identities, composition)
    proj = Functor(total_cat, K, base_of_obj, base_of_mor)
    return Pushforward(proj, obj_functors, mor_functors)


def _restrict_end(H, fiber_cat, end):
    """Restriction of a base-changed-arrow functor to one end fiber."""
    ob_map = {e: H.ob_map[pair_id(end, e)] for e in fiber_cat.objects}
    mor_map = {m: H.mor_map[pair_id(f"{end}->{end}", m)]
               for m in fiber_cat.morphisms}
    return Functor(fiber_cat, H.target, ob_map, mor_map, _validate=False)


def _degenerate_morphism_id(K, x, F, arrow_data, fibers):
    """The identity morphism of F: the arrow functor with identity
    components over id_x."""
    phi = K.identity[x]
    proj, to_E, total = arrow_data[phi]
    Z = F.target
    ob_map = {}
    mor_map = {}
    for o in total.objects:
        end, e = core._decode_pairs([o])[0]
        ob_map[o] = F.ob_map[e]
    for m in total.morphisms:
        iv, u = core._decode_pairs([m])[0]
        mor_map[m] = F.mor_map[u]
    H = Functor(total, Z, ob_map, mor_map, _validate=False)
    return f"{core.functor_object_id(H)}@{phi}"


def _glue_morphisms(pi, zeta, arrow_data, H1, H2, phi, psi):
    """Composite over psi∘phi: agree on fibers, transport cross morphisms
    through the lexicographically least factorization."""
    E, K = pi.source, pi.target
    Z = zeta.source
    comp = K.compose(psi, phi)
    proj_c, to_E_c, total_c = arrow_data[comp]
    ob_map = {}
    mor_map = {}
    for o in total_c.objects:
        end, e = core._decode_pairs([o])[0]
        if end == "0":
            ob_map[o] = H1.ob_map[pair_id("0", e)]
        else:
            ob_map[o] = H2.ob_map[pair_id("1", e)]
    for m in total_c.morphisms:
        iv, u = core._decode_pairs([m])[0]
        if iv == "0->0":
            mor_map[m] = H1.mor_map[pair_id("0->0", u)]
        elif iv == "1->1":
            mor_map[m] = H2.mor_map[pair_id("1->1", u)]
        else:
            # u: e -> e'' over psi∘phi; factor through the middle fiber
            fact = _least_factorization(pi, phi, psi, u)
            u1, u2 = fact
            mor_map[m] = Z.compose(H2.mor_map[pair_id("0->1", u2)],
                                   H1.mor_map[pair_id("0->1", u1)])
    H = Functor(total_c, Z, ob_map, mor_map)
    return f"{core.functor_object_id(H)}@{comp}"


def _least_factorization(pi, phi, psi, lift):
    E = pi.source
    candidates = []
    for u in sorted(E.morphisms_from(E.src[lift])):
        if pi.mor_map[u] != phi:
            continue
        for v in sorted(E.hom(E.tgt[u], E.tgt[lift])):
            if pi.mor_map[v] == psi and E.compose(v, u) == lift:
                candidates.append((u, v))
    if not candidates:
        raise InternalInvariantError(
            f"no factorization of {lift} over ({phi},{psi})")
    return min(candidates)


def pushforward_adjunction_check(pi, zeta, p, cap=None, push=None):
    """The bijection between maps into the pushforward over K and maps of
    the pulled-back total into Z over E, verified by enumeration."""
    if push is None:
        push = pushforward_exponentiable(pi, zeta, cap=cap)
    J, K = p.source, p.target
    lhs = core.functors_over(p, push.projection, cap=cap)
    sq = core.pullback(p, pi)
    q = sq.to_right  # J x_K E -> E
    rhs = core.functors_over(q, zeta, cap=cap)
    rhs_ids = {core.functor_object_id(S) for S in rhs}

    def transpose(T):
        ob_map = {}
        mor_map = {}
        JE = sq.total
        for o in JE.objects:
            j, e = core._decode_pairs([o])[0]
            ob_map[o] = push.obj_functors[T.ob_map[j]].ob_map[e]
        for m in JE.morphisms:
            w, u = core._decode_pairs([m])[0]
            H = push.mor_functors[T.mor_map[w]]
            mor_map[m] = H.mor_map[pair_id("0->1", u)]
        return Functor(JE, zeta.source, ob_map, mor_map)

    images = set()
    for T in lhs:
        S = transpose(T)
        images.add(core.functor_object_id(S))
    return {
        "lhs": len(lhs), "rhs": len(rhs),
        "injective": len(images) == len(lhs),
        "bijective": images == rhs_ids,
    }


# -- fiberwise Kan extension of set-valued diagrams ---------------------------


def kan_extend_along_fibration(pi, F, direction):
    """Left case: fiberwise set-colimits; right case: fiberwise limits.

    Requires pi left-final (or coCartesian) for "left", right-initial (or
    Cartesian) for "right"; each value is cross-checked against the comma
    formula.
    """
    E, K = pi.source, pi.target
    F.validate()
    if F.base != E:
        raise PreconditionError("diagram must live on the total category")
    if direction == "left":
        ok = fibrations.is_cocartesian_fibration(pi).ok or \
            fibrations.is_left_final_fibration(pi).ok
        if not ok:
            raise PreconditionError(
                "left Kan extension along this functor is not fiberwise",
                fibrations.is_left_final_fibration(pi).witness)
        return _kan_left(pi, F)
    if direction == "right":
        ok = fibrations.is_cartesian_fibration(pi).ok or \
            fibrations.is_right_initial_fibration(pi).ok
        if not ok:
            raise PreconditionError(
                "right Kan extension along this functor is not fiberwise",
                fibrations.is_right_initial_fibration(pi).witness)
        return _kan_right(pi, F)
    raise PreconditionError("direction must be 'left' or 'right'")


def _fiber_diagram(F, fiber_cat):
    return SetValuedFunctor(
        fiber_cat,
        {e: tuple(F.values[e]) for e in fiber_cat.objects},
        {m: dict(F.transports[m]) for m in fiber_cat.morphisms})


def _kan_left(pi, F):
    E, K = pi.source, pi.target
    fibers = {x: core.fiber(pi, x) for x in K.objects}
    class_maps = {}
    values = {}
    for x in K.objects:
        _, cls = homology.set_colimit(_fiber_diagram(F, fibers[x]))
        class_maps[x] = cls
        values[x] = tuple(sorted(set(f"[{e}|{a}]" for (e, a) in cls.values())))

    def class_id(x, e, a):
        r = class_maps[x][(e, a)]
        return f"[{r[0]}|{r[1]}]"

    transports = {}
    for phi in K.morphisms:
        x, y = K.src[phi], K.tgt[phi]
        t = {}
        for (e, a), rep in class_maps[x].items():
            targets = set()
            for u in E.morphisms_from(e):
                if pi.mor_map[u] == phi:
                    targets.add(class_id(y, E.tgt[u], F.transports[u][a]))
            if len(targets) != 1:
                raise InternalInvariantError(
                    f"colimit transport along {phi} not single-valued at ({e},{a})")
            cid = f"[{rep[0]}|{rep[1]}]"
            if cid in t and t[cid] != targets.copy().pop():
                raise InternalInvariantError(
                    f"colimit transport along {phi} disagrees on a class")
            t[cid] = targets.pop()
        transports[phi] = t
    G = SetValuedFunctor(K, values, transports).validate()
    _check_kan_left_against_comma(pi, F, G, class_maps)
    return G


def _check_kan_left_against_comma(pi, F, G, class_maps):
    E, K = pi.source, pi.target
    for x in K.objects:
        cat, to_E, _ = core.comma(pi, core.point(K, x))
        diagram = SetValuedFunctor(
            cat,
            {o: tuple(F.values[to_E.ob_map[o]]) for o in cat.objects},
            {m: dict(F.transports[to_E.mor_map[m]]) for m in cat.morphisms})
        _, cls = homology.set_colimit(diagram)
        # the fiber inclusion induces a bijection of colimit classes
        fiber_reps = {}
        for (e, a), rep in class_maps[x].items():
            o = core.comma_object_id(e, "*", K.identity[x])
            fiber_reps[f"[{rep[0]}|{rep[1]}]"] = cls[(o, a)]
        if len(set(fiber_reps.values())) != len(fiber_reps) or \
                set(fiber_reps.values()) != set(cls.values()):
            raise InternalInvariantError(
                f"fiber colimit differs from the comma colimit at {x}")


def _kan_right(pi, F):
    E, K = pi.source, pi.target
    fibers = {x: core.fiber(pi, x) for x in K.objects}
    fams = {}
    values = {}
    for x in K.objects:
        fam = homology.set_limit(_fiber_diagram(F, fibers[x]))
        fams[x] = fam
        values[x] = tuple(_family_id(f) for f in fam)

    def transport(phi, fam):
        x, y = K.src[phi], K.tgt[phi]
        out = {}
        lookup = dict(fam)
        for e2 in fibers[y].objects:
            vals = set()
            for u in E.morphisms_to(e2):
                if pi.mor_map[u] == phi and pi.ob_map[E.src[u]] == x:
                    vals.add(F.transports[u][lookup[E.src[u]]])
            if len(vals) != 1:
                raise InternalInvariantError(
                    f"limit transport along {phi} not single-valued at {e2}")
            out[e2] = vals.pop()
        return tuple(sorted(out.items()))

    transports = {}
    for phi in K.morphisms:
        x = K.src[phi]
        t = {}
        for fam in fams[x]:
            t[_family_id(fam)] = _family_id(transport(phi, fam))
        transports[phi] = t
    G = SetValuedFunctor(K, values, transports).validate()
    _check_kan_right_against_comma(pi, F, fams)
    return G


def _family_id(fam):
    return "{" + ";".join(f"{e}:{a}" for e, a in fam) + "}"


def _check_kan_right_against_comma(pi, F, fams):
    E, K = pi.source, pi.target
    for x in K.objects:
        cat, _, to_E = core.comma(core.point(K, x), pi)
        diagram = SetValuedFunctor(
            cat,
            {o: tuple(F.values[to_E.ob_map[o]]) for o in cat.objects},
            {m: dict(F.transports[to_E.mor_map[m]]) for m in cat.morphisms})
        comma_fams = homology.set_limit(diagram)
        # restriction to the fiber (objects with identity leg) is a bijection
        restricted = set()
        for fam in comma_fams:
            lookup = dict(fam)
            entries = []
            for e in core.fiber(pi, x).objects:
                o = core.comma_object_id("*", e, K.identity[x])
                entries.append((e, lookup[o]))
            restricted.add(_family_id(tuple(sorted(entries))))
        want = {_family_id(f) for f in fams[x]}
        if restricted != want or len(comma_fams) != len(fams[x]):
            raise InternalInvariantError(
                f"fiber limit differs from the comma limit at {x}")
