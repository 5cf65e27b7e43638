"""JSON documents for categories, functors, bimodules and correspondences.

Emission always canonicalizes: sorted keys, two-space indent, a trailing
newline, UTF-8 text.  parse -> emit is therefore byte-stable, and two
documents describing the same value serialize identically.

Schema errors (shape, types, dangling ids) raise DocumentError; axiom
violations are surfaced through validate_category so the caller can
report witnesses.
"""

from __future__ import annotations

import json

from . import core, correspondences as corrs
from .core import FiniteCategory, Functor
from .correspondences import Profunctor
from .homology import SetValuedFunctor

FORMAT_VERSION = "1"


class DocumentError(ValueError):
    pass


class ValidationFailure(ValueError):
    def __init__(self, report):
        super().__init__("; ".join(report[:8]))
        self.report = report


def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def loads(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from exc


def _expect(doc, kind):
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DocumentError(f"format_version must be {FORMAT_VERSION!r}")
    if doc.get("type") != kind:
        raise DocumentError(f"expected a {kind} document, got {doc.get('type')!r}")


def _require(doc, field, typ):
    value = doc.get(field)
    if not isinstance(value, typ):
        raise DocumentError(f"field {field!r} missing or of wrong type")
    return value


# -- categories ---------------------------------------------------------------


def category_to_doc(C):
    return {
        "format_version": FORMAT_VERSION,
        "type": "category",
        "objects": sorted(C.objects),
        "morphisms": [{"id": m, "src": C.src[m], "tgt": C.tgt[m]}
                      for m in sorted(C.morphisms)],
        "identities": {x: C.identity[x] for x in C.objects},
        "compose": sorted([g, f, h] for (g, f), h in
                          C.composition_table().items()),
    }


def category_from_doc(doc):
    _expect(doc, "category")
    objects = _require(doc, "objects", list)
    raw_morphisms = _require(doc, "morphisms", list)
    morphisms = []
    for entry in raw_morphisms:
        if not isinstance(entry, dict) or not {"id", "src", "tgt"} <= set(entry):
            raise DocumentError(f"bad morphism entry: {entry!r}")
        morphisms.append((entry["id"], entry["src"], entry["tgt"]))
    identities = _require(doc, "identities", dict)
    compose_list = _require(doc, "compose", list)
    composition = {}
    for entry in compose_list:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise DocumentError(f"bad compose entry: {entry!r}")
        g, f, h = entry
        if (g, f) in composition:
            raise DocumentError(f"composable pair listed twice: ({g},{f})")
        composition[(g, f)] = h
    report = core.validate_category(objects, morphisms, identities, composition)
    if report:
        raise ValidationFailure(report)
    return FiniteCategory(objects, morphisms, identities, composition,
                          _validate=False)


# -- functors -------------------------------------------------------------------


def functor_to_doc(F):
    return {
        "format_version": FORMAT_VERSION,
        "type": "functor",
        "source": category_to_doc(F.source),
        "target": category_to_doc(F.target),
        "object_map": dict(sorted(F.ob_map.items())),
        "morphism_map": dict(sorted(F.mor_map.items())),
    }


def functor_from_doc(doc):
    _expect(doc, "functor")
    source = category_from_doc(_require(doc, "source", dict))
    target = category_from_doc(_require(doc, "target", dict))
    ob_map = _require(doc, "object_map", dict)
    mor_map = _require(doc, "morphism_map", dict)
    try:
        return Functor(source, target, ob_map, mor_map)
    except core.FunctorError as exc:
        raise ValidationFailure([str(exc)]) from exc


# -- profunctors ----------------------------------------------------------------


def profunctor_to_doc(P):
    elements = {}
    for (a, b), xs in sorted(P.elements.items()):
        elements.setdefault(a, {})[b] = sorted(xs)
    left_action = {}
    for (alpha, b), t in sorted(P.lact.items()):
        left_action.setdefault(alpha, {})[b] = dict(sorted(t.items()))
    right_action = {}
    for (a, beta), t in sorted(P.ract.items()):
        right_action.setdefault(a, {})[beta] = dict(sorted(t.items()))
    return {
        "format_version": FORMAT_VERSION,
        "type": "profunctor",
        "source": category_to_doc(P.source),
        "target": category_to_doc(P.target),
        "elements": elements,
        "left_action": left_action,
        "right_action": right_action,
    }


def profunctor_from_doc(doc):
    _expect(doc, "profunctor")
    source = category_from_doc(_require(doc, "source", dict))
    target = category_from_doc(_require(doc, "target", dict))
    raw_elements = _require(doc, "elements", dict)
    elements = {}
    for a in source.objects:
        for b in target.objects:
            xs = raw_elements.get(a, {}).get(b, [])
            if not isinstance(xs, list):
                raise DocumentError(f"element set at ({a},{b}) must be a list")
            elements[(a, b)] = tuple(sorted(xs))
    raw_left = _require(doc, "left_action", dict)
    lact = {}
    for alpha in source.morphisms:
        for b in target.objects:
            t = raw_left.get(alpha, {}).get(b, {})
            lact[(alpha, b)] = dict(t)
    raw_right = _require(doc, "right_action", dict)
    ract = {}
    for a in source.objects:
        for beta in target.morphisms:
            t = raw_right.get(a, {}).get(beta, {})
            ract[(a, beta)] = dict(t)
    try:
        return Profunctor(source, target, elements, lact, ract).validate()
    except core.PreconditionError as exc:
        raise ValidationFailure([str(exc)]) from exc


# -- correspondences -------------------------------------------------------------


def correspondence_to_doc(c):
    return {
        "format_version": FORMAT_VERSION,
        "type": "correspondence",
        "total": category_to_doc(c.total),
        "fiber_s_objects": sorted(c.fiber_s.objects),
    }


def correspondence_from_doc(doc):
    _expect(doc, "correspondence")
    total = category_from_doc(_require(doc, "total", dict))
    s_objects = _require(doc, "fiber_s_objects", list)
    unknown = [o for o in s_objects if o not in total.identity]
    if unknown:
        raise DocumentError(f"unknown fiber objects: {unknown}")
    try:
        return corrs.correspondence_from_total(total, s_objects)
    except core.PreconditionError as exc:
        raise ValidationFailure([str(exc)]) from exc


# -- set-valued diagrams -----------------------------------------------------------


def set_valued_to_doc(F):
    return {
        "format_version": FORMAT_VERSION,
        "type": "set_valued_functor",
        "base": category_to_doc(F.base),
        "values": {x: sorted(v) for x, v in sorted(F.values.items())},
        "transports": {m: dict(sorted(t.items()))
                       for m, t in sorted(F.transports.items())},
    }


def set_valued_from_doc(doc):
    _expect(doc, "set_valued_functor")
    base = category_from_doc(_require(doc, "base", dict))
    values = {x: tuple(v) for x, v in _require(doc, "values", dict).items()}
    transports = {m: dict(t)
                  for m, t in _require(doc, "transports", dict).items()}
    try:
        return SetValuedFunctor(base, values, transports).validate()
    except core.PreconditionError as exc:
        raise ValidationFailure([str(exc)]) from exc


_PARSERS = {
    "category": category_from_doc,
    "functor": functor_from_doc,
    "profunctor": profunctor_from_doc,
    "correspondence": correspondence_from_doc,
    "set_valued_functor": set_valued_from_doc,
}


def parse_any(text):
    doc = loads(text)
    if not isinstance(doc, dict) or "type" not in doc:
        raise DocumentError("document must be an object with a 'type' field")
    kind = doc["type"]
    if kind not in _PARSERS:
        raise DocumentError(f"unknown document type {kind!r}")
    return kind, _PARSERS[kind](doc)
