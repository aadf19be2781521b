"""Model file schema: exact-rational JSON, canonical serialization.

{
  "scales": [{"name": "lambda1", "exponent": "1/1"}, ...],
  "states": ["a", "b", ...],
  "edges":  [{"from": "a", "to": "b", "coeff": "p/q",
              "order": "p/q" | "exponents": [k_1, ..., k_n]}, ...]
}

Coefficients and orders are rational strings; floats are rejected.  The
canonical dump sorts edges by state order, always spells rationals as
"p/q" and always emits an explicit "order", so parse -> serialize is
byte-stable.
"""

from __future__ import annotations

import hashlib
import json

from . import errors
from .chain import Chain, build_chain
from .scale import ScaleBasis, ScaledQuantity, parse_rational, rational_str

__all__ = ["load_model", "loads_model", "dump_model", "dumps_model",
           "model_fingerprint"]


def loads_model(text: str) -> Chain:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.ModelError(f"model file is not valid JSON: {exc}") from exc
    return _from_object(obj)


def load_model(path) -> Chain:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())


def _from_object(obj) -> Chain:
    if not isinstance(obj, dict):
        raise errors.ModelError("model root must be an object")
    scales = obj.get("scales", [])
    basis = None
    if scales:
        try:
            basis = ScaleBasis([s["name"] for s in scales],
                               [_rational(s["exponent"], "scale exponent")
                                for s in scales])
        except (KeyError, TypeError) as exc:
            raise errors.ModelError(f"malformed scales section: {exc}") from exc
        except ValueError as exc:
            raise errors.ModelError(str(exc)) from exc

    states = obj.get("states")
    if not states or not all(isinstance(s, str) for s in states):
        raise errors.ModelError("states must be a nonempty list of strings")

    edges = []
    for k, e in enumerate(obj.get("edges", [])):
        try:
            x, y = e["from"], e["to"]
        except (KeyError, TypeError) as exc:
            raise errors.ModelError(f"edge #{k} lacks from/to: {exc}") from exc
        coeff = _rational(e.get("coeff"), f"coeff of edge {x!r}->{y!r}")
        if coeff <= 0:
            raise errors.ModelError(
                f"coeff of edge {x!r}->{y!r} must be positive, got {coeff}")
        if "order" in e and "exponents" in e:
            raise errors.ModelError(
                f"edge {x!r}->{y!r} gives both order and exponents")
        if "order" in e:
            order = _rational(e["order"], f"order of edge {x!r}->{y!r}")
        elif "exponents" in e:
            if basis is None:
                raise errors.EmptyScaleBasis(
                    f"edge {x!r}->{y!r} uses exponents but no scales are defined")
            try:
                order = basis.order_of(e["exponents"])
            except ValueError as exc:
                raise errors.ModelError(
                    f"edge {x!r}->{y!r}: {exc}") from exc
        else:
            raise errors.ModelError(f"edge {x!r}->{y!r} lacks order/exponents")
        edges.append((x, y, ScaledQuantity(coeff, order)))

    return build_chain(states, edges, basis)


def _rational(value, what):
    try:
        return parse_rational(value)
    except ValueError as exc:
        raise errors.ModelError(f"{what}: {exc}") from exc


def dump_model(chain: Chain) -> dict:
    scales = []
    if chain.basis is not None:
        scales = [{"name": n, "exponent": rational_str(e)}
                  for n, e in zip(chain.basis.names, chain.basis.exponents)]
    edges = []
    for x in chain.states:
        for y in sorted(chain.out_edges(x), key=chain.index.get):
            r = chain.rates[x][y]
            edges.append({"from": x, "to": y,
                          "coeff": rational_str(r.coeff),
                          "order": rational_str(r.order)})
    return {"scales": scales, "states": list(chain.states), "edges": edges}


def dumps_model(chain: Chain) -> str:
    return json.dumps(dump_model(chain), indent=1) + "\n"


def model_fingerprint(chain: Chain) -> str:
    return hashlib.sha256(dumps_model(chain).encode()).hexdigest()[:16]
