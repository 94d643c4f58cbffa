"""Field layouts over input vectors and the validity predicates built on them.

A field ``bits: [hi, lo]`` covers vector bits ``lo..hi`` inclusive, bit ``lo``
being the field's least significant bit.
"""

import json
from dataclasses import dataclass

from .errors import FieldMapMismatch, SchemaError


def _parse_value(v):
    if isinstance(v, int):
        return v
    return int(v, 0)


@dataclass(frozen=True)
class Field:
    name: str
    hi: int
    lo: int
    allowed: frozenset = None

    def __post_init__(self):
        if self.hi < self.lo or self.lo < 0:
            raise SchemaError(f"field {self.name!r}: bad bit range [{self.hi}, {self.lo}]")

    @property
    def width(self):
        return self.hi - self.lo + 1

    def value(self, bits):
        return sum(bits[self.lo + k] << k for k in range(self.width))

    def to_dict(self):
        d = {"name": self.name, "bits": [self.hi, self.lo]}
        if self.allowed is not None:
            d["allowed"] = [bin(v) for v in sorted(self.allowed)]
        return d


@dataclass(frozen=True)
class ValidityPredicate:
    """Per-vector constraint: each constrained field must take an allowed value."""
    fields: tuple = ()

    def __call__(self, bits):
        for f in self.fields:
            if f.allowed is None:
                continue
            if f.hi >= len(bits) or f.value(bits) not in f.allowed:
                return False
        return True

    def complete(self, cube):
        """Fill don't-care (None) bits of constrained fields with the smallest
        allowed value compatible with the care bits. Returns None if no
        allowed value fits."""
        out = list(cube)
        for f in self.fields:
            if f.allowed is None:
                continue
            for v in sorted(f.allowed):
                ok = True
                for k in range(f.width):
                    b = out[f.lo + k]
                    if b is not None and b != (v >> k) & 1:
                        ok = False
                        break
                if ok:
                    for k in range(f.width):
                        out[f.lo + k] = (v >> k) & 1
                    break
            else:
                return None
        return tuple(out)

    def sample(self, rng, width):
        """Random vector satisfying the predicate."""
        bits = [int(b) for b in rng.integers(0, 2, size=width)]
        for f in self.fields:
            if f.allowed is not None:
                choices = sorted(f.allowed)
                v = choices[int(rng.integers(0, len(choices)))]
                for k in range(f.width):
                    bits[f.lo + k] = (v >> k) & 1
        return tuple(bits)

    def field(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def check_partition(self, width=None):
        """Raise FieldMapMismatch unless the fields tile bits 0..width-1 exactly."""
        used = {}
        for f in self.fields:
            for b in range(f.lo, f.hi + 1):
                if b in used:
                    raise FieldMapMismatch(f"bit {b} in both {used[b]!r} and {f.name!r}")
                used[b] = f.name
        top = max(used) + 1 if used else 0
        if width is None:
            width = top
        missing = sorted(set(range(width)) - set(used))
        if missing:
            raise FieldMapMismatch(f"bits {missing} not covered by any field")
        if top > width:
            raise FieldMapMismatch(f"fields reach bit {top - 1} but vectors have {width} bits")
        return width

    def to_dict(self):
        return {"fields": [f.to_dict() for f in self.fields]}

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        fields = []
        for fd in d.get("fields", []):
            try:
                hi, lo = fd["bits"]
                allowed = fd.get("allowed")
                fields.append(Field(fd["name"], int(hi), int(lo),
                                    None if allowed is None else frozenset(_parse_value(v) for v in allowed)))
            except (KeyError, TypeError, ValueError) as e:
                raise SchemaError(f"bad field spec {fd!r}: {e}") from None
        return cls(tuple(fields))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


ACCEPT_ALL = ValidityPredicate()
