"""Basic cell vocabulary and its logic functions.

Two evaluators are provided. :func:`eval_word` works on bit-parallel Python
ints (one simulation lane per bit) and backs every two-valued simulator.
:func:`eval3` works on the three values 0, 1 and :data:`X` and backs the
test generator.
"""

from enum import Enum

X = 2  # unknown value in three-valued logic


class CellKind(str, Enum):
    INV = "INV"
    BUF = "BUF"
    AND2 = "AND2"
    AND3 = "AND3"
    OR2 = "OR2"
    OR3 = "OR3"
    NAND2 = "NAND2"
    NAND3 = "NAND3"
    NOR2 = "NOR2"
    NOR3 = "NOR3"
    XOR2 = "XOR2"
    XNOR2 = "XNOR2"
    MUX2 = "MUX2"  # pins: S, A, B; output A when S=0, B when S=1

    @property
    def arity(self):
        return ARITY[self]

    @property
    def controlling(self):
        """Input value that forces the output on its own, or None."""
        return CONTROLLING.get(self)

    @property
    def inverting(self):
        return self in INVERTING


ARITY = {
    CellKind.INV: 1, CellKind.BUF: 1,
    CellKind.AND2: 2, CellKind.OR2: 2, CellKind.NAND2: 2, CellKind.NOR2: 2,
    CellKind.XOR2: 2, CellKind.XNOR2: 2,
    CellKind.AND3: 3, CellKind.OR3: 3, CellKind.NAND3: 3, CellKind.NOR3: 3,
    CellKind.MUX2: 3,
}

CONTROLLING = {
    CellKind.AND2: 0, CellKind.AND3: 0, CellKind.NAND2: 0, CellKind.NAND3: 0,
    CellKind.OR2: 1, CellKind.OR3: 1, CellKind.NOR2: 1, CellKind.NOR3: 1,
}

INVERTING = frozenset({CellKind.INV, CellKind.NAND2, CellKind.NAND3,
                       CellKind.NOR2, CellKind.NOR3, CellKind.XNOR2})

_AND = frozenset({CellKind.AND2, CellKind.AND3, CellKind.NAND2, CellKind.NAND3})
_OR = frozenset({CellKind.OR2, CellKind.OR3, CellKind.NOR2, CellKind.NOR3})
_XOR = frozenset({CellKind.XOR2, CellKind.XNOR2})


def eval_word(kind, ins, mask=1):
    """Evaluate ``kind`` on bit-parallel input words."""
    if kind is CellKind.BUF:
        return ins[0]
    if kind is CellKind.INV:
        return ~ins[0] & mask
    if kind is CellKind.MUX2:
        s, a, b = ins
        return (a & ~s | b & s) & mask
    if kind in _AND:
        r = ins[0]
        for v in ins[1:]:
            r &= v
    elif kind in _OR:
        r = ins[0]
        for v in ins[1:]:
            r |= v
    else:
        r = ins[0] ^ ins[1]
    if kind in INVERTING:
        r = ~r & mask
    return r


def eval3(kind, ins):
    """Evaluate ``kind`` in three-valued logic (0, 1, X)."""
    if kind is CellKind.BUF:
        return ins[0]
    if kind is CellKind.INV:
        return X if ins[0] == X else 1 - ins[0]
    if kind is CellKind.MUX2:
        s, a, b = ins
        if s == 0:
            return a
        if s == 1:
            return b
        return a if a == b else X
    if kind in _XOR:
        if X in ins:
            return X
        r = ins[0] ^ ins[1]
    else:
        c = CONTROLLING[kind]
        if c in ins:
            r = c
        elif X in ins:
            return X
        else:
            r = 1 - c
    return 1 - r if kind in INVERTING else r
