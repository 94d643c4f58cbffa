"""Bundled demo circuits, random netlist generators and synthetic workloads."""

import numpy as np

from .cells import CellKind
from .constraints import Field, ValidityPredicate
from .netlist import FlipFlop, GateInstance, Netlist


class Builder:
    def __init__(self, name):
        self.name = name
        self.inputs = []
        self.outputs = []
        self.gates = []
        self.ffs = []
        self._count = {}

    def input(self, net):
        self.inputs.append(net)
        return net

    def gate(self, kind, *ins, out=None, gid=None):
        kind = CellKind(kind)
        if gid is None:
            k = self._count.get(kind, 0)
            self._count[kind] = k + 1
            gid = f"{kind.value.lower()}_{k}"
        out = out or f"n_{gid}"
        self.gates.append(GateInstance(gid, kind, tuple(ins), out))
        return out

    def ff(self, fid, d, q=None, init=0):
        q = q or f"{fid}.q"
        self.ffs.append(FlipFlop(fid, d, q, init))
        return q

    def build(self):
        return Netlist(self.name, tuple(self.inputs), tuple(self.outputs), tuple(self.gates), tuple(self.ffs))


def inverter():
    b = Builder("inv")
    b.input("a")
    b.gate("INV", "a", out="y", gid="g0")
    b.outputs.append("y")
    return b.build()


def and2():
    b = Builder("and2")
    b.input("a")
    b.input("b")
    b.gate("AND2", "a", "b", out="y", gid="g0")
    b.outputs.append("y")
    return b.build()


def chain4():
    """FF_A -> INV -> NAND2(b) -> NOR2(c) -> INV -> FF_B, with FF_A fed by input d."""
    b = Builder("chain4")
    for x in ("d", "b", "c"):
        b.input(x)
    qa = b.ff("FF_A", "d")
    n1 = b.gate("INV", qa, out="n1", gid="inv1")
    n2 = b.gate("NAND2", n1, "b", out="n2", gid="nand1")
    n3 = b.gate("NOR2", n2, "c", out="n3", gid="nor1")
    b.gate("INV", n3, out="FF_B.d", gid="inv2")
    b.outputs.append(b.ff("FF_B", "FF_B.d"))
    return b.build()


def diamond():
    b = Builder("diamond")
    b.input("a")
    n1 = b.gate("INV", "a", out="n_inv", gid="g_inv")
    n2 = b.gate("BUF", "a", out="n_buf", gid="g_buf")
    b.gate("AND2", n1, n2, out="out", gid="g_and")
    b.outputs.append("out")
    return b.build()


def c17():
    """ISCAS-85 c17."""
    b = Builder("c17")
    for x in ("1", "2", "3", "6", "7"):
        b.input(x)
    b.gate("NAND2", "1", "3", out="10", gid="g10")
    b.gate("NAND2", "3", "6", out="11", gid="g11")
    b.gate("NAND2", "2", "11", out="16", gid="g16")
    b.gate("NAND2", "11", "7", out="19", gid="g19")
    b.gate("NAND2", "10", "16", out="22", gid="g22")
    b.gate("NAND2", "16", "19", out="23", gid="g23")
    b.outputs += ["22", "23"]
    return b.build()


def xor2():
    b = Builder("xor2")
    b.input("a")
    b.input("b")
    b.gate("XOR2", "a", "b", out="y", gid="g0")
    b.outputs.append("y")
    return b.build()


def toggle_enable():
    """q' = q XOR en: q holds still only while en = 0."""
    b = Builder("toggle_enable")
    b.input("en")
    b.gate("XOR2", "q", "en", out="d", gid="g_x")
    b.ffs.append(FlipFlop("ff", "d", "q", 0))
    b.outputs.append("q")
    return b.build()


def dead_end():
    """A gate whose output feeds nothing observable."""
    b = Builder("dead_end")
    b.input("a")
    b.input("b")
    b.gate("AND2", "a", "b", out="y", gid="g_obs")
    b.gate("OR2", "a", "b", out="z", gid="g_dead")
    b.outputs.append("y")
    return b.build()


# -- multiply-add demo ----------------------------------------------------------

def _full_adder(b, x, y, cin):
    """Sum and carry of up to three bits; None stands for constant 0."""
    bits = [v for v in (x, y, cin) if v is not None]
    if len(bits) == 1:
        return bits[0], None
    if len(bits) == 2:
        u, v = bits
        return b.gate("XOR2", u, v), b.gate("AND2", u, v)
    p = b.gate("XOR2", x, y)
    s = b.gate("XOR2", p, cin)
    cout = b.gate("NAND2", b.gate("NAND2", x, y), b.gate("NAND2", p, cin))
    return s, cout


def mac_demo(width=8, registered=True):
    """``y = a*b + c`` (op=01) or ``a*b - c`` (op=10), truncated to 2*width bits.

    Inputs, in vector bit order: op[1:0], a[width-1:0], b[width-1:0],
    c[2*width-1:0]. With ``registered`` every input passes through an input
    FF and every result bit is captured by an output FF, so all timing paths
    run FF to FF.
    """
    wide = 2 * width
    b = Builder(f"mac{wide}")
    names = ["op0", "op1"] + [f"a{i}" for i in range(width)] + [f"b{i}" for i in range(width)] \
        + [f"c{i}" for i in range(wide)]
    for x in names:
        b.input(x)
    src = {x: (b.ff(f"r_{x}", x, q=f"q_{x}") if registered else x) for x in names}
    sub = b.gate("AND2", src["op1"], b.gate("INV", src["op0"], gid="op_inv"), out="sub", gid="op_sub")
    acc = [b.gate("XOR2", src[f"c{k}"], sub, out=f"cx{k}") for k in range(wide)]
    for i in range(width):
        row = [None] * wide
        for j in range(width):
            if i + j < wide:
                row[i + j] = b.gate("AND2", src[f"a{j}"], src[f"b{i}"], out=f"pp{i}_{j}")
        carry = sub if i == 0 else None
        new = list(acc)
        for k in range(i, wide):
            s, carry = _full_adder(b, acc[k], row[k], carry)
            new[k] = s
            if k == wide - 1:
                break
        acc = new
    for k in range(wide):
        if registered:
            b.outputs.append(b.ff(f"r_y{k}", acc[k], q=f"y{k}"))
        else:
            out = b.gate("BUF", acc[k], out=f"y{k}", gid=f"obuf{k}")
            b.outputs.append(out)
    return b.build()


def mac_field_map(width=8):
    wide = 2 * width
    lo_a, lo_b, lo_c = 2, 2 + width, 2 + 2 * width
    return ValidityPredicate((
        Field("op", 1, 0, frozenset({0b01, 0b10})),
        Field("a", lo_a + width - 1, lo_a),
        Field("b", lo_b + width - 1, lo_b),
        Field("c", lo_c + wide - 1, lo_c),
    ))


def mac_reference(op, a, b, c, width=8):
    mask = (1 << 2 * width) - 1
    if op == 0b10:
        return (a * b - c) & mask
    return (a * b + c) & mask


def pack_fields(fmap, values):
    """Vector bits from named field values."""
    width = fmap.check_partition()
    bits = [0] * width
    for f in fmap.fields:
        v = values.get(f.name, 0)
        for k in range(f.width):
            bits[f.lo + k] = (v >> k) & 1
    return tuple(bits)


# -- random netlists --------------------------------------------------------------

_RANDOM_KINDS = [k for k in CellKind]


def random_dag(seed, n_gates=60, n_inputs=6, n_ffs=4, layers=6, delays=(5, 40)):
    """Layered random netlist plus a random integer delay per gate.

    Pins draw mostly from the previous layer, which keeps the number of
    distinct paths small enough to enumerate by brute force.
    Returns (netlist, {gate id: delay}).
    """
    rng = np.random.default_rng(seed)
    b = Builder(f"rand{seed}")
    sources = [b.input(f"i{k}") for k in range(n_inputs)]
    qs = [f"ff{k}.q" for k in range(n_ffs)]
    sources += qs
    per_layer = max(1, n_gates // layers)
    prev = list(sources)
    made = []
    gid = 0
    for layer in range(layers):
        count = per_layer if layer < layers - 1 else n_gates - per_layer * (layers - 1)
        cur = []
        for _ in range(max(0, count)):
            kind = _RANDOM_KINDS[int(rng.integers(len(_RANDOM_KINDS)))]
            ins = []
            for _ in range(kind.arity):
                pool = prev if rng.random() < 0.7 else sources
                ins.append(pool[int(rng.integers(len(pool)))])
            cur.append(b.gate(kind, *ins, gid=f"g{gid:03d}", out=f"w{gid:03d}"))
            gid += 1
        made += cur
        prev = cur or prev
    pool = made or sources
    for k in range(n_ffs):
        b.ffs.append(FlipFlop(f"ff{k}", pool[int(rng.integers(len(pool)))], qs[k], int(rng.integers(2))))
    n_out = max(1, len(prev) // 2)
    for net in sorted(set(prev[-n_out:])):
        b.outputs.append(net)
    n = b.build()
    lo, hi = delays
    return n, {g.id: int(rng.integers(lo, hi + 1)) for g in n.gates}


def random_comb(seed, n_inputs=6, n_gates=20, n_outputs=3):
    """Random combinational netlist with every net reachable from the inputs."""
    rng = np.random.default_rng(seed)
    b = Builder(f"comb{seed}")
    nets = [b.input(f"i{k}") for k in range(n_inputs)]
    for k in range(n_gates):
        kind = _RANDOM_KINDS[int(rng.integers(len(_RANDOM_KINDS)))]
        ins = [nets[int(rng.integers(len(nets)))] for _ in range(kind.arity)]
        nets.append(b.gate(kind, *ins, gid=f"g{k:03d}", out=f"w{k:03d}"))
    gate_nets = nets[n_inputs:]
    picks = rng.choice(len(gate_nets), size=min(n_outputs, len(gate_nets)), replace=False)
    b.outputs += sorted(gate_nets[int(i)] for i in picks)
    return b.build()


# -- synthetic workloads ----------------------------------------------------------

def uniform_workload(width, cycles, rng, constraint=None):
    """Uniform random vectors; constrained fields drawn from their allowed sets."""
    constraint = constraint or ValidityPredicate()
    return [constraint.sample(rng, width) for _ in range(cycles)]


def biased_workload(width, cycles, rng, p_one=0.3, constraint=None):
    """Each bit is 1 with probability ``p_one``, then constrained fields are redrawn."""
    constraint = constraint or ValidityPredicate()
    out = []
    for _ in range(cycles):
        bits = tuple(int(x) for x in (rng.random(width) < p_one))
        fixed = constraint.sample(rng, width)
        bits = tuple(fixed[i] if any(f.allowed is not None and f.lo <= i <= f.hi for f in constraint.fields)
                     else bits[i] for i in range(width))
        out.append(bits)
    return out


def kernel_workload(cycles, rng, width=8):
    """Multiply-accumulate loop: c carries the previous result, a steps, b cycles
    through a small coefficient table."""
    fmap = mac_field_map(width)
    coeffs = [int(x) for x in rng.integers(0, 1 << width, size=8)]
    acc = 0
    out = []
    for k in range(cycles):
        a = (k * 37 + 11) % (1 << width)
        bb = coeffs[k % len(coeffs)]
        out.append(pack_fields(fmap, {"op": 0b01, "a": a, "b": bb, "c": acc}))
        acc = mac_reference(0b01, a, bb, acc, width)
    return out
