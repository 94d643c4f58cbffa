"""Render input vectors as a generic stimulus program.

The format is line based::

    const a0 = 0xA
    loop:
      op 0x3, a0
    end

Each distinct value of a non-opcode field becomes one named constant
(field name plus a running index, in order of first use). The loop body
holds one line per vector: the opcode field's value, then the constants
for the remaining fields in field-map order. Hex digits are uppercase and
unpadded. The opcode field is the one named ``op``, otherwise the first.
"""

from .logicsim import parse_vector


def _vectors_of(pattern):
    if hasattr(pattern, "stimulus") and getattr(pattern, "stimulus"):
        return list(pattern.stimulus)
    if hasattr(pattern, "vectors"):
        return list(pattern.vectors)
    return list(pattern)


def emit_stimulus_program(pattern, field_map):
    """Program text for a TestPattern, StimulusTrace or plain vector list."""
    vecs = _vectors_of(pattern)
    bits = [parse_vector(v) for v in vecs]
    width = field_map.check_partition(len(bits[0]) if bits else None)
    bits = [parse_vector(v, width) for v in bits]
    if any(b is None for v in bits for b in v):
        raise ValueError("vectors must be fully specified")
    fields = list(field_map.fields)
    if not fields:
        return "loop:\nend\n"
    op = next((f for f in fields if f.name == "op"), fields[0])
    operands = [f for f in fields if f is not op]
    consts = {}
    preamble, body = [], []
    for v in bits:
        parts = [f"0x{op.value(v):X}"]
        for f in operands:
            key = (f.name, f.value(v))
            if key not in consts:
                name = f"{f.name}{sum(1 for k in consts if k[0] == f.name)}"
                consts[key] = name
                preamble.append(f"const {name} = 0x{key[1]:X}")
            parts.append(consts[key])
        body.append("  op " + ", ".join(parts))
    return "\n".join(preamble + ["loop:"] + body + ["end"]) + "\n"
