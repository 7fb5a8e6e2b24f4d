"""
Residual wirings
================

Wiring strings say which signals get summed where. ``X`` is the image, ``Ok``
the output of quanvolution layer k. Each parenthesised group is one stage:
its sum replaces ``Ok`` as the input of the next layer.
"""

from resqunn.archspec import (
    analyze_accessibility,
    enumerate_wirings,
    parse_wiring,
    signal_shapes,
)

# The two-layer configurations and the shapes every signal takes for a 28x28 image.
# Smaller maps are zero-padded at the bottom and right before a sum.
for text in ("none", "X+O1", "O1+O2", "X+O2", "(X+O1)+O2"):
    spec = parse_wiring(text)
    shapes = signal_shapes(spec, (28, 28, 1))
    layer2_in = shapes["s1"]
    print(f"{text:<10} layer 2 reads {layer2_in}, network output {shapes['output']}")

# Stages are structural: whitespace and term order do not matter.
print(parse_wiring("(O1 + X) + O2") == parse_wiring("(X+O1)+O2"))

# Errors point at the problem.
for bad in ("O3+X", "(X+O1", "Y+O1"):
    try:
        parse_wiring(bad)
    except Exception as err:
        print(f"{bad!r}: {type(err).__name__}: {err}")

# The enumerator adds at most one signal per stage. For three layers it finds
# ten distinct wirings; only two of them let every layer see a gradient.
for spec in enumerate_wirings(3):
    report = analyze_accessibility(spec)
    marks = " ".join("P" if p else "-" for p in report.present)
    print(f"{str(spec):<18} {marks}")
