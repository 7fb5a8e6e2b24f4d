"""Residual wiring expressions such as ``"(X+O1)+O2"``.

Signals: ``X`` is the network input, ``Ok`` the output of quanvolution layer
``k`` and ``sk`` the stage sum formed at the boundary after layer ``k``:
``sk = Ok + addends``. Layer ``k + 1`` consumes ``sk`` (``s0 = X``) and the
network output is ``sn``. In an expression every parenthesised group (and the
whole expression) defines one stage: the stage of its highest ``O`` index.
Stages not mentioned are plain (``sk = Ok``); ``"none"`` means all are.

Grammar::

    wiring := 'none' | expr
    expr   := term ('+' term)*
    term   := 'X' | 'O' digits | '(' expr ')'
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import (
    ChannelMismatch,
    DimensionNotDivisible,
    ForwardReference,
    UnknownSignal,
    UnsupportedLayerCount,
    WiringSyntaxError,
)


@dataclass(frozen=True)
class WiringSpec:
    n_layers: int
    # stages[k - 1]: addends summed with O_k; entries are "X", "Oj" or "sj" (j < k)
    stages: tuple

    def __post_init__(self):
        if len(self.stages) != self.n_layers:
            raise ValueError("one addend set per layer is required")
        for k, addends in enumerate(self.stages, start=1):
            for a in addends:
                if a != "X" and _index(a) >= k:
                    raise ForwardReference(f"{a} cannot feed stage {k}")

    @classmethod
    def plain(cls, n_layers: int) -> "WiringSpec":
        return cls(n_layers, tuple(frozenset() for _ in range(n_layers)))

    def addends(self, k: int) -> frozenset:
        return self.stages[k - 1]

    def is_plain(self, k: int) -> bool:
        return not self.stages[k - 1]

    def __str__(self):
        return render_wiring(self)


def _index(signal: str) -> int:
    return int(signal[1:])


def _normalise(n_layers: int, stages) -> WiringSpec:
    # a reference to a plain stage s_j is the same signal as O_j
    stages = [set(a) for a in stages]
    for k in range(n_layers):
        fixed = set()
        for a in stages[k]:
            if a.startswith("s") and not stages[_index(a) - 1]:
                a = f"O{_index(a)}"
            fixed.add(a)
        stages[k] = fixed
    return WiringSpec(n_layers, tuple(frozenset(a) for a in stages))


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text: str) -> list:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+()":
            tokens.append((ch, ch, i))
            i += 1
        elif ch.isalnum():
            j = i
            while j < len(text) and text[j].isalnum():
                j += 1
            word = text[i:j]
            if word == "X":
                tokens.append(("X", word, i))
            elif word[0] == "O" and word[1:].isdigit():
                if int(word[1:]) < 1:
                    raise UnknownSignal(f"{word!r} at position {i}: layers are numbered from 1")
                tokens.append(("O", int(word[1:]), i))
            else:
                raise UnknownSignal(f"unknown signal {word!r} at position {i}")
            i = j
        else:
            raise WiringSyntaxError(f"unexpected character {ch!r}", i)
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def where(self) -> int:
        tok = self.peek()
        return tok[2] if tok else len(self.text)

    def expr(self):
        start = self.where()
        terms = [self.term()]
        while self.peek() and self.peek()[0] == "+":
            self.pos += 1
            terms.append(self.term())
        return ("group", terms, start)

    def term(self):
        tok = self.peek()
        if tok is None:
            raise WiringSyntaxError("expected a term", len(self.text))
        self.pos += 1
        if tok[0] == "X":
            return ("X", None, tok[2])
        if tok[0] == "O":
            return ("O", tok[1], tok[2])
        if tok[0] == "(":
            inner = self.expr()
            close = self.peek()
            if close is None or close[0] != ")":
                raise WiringSyntaxError("expected ')'", self.where())
            self.pos += 1
            return inner
        raise WiringSyntaxError(f"unexpected {tok[1]!r}", tok[2])


def parse_wiring(text: str, n_layers: int = 2) -> WiringSpec:
    if n_layers < 1:
        raise UnsupportedLayerCount("at least one layer is required")
    if not text.strip():
        raise WiringSyntaxError("empty wiring", 0)
    if text.strip().lower() == "none":
        return WiringSpec.plain(n_layers)
    parser = _Parser(text)
    tree = parser.expr()
    if parser.peek() is not None:
        tok = parser.peek()
        raise WiringSyntaxError(f"unexpected {tok[1]!r}", tok[2])
    stages = [set() for _ in range(n_layers)]
    defined = set()

    def resolve(node) -> str:
        _, terms, start = node
        if len(terms) == 1 and terms[0][0] == "group":
            return resolve(terms[0])
        direct, nested, has_x = [], [], False
        for t in terms:
            if t[0] == "X":
                if has_x:
                    raise WiringSyntaxError("X appears twice in one sum", t[2])
                has_x = True
            elif t[0] == "O":
                if t[1] > n_layers:
                    raise ForwardReference(
                        f"O{t[1]} at position {t[2]} refers to a layer beyond the {n_layers}-layer network"
                    )
                if t[1] in direct:
                    raise WiringSyntaxError(f"O{t[1]} appears twice in one sum", t[2])
                direct.append(t[1])
            else:
                nested.append((resolve(t), t[2]))
        if not direct:
            raise WiringSyntaxError("every sum needs at least one layer output O<k>", start)
        k = max(direct)
        for sig, pos in nested:
            if _index(sig) >= k:
                raise ForwardReference(
                    f"group at position {pos} reaches layer {_index(sig)} but is added at stage {k}"
                )
        if len(terms) == 1:
            return f"O{k}"
        if k in defined:
            raise WiringSyntaxError(f"stage {k} is defined twice", start)
        defined.add(k)
        addends = {f"O{j}" for j in direct if j != k} | {s for s, _ in nested}
        if has_x:
            addends.add("X")
        if len(addends) != len(terms) - 1:
            raise WiringSyntaxError("repeated addend in one sum", start)
        stages[k - 1] = addends
        return f"s{k}"

    resolve(tree)
    return _normalise(n_layers, stages)


# ---------------------------------------------------------------------------
# rendering


def _sort_key(signal: str):
    if signal == "X":
        return (0, 0)
    return (_index(signal), 0 if signal.startswith("O") else 1)


def _render_stage(spec: WiringSpec, k: int, used: set) -> str:
    used.add(k)
    parts = []
    for a in sorted(spec.addends(k), key=_sort_key):
        if a.startswith("s"):
            parts.append("(" + _render_stage(spec, _index(a), used) + ")")
        else:
            parts.append(a)
    parts.append(f"O{k}")
    return "+".join(parts)


def render_wiring(spec: WiringSpec) -> str:
    """Inverse of :func:`parse_wiring` for specs the grammar can express."""
    busy = [k for k in range(1, spec.n_layers + 1) if not spec.is_plain(k)]
    if not busy:
        return "none"
    used = set()
    text = _render_stage(spec, busy[-1], used)
    if set(busy) - used:
        raise ValueError(f"stages {sorted(set(busy) - used)} are not reachable in one expression")
    return text


def is_expressible(spec: WiringSpec) -> bool:
    try:
        render_wiring(spec)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# analysis


def _sum_edges(spec: WiringSpec) -> dict:
    """Barrier-free edges of the wiring DAG: signal -> stage sums it feeds."""
    edges = {}
    for k in range(1, spec.n_layers + 1):
        target = f"s{k}"
        edges.setdefault(f"O{k}", []).append(target)
        for a in sorted(spec.addends(k), key=_sort_key):
            edges.setdefault(a, []).append(target)
    return edges


@dataclass(frozen=True)
class AccessibilityReport:
    wiring: str
    present: tuple
    paths: dict  # layer index -> barrier-free signal path to the output

    def as_dict(self) -> dict:
        return {
            "wiring": self.wiring,
            "layers": {
                f"layer{k}": {
                    "gradient": "present" if p else "absent",
                    "path": list(self.paths.get(k, ())),
                }
                for k, p in enumerate(self.present, start=1)
            },
        }


def analyze_accessibility(spec: WiringSpec) -> AccessibilityReport:
    """A layer gets a gradient iff O_k reaches the output through sums alone."""
    edges = _sum_edges(spec)
    out = f"s{spec.n_layers}"
    present, paths = [], {}
    for k in range(1, spec.n_layers + 1):
        start = f"O{k}"
        prev = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for nxt in edges.get(node, ()):
                if nxt not in prev:
                    prev[nxt] = node
                    queue.append(nxt)
        if out in prev:
            path, node = [], out
            while node is not None:
                path.append(node)
                node = prev[node]
            paths[k] = tuple(reversed(path))
            present.append(True)
        else:
            present.append(False)
    return AccessibilityReport(render_wiring(spec) if is_expressible(spec) else repr(spec), tuple(present), paths)


def enumerate_wirings(n_layers: int) -> list:
    """Candidate wirings: each stage adds at most one of X, O_{k-1} or a non-plain s_{k-1}.

    Only specs the grammar can express are kept, deduplicated, in generation order.
    """
    if n_layers not in (2, 3):
        raise UnsupportedLayerCount(f"enumeration supports 2 or 3 layers, got {n_layers}")
    results, seen = [], set()

    def extend(stages):
        k = len(stages) + 1
        if k > n_layers:
            spec = _normalise(n_layers, stages)
            if spec not in seen and is_expressible(spec):
                seen.add(spec)
                results.append(spec)
            return
        options = [set(), {"X"}]
        if k > 1:
            options.append({f"O{k - 1}"})
            if stages[k - 2]:
                options.append({f"s{k - 1}"})
        for opt in options:
            extend(stages + [opt])

    extend([])
    return results


# ---------------------------------------------------------------------------
# shape algebra


def signal_shapes(spec: WiringSpec, input_shape=(28, 28, 1), channel_mode: str = "single") -> dict:
    """Shapes ``(h, w, c)`` of every signal, following the layers' rules."""
    from .layers import padded_shape

    out_channels = 1 if channel_mode == "single" else 4
    shapes = {"X": tuple(input_shape), "s0": tuple(input_shape)}
    for k in range(1, spec.n_layers + 1):
        h, w, c = shapes[f"s{k - 1}"]
        if c != 1:
            raise ChannelMismatch(f"layer {k} expects a single-channel input, got {c}")
        if h % 2 or w % 2:
            raise DimensionNotDivisible(f"layer {k} input {h}x{w} is not divisible by stride 2")
        shapes[f"O{k}"] = (h // 2, w // 2, out_channels)
        acc = shapes[f"O{k}"]
        for a in sorted(spec.addends(k), key=_sort_key):
            acc = padded_shape(acc, shapes[a])
        shapes[f"s{k}"] = acc
    shapes["output"] = shapes[f"s{spec.n_layers}"]
    return shapes


def output_shape(spec: WiringSpec, input_shape=(28, 28, 1), channel_mode: str = "single") -> tuple:
    return signal_shapes(spec, input_shape, channel_mode)["output"]


PAPER_TWO_LAYER = ("none", "X+O1", "O1+O2", "X+O2", "(X+O1)+O2")
PAPER_THREE_LAYER = ("(O1+O2)+O3", "((X+O1)+O2)+O3")
