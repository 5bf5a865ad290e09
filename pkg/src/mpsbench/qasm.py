"""OpenQASM 2.0 subset: circuit types, parser, serializer, sanitizer, inverter.

The benchmark suite uses a deliberately minimal gate set: three-parameter
``u`` gates, ``cx``, ``barrier`` and ``measure`` over a single quantum and a
single classical register.  Angle expressions may combine numeric literals,
``pi``, the four arithmetic operators, unary minus and parentheses.  Anything
outside this subset is rejected rather than expanded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "U",
    "CX",
    "BARRIER",
    "MEASURE",
    "TWO_TURNS",
    "Gate",
    "Circuit",
    "QasmError",
    "u",
    "cx",
    "barrier",
    "measure",
    "parse_qasm",
    "serialize_qasm",
    "sanitize",
    "invert",
    "strip_measures",
    "normalize_angle",
    "circuit_depth",
]

U = "u"
CX = "cx"
BARRIER = "barrier"
MEASURE = "measure"

# Angle normalization interval is [0, 4*pi): u-gate matrix entries are
# 4*pi-periodic in theta (cos/sin of theta/2) and 2*pi-periodic in phi/lambda,
# so reduction modulo 4*pi never changes the unitary.
TWO_TURNS = 4.0 * math.pi


class QasmError(Exception):
    """Parse or validation failure, with source position when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    ``kind`` is one of :data:`U`, :data:`CX`, :data:`BARRIER`, :data:`MEASURE`.
    ``params`` holds (theta, phi, lam) for ``u`` gates only.  A barrier carries
    no qubit indices and fences the full register.
    """

    kind: str
    qubits: tuple[int, ...] = ()
    params: tuple[float, float, float] | None = None
    cbit: int | None = None


def u(theta: float, phi: float, lam: float, qubit: int) -> Gate:
    return Gate(U, (qubit,), (float(theta), float(phi), float(lam)))


def cx(control: int, target: int) -> Gate:
    return Gate(CX, (control, target))


def barrier() -> Gate:
    return Gate(BARRIER)


def measure(qubit: int, cbit: int) -> Gate:
    return Gate(MEASURE, (qubit,), cbit=cbit)


@dataclass
class Circuit:
    """Ordered gate sequence over ``n_qubits`` qubits and ``n_clbits`` classical bits."""

    n_qubits: int
    n_clbits: int = 0
    gates: list[Gate] = field(default_factory=list)
    name: str = ""
    seed: int | None = None

    def validate(self) -> None:
        """Raise QasmError on any violated structural invariant."""
        if self.n_qubits < 1:
            raise QasmError("circuit must have at least one qubit")
        if self.n_clbits < 0:
            raise QasmError("negative classical register size")
        for g in self.gates:
            if g.kind == U:
                if len(g.qubits) != 1 or g.params is None or len(g.params) != 3:
                    raise QasmError("u gate requires one qubit and three angles")
                if not all(math.isfinite(p) for p in g.params):
                    raise QasmError("non-finite u-gate angle")
            elif g.kind == CX:
                if len(g.qubits) != 2 or g.qubits[0] == g.qubits[1]:
                    raise QasmError("cx gate requires two distinct qubits")
                if g.params is not None:
                    raise QasmError("cx gate takes no parameters")
            elif g.kind == BARRIER:
                if g.qubits:
                    raise QasmError("barrier is a full-width fence and carries no indices")
            elif g.kind == MEASURE:
                if len(g.qubits) != 1 or g.cbit is None:
                    raise QasmError("measure requires one qubit and one classical bit")
                if not 0 <= g.cbit < self.n_clbits:
                    raise QasmError(f"classical bit {g.cbit} out of range")
            else:
                raise QasmError(f"unknown gate kind {g.kind!r}")
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise QasmError(f"qubit index {q} out of range for {self.n_qubits} qubits")


def normalize_angle(a: float) -> float:
    """Reduce an angle into [0, 4*pi)."""
    r = math.fmod(a, TWO_TURNS)
    if r < 0.0:
        r += TWO_TURNS
    if r >= TWO_TURNS:  # fmod rounding can land exactly on the upper edge
        r = 0.0
    return r


def _negligible(a: float, eps: float) -> bool:
    return a <= eps or TWO_TURNS - a <= eps


def sanitize(circuit: Circuit, angle_eps: float = 1e-10) -> Circuit:
    """Normalize all u-gate angles into [0, 4*pi) and drop negligible rotations.

    A u gate is dropped when each of its three normalized angles lies within
    ``angle_eps`` of either end of the interval, i.e. the gate is the identity
    to that tolerance.  cx, barrier and measure gates pass through untouched.
    """
    if angle_eps < 0:
        raise ValueError("angle_eps must be nonnegative")
    gates: list[Gate] = []
    for g in circuit.gates:
        if g.kind != U:
            gates.append(g)
            continue
        theta, phi, lam = (normalize_angle(p) for p in g.params)
        if _negligible(theta, angle_eps) and _negligible(phi, angle_eps) and _negligible(lam, angle_eps):
            continue
        gates.append(Gate(U, g.qubits, (theta, phi, lam)))
    return replace(circuit, gates=gates)


def invert(circuit: Circuit) -> Circuit:
    """Exact inverse circuit: reversed order, each u(t,p,l) becomes u(-t,-l,-p).

    Barriers keep their (reversed) positions; cx is self-inverse.  Circuits
    containing measurements cannot be inverted and are rejected.
    """
    gates: list[Gate] = []
    for g in reversed(circuit.gates):
        if g.kind == MEASURE:
            raise QasmError("cannot invert a circuit containing measurements")
        if g.kind == U:
            theta, phi, lam = g.params
            inv = (normalize_angle(-theta), normalize_angle(-lam), normalize_angle(-phi))
            gates.append(Gate(U, g.qubits, inv))
        else:
            gates.append(g)
    return replace(circuit, gates=gates)


def strip_measures(circuit: Circuit) -> Circuit:
    return replace(circuit, gates=[g for g in circuit.gates if g.kind != MEASURE])


def circuit_depth(circuit: Circuit) -> int:
    """Longest gate chain over any qubit; barriers and measures do not count."""
    level = [0] * circuit.n_qubits
    for g in circuit.gates:
        if g.kind not in (U, CX):
            continue
        d = 1 + max(level[q] for q in g.qubits)
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


# --- parsing ---------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # name | number | string | sym | arrow | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, bol = 0, 1, 0  # bol = offset of start of the current line
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            bol = i
            continue
        if c in " \t\r":
            i += 1
            continue
        col = i - bol + 1
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0 or "\n" in text[i:j]:
                raise QasmError("unterminated string literal", line, col)
            tokens.append(_Token("string", text[i + 1 : j], line, col))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(_Token("number", text[i:j], line, col))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], line, col))
            i = j
            continue
        if text.startswith("->", i):
            tokens.append(_Token("arrow", "->", line, col))
            i += 2
            continue
        if c in "()[];,+-*/":
            tokens.append(_Token("sym", c, line, col))
            i += 1
            continue
        raise QasmError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("eof", "", line, n - bol + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            raise QasmError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    # expression grammar: expr := term (('+'|'-') term)*
    #                     term := factor (('*'|'/') factor)*
    #                     factor := ('-'|'+')* atom
    #                     atom := number | 'pi' | '(' expr ')'
    def expr(self) -> float:
        v = self.term()
        while self.peek().kind == "sym" and self.peek().text in "+-":
            op = self.next().text
            rhs = self.term()
            v = v + rhs if op == "+" else v - rhs
        return v

    def term(self) -> float:
        v = self.factor()
        while self.peek().kind == "sym" and self.peek().text in "*/":
            op = self.next().text
            rhs = self.factor()
            if op == "*":
                v = v * rhs
            else:
                if rhs == 0.0:
                    t = self.peek()
                    raise QasmError("division by zero in angle expression", t.line, t.col)
                v = v / rhs
        return v

    def factor(self) -> float:
        sign = 1.0
        while self.peek().kind == "sym" and self.peek().text in "+-":
            if self.next().text == "-":
                sign = -sign
        return sign * self.atom()

    def atom(self) -> float:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return float(t.text)
        if t.kind == "name" and t.text == "pi":
            self.next()
            return math.pi
        if t.kind == "sym" and t.text == "(":
            self.next()
            v = self.expr()
            self.expect("sym", ")")
            return v
        raise QasmError(f"expected angle expression, found {t.text!r}", t.line, t.col)


def parse_qasm(text: str, name: str = "") -> Circuit:
    """Parse an OpenQASM 2.0 program restricted to the u/cx benchmark subset.

    The program must declare ``OPENQASM 2.0;`` first and may declare at most
    one quantum and one classical register.  ``include`` lines are tolerated
    and ignored.  Gate order in the result equals source statement order.
    """
    p = _Parser(_tokenize(text))
    t = p.expect("name", "OPENQASM")
    ver = p.expect("number")
    if ver.text != "2.0":
        raise QasmError(f"unsupported OpenQASM version {ver.text}", ver.line, ver.col)
    p.expect("sym", ";")

    qreg: tuple[str, int] | None = None
    creg: tuple[str, int] | None = None
    gates: list[Gate] = []

    def parse_ref(reg: tuple[str, int] | None, what: str) -> tuple[str, int | None]:
        nt = p.expect("name")
        if reg is None or nt.text != reg[0]:
            raise QasmError(f"reference to undeclared {what} register {nt.text!r}", nt.line, nt.col)
        if p.peek().kind == "sym" and p.peek().text == "[":
            p.next()
            it = p.expect("number")
            if not it.text.isdigit():
                raise QasmError("register index must be an integer", it.line, it.col)
            idx = int(it.text)
            p.expect("sym", "]")
            if idx >= reg[1]:
                raise QasmError(
                    f"index {idx} out of range for {what} register of size {reg[1]}", it.line, it.col
                )
            return nt.text, idx
        return nt.text, None  # bare register reference

    def qubit_ref() -> int:
        t0 = p.peek()
        _, idx = parse_ref(qreg, "quantum")
        if idx is None:
            raise QasmError("expected an indexed qubit reference", t0.line, t0.col)
        return idx

    while p.peek().kind != "eof":
        t = p.peek()
        if t.kind != "name":
            raise QasmError(f"expected a statement, found {t.text!r}", t.line, t.col)
        kw = t.text
        if kw == "include":
            p.next()
            p.expect("string")
            p.expect("sym", ";")
        elif kw in ("qreg", "creg"):
            p.next()
            nm = p.expect("name")
            p.expect("sym", "[")
            sz = p.expect("number")
            if not sz.text.isdigit() or int(sz.text) < 1:
                raise QasmError("register size must be a positive integer", sz.line, sz.col)
            p.expect("sym", "]")
            p.expect("sym", ";")
            if kw == "qreg":
                if qreg is not None:
                    raise QasmError("quantum register redeclared", t.line, t.col)
                qreg = (nm.text, int(sz.text))
            else:
                if creg is not None:
                    raise QasmError("classical register redeclared", t.line, t.col)
                creg = (nm.text, int(sz.text))
        elif kw in ("u", "U", "u3"):
            p.next()
            p.expect("sym", "(")
            theta = p.expr()
            p.expect("sym", ",")
            phi = p.expr()
            p.expect("sym", ",")
            lam = p.expr()
            p.expect("sym", ")")
            q = qubit_ref()
            p.expect("sym", ";")
            gates.append(u(theta, phi, lam, q))
        elif kw in ("cx", "CX"):
            p.next()
            a = qubit_ref()
            p.expect("sym", ",")
            b = qubit_ref()
            p.expect("sym", ";")
            if a == b:
                raise QasmError("cx control and target must differ", t.line, t.col)
            gates.append(cx(a, b))
        elif kw == "barrier":
            p.next()
            if not (p.peek().kind == "sym" and p.peek().text == ";"):
                parse_ref(qreg, "quantum")
                while p.peek().kind == "sym" and p.peek().text == ",":
                    p.next()
                    parse_ref(qreg, "quantum")
            p.expect("sym", ";")
            gates.append(barrier())
        elif kw == "measure":
            p.next()
            _, qi = parse_ref(qreg, "quantum")
            p.expect("arrow")
            if creg is None:
                at = p.peek()
                raise QasmError("measure requires a declared classical register", at.line, at.col)
            _, ci = parse_ref(creg, "classical")
            p.expect("sym", ";")
            if qi is None and ci is None:
                if qreg[1] != creg[1]:
                    raise QasmError("register-wide measure requires equal register sizes", t.line, t.col)
                gates.extend(measure(k, k) for k in range(qreg[1]))
            elif qi is not None and ci is not None:
                gates.append(measure(qi, ci))
            else:
                raise QasmError("measure operands must be both indexed or both registers", t.line, t.col)
        else:
            raise QasmError(f"unsupported statement {kw!r}", t.line, t.col)

    if qreg is None:
        raise QasmError("missing qreg declaration")
    circuit = Circuit(n_qubits=qreg[1], n_clbits=creg[1] if creg else 0, gates=gates, name=name)
    circuit.validate()
    return circuit


def serialize_qasm(circuit: Circuit) -> str:
    """Emit OpenQASM 2.0 text that parses back to a gate-for-gate equal circuit.

    Angles are printed with 17 significant digits so the float round trip is
    exact.
    """
    circuit.validate()
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    if circuit.n_clbits > 0:
        lines.append(f"creg c[{circuit.n_clbits}];")
    for g in circuit.gates:
        if g.kind == U:
            theta, phi, lam = (f"{p:.17g}" for p in g.params)
            lines.append(f"u({theta},{phi},{lam}) q[{g.qubits[0]}];")
        elif g.kind == CX:
            lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];")
        elif g.kind == BARRIER:
            lines.append("barrier q;")
        else:
            lines.append(f"measure q[{g.qubits[0]}] -> c[{g.cbit}];")
    return "\n".join(lines) + "\n"
