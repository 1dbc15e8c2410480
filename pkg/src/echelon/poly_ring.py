"""Exact multivariate polynomials over Q or F_p.

Monomials are exponent tuples aligned with the ring's declared variable
order.  Laurent monomials (negative exponents) appear only as lattice
twists; polynomials themselves always have non-negative exponents.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

from .errors import DivisionByZero, NotDivisible, ParseError, VarTableMismatch

Mono = Tuple[int, ...]


class Field:
    """Q (``p is None``) or the prime field F_p."""

    __slots__ = ("p",)

    def __init__(self, p: Optional[int] = None):
        if p is not None and (p < 2 or any(p % q == 0 for q in range(2, int(p**0.5) + 1))):
            raise ValueError(f"{p} is not prime")
        self.p = p

    @classmethod
    def parse(cls, text: str) -> "Field":
        s = text.strip()
        if s in ("Q", "QQ", "rationals"):
            return cls()
        for prefix in ("Fp:", "GF:", "prime "):
            if s.startswith(prefix):
                try:
                    return cls(int(s[len(prefix):]))
                except ValueError as exc:
                    raise ParseError("field", str(exc)) from None
        raise ParseError("field", f"unknown field {text!r}")

    def __eq__(self, other):
        return isinstance(other, Field) and other.p == self.p

    def __hash__(self):
        return hash(("Field", self.p))

    def __str__(self):
        return "Q" if self.p is None else f"Fp:{self.p}"

    __repr__ = __str__

    def __call__(self, c):
        if self.p is None:
            if isinstance(c, str):
                c = Fraction(c)
            if isinstance(c, Fraction):
                return c.numerator if c.denominator == 1 else c
            return int(c)
        if isinstance(c, str):
            c = Fraction(c)
        if isinstance(c, Fraction):
            if c.denominator % self.p == 0:
                raise DivisionByZero(f"{c} has no image in F_{self.p}")
            return c.numerator * pow(c.denominator, -1, self.p) % self.p
        return int(c) % self.p

    def reduce(self, c):
        if self.p is None:
            if type(c) is Fraction and c.denominator == 1:
                return c.numerator
            return c
        return c % self.p

    def div(self, a, b):
        if b == 0:
            raise DivisionByZero("division by zero in field")
        if self.p is None:
            q = Fraction(a) / b
            return q.numerator if q.denominator == 1 else q
        return a * pow(b, -1, self.p) % self.p

    def signed(self, c):
        """Symmetric representative, for printing."""
        if self.p is None:
            return c
        return c - self.p if c > self.p // 2 else c


QQ = Field()


class PolyRing:
    """Declared variable table: divisor pairs (x_k, y_k) followed by free variables."""

    def __init__(self, pairs: Sequence[Tuple[str, str]] = (("x", "y"),),
                 free: Sequence[str] = (), field: Field = QQ):
        self.pairs = tuple((str(a), str(b)) for a, b in pairs)
        self.free = tuple(str(v) for v in free)
        names = [v for pr in self.pairs for v in pr] + list(self.free)
        if len(set(names)) != len(names):
            raise VarTableMismatch(f"duplicate variable names in {names}")
        for v in names:
            if not v or not v[0].isalpha() or not v.isalnum():
                raise VarTableMismatch(f"bad variable name {v!r}")
        self.vars = tuple(names)
        self.nvars = len(names)
        self.field = field
        self.index = {v: k for k, v in enumerate(names)}
        self._key = (self.pairs, self.free, field)
        self.unit_mono: Mono = (0,) * self.nvars
        # longest names first so that juxtaposed tokens split greedily
        self._names_by_len = sorted(names, key=len, reverse=True)

    def __eq__(self, other):
        return isinstance(other, PolyRing) and other._key == self._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"PolyRing(pairs={self.pairs}, free={self.free}, field={self.field})"

    def with_field(self, field: Field) -> "PolyRing":
        return PolyRing(self.pairs, self.free, field)

    @property
    def pair_vars(self) -> Tuple[str, ...]:
        return tuple(v for pr in self.pairs for v in pr)

    # -- constructors ----------------------------------------------------

    @property
    def zero(self) -> "Poly":
        return Poly(self, {})

    @property
    def one(self) -> "Poly":
        return Poly(self, {self.unit_mono: 1})

    def const(self, c) -> "Poly":
        c = self.field(c)
        return Poly(self, {self.unit_mono: c} if c != 0 else {})

    def var(self, name: str) -> "Poly":
        return Poly(self, {self.mono({name: 1}): 1})

    def mono(self, exps: Dict[str, int]) -> Mono:
        e = [0] * self.nvars
        for name, k in exps.items():
            if name not in self.index:
                raise VarTableMismatch(f"unknown variable {name!r}")
            e[self.index[name]] += k
        return tuple(e)

    def monomial_poly(self, m: Mono, c=1) -> "Poly":
        return Poly(self, {tuple(m): self.field(c)})

    def __call__(self, text) -> "Poly":
        if isinstance(text, Poly):
            return text
        if isinstance(text, (int, Fraction)):
            return self.const(text)
        return parse_poly(self, text)

    def parse_monomial(self, text: str) -> Mono:
        return parse_monomial(self, text)

    def format_monomial(self, m: Mono) -> str:
        return format_monomial(self, m)


class Poly:
    """Immutable polynomial; ``terms`` maps exponent tuples to nonzero coefficients."""

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: PolyRing, terms: Dict[Mono, object]):
        self.ring = ring
        self.terms = terms
        self._hash = None

    # -- predicates ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def constant_term(self):
        return self.terms.get(self.ring.unit_mono, 0)

    def is_local_unit(self) -> bool:
        """Nonzero constant term: invertible in the localization at the origin."""
        return self.constant_term() != 0

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    # -- structure -------------------------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), reverse=True)

    def leading(self):
        m = max(self.terms)
        return m, self.terms[m]

    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def content_monomial(self) -> Mono:
        """Monomial gcd of the support; the unit monomial for zero."""
        if not self.terms:
            return self.ring.unit_mono
        it = iter(self.terms)
        acc = list(next(it))
        for m in it:
            for k, e in enumerate(m):
                if e < acc[k]:
                    acc[k] = e
        return tuple(acc)

    def variables(self) -> set:
        out = set()
        for m in self.terms:
            for k, e in enumerate(m):
                if e:
                    out.add(self.ring.vars[k])
        return out

    # -- arithmetic ------------------------------------------------------

    def _check(self, other: "Poly"):
        if other.ring != self.ring:
            raise VarTableMismatch(f"{self.ring!r} vs {other.ring!r}")

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return self.ring.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        red = self.ring.field.reduce
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = red(out.get(m, 0) + c)
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Poly(self.ring, out)

    __radd__ = __add__

    def __neg__(self):
        red = self.ring.field.reduce
        return Poly(self.ring, {m: red(-c) for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if not self.terms or not other.terms:
            return self.ring.zero
        red = self.ring.field.reduce
        out: Dict[Mono, object] = {}
        get = out.get
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple([a + b for a, b in zip(m1, m2)])
                out[m] = get(m, 0) + c1 * c2
        return Poly(self.ring, {m: v for m, v in ((m, red(c)) for m, c in out.items()) if v})

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result, base = self.ring.one, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def scale(self, c) -> "Poly":
        c = self.ring.field(c)
        if c == 0:
            return self.ring.zero
        red = self.ring.field.reduce
        return Poly(self.ring, {m: red(v * c) for m, v in self.terms.items()})

    def mul_monomial(self, mono: Mono, c=1) -> "Poly":
        if not any(mono) and c == 1:
            return self
        c = self.ring.field(c)
        red = self.ring.field.reduce
        return Poly(self.ring, {tuple([a + b for a, b in zip(m, mono)]): red(v * c)
                                for m, v in self.terms.items()})

    def divides_by_monomial(self, mono: Mono) -> bool:
        return all(all(a >= b for a, b in zip(m, mono)) for m in self.terms)

    def div_monomial(self, mono: Mono) -> "Poly":
        """Exact division by a monomial; raises NotDivisible otherwise."""
        if not any(mono):
            return self
        out = {}
        for m, v in self.terms.items():
            q = tuple([a - b for a, b in zip(m, mono)])
            if min(q) < 0:
                raise NotDivisible(f"{self} not divisible by {self.ring.format_monomial(mono)}")
            out[q] = v
        return Poly(self.ring, out)

    def reduce_mod_monomial(self, mono: Mono) -> "Poly":
        """Canonical residue modulo the principal monomial ideal (mono)."""
        return Poly(self.ring, {m: v for m, v in self.terms.items()
                                if not all(a >= b for a, b in zip(m, mono))})

    def divmod(self, g: "Poly"):
        """Single-divisor division with lex leading terms; returns (q, r)."""
        self._check(g)
        if g.is_zero():
            raise DivisionByZero("division by the zero polynomial")
        field = self.ring.field
        red = field.reduce
        lm, lc = g.leading()
        gterms = list(g.terms.items())
        rem: Dict[Mono, object] = dict(self.terms)
        quot: Dict[Mono, object] = {}
        out_rem: Dict[Mono, object] = {}
        while rem:
            m = max(rem)
            c = rem[m]
            shift = tuple([a - b for a, b in zip(m, lm)])
            if min(shift) < 0:
                out_rem[m] = rem.pop(m)
                continue
            q = field.div(c, lc)
            quot[shift] = q
            for gm, gc in gterms:
                mm = tuple([a + b for a, b in zip(gm, shift)])
                v = red(rem.get(mm, 0) - q * gc)
                if v:
                    rem[mm] = v
                else:
                    rem.pop(mm, None)
        return Poly(self.ring, quot), Poly(self.ring, out_rem)

    def divide_exact(self, g: "Poly") -> "Poly":
        """q with self = q*g, else NotDivisible."""
        self._check(g)
        if g.is_zero():
            raise DivisionByZero("division by the zero polynomial")
        if g.is_monomial():
            (m, c), = g.terms.items()
            if not self.divides_by_monomial(m):
                raise NotDivisible(f"{self} not divisible by {g}")
            return self.div_monomial(m).scale(self.ring.field.div(1, c))
        q, r = self.divmod(g)
        if r:
            raise NotDivisible(f"{self} not divisible by {g}")
        return q

    def substitute(self, target: PolyRing, images: Sequence[Tuple[object, int]]) -> "Poly":
        """Apply x_k -> c_k * target.var(idx_k) termwise (monomial maps only)."""
        field = target.field
        red = field.reduce
        out: Dict[Mono, object] = {}
        for m, v in self.terms.items():
            e = [0] * target.nvars
            c = field(v)
            for k, a in enumerate(m):
                if a:
                    s, idx = images[k]
                    e[idx] += a
                    c = red(c * field(s) ** a)
            t = tuple(e)
            out[t] = red(out.get(t, 0) + c)
        return Poly(target, {m: c for m, c in out.items() if c})

    # -- comparison & printing ------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ring.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring, frozenset(self.terms.items())))
        return self._hash

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"Poly({format_poly(self)!r})"


# --- text I/O ----------------------------------------------------------------


def _fmt_coeff(c) -> str:
    return str(c)


def format_monomial(ring: PolyRing, m: Mono) -> str:
    parts = []
    for name, e in zip(ring.vars, m):
        if e == 1:
            parts.append(name)
        elif e:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def format_poly(p: Poly) -> str:
    if not p.terms:
        return "0"
    field = p.ring.field
    out = []
    for m, c in p.sorted_terms():
        c = field.signed(c)
        neg = c < 0
        a = -c if neg else c
        mono = format_monomial(p.ring, m)
        if mono == "1":
            body = _fmt_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(a)}*{mono}"
        if not out:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


class _Parser:
    def __init__(self, ring: PolyRing, text: str):
        self.ring = ring
        self.s = text
        self.i = 0

    def error(self, msg):
        raise ParseError(f"char {self.i}", f"{msg} in {self.s!r}")

    def skip(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self):
        self.skip()
        return self.s[self.i] if self.i < len(self.s) else ""

    def integer(self) -> int:
        self.skip()
        j = self.i
        while self.i < len(self.s) and self.s[self.i].isdigit():
            self.i += 1
        if j == self.i:
            self.error("expected integer")
        return int(self.s[j:self.i])

    def variable(self) -> str:
        self.skip()
        for name in self.ring._names_by_len:
            if self.s.startswith(name, self.i):
                self.i += len(name)
                return name
        self.error("unknown variable")

    def expr(self) -> Poly:
        ring = self.ring
        sign = 1
        ch = self.peek()
        if ch and ch in "+-":
            sign = -1 if self.s[self.i] == "-" else 1
            self.i += 1
        acc = self.term().scale(sign)
        while self.peek() in ("+", "-"):
            op = self.s[self.i]
            self.i += 1
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term(self) -> Poly:
        acc = self.factor()
        while True:
            ch = self.peek()
            if ch == "*":
                self.i += 1
                acc = acc * self.factor()
            elif ch and (ch.isalnum() or ch == "("):
                acc = acc * self.factor()
            else:
                return acc

    def factor(self) -> Poly:
        base = self.atom()
        if self.peek() == "^":
            self.i += 1
            base = base ** self.integer()
        return base

    def atom(self) -> Poly:
        ch = self.peek()
        if ch == "(":
            self.i += 1
            inner = self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.i += 1
            return inner
        if ch.isdigit():
            num = self.integer()
            # rational literal a/b, only when a digit follows the slash
            save = self.i
            if self.peek() == "/":
                self.i += 1
                if self.peek().isdigit():
                    den = self.integer()
                    if den == 0:
                        self.error("zero denominator")
                    return self.ring.const(Fraction(num, den))
                self.i = save
            return self.ring.const(num)
        if ch.isalpha():
            return self.ring.var(self.variable())
        if not ch:
            self.error("unexpected end of input")
        self.error(f"unexpected character {ch!r}")

    def done(self):
        if self.peek():
            self.error(f"trailing input {self.s[self.i:]!r}")


def parse_poly(ring: PolyRing, text: str) -> Poly:
    p = _Parser(ring, text)
    if not p.peek():
        p.error("empty polynomial")
    out = p.expr()
    p.done()
    return out


def parse_monomial(ring: PolyRing, text: str) -> Mono:
    """A bare monomial such as ``x*y^2`` or ``1``; coefficients are rejected."""
    p = _Parser(ring, text)
    if p.peek() == "1":
        p.i += 1
        p.done()
        return ring.unit_mono
    e = [0] * ring.nvars
    while True:
        name = p.variable()
        k = 1
        if p.peek() == "^":
            p.i += 1
            k = p.integer()
        e[ring.index[name]] += k
        ch = p.peek()
        if ch == "*":
            p.i += 1
        elif not ch:
            break
        elif not ch.isalpha():
            p.error("expected variable")
    return tuple(e)


# --- monomial helpers --------------------------------------------------------


def mono_mul(a: Mono, b: Mono) -> Mono:
    return tuple([x + y for x, y in zip(a, b)])


def mono_div(a: Mono, b: Mono) -> Mono:
    return tuple([x - y for x, y in zip(a, b)])


def mono_divides(a: Mono, b: Mono) -> bool:
    """a | b."""
    return all(x <= y for x, y in zip(a, b))


def mono_gcd(a: Mono, b: Mono) -> Mono:
    return tuple([min(x, y) for x, y in zip(a, b)])


def mono_lcm(a: Mono, b: Mono) -> Mono:
    return tuple([max(x, y) for x, y in zip(a, b)])


def mono_prod(ms: Iterable[Mono], n: int) -> Mono:
    acc = (0,) * n
    for m in ms:
        acc = mono_mul(acc, m)
    return acc


def mono_vars(ring: PolyRing, m: Mono) -> set:
    return {ring.vars[k] for k, e in enumerate(m) if e}


def poly_arith(a: Poly, b: Poly, op: str) -> Poly:
    if a.ring != b.ring:
        raise VarTableMismatch(f"{a.ring!r} vs {b.ring!r}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def divide_exact(f: Poly, g: Poly) -> Poly:
    return f.divide_exact(g)


def reduce_mod_monomial(f: Poly, mono: Mono) -> Poly:
    return f.reduce_mod_monomial(mono)


def is_local_unit(f: Poly) -> bool:
    return f.is_local_unit()
