"""Grade index sets and grading signatures.

A grade is a tagged index: a non-negative integer, a reduced rational, a
pair of non-negative integers (the monoid N^2) or a parity (Z/2).  Grades
of different variants never compare equal and cannot be added together.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

INTEGER = "integer"
RATIONAL = "rational"
PAIR = "pair"
PARITY = "parity"
VARIANTS = (INTEGER, RATIONAL, PAIR, PARITY)


class GradeError(ValueError):
    """Raised for malformed grades or grade arithmetic across variants."""


class VariantMismatch(GradeError):
    pass


@dataclass(frozen=True)
class Grade:
    kind: str
    value: Union[int, Fraction, tuple]

    def __post_init__(self):
        k, v = self.kind, self.value
        if k == INTEGER:
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise GradeError(f"integer grade must be a non-negative int, got {v!r}")
        elif k == RATIONAL:
            if not isinstance(v, Fraction):
                raise GradeError(f"rational grade must be a Fraction, got {v!r}")
        elif k == PAIR:
            if (not isinstance(v, tuple) or len(v) != 2
                    or not all(isinstance(c, int) and not isinstance(c, bool) and c >= 0 for c in v)):
                raise GradeError(f"pair grade must be two non-negative ints, got {v!r}")
        elif k == PARITY:
            if v not in (0, 1) or isinstance(v, bool):
                raise GradeError(f"parity grade must be 0 or 1, got {v!r}")
        else:
            raise GradeError(f"unknown grade variant {k!r}")

    # constructors
    @classmethod
    def integer(cls, n: int) -> "Grade":
        return cls(INTEGER, int(n))

    @classmethod
    def rational(cls, p, q=1) -> "Grade":
        # Fraction normalises to lowest terms with a positive denominator
        return cls(RATIONAL, Fraction(p, q))

    @classmethod
    def pair(cls, a: int, b: int) -> "Grade":
        return cls(PAIR, (int(a), int(b)))

    @classmethod
    def parity(cls, p: int) -> "Grade":
        return cls(PARITY, int(p) % 2)

    @classmethod
    def zero(cls, kind: str) -> "Grade":
        return {
            INTEGER: lambda: cls.integer(0),
            RATIONAL: lambda: cls.rational(0),
            PAIR: lambda: cls.pair(0, 0),
            PARITY: lambda: cls.parity(0),
        }[kind]()

    def _key(self, other: "Grade"):
        if not isinstance(other, Grade):
            return NotImplemented
        if other.kind != self.kind:
            raise VariantMismatch(f"cannot order {self.kind} against {other.kind}")
        return self.value, other.value

    def __lt__(self, other):
        a, b = self._key(other)
        return a < b

    def __le__(self, other):
        a, b = self._key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._key(other)
        return a >= b

    def __add__(self, other):
        if not isinstance(other, Grade):
            return NotImplemented
        return grade_add(self, other)

    def __str__(self):
        return render_grade(self)

    def __repr__(self):
        return f"Grade({render_grade(self)!r})"

    @property
    def exponent(self) -> float:
        """Real exponent of the scalar action; only integer and rational grades have one."""
        if self.kind == INTEGER:
            return float(self.value)
        if self.kind == RATIONAL:
            return float(self.value)
        raise GradeError(f"{self.kind} grade has no real exponent")


def as_grade(x) -> Grade:
    """Coerce ints, Fractions, 2-tuples and canonical strings to a Grade."""
    if isinstance(x, Grade):
        return x
    if isinstance(x, bool):
        raise GradeError("bool is not a grade")
    if isinstance(x, int):
        return Grade.integer(x)
    if isinstance(x, Fraction):
        return Grade.rational(x)
    if isinstance(x, tuple):
        return Grade.pair(*x)
    if isinstance(x, str):
        return parse_grade(x)
    raise GradeError(f"cannot interpret {x!r} as a grade")


def grade_add(a: Grade, b: Grade) -> Grade:
    if a.kind != b.kind:
        raise VariantMismatch(f"cannot add {a.kind} grade to {b.kind} grade")
    if a.kind == INTEGER:
        return Grade.integer(a.value + b.value)
    if a.kind == RATIONAL:
        return Grade.rational(a.value + b.value)
    if a.kind == PAIR:
        return Grade.pair(a.value[0] + b.value[0], a.value[1] + b.value[1])
    return Grade.parity(a.value + b.value)


def render_grade(g: Grade) -> str:
    if g.kind == INTEGER:
        return str(g.value)
    if g.kind == RATIONAL:
        v = g.value
        return f"{v.numerator}/{v.denominator}"
    if g.kind == PAIR:
        return f"({g.value[0]},{g.value[1]})"
    return "odd" if g.value else "even"


def parse_grade(s: str, kind: str | None = None) -> Grade:
    """Inverse of :func:`render_grade`.

    Bare integers are ambiguous between the integer and rational variants;
    pass ``kind`` to force one.
    """
    s = s.strip()
    if s in ("even", "odd"):
        g = Grade.parity(1 if s == "odd" else 0)
    elif s.startswith("("):
        a, b = s.strip("()").split(",")
        g = Grade.pair(int(a), int(b))
    elif "/" in s:
        p, q = s.split("/")
        g = Grade.rational(int(p), int(q))
    else:
        g = Grade.rational(int(s)) if kind == RATIONAL else Grade.integer(int(s))
    if kind is not None and g.kind != kind:
        raise GradeError(f"grade {s!r} is not of variant {kind}")
    return g


# -- signatures -------------------------------------------------------------

@dataclass(frozen=True)
class SignatureReport:
    ok: bool
    violation: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate_signature(entries) -> SignatureReport:
    """Check a signature (or raw ``(grade, dim)`` pairs) and name the first broken invariant."""
    if isinstance(entries, GradingSignature):
        entries = entries.entries
    entries = list(entries)
    if not entries:
        return SignatureReport(False, "empty", "signature has no grades")
    grades = []
    for g, d in entries:
        try:
            g = as_grade(g)
        except GradeError as exc:
            return SignatureReport(False, "bad-grade", str(exc))
        if isinstance(d, bool) or not isinstance(d, int):
            return SignatureReport(False, "bad-dimension", f"dim {d!r} at grade {g} is not an int")
        if d < 1:
            return SignatureReport(False, "zero-dimension", f"grade {g} has dim {d}")
        grades.append(g)
    kinds = {g.kind for g in grades}
    if len(kinds) > 1:
        return SignatureReport(False, "mixed-variant", f"variants {sorted(kinds)} in one signature")
    seen = set()
    for g in grades:
        if g in seen:
            return SignatureReport(False, "duplicate-grade", f"grade {g} appears twice")
        seen.add(g)
    return SignatureReport(True)


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class GradingSignature:
    """Ordered grades with per-grade dimensions, stored in ascending grade order."""

    entries: tuple

    def __init__(self, entries: Iterable):
        raw = [(as_grade(g), d) for g, d in entries]
        report = validate_signature(raw)
        if not report.ok:
            raise SignatureError(f"{report.violation}: {report.detail}")
        object.__setattr__(self, "entries", tuple(sorted(raw, key=lambda e: e[0].value)))

    @classmethod
    def of(cls, *grades, dims: Sequence[int] | int = 1, kind: str = INTEGER) -> "GradingSignature":
        """``GradingSignature.of(2, 4, 6, 10)`` builds a signature of 1-dim blocks."""
        if isinstance(dims, int):
            dims = [dims] * len(grades)
        mk = {INTEGER: Grade.integer, RATIONAL: Grade.rational, PARITY: Grade.parity}.get(kind)
        gs = [g if isinstance(g, Grade) else (mk(g) if mk and not isinstance(g, tuple) else as_grade(g))
              for g in grades]
        return cls(zip(gs, dims))

    @classmethod
    def parity(cls, even_dim: int, odd_dim: int) -> "GradingSignature":
        return cls([(Grade.parity(0), even_dim), (Grade.parity(1), odd_dim)])

    @property
    def grades(self) -> tuple:
        return tuple(g for g, _ in self.entries)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.entries)

    @property
    def variant(self) -> str:
        return self.entries[0][0].kind

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def dim(self, grade) -> int:
        grade = as_grade(grade)
        for g, d in self.entries:
            if g == grade:
                return d
        raise KeyError(grade)

    def __contains__(self, grade) -> bool:
        try:
            grade = as_grade(grade)
        except GradeError:
            return False
        return any(g == grade for g, _ in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def offsets(self) -> dict:
        """Start index of each grade block in the flattened coordinate vector."""
        out, pos = {}, 0
        for g, d in self.entries:
            out[g] = pos
            pos += d
        return out

    def __str__(self):
        return "V[" + ", ".join(f"{g}:{d}" for g, d in self.entries) + "]"

    # serialization
    def to_json(self) -> dict:
        return {"grades": [[_grade_to_json(g), d] for g, d in self.entries], "variant": self.variant}

    @classmethod
    def from_json(cls, obj: dict) -> "GradingSignature":
        kind = obj.get("variant", INTEGER)
        return cls([(grade_from_json(g, kind), int(d)) for g, d in obj["grades"]])


def _grade_to_json(g: Grade):
    if g.kind == RATIONAL:
        return [g.value.numerator, g.value.denominator]
    if g.kind == PAIR:
        return list(g.value)
    return g.value


def grade_to_json(g: Grade):
    return {"variant": g.kind, "value": _grade_to_json(g)}


def grade_from_json(obj, kind: str | None = None) -> Grade:
    if isinstance(obj, dict):
        return grade_from_json(obj["value"], obj["variant"])
    if kind is None:
        kind = INTEGER
    if kind == INTEGER:
        return Grade.integer(int(obj))
    if kind == RATIONAL:
        if isinstance(obj, (list, tuple)):
            return Grade.rational(int(obj[0]), int(obj[1]))
        return Grade.rational(int(obj))
    if kind == PAIR:
        return Grade.pair(int(obj[0]), int(obj[1]))
    if kind == PARITY:
        if obj in ("even", "odd"):
            return Grade.parity(1 if obj == "odd" else 0)
        return Grade.parity(int(obj))
    raise GradeError(f"unknown grade variant {kind!r}")
