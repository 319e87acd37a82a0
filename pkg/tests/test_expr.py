import math
import random

import pytest

from hpmdiag.errors import GroupSyntaxError
from hpmdiag.markers import UNDEFINED
from hpmdiag.perfgroup.expr import (
    BinOp,
    Neg,
    Number,
    Slot,
    Time,
    evaluate,
    format_expression,
    parse_expression,
    referenced_slots,
    uses_time,
)

SLOTS = ["PMC0", "PMC1", "PMC2", "PMC3", "FIXC0", "FIXC1", "MBOX0"]
PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


# Oracle: formulas are generated as nested tuples and rendered to text with
# the textbook precedence rules; the tuple tree is evaluated directly.
def gen(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.55:
            return ("slot", rng.choice(SLOTS))
        if r < 0.65:
            return ("time",)
        mant = rng.choice(["2", "0.5", "64", "1.0E-06", "3.25", "1e3", ".75", "1.5e+2"])
        return ("num", mant)
    if rng.random() < 0.1:
        return ("neg", gen(rng, depth - 1))
    return (rng.choice("+-*/"), gen(rng, depth - 1), gen(rng, depth - 1))


def oracle_prec(t):
    if t[0] in PREC:
        return PREC[t[0]]
    return 3 if t[0] == "neg" else 4


def render(t):
    kind = t[0]
    if kind == "slot":
        return t[1]
    if kind == "time":
        return "time"
    if kind == "num":
        return t[1]
    if kind == "neg":
        inner = render(t[1])
        return "-(" + inner + ")" if oracle_prec(t[1]) < 3 else "-" + inner
    left, right = render(t[1]), render(t[2])
    if oracle_prec(t[1]) < PREC[kind]:
        left = "(" + left + ")"
    if oracle_prec(t[2]) <= PREC[kind]:
        right = "(" + right + ")"
    sep = rng_space(kind)
    return left + sep + kind + sep + right


def rng_space(kind):
    return " " if kind in "+-" else ""


def walk(t, env, time):
    """Returns None for a division by zero anywhere."""
    kind = t[0]
    if kind == "slot":
        return env[t[1]]
    if kind == "time":
        return time
    if kind == "num":
        return float(t[1])
    if kind == "neg":
        v = walk(t[1], env, time)
        return None if v is None else -v
    a, b = walk(t[1], env, time), walk(t[2], env, time)
    if a is None or b is None:
        return None
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if b == 0:
        return None
    return a / b


def test_random_formulas_match_oracle():
    rng = random.Random(20240611)
    checked = 0
    for _ in range(1000):
        tree = gen(rng, 5)
        text = render(tree)
        env = {s: rng.uniform(1e-3, 1e12) for s in SLOTS}
        time = rng.uniform(1e-3, 100.0)
        want = walk(tree, env, time)
        got = evaluate(parse_expression(text), env, time)
        if want is None or not math.isfinite(want):
            assert got is UNDEFINED, text
            continue
        assert got is not UNDEFINED, text
        assert math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-300), text
        checked += 1
    assert checked > 900


def test_random_formulas_round_trip():
    rng = random.Random(7)
    for _ in range(500):
        node = parse_expression(render(gen(rng, 5)))
        assert parse_expression(format_expression(node)) == node


def test_precedence_and_associativity():
    assert parse_expression("1-2-3") == BinOp("-", BinOp("-", Number(1), Number(2)), Number(3))
    assert parse_expression("8/4/2") == BinOp("/", BinOp("/", Number(8), Number(4)), Number(2))
    assert parse_expression("1+2*3") == BinOp("+", Number(1), BinOp("*", Number(2), Number(3)))
    assert evaluate(parse_expression("2-3-4"), {}) == -5
    assert evaluate(parse_expression("2*(3+4)"), {}) == 14
    assert evaluate(parse_expression("--2"), {}) == 2


def test_mflops_formula_shape():
    node = parse_expression("1.0E-06*(PMC0*2.0+PMC1)/time")
    assert node == BinOp("/", BinOp("*", Number(1e-6),
                                    BinOp("+", BinOp("*", Slot("PMC0"), Number(2.0)), Slot("PMC1"))), Time())
    assert referenced_slots(node) == {"PMC0", "PMC1"}
    assert uses_time(node)
    assert evaluate(node, {"PMC0": 0, "PMC1": 0}, 3.0) == 0


def test_classic_cpi():
    cycles = 0.440861 * 1.25420e12
    v = evaluate(parse_expression("FIXC1/FIXC0"), {"FIXC1": cycles, "FIXC0": 1.25420e12})
    assert v == pytest.approx(0.440861, rel=1e-6)


def test_division_by_zero_is_undefined():
    assert evaluate(parse_expression("A/B"), {"A": 1, "B": 0}) is UNDEFINED
    assert evaluate(parse_expression("A/B+1"), {"A": 0, "B": 0}) is UNDEFINED
    assert evaluate(parse_expression("-(A/B)"), {"A": 1, "B": 0}) is UNDEFINED


def test_time_must_be_positive():
    with pytest.raises(ValueError):
        evaluate(parse_expression("PMC0/time"), {"PMC0": 1}, 0.0)
    with pytest.raises(ValueError):
        evaluate(parse_expression("PMC0/time"), {"PMC0": 1}, None)


def test_unbound_slot():
    with pytest.raises(KeyError):
        evaluate(parse_expression("PMC0+PMC1"), {"PMC0": 1})


@pytest.mark.parametrize("text,col", [("PMC0+", 6), ("(PMC0", 6), ("PMC0 $ 2", 6), ("2 3", 3), ("*2", 1)])
def test_syntax_errors_carry_position(text, col):
    with pytest.raises(GroupSyntaxError) as info:
        parse_expression(text, line=4)
    assert info.value.line == 4
    assert info.value.column == col
    assert info.value.expected


def test_format_minimal_parens():
    assert format_expression(parse_expression("(a+b)*c")) == "(a+b)*c"
    assert format_expression(parse_expression("a-(b-c)")) == "a-(b-c)"
    assert format_expression(parse_expression("(a-b)-c")) == "a-b-c"
    assert format_expression(parse_expression("-(a+b)")) == "-(a+b)"
    assert format_expression(Neg(Slot("x"))) == "-x"
