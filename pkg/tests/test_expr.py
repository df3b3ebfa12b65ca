import math
import random

import numpy as np
import pytest

from srmcts import expr
from srmcts.errors import (
    DepthViolationError,
    OverfullSequenceError,
    UnboundConstantError,
)
from conftest import random_tree

X = expr.variable(0)
Y = expr.variable(1)


def tokens(*names):
    return bytes(expr.token_from_name(n) for n in names)


FIG_TREE_TOKENS = tokens("*", "+", "x0", "x1", "sin", "x0")  # (x0+x1)*sin(x0)


def fig_tree():
    return expr.Expr(expr.MUL, (
        expr.Expr(expr.ADD, (expr.leaf(0), expr.leaf(1))),
        expr.Expr(expr.SIN, (expr.leaf(0),)),
    ))


class TestCodec:
    def test_decode_example_tree(self):
        t = expr.decode_preorder(FIG_TREE_TOKENS)
        assert t == fig_tree()

    def test_decode_single_leaf(self):
        t = expr.decode_preorder(bytes([X]))
        assert t == expr.leaf(0)

    def test_decode_incomplete(self):
        assert expr.decode_preorder(bytes([expr.ADD, X])) is expr.INCOMPLETE

    def test_decode_overfull(self):
        with pytest.raises(OverfullSequenceError):
            expr.decode_preorder(bytes([X, X]))

    def test_decode_depth_violation(self):
        # sin chain of length max_depth+1 forces a node past the limit.
        seq = bytes([expr.SIN] * 3 + [X])
        assert expr.decode_preorder(seq, max_depth=3) is not expr.INCOMPLETE
        with pytest.raises(DepthViolationError):
            expr.decode_preorder(bytes([expr.SIN] * 4 + [X]), max_depth=3)

    def test_operator_at_depth_limit_rejected(self):
        # An operator sitting in a slot at the depth limit cannot be legal.
        with pytest.raises(DepthViolationError):
            expr.decode_preorder(bytes([expr.ADD, X, X]), max_depth=0)

    def test_encode_example(self):
        assert expr.encode_preorder(fig_tree()) == FIG_TREE_TOKENS

    def test_encode_single_leaf(self):
        assert expr.encode_preorder(expr.leaf(0)) == bytes([X])

    def test_roundtrip_random_trees(self):
        rng = random.Random(7)
        for _ in range(1000):
            t = random_tree(rng, max_depth=6)
            seq = expr.encode_preorder(t)
            back = expr.decode_preorder(seq, 6, constants=expr.tree_constants(t))
            assert back == t

    def test_decode_constant_count_mismatch(self):
        with pytest.raises(ValueError):
            expr.decode_preorder(bytes([expr.CONST]), constants=(1.0, 2.0))


class TestScanners:
    def test_open_slot_count(self):
        assert expr.open_slot_count(FIG_TREE_TOKENS) == 0
        assert expr.open_slot_count(bytes([expr.ADD, X])) == 1
        assert expr.open_slot_count(bytes([expr.ADD])) == 2

    def test_subtree_span(self):
        # span of the "+" node inside the example covers [+, x0, x1]
        assert expr.subtree_span(FIG_TREE_TOKENS, 1) == 4
        assert expr.subtree_span(FIG_TREE_TOKENS, 0) == 6

    def test_sequence_depth(self):
        assert expr.sequence_depth(FIG_TREE_TOKENS) == 2
        assert expr.sequence_depth(bytes([X])) == 0


class TestConstraints:
    rules = expr.ConstraintRuleSet()

    def test_trig_under_trig_fails(self):
        assert expr.check_constraints(tokens("sin", "cos", "x0"), self.rules) == "nested-trig"

    def test_trig_under_trig_deep(self):
        seq = tokens("sin", "+", "x0", "cos", "x0")
        assert expr.check_constraints(seq, self.rules) == "nested-trig"

    def test_exp_log_chain_fails(self):
        assert expr.check_constraints(tokens("exp", "log", "x0"), self.rules) == "inverse-chain"
        assert expr.check_constraints(tokens("log", "exp", "x0"), self.rules) == "inverse-chain"

    def test_siblings_pass(self):
        seq = tokens("+", "sin", "x0", "cos", "x0")
        assert expr.check_constraints(seq, self.rules) is None

    def test_binary_breaks_inverse_chain(self):
        # exp(x * log(y)) is how powers are built; it must be allowed.
        seq = tokens("exp", "*", "x0", "log", "x1")
        assert expr.check_constraints(seq, self.rules) is None

    def test_partial_sequence_checked(self):
        assert expr.check_constraints(tokens("sin", "sin"), self.rules) == "nested-trig"

    def test_disabled_rules(self):
        off = expr.ConstraintRuleSet(False, False)
        assert expr.check_constraints(tokens("sin", "cos", "x0"), off) is None
        assert expr.check_constraints(tokens("exp", "log", "x0"), off) is None

    def test_monotonicity(self):
        # A failing prefix keeps failing under random extensions.
        rng = random.Random(3)
        for _ in range(200):
            t = random_tree(rng, max_depth=5, allow_const=False)
            seq = expr.encode_preorder(t)
            bad_at = None
            for i in range(1, len(seq) + 1):
                violation = expr.check_constraints(seq[:i], self.rules)
                if bad_at is None and violation is not None:
                    bad_at = i
                if bad_at is not None:
                    assert violation is not None

    def test_sequence_valid(self):
        assert expr.sequence_valid(FIG_TREE_TOKENS, 6, self.rules)
        assert not expr.sequence_valid(tokens("sin", "sin", "x0"), 6, self.rules)
        assert not expr.sequence_valid(bytes([expr.ADD, X]), 6, self.rules)
        assert not expr.sequence_valid(bytes([expr.SIN] * 7 + [X]), 6, self.rules)
        assert expr.sequence_valid(bytes([expr.CONST]), 6, self.rules, max_constants=1)
        assert not expr.sequence_valid(
            tokens("+", "const", "const"), 6, self.rules, max_constants=1)


class TestEvaluate:
    def test_single_variable(self):
        out = expr.evaluate(expr.leaf(0), np.array([[3.0]]))
        assert out == pytest.approx([3.0])

    def test_power_identity(self):
        # x^y built as exp(log(x)*y): 2^3 == 8
        t = expr.Expr(expr.EXP, (
            expr.Expr(expr.MUL, (
                expr.Expr(expr.LOG, (expr.leaf(0),)),
                expr.leaf(1),
            )),
        ))
        out = expr.evaluate(t, np.array([[2.0, 3.0]]))
        assert out == pytest.approx([8.0])

    def test_log_singularity_is_nonfinite(self):
        t = expr.Expr(expr.LOG, (expr.leaf(0),))
        assert expr.evaluate(t, np.array([[0.0]])) is None
        assert expr.evaluate(t, np.array([[-1.0]])) is None

    def test_division_by_zero_nonfinite(self):
        t = expr.Expr(expr.DIV, (expr.leaf(0), expr.leaf(1)))
        assert expr.evaluate(t, np.array([[1.0, 0.0]])) is None

    def test_unbound_constant_raises(self):
        t = expr.Expr(expr.CONST)
        with pytest.raises(UnboundConstantError):
            expr.evaluate(t, np.array([[1.0]]))

    def test_variable_out_of_range(self):
        with pytest.raises(ValueError):
            expr.evaluate(expr.leaf(1), np.array([[1.0]]))

    def test_constant_only_tree_broadcasts(self):
        out = expr.evaluate(expr.const(2.5), np.zeros((4, 1)))
        assert out == pytest.approx([2.5] * 4)

    def test_matches_token_eval(self):
        rng = random.Random(11)
        nprng = np.random.default_rng(0)
        Xm = nprng.uniform(0.5, 2.0, size=(16, 2))
        cols = [Xm[:, 0].copy(), Xm[:, 1].copy()]
        for _ in range(200):
            t = random_tree(rng, max_depth=4)
            seq = expr.encode_preorder(t)
            a = expr.evaluate(t, Xm)
            b = expr.eval_tokens(seq, expr.tree_constants(t), cols, 16)
            if a is None:
                assert b is None
            else:
                np.testing.assert_allclose(a, b)


class TestSimplify:
    def test_identity_examples(self):
        # (x*1)+0 -> x
        t = expr.Expr(expr.ADD, (
            expr.Expr(expr.MUL, (expr.leaf(0), expr.const(1.0))),
            expr.const(0.0),
        ))
        assert expr.simplify_basic(t) == expr.leaf(0)

    def test_constant_fold(self):
        t = expr.Expr(expr.ADD, (expr.const(2.0), expr.const(3.0)))
        assert expr.simplify_basic(t) == expr.const(5.0)

    def test_guarded_division(self):
        # sin(x) * (y/y) -> sin(x)
        t = expr.Expr(expr.MUL, (
            expr.Expr(expr.SIN, (expr.leaf(0),)),
            expr.Expr(expr.DIV, (expr.leaf(1), expr.leaf(1))),
        ))
        assert expr.simplify_basic(t) == expr.Expr(expr.SIN, (expr.leaf(0),))

    def test_x_minus_x(self):
        t = expr.Expr(expr.SUB, (expr.leaf(0), expr.leaf(0)))
        assert expr.simplify_basic(t) == expr.const(0.0)

    def test_double_negation(self):
        inner = expr.Expr(expr.SUB, (expr.const(0.0), expr.leaf(0)))
        t = expr.Expr(expr.SUB, (expr.const(0.0), inner))
        assert expr.simplify_basic(t) == expr.leaf(0)

    def test_zero_product(self):
        t = expr.Expr(expr.ADD, (
            expr.leaf(0),
            expr.Expr(expr.MUL, (expr.const(0.0), expr.leaf(1))),
        ))
        assert expr.simplify_basic(t) == expr.leaf(0)
        assert expr.node_count(t) == 1

    def test_division_by_zero_not_folded(self):
        t = expr.Expr(expr.DIV, (expr.leaf(0), expr.const(0.0)))
        s = expr.simplify_basic(t)
        # still a division; not silently replaced by a finite constant
        assert s.token == expr.DIV

    def test_commutative_cancellation(self):
        # (x + x^2) - (x^2 + x) -> 0, the recovery-check workhorse
        x = expr.leaf(0)
        sq = expr.Expr(expr.MUL, (expr.leaf(0), expr.leaf(0)))
        a = expr.Expr(expr.ADD, (x, sq))
        b = expr.Expr(expr.ADD, (sq, x))
        t = expr.Expr(expr.SUB, (a, b))
        assert expr.simplify_basic(t) == expr.const(0.0)

    def test_soundness_and_nonincrease_random(self):
        rng = random.Random(5)
        nprng = np.random.default_rng(42)
        Xm = nprng.uniform(0.1, 3.0, size=(256, 2))
        for _ in range(300):
            t = random_tree(rng, max_depth=5)
            s = expr.simplify_basic(t)
            assert expr.tree_size(s) <= expr.tree_size(t)
            a = expr.evaluate(t, Xm)
            b = expr.evaluate(s, Xm)
            if a is not None and b is not None:
                scale = np.maximum(1.0, np.abs(a))
                assert np.max(np.abs(a - b) / scale) < 1e-10


class TestFormat:
    def test_infix_parens(self):
        assert expr.format_expr(fig_tree()) == "((x0+x1)*sin(x0))"

    def test_constant_digits(self):
        s = expr.format_expr(expr.const(1 / 3))
        assert s == "0.33333333333333331"

    def test_token_names_roundtrip(self):
        for tok in list(range(expr.VAR_BASE)) + [expr.variable(0), expr.variable(7)]:
            assert expr.token_from_name(expr.token_name(tok)) == tok
