"""Expression alphabet, binary expression trees and the pre-order sequence codec.

Tokens are small integers so that a whole expression fits in a ``bytes``
object (hashable, compact, sliceable), which is what the search engine
passes around.  ``Expr`` nodes are only materialised at the API boundary:
for genetic operators, simplification, printing and recovery checks.

The search alphabet is ``{+, -, *, /, sin, cos, exp, log, const, x_i}``.
A few extra function tokens (``pow``, ``sqrt``, ``sinh``, ``cosh``) exist
solely so benchmark target expressions can be represented and evaluated
exactly; they are never offered to the search.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    DepthViolationError,
    OverfullSequenceError,
    UnboundConstantError,
)

# Token ids.  Order matters: everything below VAR_BASE is a fixed symbol,
# ids >= VAR_BASE are input variables x0, x1, ...
ADD, SUB, MUL, DIV = 0, 1, 2, 3
SIN, COS, EXP, LOG = 4, 5, 6, 7
POW, SQRT, SINH, COSH = 8, 9, 10, 11
CONST = 12
VAR_BASE = 13

BINARY_OPS = frozenset((ADD, SUB, MUL, DIV, POW))
UNARY_FNS = frozenset((SIN, COS, EXP, LOG, SQRT, SINH, COSH))
TRIG_FNS = frozenset((SIN, COS))

# Tokens the search may use (variables and CONST are appended per config).
SEARCH_BINARY = (ADD, SUB, MUL, DIV)
SEARCH_UNARY = (SIN, COS, EXP, LOG)

_NAMES = {
    ADD: "+", SUB: "-", MUL: "*", DIV: "/",
    SIN: "sin", COS: "cos", EXP: "exp", LOG: "log",
    POW: "pow", SQRT: "sqrt", SINH: "sinh", COSH: "cosh",
    CONST: "const",
}

# Bits recording which inverse functions sit above a slot along an
# unbroken chain of unary ancestors.
CHAIN_EXP = 1
CHAIN_LOG = 2


def arity(token: int) -> int:
    if token >= CONST:
        return 0
    if token in BINARY_OPS:
        return 2
    return 1


def variable(index: int) -> int:
    """Token id of input variable ``x<index>``."""
    if index < 0:
        raise ValueError("variable index must be >= 0")
    return VAR_BASE + index


def variable_index(token: int) -> int:
    if token < VAR_BASE:
        raise ValueError(f"token {token} is not a variable")
    return token - VAR_BASE


def token_name(token: int) -> str:
    if token >= VAR_BASE:
        return f"x{token - VAR_BASE}"
    return _NAMES[token]


def token_from_name(name: str) -> int:
    if name.startswith("x") and name[1:].isdigit():
        return VAR_BASE + int(name[1:])
    for tok, nm in _NAMES.items():
        if nm == name:
            return tok
    raise ValueError(f"unknown token name {name!r}")


class ConstraintRuleSet:
    """Structural constraints applied to (partial) expressions.

    ``no_nested_trig``: a trig function may not have a trig function
    anywhere in its subtree.  ``no_inverse_chain``: exp may not have log
    in its chain of unary descendants, and vice versa.
    """

    __slots__ = ("no_nested_trig", "no_inverse_chain")

    def __init__(self, no_nested_trig: bool = True, no_inverse_chain: bool = True):
        self.no_nested_trig = no_nested_trig
        self.no_inverse_chain = no_inverse_chain

    def __repr__(self):
        return (f"ConstraintRuleSet(no_nested_trig={self.no_nested_trig}, "
                f"no_inverse_chain={self.no_inverse_chain})")

    def __eq__(self, other):
        return (isinstance(other, ConstraintRuleSet)
                and self.no_nested_trig == other.no_nested_trig
                and self.no_inverse_chain == other.no_inverse_chain)


class _Incomplete:
    def __repr__(self):
        return "Incomplete"


#: Marker returned by :func:`decode_preorder` when operator slots remain open.
INCOMPLETE = _Incomplete()


class Expr:
    """A node of a binary expression tree.  The root node stands for the tree.

    ``value`` is the bound real value for CONST nodes (None if unbound).
    """

    __slots__ = ("token", "children", "value")

    def __init__(self, token: int, children: tuple = (), value: float | None = None):
        if len(children) != arity(token):
            raise ValueError(
                f"token {token_name(token)} takes {arity(token)} children, "
                f"got {len(children)}")
        self.token = token
        self.children = tuple(children)
        self.value = value

    def __eq__(self, other):
        # Structural equality; constant values compare exactly.
        if not isinstance(other, Expr):
            return NotImplemented
        if self.token != other.token or self.value != other.value:
            return False
        return self.children == other.children

    def __hash__(self):
        return hash((self.token, self.value, self.children))

    def __repr__(self):
        return f"Expr<{format_expr(self)}>"


def const(value: float) -> Expr:
    return Expr(CONST, (), float(value))


def leaf(index: int) -> Expr:
    return Expr(variable(index))


# ---------------------------------------------------------------------------
# Sequence scanning


def subtree_span(tokens, start: int) -> int:
    """End index (exclusive) of the subtree rooted at ``tokens[start]``."""
    need = 1
    i = start
    n = len(tokens)
    while need:
        if i >= n:
            raise ValueError("sequence ends inside subtree")
        need += arity(tokens[i]) - 1
        i += 1
    return i


def open_slot_count(tokens) -> int:
    """Number of unfilled child slots; 0 means the sequence is complete."""
    open_slots = 1
    for i, t in enumerate(tokens):
        if open_slots == 0:
            raise OverfullSequenceError(f"token at position {i} after completion")
        open_slots += arity(t) - 1
    return open_slots


def sequence_depth(tokens) -> int:
    """Maximum node depth (root = 0) of the tokens placed so far."""
    depths = [0]
    max_depth = 0
    for t in tokens:
        d = depths.pop()
        if d > max_depth:
            max_depth = d
        depths.extend([d + 1] * arity(t))
    return max_depth


def check_constraints(tokens, rules: ConstraintRuleSet) -> str | None:
    """Scan a complete or partial token sequence against the rule set.

    Returns None if it passes, otherwise the name of the violated rule
    (``"nested-trig"`` or ``"inverse-chain"``).  Partial sequences are
    checked on the structure built so far; by monotonicity any extension
    of a failing prefix also fails.
    """
    # Slot context stack: (trig ancestor present, chain bits of exp/log
    # reachable through unary ancestors).
    slots = [(False, 0)]
    for i, t in enumerate(tokens):
        if not slots:
            raise OverfullSequenceError(f"token at position {i} after completion")
        trig, chain = slots.pop()
        if rules.no_nested_trig and trig and t in TRIG_FNS:
            return "nested-trig"
        if rules.no_inverse_chain:
            if t == EXP and chain & CHAIN_LOG:
                return "inverse-chain"
            if t == LOG and chain & CHAIN_EXP:
                return "inverse-chain"
        ar = arity(t)
        if ar == 1:
            child_chain = chain
            if t == EXP:
                child_chain |= CHAIN_EXP
            elif t == LOG:
                child_chain |= CHAIN_LOG
            slots.append((trig or t in TRIG_FNS, child_chain))
        elif ar == 2:
            # A binary node breaks any unary chain below it.
            ctx = (trig or t in TRIG_FNS, 0)
            slots.append(ctx)
            slots.append(ctx)
    return None


def sequence_valid(tokens, max_depth: int, rules: ConstraintRuleSet,
                   max_constants: int | None = None) -> bool:
    """True iff ``tokens`` is a complete expression within the depth limit,
    passes the constraint rules and stays under the constant cap."""
    slots = [(0, False, 0)]
    n_const = 0
    for t in tokens:
        if not slots:
            return False
        depth, trig, chain = slots.pop()
        ar = arity(t)
        if ar > 0 and depth >= max_depth:
            return False
        if rules.no_nested_trig and trig and t in TRIG_FNS:
            return False
        if rules.no_inverse_chain:
            if t == EXP and chain & CHAIN_LOG:
                return False
            if t == LOG and chain & CHAIN_EXP:
                return False
        if t == CONST:
            n_const += 1
            if max_constants is not None and n_const > max_constants:
                return False
        if ar == 1:
            child_chain = chain
            if t == EXP:
                child_chain |= CHAIN_EXP
            elif t == LOG:
                child_chain |= CHAIN_LOG
            slots.append((depth + 1, trig or t in TRIG_FNS, child_chain))
        elif ar == 2:
            ctx = (depth + 1, trig or t in TRIG_FNS, 0)
            slots.append(ctx)
            slots.append(ctx)
    return not slots


# ---------------------------------------------------------------------------
# Codec


def decode_preorder(tokens, max_depth: int = 6, constants=None):
    """Rebuild a tree from a pre-order token sequence.

    Tokens attach to the deepest non-full operator node, left child first.
    Returns :data:`INCOMPLETE` if operator slots remain open.  Raises
    :class:`OverfullSequenceError` if a token arrives after completion and
    :class:`DepthViolationError` if an attachment would force the tree past
    ``max_depth`` (an operator in a slot at the depth limit already does).
    """
    if len(tokens) == 0:
        raise ValueError("empty token sequence")
    depths = [0]
    for i, t in enumerate(tokens):
        if not depths:
            raise OverfullSequenceError(f"token at position {i} after completion")
        d = depths.pop()
        ar = arity(t)
        if d > max_depth or (ar > 0 and d == max_depth):
            raise DepthViolationError(
                f"token {token_name(t)} at depth {d} exceeds limit {max_depth}")
        depths.extend([d + 1] * ar)
    if depths:
        return INCOMPLETE

    if constants is not None:
        n_const = sum(1 for t in tokens if t == CONST)
        if n_const != len(constants):
            raise ValueError(
                f"{n_const} constant slots but {len(constants)} values")
    const_iter = iter(reversed(constants)) if constants is not None else None

    stack: list[Expr] = []
    for t in reversed(tokens):
        ar = arity(t)
        if ar == 0:
            if t == CONST and const_iter is not None:
                stack.append(Expr(t, (), float(next(const_iter))))
            else:
                stack.append(Expr(t))
        elif ar == 1:
            stack.append(Expr(t, (stack.pop(),)))
        else:
            left = stack.pop()
            right = stack.pop()
            stack.append(Expr(t, (left, right)))
    return stack[0]


def encode_preorder(tree: Expr) -> bytes:
    """Pre-order token sequence of a complete tree."""
    out = bytearray()
    stack = [tree]
    while stack:
        node = stack.pop()
        out.append(node.token)
        stack.extend(reversed(node.children))
    return bytes(out)


def tree_constants(tree: Expr) -> tuple:
    """Constant values in pre-order slot order (None where unbound)."""
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.token == CONST:
            out.append(node.value)
        stack.extend(reversed(node.children))
    return tuple(out)


def tree_size(tree: Expr) -> int:
    n = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        n += 1
        stack.extend(node.children)
    return n


def tree_depth(tree: Expr) -> int:
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, d = stack.pop()
        if d > best:
            best = d
        stack.extend((c, d + 1) for c in node.children)
    return best


# ---------------------------------------------------------------------------
# Evaluation

_BIN_EVAL = {
    ADD: np.add, SUB: np.subtract, MUL: np.multiply,
    DIV: np.true_divide, POW: np.power,
}
_UN_EVAL = {
    SIN: np.sin, COS: np.cos, EXP: np.exp, LOG: np.log,
    SQRT: np.sqrt, SINH: np.sinh, COSH: np.cosh,
}


def eval_tokens(tokens, constants, columns, n: int):
    """Evaluate a complete pre-order sequence against input columns.

    ``columns`` is a sequence of 1-D arrays (one per variable).  Returns
    the length-``n`` result vector, or None when any output is NaN or
    infinite (division and log are unprotected by design; the reward layer
    treats None as an invalid expression).
    """
    stack = []
    ci = len(constants) if constants is not None else 0
    with np.errstate(all="ignore"):
        for t in reversed(tokens):
            if t >= VAR_BASE:
                stack.append(columns[t - VAR_BASE])
            elif t == CONST:
                ci -= 1
                if constants is None or constants[ci] is None:
                    raise UnboundConstantError("constant slot has no value")
                stack.append(constants[ci])
            elif t in _UN_EVAL:
                stack.append(_UN_EVAL[t](stack.pop()))
            else:
                a = stack.pop()
                b = stack.pop()
                stack.append(_BIN_EVAL[t](a, b))
    out = stack[-1]
    if np.ndim(out) == 0:
        out = np.full(n, float(out))
    if not np.all(np.isfinite(out)):
        return None
    return out


def evaluate(tree: Expr, X):
    """Evaluate a complete tree on an ``(n, d)`` input matrix.

    Returns the length-``n`` prediction vector or None if any output is
    non-finite.  Raises :class:`UnboundConstantError` for unbound constant
    slots and ValueError for out-of-range variable indices.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, d = X.shape
    tokens = encode_preorder(tree)
    for t in tokens:
        if t >= VAR_BASE and t - VAR_BASE >= d:
            raise ValueError(f"variable x{t - VAR_BASE} out of range for d={d}")
    constants = tree_constants(tree)
    columns = [np.ascontiguousarray(X[:, j]) for j in range(d)]
    return eval_tokens(tokens, constants, columns, n)


# ---------------------------------------------------------------------------
# Printing


def format_expr(tree: Expr) -> str:
    """Canonical text: lowercase functions, infix binary operators, full
    parenthesisation, constants with 17 significant digits."""
    t = tree.token
    if t >= VAR_BASE:
        return f"x{t - VAR_BASE}"
    if t == CONST:
        if tree.value is None:
            return "c?"
        return f"{tree.value:.17g}"
    if t in (ADD, SUB, MUL, DIV):
        a, b = tree.children
        return f"({format_expr(a)}{_NAMES[t]}{format_expr(b)})"
    if t == POW:
        a, b = tree.children
        return f"pow({format_expr(a)},{format_expr(b)})"
    return f"{_NAMES[t]}({format_expr(tree.children[0])})"


# ---------------------------------------------------------------------------
# Simplification

def _canon_key(node: Expr):
    return (encode_preorder(node), tree_constants(node))


def _is_const(node: Expr) -> bool:
    return node.token == CONST and node.value is not None


def _flatten_sum(node: Expr, sign: int, out: list):
    if node.token == ADD:
        _flatten_sum(node.children[0], sign, out)
        _flatten_sum(node.children[1], sign, out)
    elif node.token == SUB:
        _flatten_sum(node.children[0], sign, out)
        _flatten_sum(node.children[1], -sign, out)
    else:
        out.append((sign, _simplify(node)))


def _flatten_product(node: Expr, num: bool, out: list):
    if node.token == MUL:
        _flatten_product(node.children[0], num, out)
        _flatten_product(node.children[1], num, out)
    elif node.token == DIV:
        _flatten_product(node.children[0], num, out)
        _flatten_product(node.children[1], not num, out)
    else:
        out.append((num, _simplify(node)))


def _cancel(pos: list, neg: list):
    # Remove structurally identical pairs across the two groups.
    remaining = []
    neg_keys = {}
    for node in neg:
        neg_keys.setdefault(_canon_key(node), []).append(node)
    for node in pos:
        k = _canon_key(node)
        bucket = neg_keys.get(k)
        if bucket:
            bucket.pop()
        else:
            remaining.append(node)
    neg_left = [n for bucket in neg_keys.values() for n in bucket]
    return remaining, neg_left


def _chain(op: int, nodes: list) -> Expr:
    acc = nodes[0]
    for node in nodes[1:]:
        acc = Expr(op, (acc, node))
    return acc


def _rebuild_sum(terms: list) -> Expr:
    csum = 0.0
    pos, neg = [], []
    for sign, node in terms:
        if _is_const(node):
            csum += sign * node.value
        elif sign > 0:
            pos.append(node)
        else:
            neg.append(node)
    pos, neg = _cancel(pos, neg)
    pos.sort(key=_canon_key)
    neg.sort(key=_canon_key)
    if csum != 0.0 and math.isfinite(csum):
        pos.append(const(csum))
    if not pos and not neg:
        return const(0.0)
    acc = _chain(ADD, pos) if pos else const(0.0)
    for node in neg:
        acc = Expr(SUB, (acc, node))
    return acc


def _rebuild_product(factors: list) -> Expr:
    cnum, cden = 1.0, 1.0
    num, den = [], []
    for in_num, node in factors:
        if _is_const(node):
            if in_num:
                cnum *= node.value
            else:
                cden *= node.value
        elif in_num:
            num.append(node)
        else:
            den.append(node)
    num, den = _cancel(num, den)
    num.sort(key=_canon_key)
    den.sort(key=_canon_key)
    coeff = cnum / cden if cden != 0.0 else None
    if coeff is not None and math.isfinite(coeff):
        if coeff == 0.0:
            return const(0.0)
        if coeff != 1.0:
            num.insert(0, const(coeff))
    else:
        # Keep a division by zero visible rather than folding it away.
        num.insert(0, const(cnum))
        den.insert(0, const(cden))
    if not num:
        num = [const(1.0)]
    acc = _chain(MUL, num)
    if den:
        acc = Expr(DIV, (acc, _chain(MUL, den)))
    return acc


def _simplify(node: Expr) -> Expr:
    t = node.token
    if t in (ADD, SUB):
        terms: list = []
        _flatten_sum(node, 1, terms)
        return _rebuild_sum(terms)
    if t in (MUL, DIV):
        factors: list = []
        _flatten_product(node, True, factors)
        return _rebuild_product(factors)
    if t in UNARY_FNS:
        child = _simplify(node.children[0])
        if _is_const(child):
            with np.errstate(all="ignore"):
                val = float(_UN_EVAL[t](child.value))
            if math.isfinite(val):
                return const(val)
        return Expr(t, (child,))
    if t == POW:
        a = _simplify(node.children[0])
        b = _simplify(node.children[1])
        if _is_const(a) and _is_const(b):
            with np.errstate(all="ignore"):
                val = float(np.power(a.value, b.value))
            if math.isfinite(val):
                return const(val)
        return Expr(POW, (a, b))
    return node


def simplify_basic(tree: Expr) -> Expr:
    """Constant folding plus local identities, applied to fixpoint.

    Covers x+0, x*1, x*0, x-0, x/1, x-x -> 0 and x/x -> 1 (both only for
    structurally identical subtrees), and cancellation across commutative
    +/- and */ chains, so double negation 0-(0-x) collapses to x.  The
    result evaluates identically (within rounding) wherever both trees
    are finite; it is not a CAS-grade simplifier.
    """
    cur = tree
    prev_key = None
    for _ in range(8):
        key = _canon_key(cur)
        if key == prev_key:
            break
        prev_key = key
        cur = _simplify(cur)
    return cur


def node_count(tree: Expr) -> int:
    """Complexity metric: node count of the simplified tree."""
    return tree_size(simplify_basic(tree))
