import random

import numpy as np
import pytest

from srmcts import expr


def random_tree(rng: random.Random, max_depth: int = 6, n_vars: int = 2,
                allow_const: bool = True, p_op: float = 0.6):
    """Node-wise random tree builder, independent of the library's own
    generators and of the sequence codec.  Used as the bijection oracle."""
    terminals = [expr.variable(i) for i in range(n_vars)]
    if allow_const:
        terminals.append(expr.CONST)
    ops = list(expr.SEARCH_BINARY + expr.SEARCH_UNARY)

    def build(depth):
        if depth >= max_depth or rng.random() > p_op:
            t = rng.choice(terminals)
            if t == expr.CONST:
                return expr.Expr(t, (), rng.uniform(-5, 5))
            return expr.Expr(t)
        t = rng.choice(ops)
        children = tuple(build(depth + 1) for _ in range(expr.arity(t)))
        return expr.Expr(t, children)

    return build(0)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def nprng():
    return np.random.default_rng(1234)
