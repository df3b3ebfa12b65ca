"""The symbolic-regression decision process: states are prefix-valid token
sequences, transitions append one token to the deepest non-full operator
node (left child first), and only complete expressions carry reward.

Action spaces are depth-aware (only terminal symbols once the next slot
sits at the depth limit) and filter out tokens whose placement would
immediately violate the structural constraints, so rollouts never build
illegal expressions.
"""

from __future__ import annotations

from typing import NamedTuple

from . import expr, objective
from .errors import IllegalActionError, NotTerminalError, TerminalStateError

#: slot context = (depth, trig-ancestor flag, exp/log chain bits)
_ROOT_SLOT = (0, False, 0)


class MdpConfig:
    """Alphabet, depth limit, constant cap and constraint rules.

    Action lookup tables are precomputed per slot context so rollouts are
    table-driven.  Instances are immutable in use and safe to share.
    """

    def __init__(self, n_variables: int, max_depth: int = 6,
                 max_constants: int = 10, allow_constants: bool = True,
                 rules: expr.ConstraintRuleSet | None = None):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if n_variables < 1:
            raise ValueError("need at least one input variable")
        self.n_variables = n_variables
        self.max_depth = max_depth
        self.max_constants = max_constants if allow_constants else 0
        self.allow_constants = allow_constants
        self.rules = rules if rules is not None else expr.ConstraintRuleSet()

        variables = tuple(expr.variable(i) for i in range(n_variables))
        self.terminals = variables + ((expr.CONST,) if allow_constants else ())
        self.alphabet = expr.SEARCH_BINARY + expr.SEARCH_UNARY + self.terminals

        # (at_max, trig, chain, const_ok) -> allowed tokens
        table = {}
        for at_max in (False, True):
            for trig in (False, True):
                for chain in range(4):
                    for const_ok in (False, True):
                        allowed = []
                        if not at_max:
                            allowed.extend(expr.SEARCH_BINARY)
                            for f in expr.SEARCH_UNARY:
                                if self.rules.no_nested_trig and trig \
                                        and f in expr.TRIG_FNS:
                                    continue
                                if self.rules.no_inverse_chain:
                                    if f == expr.EXP and chain & expr.CHAIN_LOG:
                                        continue
                                    if f == expr.LOG and chain & expr.CHAIN_EXP:
                                        continue
                                allowed.append(f)
                        allowed.extend(variables)
                        if allow_constants and const_ok:
                            allowed.append(expr.CONST)
                        table[(at_max, trig, chain, const_ok)] = tuple(allowed)
        self._actions = table

    def allowed_tokens(self, slot, const_ok: bool) -> tuple:
        depth, trig, chain = slot
        return self._actions[(depth >= self.max_depth, trig, chain, const_ok)]

    def __repr__(self):
        return (f"MdpConfig(n_variables={self.n_variables}, "
                f"max_depth={self.max_depth}, "
                f"max_constants={self.max_constants}, "
                f"allow_constants={self.allow_constants})")


class SrState(NamedTuple):
    """Immutable prefix-valid token sequence plus derived slot stack.

    ``slots`` is the stack of open child slots, innermost last; the top of
    the stack is the slot the next token will fill.  Terminal iff empty.
    """

    tokens: bytes
    slots: tuple
    n_constants: int

    @property
    def terminal(self) -> bool:
        return not self.slots

    @property
    def depth(self) -> int:
        return len(self.tokens)


def initial_state(cfg: MdpConfig) -> SrState:
    return SrState(b"", (_ROOT_SLOT,), 0)


def action_space(state: SrState, cfg: MdpConfig) -> tuple:
    """Allowed tokens at the state's next slot.

    The full alphabet while the slot is above the depth limit, terminals
    only at the limit; tokens that would immediately violate a constraint
    rule and constants past the cap are removed.  Never empty: variables
    are always allowed.
    """
    if not state.slots:
        raise TerminalStateError("terminal state has no actions")
    const_ok = state.n_constants < cfg.max_constants
    return cfg.allowed_tokens(state.slots[-1], const_ok)


def _child_slots(token: int, slot):
    depth, trig, chain = slot
    ar = expr.arity(token)
    if ar == 0:
        return ()
    trig = trig or token in expr.TRIG_FNS
    if ar == 1:
        if token == expr.EXP:
            chain |= expr.CHAIN_EXP
        elif token == expr.LOG:
            chain |= expr.CHAIN_LOG
        return ((depth + 1, trig, chain),)
    ctx = (depth + 1, trig, 0)
    return (ctx, ctx)


def transition(state: SrState, action: int, cfg: MdpConfig) -> SrState:
    """Deterministic append of one token."""
    if action not in action_space(state, cfg):
        raise IllegalActionError(
            f"token {expr.token_name(action)} not allowed at this state")
    new_slots = state.slots[:-1] + _child_slots(action, state.slots[-1])
    return SrState(state.tokens + bytes([action]), new_slots,
                   state.n_constants + (1 if action == expr.CONST else 0))


def random_rollout(state: SrState, cfg: MdpConfig, rng) -> bytes:
    """Uniform random completion of the state; returns the suffix tokens.

    Each open slot is filled by a token drawn uniformly from the filtered
    action space, so the result always satisfies depth and constraint
    invariants.  Terminates within 2**(H+1)-1 total tokens.
    """
    slots = list(state.slots)
    n_const = state.n_constants
    out = bytearray()
    table = cfg.allowed_tokens
    max_const = cfg.max_constants
    while slots:
        slot = slots.pop()
        cands = table(slot, n_const < max_const)
        t = cands[rng.randrange(len(cands))]
        out.append(t)
        if t == expr.CONST:
            n_const += 1
        else:
            slots.extend(_child_slots(t, slot))
    return bytes(out)


def terminal_reward(state: SrState, data: objective.Dataset,
                    fit_budget: int = objective.DEFAULT_FIT_BUDGET) -> objective.FitResult:
    """Decode the complete expression, fit constants, return its reward."""
    if not state.terminal:
        raise NotTerminalError("state is not a complete expression")
    tree = expr.decode_preorder(state.tokens,
                                max_depth=expr.sequence_depth(state.tokens))
    return objective.fit_constants(tree, data, budget=fit_budget)
