import random

import numpy as np
import pytest

from srmcts import expr, mdp, objective
from srmcts.errors import IllegalActionError, NotTerminalError, TerminalStateError

X0 = expr.variable(0)
X1 = expr.variable(1)


@pytest.fixture
def cfg():
    return mdp.MdpConfig(n_variables=1, max_depth=6, allow_constants=False)


@pytest.fixture
def cfg2c():
    return mdp.MdpConfig(n_variables=2, max_depth=6, max_constants=2)


def run_tokens(cfg, toks):
    s = mdp.initial_state(cfg)
    for t in toks:
        s = mdp.transition(s, t, cfg)
    return s


class TestActionSpace:
    def test_empty_state_full_alphabet(self, cfg):
        s = mdp.initial_state(cfg)
        acts = mdp.action_space(s, cfg)
        assert set(acts) == set(expr.SEARCH_BINARY + expr.SEARCH_UNARY + (X0,))

    def test_max_depth_excludes_operators(self, cfg):
        s = run_tokens(cfg, [expr.EXP] * 6)
        acts = mdp.action_space(s, cfg)
        assert set(acts) == {X0}

    def test_trig_context_excluded(self, cfg):
        s = run_tokens(cfg, [expr.SIN])
        acts = mdp.action_space(s, cfg)
        assert expr.SIN not in acts and expr.COS not in acts
        assert expr.EXP in acts and X0 in acts

    def test_inverse_chain_excluded(self, cfg):
        s = run_tokens(cfg, [expr.EXP])
        acts = mdp.action_space(s, cfg)
        assert expr.LOG not in acts
        s = run_tokens(cfg, [expr.LOG])
        assert expr.EXP not in mdp.action_space(s, cfg)

    def test_binary_resets_inverse_chain(self, cfg):
        s = run_tokens(cfg, [expr.EXP, expr.MUL])
        assert expr.LOG in mdp.action_space(s, cfg)

    def test_constant_cap(self, cfg2c):
        s = run_tokens(cfg2c, [expr.ADD, expr.CONST])
        assert expr.CONST in mdp.action_space(s, cfg2c)
        s2 = run_tokens(cfg2c, [expr.ADD, expr.ADD, expr.CONST, expr.CONST])
        assert expr.CONST not in mdp.action_space(s2, cfg2c)

    def test_constant_free_configuration(self, cfg):
        s = mdp.initial_state(cfg)
        assert expr.CONST not in mdp.action_space(s, cfg)

    def test_terminal_raises(self, cfg):
        s = run_tokens(cfg, [X0])
        with pytest.raises(TerminalStateError):
            mdp.action_space(s, cfg)

    def test_never_empty(self, cfg2c):
        rng = random.Random(5)
        for _ in range(300):
            s = mdp.initial_state(cfg2c)
            while not s.terminal:
                acts = mdp.action_space(s, cfg2c)
                assert len(acts) > 0
                s = mdp.transition(s, acts[rng.randrange(len(acts))], cfg2c)


class TestTransition:
    def test_append(self, cfg):
        s = run_tokens(cfg, [expr.ADD])
        s2 = mdp.transition(s, X0, cfg)
        assert s2.tokens == bytes([expr.ADD, X0])
        assert not s2.terminal

    def test_terminates(self, cfg):
        s = run_tokens(cfg, [expr.ADD, X0, X0])
        assert s.terminal

    def test_illegal_action(self, cfg):
        s = run_tokens(cfg, [expr.SIN])
        with pytest.raises(IllegalActionError):
            mdp.transition(s, expr.SIN, cfg)

    def test_terminal_transition_raises(self, cfg):
        s = run_tokens(cfg, [X0])
        with pytest.raises(TerminalStateError):
            mdp.transition(s, X0, cfg)


class TestRollout:
    def test_bounded_and_valid(self, cfg2c):
        rng = random.Random(0)
        limit = 2 ** (cfg2c.max_depth + 1) - 1
        for _ in range(500):
            suffix = mdp.random_rollout(mdp.initial_state(cfg2c), rng=rng, cfg=cfg2c)
            assert 1 <= len(suffix) <= limit
            assert expr.sequence_valid(suffix, cfg2c.max_depth, cfg2c.rules,
                                       cfg2c.max_constants)

    def test_completes_partial_state(self, cfg):
        rng = random.Random(1)
        s = run_tokens(cfg, [expr.ADD, expr.SIN])
        for _ in range(100):
            suffix = mdp.random_rollout(s, cfg, rng)
            full = s.tokens + suffix
            assert expr.sequence_valid(full, cfg.max_depth, cfg.rules)


class TestTerminalReward:
    def make_data(self):
        rng = np.random.default_rng(0)
        Xm = rng.uniform(-1, 1, size=(20, 1))
        y = Xm[:, 0] ** 3 + Xm[:, 0] ** 2 + Xm[:, 0]
        return objective.Dataset(Xm, y, name="nguyen1-like")

    def test_exact_expression_reward_one(self, cfg):
        data = self.make_data()
        # x*x*x + x*x + x in pre-order, built to match generation exactly:
        # ((x*x)*x + ((x*x) + x))
        toks = bytes([
            expr.ADD,
            expr.MUL, expr.MUL, X0, X0, X0,
            expr.ADD, expr.MUL, X0, X0, X0,
        ])
        s = run_tokens(cfg, list(toks))
        res = mdp.terminal_reward(s, data)
        assert res.reward > 1.0 - 1e-12

    def test_nonterminal_raises(self, cfg):
        s = run_tokens(cfg, [expr.ADD])
        with pytest.raises(NotTerminalError):
            mdp.terminal_reward(s, self.make_data())

    def test_single_variable(self, cfg):
        data = self.make_data()
        s = run_tokens(cfg, [X0])
        res = mdp.terminal_reward(s, data)
        assert 0.0 < res.reward < 1.0

    def test_return_equals_single_terminal_reward(self, cfg):
        # An episode's return is its terminal reward: no shaping anywhere.
        data = self.make_data()
        rng = random.Random(4)
        s = mdp.initial_state(cfg)
        while not s.terminal:
            acts = mdp.action_space(s, cfg)
            s = mdp.transition(s, acts[rng.randrange(len(acts))], cfg)
        res = mdp.terminal_reward(s, data)
        assert 0.0 <= res.reward <= 1.0
