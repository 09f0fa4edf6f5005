"""Fusion-rule tests against brute-force oracles.

The two rules are checked elementwise against direct loop
implementations: choose-max against a per-element magnitude comparison
and the majority filter against an explicit 9-sample vote count with
replicated borders.
"""

import numpy as np
import pytest
import torch

from imgfuse.errors import ContractError
from imgfuse.rules import get_rule, psi0_choose_max, psi1_majority


def oracle_choose_max(v0, v1):
    """Per-element |.| comparison, ties to input 0."""
    out = np.empty_like(v0)
    mask = np.empty(v0.shape, dtype=bool)
    for idx in np.ndindex(v0.shape):
        if abs(v0[idx]) >= abs(v1[idx]):
            out[idx], mask[idx] = v0[idx], True
        else:
            out[idx], mask[idx] = v1[idx], False
    return out, mask


def oracle_majority(v0, v1):
    """Explicit 3x3 vote count over |v0| > |v1| with replicate padding."""
    c, h, w = v0.shape
    votes = np.abs(v0) > np.abs(v1)
    out = np.empty_like(v0)
    mask = np.empty(v0.shape, dtype=bool)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                count = 0
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ii = min(max(i + di, 0), h - 1)
                        jj = min(max(j + dj, 0), w - 1)
                        count += votes[ch, ii, jj]
                take0 = count >= 5
                mask[ch, i, j] = take0
                out[ch, i, j] = v0[ch, i, j] if take0 else v1[ch, i, j]
    return out, mask


class TestChooseMax:
    def test_signed_magnitudes(self):
        f0 = torch.tensor([[[2.0, -5.0]]])
        f1 = torch.tensor([[[-3.0, 4.0]]])
        target = psi0_choose_max(f0, f1)
        assert target.values.tolist() == [[[-3.0, -5.0]]]
        assert target.selection_mask.tolist() == [[[False, True]]]
        assert target.rule_id == "psi0"

    def test_tie_prefers_first_input(self):
        f = torch.full((2, 3, 3), 1.5)
        target = psi0_choose_max(f, f.clone())
        assert torch.equal(target.values, f)
        assert target.selection_mask.all()

    def test_matches_oracle_on_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            v0 = rng.normal(size=(4, 8, 8))
            v1 = rng.normal(size=(4, 8, 8))
            target = psi0_choose_max(torch.from_numpy(v0), torch.from_numpy(v1))
            exp_vals, exp_mask = oracle_choose_max(v0, v1)
            np.testing.assert_array_equal(target.values.numpy(), exp_vals)
            np.testing.assert_array_equal(target.selection_mask.numpy(), exp_mask)

    def test_symmetric_where_magnitudes_differ(self):
        rng = np.random.default_rng(8)
        v0 = torch.from_numpy(rng.normal(size=(3, 6, 6)))
        v1 = torch.from_numpy(rng.normal(size=(3, 6, 6)))
        fwd = psi0_choose_max(v0, v1).values
        rev = psi0_choose_max(v1, v0).values
        differ = v0.abs() != v1.abs()
        assert torch.equal(fwd[differ], rev[differ])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ContractError):
            psi0_choose_max(torch.zeros(2, 3, 3), torch.zeros(2, 3, 4))


class TestMajority:
    def test_unanimous_channel_taken_whole(self):
        v0 = torch.full((1, 5, 5), 2.0)
        v1 = torch.full((1, 5, 5), 1.0)
        target = psi1_majority(v0, v1)
        assert torch.equal(target.values, v0)
        assert target.selection_mask.all()

    def test_isolated_speck_removed(self):
        # one lone |v0|>|v1| vote is outvoted 8-to-1 everywhere
        v0 = torch.zeros(1, 7, 7)
        v1 = torch.full((1, 7, 7), 1.0)
        v0[0, 3, 3] = 5.0
        target = psi1_majority(v0, v1)
        assert torch.equal(target.values, v1)
        assert not target.selection_mask.any()

    def test_matches_vote_count_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            v0 = rng.normal(size=(3, 10, 10))
            v1 = rng.normal(size=(3, 10, 10))
            target = psi1_majority(torch.from_numpy(v0), torch.from_numpy(v1))
            exp_vals, exp_mask = oracle_majority(v0, v1)
            np.testing.assert_array_equal(target.values.numpy(), exp_vals)
            np.testing.assert_array_equal(target.selection_mask.numpy(), exp_mask)

    def test_interior_mask_has_no_isolated_pixels(self):
        rng = np.random.default_rng(10)
        v0 = torch.from_numpy(rng.normal(size=(2, 16, 16)))
        v1 = torch.from_numpy(rng.normal(size=(2, 16, 16)))
        mask = psi1_majority(v0, v1).selection_mask.numpy()
        votes = (np.abs(v0.numpy()) > np.abs(v1.numpy()))
        for ch in range(mask.shape[0]):
            for i in range(1, 15):
                for j in range(1, 15):
                    window = votes[ch, i - 1:i + 2, j - 1:j + 2]
                    agree = window.sum() if mask[ch, i, j] else 9 - window.sum()
                    assert agree >= 5


class TestBothRules:
    @pytest.mark.parametrize("rule_id", ["psi0", "psi1"])
    def test_selectivity(self, rule_id):
        rng = np.random.default_rng(11)
        v0 = rng.normal(size=(4, 9, 9))
        v1 = rng.normal(size=(4, 9, 9))
        target = get_rule(rule_id)(torch.from_numpy(v0), torch.from_numpy(v1))
        out = target.values.numpy()
        assert np.all((out == v0) | (out == v1))

    @pytest.mark.parametrize("rule_id", ["psi0", "psi1"])
    def test_idempotence(self, rule_id):
        rng = np.random.default_rng(12)
        v = torch.from_numpy(rng.normal(size=(3, 8, 8)))
        target = get_rule(rule_id)(v, v.clone())
        assert torch.equal(target.values, v)

    def test_unknown_rule_rejected(self):
        with pytest.raises(ContractError):
            get_rule("psi2")
