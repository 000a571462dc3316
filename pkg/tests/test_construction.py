import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pptedge.blocks import build_Q
from pptedge.construction import (DENSE_GATE, GenericityError, ParamSet, alternative_A,
                                  alternative_B, alternative_kernel_vectors, assemble_alternative_4x4,
                                  assemble_rho, assemble_rho_gamma, d_rules, extract_D,
                                  load_params, q_block_arguments, rho_gamma_blocks, save_params)
from pptedge.linalg import kernel_report, partial_transpose, principal_submatrix

import displays
from conftest import random_params, cubic_example_params, quartic_example_params


def displayed(rows, p):
    return displays.evaluate(rows, displays.ratio_symbols(p.alpha, p.beta, p.r))


class TestParamSet:
    def test_fixed_entries(self):
        with pytest.raises(ValueError, match="alpha_angles"):
            ParamSet(3, (0.1, 0, 0), (0, 0, 0))
        with pytest.raises(ValueError, match="beta_angles"):
            ParamSet(3, (0, 0, 0), (0, 0, 0.2))

    def test_validation(self):
        with pytest.raises(ValueError):
            ParamSet(2, (0, 0), (0, 0))
        with pytest.raises(ValueError, match="length"):
            ParamSet(3, (0, 0), (0, 0, 0))
        with pytest.raises(ValueError):
            ParamSet(3, (0, math.nan, 0), (0, 0, 0))
        with pytest.raises(ValueError):
            ParamSet(3, (0, 0, 0), (0, 0, 0), r=-1.0)

    def test_unit_modulus(self, rng):
        p = random_params(7, rng)
        assert np.allclose(np.abs(p.alpha), 1) and np.allclose(np.abs(p.beta), 1)
        assert p.alpha[0] == 1 and p.beta[-1] == 1

    def test_genericity(self):
        p = ParamSet(4, (0, 0.25, 0.25, math.pi), (0,) * 4)
        assert (2, 3) in p.genericity_violations()
        assert not p.is_generic()
        assert quartic_example_params().is_generic()

    def test_round_trip(self, tmp_path, rng):
        p = random_params(5, rng, r=2.5)
        path = tmp_path / "p.json"
        save_params(p, path)
        assert load_params(path) == p

    @pytest.mark.parametrize("doc,field", [
        ({"alpha_angles": [0, 0, 0], "beta_angles": [0, 0, 0]}, "n"),
        ({"n": 3, "alpha_angles": [0, "x", 0], "beta_angles": [0, 0, 0]}, "alpha_angles"),
        ({"n": 3, "alpha_angles": [0, 0, 0]}, "beta_angles"),
        ({"n": 3, "alpha_angles": [0, 0, 0], "beta_angles": [0, 0, 0], "r": "big"}, "r"),
        ({"n": "3", "alpha_angles": [0, 0, 0], "beta_angles": [0, 0, 0]}, "n"),
    ])
    def test_malformed_documents_name_the_field(self, tmp_path, doc, field):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match=f"'{field}'"):
            load_params(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_params(path)


class TestRhoGamma:
    def test_three_by_three_display(self, rng):
        for _ in range(5):
            p = random_params(3, rng, r=float(rng.uniform(1, 4)))
            G = assemble_rho_gamma(p).densify()
            assert np.allclose(G, displayed(displays.RHO_GAMMA_3, p), rtol=0, atol=1e-15)
        assert G[1 * 3 + 0 + 1, 0] == 0
        assert G[2, 6] == pytest.approx(2 * p.alpha_ratio(1, 3))

    def test_four_by_four_display(self, rng):
        for _ in range(5):
            p = random_params(4, rng, r=float(rng.uniform(1, 4)))
            G = assemble_rho_gamma(p).densify()
            assert np.allclose(G, displayed(displays.RHO_GAMMA_4, p), rtol=0, atol=1e-15)
            # (e23, e14) entry of P_4(1, alpha_23, alpha_14)
            assert G[6, 3] == 1

    def test_five(self, rng):
        p = random_params(5, rng, r=3.0)
        G = assemble_rho_gamma(p)
        assert len(G.blocks) == 7
        # P blocks are PSD with corank 1; r I contributes no kernel
        assert kernel_report(G.densify()).corank == 7

    @pytest.mark.parametrize("n", range(3, 13))
    def test_coverage_and_dense_corank(self, rng, n):
        p = random_params(n, rng, r=2.0)
        G = assemble_rho_gamma(p)
        assert G.coverage_ok()
        assert len(G.blocks) == 2 * n - 3
        assert {b.scale for b in G.blocks} <= {1.0, 2.0}
        D = G.densify()
        assert np.array_equal(D, D.conj().T)
        assert kernel_report(D).corank == 2 * n - 3

    def test_coverage_up_to_fifty(self, rng):
        for n in range(3, 51):
            p = random_params(n, rng, r=2.0)
            G = assemble_rho_gamma(p)
            assert G.coverage_ok()
            assert assemble_rho(p, rho_gamma=G).coverage_ok()

    def test_item_order_for_k_block(self):
        p = random_params(7, np.random.default_rng(0), r=2.0)
        blk = assemble_rho_gamma(p).block("alpha:6")
        assert [tuple(x) for x in blk.labels] == [(1, 6), (2, 5), (3, 4), (4, 3), (5, 2), (6, 1)]
        assert np.allclose(blk.z, [1, 1, p.alpha_ratio(3, 4), p.alpha_ratio(2, 5), p.alpha_ratio(1, 6)])

    def test_item_order_for_l_block(self):
        n = 8
        p = random_params(n, np.random.default_rng(1), r=2.0)
        # l = 2 family: labels (2,8), (3,7), (4,6), (6,4), (7,3), (8,2)
        blk = assemble_rho_gamma(p).block("beta:6")
        assert [tuple(x) for x in blk.labels] == [(2, 8), (3, 7), (4, 6), (6, 4), (7, 3), (8, 2)]
        assert np.allclose(blk.z, [1, 1, p.beta_ratio(4, 6), p.beta_ratio(3, 7), p.beta_ratio(2, 8)])

    def test_genericity_rejected(self):
        p = ParamSet(3, (0, 0.3, 0.0), (0, 0.3, 0.0), r=2.0)
        with pytest.raises(GenericityError) as err:
            assemble_rho_gamma(p)
        assert (1, 2) in err.value.pairs

    def test_requires_r(self, rng):
        with pytest.raises(ValueError, match="r"):
            assemble_rho_gamma(random_params(4, rng))

    def test_dense_gate(self, rng):
        G = assemble_rho_gamma(random_params(DENSE_GATE + 1, rng, r=2.0))
        with pytest.raises(ValueError, match="limited"):
            G.densify()


class TestRho:
    def test_three_by_three_display(self, rng):
        p = random_params(3, rng, r=2.2)
        assert np.allclose(assemble_rho(p).densify(), displayed(displays.RHO_3, p), rtol=0, atol=1e-15)
        assert np.allclose(extract_D(p), displayed(displays.D_3, p), rtol=0, atol=1e-15)

    def test_four_by_four_display(self, rng):
        for _ in range(5):
            p = random_params(4, rng, r=float(rng.uniform(1, 4)))
            assert np.allclose(assemble_rho(p).densify(), displayed(displays.RHO_4, p), rtol=0, atol=1e-15)
            assert np.allclose(extract_D(p), displayed(displays.D_4, p), rtol=0, atol=1e-15)

    @pytest.mark.parametrize("n", range(3, 13))
    def test_exact_partial_transpose(self, rng, n):
        p = random_params(n, rng, r=1.5)
        G = assemble_rho_gamma(p)
        assert np.array_equal(assemble_rho(p, rho_gamma=G).densify(), partial_transpose(G.densify(), n))

    @pytest.mark.parametrize("n", [4, 5, 6, 9])
    def test_direct_sum_items(self, rng, n):
        p = random_params(n, rng, r=1.5)
        rho = assemble_rho(p).densify()
        ones = [(1, 2), (2, 1), (n - 1, n), (n, n - 1)]
        assert np.array_equal(principal_submatrix(rho, ones, n), np.eye(4))
        twos = [(1, n)] + [lab for i in range(2, n - 1) for lab in ((i, i + 1), (i + 1, i))] + [(n, 1)]
        assert len(twos) == 2 * n - 4
        assert np.array_equal(principal_submatrix(rho, twos, n), 2 * np.eye(2 * n - 4))
        for k in range(3, n):
            up = [(t, k + t - 1) for t in range(1, n - k + 2)]
            assert np.allclose(principal_submatrix(rho, up, n), build_Q(n - k + 1, [1] * (n - k)))
            low = [(k + t - 1, t) for t in range(1, n - k + 2)]
            Q = build_Q(n - k + 1, q_block_arguments(p, k))
            assert np.allclose(principal_submatrix(rho, low, n), Q, rtol=0, atol=1e-15)

    def test_path_blocks_are_positive_definite(self, rng):
        p = random_params(20, rng, r=1.5)
        for b in assemble_rho(p).blocks:
            if b.kind == "path":
                assert np.linalg.eigvalsh(b.dense())[0] > 0

    def test_d_block_matches_rules(self, rng):
        for n in (3, 4, 7, 15):
            p = random_params(n, rng, r=2.0)
            R = assemble_rho(p)
            (D_blk,) = [b for b in R.blocks if b.kind == "dense"]
            assert np.allclose(D_blk.matrix, d_rules(p, 2.0), rtol=0, atol=1e-15)


class TestExtractD:
    def test_cubic(self):
        for t in (0.3, 1.1, 2.0):
            p = cubic_example_params(t)
            a = np.exp(1j * t)
            shown = np.array([[0, 1 / a, 2 / a**2], [a, 0, 1], [2 * a**2, 1, 0]])
            assert np.allclose(extract_D(p, 0.0), shown, rtol=0, atol=1e-15)
            for r in (-2.0, 0.0, 0.5, 1.7, 3.0):
                assert np.linalg.det(extract_D(p, r)).real == pytest.approx(
                    r**3 - 6 * r + 2 * (a + 1 / a).real, abs=1e-10)

    def test_quartic(self):
        # det(D0 + r I) is the characteristic polynomial of -D0
        coeffs = np.poly(-extract_D(quartic_example_params(), 0.0))
        assert np.allclose(coeffs, [1, 0, -12, 6, 17], atol=1e-9)

    def test_shift(self, rng):
        p = random_params(7, rng)
        assert np.allclose(extract_D(p, 5.0) - extract_D(p, 0.0), 5 * np.eye(7), rtol=0, atol=0)

    @pytest.mark.parametrize("n", [5, 6, 9])
    def test_first_and_last_columns(self, rng, n):
        p = random_params(n, rng)
        D = extract_D(p, 0.0)
        a, b = p.alpha, p.beta
        first = a.copy()
        first[0] = 0
        first[2] *= 2
        assert np.allclose(D[:, 0], first)
        last = np.r_[np.conj(a[-1]), b[1:-1], 0]
        last[n - 3] *= 2
        assert np.allclose(D[:, -1], last)
        assert np.array_equal(D, D.conj().T)
        i, j = np.indices((n, n))
        far = (np.abs(i - j) > 2) & (i != 0) & (j != 0) & (i != n - 1) & (j != n - 1)
        assert np.all(D[far] == 0)


class TestAlternative:
    def test_A_at_one(self):
        A = alternative_A(1 + 0j)
        assert np.array_equal(A.real, [[2, -1, -1, 0], [-1, 2, 0, -1], [-1, 0, 2, -1], [0, -1, -1, 2]])
        rep = kernel_report(A)
        assert rep.corank == 1
        v = rep.basis[:, 0]
        assert np.allclose(v / v[0], np.ones(4))

    def test_B_kernel(self):
        p, alpha = 2.0, np.exp(1j * math.pi / 8)
        B = alternative_B(p, 0.5, alpha)
        rep = kernel_report(B)
        assert rep.corank == 1
        assert np.allclose(B @ np.array([p, p, alpha, alpha]), 0, atol=1e-14)

    def test_displays(self, rng):
        for _ in range(5):
            p, r, t = rng.uniform(0.2, 5), rng.uniform(0.05, 0.95), rng.uniform(-0.7, 0.7)
            rho, rg = assemble_alternative_4x4(p, r, t)
            ns = displays.alternative_symbols(p, r, np.exp(1j * t))
            assert np.allclose(rho.densify(), displays.evaluate(displays.ALT_RHO, ns), rtol=0, atol=1e-15)
            assert np.allclose(rg.densify(), displays.evaluate(displays.ALT_RHO_GAMMA, ns), rtol=0, atol=1e-15)
            assert rho.coverage_ok() and rg.coverage_ok()

    def test_coranks_and_kernels(self, rng):
        for _ in range(20):
            p, r, t = rng.uniform(0.2, 5), rng.uniform(0.05, 0.95), rng.uniform(-0.75, 0.75)
            rho, rg = (A.densify() for A in assemble_alternative_4x4(p, r, t))
            k1, k5 = kernel_report(rho), kernel_report(rg)
            assert (k1.corank, k5.corank) == (1, 5) and k1.ok and k5.ok
            e = np.zeros(16)
            e[[0, 5, 10, 15]] = 1
            assert np.linalg.norm(rho @ e) <= 1e-12
            for v in alternative_kernel_vectors(p, np.exp(1j * t)):
                assert np.linalg.norm(rg @ v) <= 1e-10

    @pytest.mark.parametrize("args", [(0, 0.5, 0), (1, 1.0, 0), (1, 0, 0), (1, 0.5, math.pi / 4)])
    def test_rejects_outside_region(self, args):
        with pytest.raises(ValueError):
            assemble_alternative_4x4(*args)


@given(st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_block_kernel_vectors(n, seed):
    p = random_params(n, np.random.default_rng(seed), r=2.0)
    for b in rho_gamma_blocks(p):
        v = b.kernel_vector()
        assert np.linalg.norm(b.dense() @ v) <= 1e-13 * np.linalg.norm(v)
