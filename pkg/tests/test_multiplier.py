import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfa import multiplier as mult
from qfa import penalty as pen
from qfa import topology as topo
from qfa.sampler import evaluate_energy


@pytest.fixture(scope="module")
def m33(pegasus8, library):
    return mult.build_multiplier(3, 3, pegasus8, library, c=2.0)


class TestBinarySpins:
    def test_42_in_8_bits(self):
        spins = mult.binary_spins(42, 8)
        # MSB-to-LSB reading of 00101010
        assert list(reversed(spins)) == [-1, -1, 1, -1, 1, -1, 1, -1]

    def test_zero(self):
        assert mult.binary_spins(0, 4) == [-1, -1, -1, -1]

    def test_overflow(self):
        with pytest.raises(mult.RepresentationError):
            mult.binary_spins(16, 4)

    @given(st.integers(min_value=0, max_value=2 ** 12 - 1))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip(self, n):
        assert mult.spins_to_int(mult.binary_spins(n, 12)) == n


class TestBuild:
    def test_chain_terms_at_c2(self, m33):
        layout, model = m33
        for a, b, _ in layout.chains:
            e = (a, b) if a < b else (b, a)
            assert model.couplings[e] == pytest.approx(-2.0)
        n_links = len(layout.chains)
        tile_offset = sum(pf.offset for pf in layout.penalties.values())
        assert model.offset == pytest.approx(tile_offset + 2.0 * n_links)

    def test_chain_terms_at_c15(self, pegasus8, library):
        layout, model = mult.build_multiplier(3, 3, pegasus8, library, c=1.5)
        for a, b, _ in layout.chains:
            e = (a, b) if a < b else (b, a)
            assert model.couplings[e] == pytest.approx(-1.5)

    def test_invalid_chain_strength(self, pegasus8, library):
        for bad in (0.0, -1.0, 2.5):
            with pytest.raises(ValueError):
                mult.build_multiplier(2, 2, pegasus8, library, c=bad)

    def test_model_is_hardware_compliant(self, pegasus8, m33):
        layout, model = m33
        assert topo.validate_model(pegasus8, model).ok

    def test_role_map_covers_everything(self, m33):
        layout, _ = m33
        for j in range(3):
            assert f"m_{j}" in layout.role_map
        for i in range(3):
            assert f"q_{i}" in layout.role_map
        for k in range(6):
            assert f"o_{k}" in layout.role_map
        for i, j in layout.cells():
            for role in ("m", "q", "in2", "c_in", "out", "c_out",
                         "anc0", "anc1"):
                assert f"cfa[{i},{j}].{role}" in layout.role_map

    def test_missing_library_entry(self, pegasus8):
        with pytest.raises(mult.MissingLibraryEntryError):
            mult.build_multiplier(2, 2, pegasus8, {}, c=2.0)

    def test_chain_links_are_hardware_edges(self, pegasus8, m33):
        layout, _ = m33
        for a, b, _ in layout.chains:
            assert pegasus8.has_edge(a, b)

    def test_chain_endpoints_are_tile_ports(self, m33):
        layout, _ = m33
        port_qubits = set()
        for line in layout.tiles:
            for t in line:
                port_qubits.update(t.qubits)
        by_role = {}
        for a, b, role in layout.chains:
            by_role.setdefault(role, []).append((a, b))
        for role, links in by_role.items():
            ends = {}
            for a, b in links:
                for q in (a, b):
                    ends[q] = ends.get(q, 0) + 1
            # the two odd-degree nodes of the path are the logical endpoints
            endpoints = [q for q, d in ends.items() if d == 1]
            assert len(endpoints) == 2
            for q in endpoints:
                assert q in port_qubits, (role, q)


class TestZeroEnergy:
    def test_ground_truth_energy_zero(self, m33):
        layout, model = m33
        for p, q in [(3, 3), (5, 7), (7, 5), (7, 7), (1, 5), (0, 0)]:
            spins = mult.circuit_assignment(layout, p, q)
            assert evaluate_energy(model, spins) == pytest.approx(0.0, abs=1e-9)

    def test_all_methods_zero_energy(self, pegasus8, m33):
        layout, model = m33
        for method in mult.InitMethod:
            lay2, mdl2 = mult.apply_problem(layout, model, 35, method,
                                            graph=pegasus8)
            spins = mult.circuit_assignment(lay2, 5, 7)
            free = {q: s for q, s in spins.items() if q not in mdl2.clamped}
            if method is mult.InitMethod.FLUX_BIAS:
                free.update({q: v for q, v in mdl2.flux_biases.items()})
            assert evaluate_energy(mdl2, free) == pytest.approx(0.0, abs=1e-9)

    def test_wrong_factors_positive_energy(self, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35,
                                     mult.InitMethod.EXTRA_CHAIN)
        spins = mult.circuit_assignment(layout, 3, 7)
        assert evaluate_energy(mdl2, spins) > 1.0

    def test_degenerate_widths(self, pegasus8, library):
        for n, m in ((3, 1), (1, 3), (1, 1), (4, 2)):
            layout, model = mult.build_multiplier(n, m, pegasus8, library)
            for p in range(1 << n):
                for q in range(1 << m):
                    spins = mult.circuit_assignment(layout, p, q)
                    e = evaluate_energy(model, spins)
                    assert e == pytest.approx(0.0, abs=1e-9), (n, m, p, q)


class TestApplyProblem:
    def test_flux_bias_is_pass_through(self, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35,
                                     mult.InitMethod.FLUX_BIAS)
        assert mdl2.biases == model.biases
        assert mdl2.couplings == model.couplings
        targets = mult.problem_targets(layout, 35)
        assert mdl2.flux_biases == targets
        assert len(targets) == 6 + 3 + 3     # outputs + in2 row + c_in col

    def test_extra_chain_bias_algebra(self, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35,
                                     mult.InitMethod.EXTRA_CHAIN)
        targets = mult.problem_targets(layout, 35)
        for q, v in targets.items():
            assert mdl2.biases[q] == pytest.approx(model.biases.get(q, 0.0) - 2 * v)
        assert mdl2.offset == pytest.approx(model.offset + 2.0 * len(targets))
        # evaluating both models at any assignment differs by the pin terms
        spins = mult.circuit_assignment(layout, 5, 7)
        for flip_q in list(targets)[:3]:
            flipped = dict(spins)
            flipped[flip_q] = -flipped[flip_q]
            delta = (evaluate_energy(mdl2, flipped)
                     - evaluate_energy(model, flipped))
            expect = sum(2.0 - 2.0 * v * flipped[q] for q, v in targets.items())
            assert delta == pytest.approx(expect)

    def test_extra_chain_never_rescales(self, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35,
                                     mult.InitMethod.EXTRA_CHAIN)
        assert all(abs(b) <= 3.0 for b in mdl2.biases.values())
        assert mdl2.gap_reference == model.gap_reference

    def test_extra_chain_neighbor_variant(self, pegasus8, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35,
                                     mult.InitMethod.EXTRA_CHAIN,
                                     chain_variant="neighbor", graph=pegasus8)
        targets = mult.problem_targets(layout, 35)
        for q, v in targets.items():
            assert mdl2.biases[q] == pytest.approx(model.biases.get(q, 0.0) - 2 * v)
        assert len(mdl2.clamped) == len(targets)
        assert set(mdl2.clamped.values()) <= {-1, 1}

    def test_api_fix_clamps_and_folds(self, m33):
        layout, model = m33
        _, mdl2 = mult.apply_problem(layout, model, 35, mult.InitMethod.API_FIX)
        targets = mult.problem_targets(layout, 35)
        assert mdl2.clamped == targets
        for q in targets:
            assert q not in mdl2.biases
            assert all(q not in e for e in mdl2.couplings)

    def test_api_fix_rescaling(self):
        # constructed substitution pushing a bias to 6: three couplings of
        # -2 into one qubit, all clamped partners at -1
        model = mult.IsingModel(
            offset=0.0, biases={0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0},
            couplings={(0, 3): -2.0, (1, 3): -2.0, (2, 3): -2.0},
            gap_reference=3.0)
        out = mult._apply_api_fix(model, {0: -1, 1: -1, 2: -1})
        assert out.biases[3] == pytest.approx(6.0 / 1.5)
        assert out.gap_reference == pytest.approx(3.0 / 1.5)

    def test_unrepresentable_number(self, m33):
        layout, model = m33
        with pytest.raises(mult.RepresentationError):
            mult.apply_problem(layout, model, 1 << 6, mult.InitMethod.FLUX_BIAS)

    def test_adhoc_uses_specialized_entries(self, m33):
        layout, model = m33
        lay2, mdl2 = mult.apply_problem(layout, model, 35,
                                        mult.InitMethod.ADHOC_LIBRARY)
        # border tiles carry increased gaps; interior tiles keep the base
        assert lay2.penalties[(1, 1)].gap == pytest.approx(2.0)
        assert lay2.penalties[(0, 1)].gap >= 3.0
        assert lay2.penalties[(1, 0)].gap >= 3.0
        # every fixed qubit is clamped to its fixed value
        for (i, j), pf in lay2.penalties.items():
            for var, val in lay2.specs[(i, j)].fixing.items():
                assert mdl2.clamped[pf.placement[var]] == 2 * val - 1

    def test_methods_agree_on_argmin_2x2(self, pegasus8, library):
        """Exhaustive over all factor pairs: E = 0 iff p*q = N, all methods."""
        layout, model = mult.build_multiplier(2, 2, pegasus8, library)
        N = 9
        for method in mult.InitMethod:
            lay2, mdl2 = mult.apply_problem(layout, model, N, method,
                                            graph=pegasus8)
            for p, q in itertools.product(range(4), repeat=2):
                spins = mult.circuit_assignment(lay2, p, q)
                full = dict(spins)
                full.update(mdl2.clamped)
                if method is mult.InitMethod.FLUX_BIAS:
                    full.update(mdl2.flux_biases)
                e = evaluate_energy(mdl2, {k: v for k, v in full.items()
                                           if k not in mdl2.clamped})
                if p * q == N:
                    assert abs(e) < 1e-9, (method, p, q, e)
                else:
                    assert e > 1e-6, (method, p, q, e)

    def test_chain_offset_bookkeeping(self, pegasus8, library):
        """Energy at any all-chains-satisfied assignment is c-independent."""
        energies = []
        for c in (1.0, 1.5, 2.0):
            layout, model = mult.build_multiplier(2, 2, pegasus8, library, c=c)
            spins = mult.circuit_assignment(layout, 3, 2)
            energies.append(evaluate_energy(model, spins))
        assert max(energies) - min(energies) < 1e-9


class TestSerialization:
    def test_model_json_roundtrip(self, m33):
        layout, model = m33
        text = mult.model_to_json(layout, model)
        model2 = mult.model_from_json(text)
        assert model2.offset == model.offset
        assert model2.biases == model.biases
        assert model2.couplings == model.couplings
        assert model2.clamped == model.clamped
        assert model2.flux_biases == model.flux_biases
        assert model2.gap_reference == model.gap_reference
        # byte-exact re-serialization
        assert mult.model_to_json(layout, model) == text
