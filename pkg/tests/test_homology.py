import random

import pytest
import sympy
from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from fibcat import core, homology, randgen, transport


def oracle_homology(C, d):
    """Independent dense-matrix boundary oracle for reduced checks.

    Ranks over the rationals via sympy, torsion via sympy's Smith normal
    form; shares nothing with the production engine beyond the nerve.
    """
    nrv = homology.nerve(C, d)
    counts = nrv.counts()
    betti, torsion = [], []
    mats = {k: Matrix(homology.boundary_matrix(nrv, k))
            for k in range(1, d + 2)}
    for k in range(d + 1):
        rank_out = mats[k].rank() if k >= 1 and mats[k].rows and mats[k].cols \
            else 0
        nxt = mats[k + 1]
        rank_in = nxt.rank() if nxt.rows and nxt.cols else 0
        betti.append(counts[k] - rank_out - rank_in)
        if nxt.rows and nxt.cols:
            diag = sympy_snf(nxt, domain=sympy.ZZ)
            divs = [abs(int(diag[i, i])) for i in range(min(diag.shape))]
            torsion.append(sorted(v for v in divs if v > 1))
        else:
            torsion.append([])
    return betti, torsion


class TestNerve:
    def test_point(self):
        assert homology.nerve(core.terminal(), 2).counts() == [1, 0, 0, 0]

    def test_interval_1(self):
        assert homology.nerve(core.interval(1), 2).counts() == [2, 1, 0, 0]

    def test_idempotent_chains(self):
        # one identity-free chain in each dimension: (e), (e,e), ...
        assert homology.nerve(core.idempotent_category(), 2).counts() == \
            [1, 1, 1, 1]

    def test_face_relations_hold(self):
        homology.nerve(core.retract_category(), 2)  # raises on violation


class TestSmithNormalForm:
    def test_diagonal_divisibility(self):
        M = [[2, 4, 4], [-6, 6, 12], [10, 4, 16]]
        divisors = homology.smith_normal_form(M)
        # product of invariant factors is |det| = 624
        assert divisors[0] * divisors[1] * divisors[2] == 624
        for a, b in zip(divisors, divisors[1:]):
            assert b % a == 0

    def test_matches_sympy_on_random_matrices(self):
        rng = random.Random(0)
        for _ in range(25):
            rows, cols = rng.randint(1, 5), rng.randint(1, 5)
            M = [[rng.randint(-6, 6) for _ in range(cols)]
                 for _ in range(rows)]
            mine = homology.smith_normal_form(M)
            diag = sympy_snf(Matrix(M), domain=sympy.ZZ)
            theirs = sorted(abs(int(diag[i, i]))
                            for i in range(min(diag.shape))
                            if diag[i, i] != 0)
            assert sorted(mine) == theirs


class TestHomology:
    @pytest.mark.parametrize("n", range(5))
    def test_intervals_are_contractible(self, n):
        rep = homology.homology(core.interval(n), 3)
        assert rep.reduced_trivial_up_to(3)

    def test_walking_iso_is_contractible(self):
        rep = homology.homology(core.walking_isomorphism(), 3)
        assert rep.reduced_trivial_up_to(3)

    def test_cyclic_group_two(self):
        rep = homology.homology(core.cyclic_group_category(2), 3)
        assert rep.degree(0) == (1, ())
        assert rep.degree(1) == (0, (2,))
        assert rep.degree(2) == (0, ())
        assert rep.degree(3) == (0, (2,))

    def test_cyclic_group_three(self):
        rep = homology.homology(core.cyclic_group_category(3), 3)
        assert rep.degree(1) == (0, (3,))
        assert rep.degree(3) == (0, (3,))

    def test_against_boundary_oracle(self):
        rng = random.Random(11)
        cats = [core.retract_category(), core.idempotent_category(),
                core.cyclic_group_category(2), core.walking_isomorphism()]
        cats += [randgen.random_category(rng, 3, 8) for _ in range(8)]
        for C in cats:
            rep = homology.homology(C, 3)
            betti, torsion = oracle_homology(C, 3)
            assert rep.betti == betti
            assert [list(t) for t in rep.torsion] == torsion

    def test_relabeling_invariance(self):
        rng = random.Random(3)
        for _ in range(6):
            C = randgen.random_category(rng, 3, 8)
            D = core.prefix_relabel(C, "zz.")
            a = homology.homology(C, 2)
            b = homology.homology(D, 2)
            assert a.betti == b.betti and a.torsion == b.torsion

    def test_degree_zero_counts_components(self):
        A = core.prefix_relabel(core.interval(1), "a.")
        B = core.prefix_relabel(core.cyclic_group_category(2), "b.")
        rep = homology.homology(core.disjoint_union(A, B), 1)
        assert rep.betti[0] == 2

    def test_certificates_are_monotone(self):
        rng = random.Random(9)
        for _ in range(6):
            C = randgen.random_category(rng, 3, 7)
            r3 = homology.homology(C, 3)
            if r3.reduced_trivial_up_to(3):
                assert r3.reduced_trivial_up_to(2)


class TestGuards:
    def test_matrix_cap_failure_is_loud(self, monkeypatch):
        monkeypatch.setattr(homology, "_MATRIX_CAP", 2)
        with pytest.raises(homology.MatrixCapExceeded):
            homology.homology(core.interval(2), 2)


class TestPi0:
    def test_interval(self):
        assert len(homology.pi0(core.interval(3))) == 1

    def test_disjoint_union_adds(self):
        A = core.prefix_relabel(core.interval(2), "a.")
        B = core.prefix_relabel(core.interval(1), "b.")
        assert len(homology.pi0(core.disjoint_union(A, B))) == 2


class TestFinality:
    def test_point_at_final_object_is_final(self):
        for n in range(3):
            In = core.interval(n)
            assert homology.is_final(core.point(In, str(n))).ok
            assert homology.is_initial(core.point(In, "0")).ok

    def test_point_at_bottom_is_not_final(self):
        assert not homology.is_final(core.point(core.interval(1), "0")).ok

    def test_right_adjoint_inclusion_is_final(self):
        I2 = core.interval(2)
        sub = core.full_subcategory(I2, ["1", "2"])
        inc = core.inclusion_functor(sub, I2)
        assert homology.is_final(inc).ok
        assert not homology.is_initial(inc).ok

    def test_product_projection_is_final_and_initial(self):
        C = core.interval(1)
        P, pr1, _ = core.product_projections(C, core.interval(1))
        assert homology.is_final(pr1).ok
        assert homology.is_initial(pr1).ok

    def test_certified_mode_refines_pi0(self):
        I2 = core.interval(2)
        sub = core.full_subcategory(I2, ["1", "2"])
        inc = core.inclusion_functor(sub, I2)
        v = homology.is_final(inc, mode=("certified", 2))
        assert v.ok

    def test_finality_induces_pi0_bijection(self):
        rng = random.Random(21)
        for _ in range(10):
            f = randgen.random_final_functor(rng)
            assert len(homology.pi0(f.source)) == len(homology.pi0(f.target))


class TestColimitExactness:
    def test_final_functor_preserves_all_set_colimits(self):
        I1 = core.interval(1)
        inc = core.point(I1, "1")
        for G in homology.all_set_valued_functors(I1, max_size=2):
            assert homology.colimit_comparison_is_bijective(inc, G)

    def test_non_final_functor_fails_on_some_diagram(self):
        I1 = core.interval(1)
        bad = core.point(I1, "0")
        assert not homology.is_final(bad).ok
        assert any(not homology.colimit_comparison_is_bijective(bad, G)
                   for G in homology.all_set_valued_functors(I1, max_size=2))


class TestTheoremBStyleChecks:
    def test_pi0_square_with_constant_fibers(self):
        # a product projection with connected base: components multiply
        rng = random.Random(50)
        for _ in range(5):
            pi = randgen.random_two_handed_fibration(rng)
            Yp = randgen.random_category(rng, 2, 5, prefix="y.")
            f = randgen.random_functor_between(rng, Yp, pi.target)
            assert homology.quillenB_pi0_square(f, pi)["pullback"]

    def test_point_base_reduces_to_fiber_components(self):
        C = core.interval(1)
        K = core.interval(1)
        P, pr1, pr2 = core.product_projections(C, K)
        f = core.point(K, "0")
        res = homology.quillenB_pi0_square(f, pr2)
        assert res["pullback"]
        assert res["corner_components"] == 1

    def test_empty_corner_is_a_pullback_of_empty_sets(self):
        K = core.interval(1)
        empty = core.FiniteCategory([], [], {}, {})
        f = core.Functor(empty, K, {}, {})
        C = core.terminal()
        P, pr1, pr2 = core.product_projections(C, K)
        assert homology.quillenB_pi0_square(f, pr2)["pullback"]

    def test_refusal_when_the_leg_is_one_handed_only(self):
        # the mapping cylinder of a non-initial functor: left final only
        from fibcat import correspondences as corrs, fibrations as fib
        A = core.relabel(core.terminal(), {"*": "a*"}, {"id": "a.id"})
        B = core.interval(1)
        cyl = corrs.collage(corrs.hom_profunctor_along(
            core.constant_functor(A, B, "1"), core.identity_functor(B)))
        assert fib.is_left_final_fibration(cyl.projection).ok
        assert not fib.is_right_initial_fibration(cyl.projection).ok
        f = core.point(core.interval(1), "0")
        with pytest.raises(core.PreconditionError):
            homology.quillenB_pi0_square(f, cyl.projection)

    def test_slice_comparison_hypothesis(self):
        # a left adjoint has contractible slices, so the certificate holds
        I2 = core.interval(2)
        inc = core.inclusion_functor(
            core.full_subcategory(I2, ["0", "1"]), I2)
        ok, witness = homology.theoremB_hypothesis(inc, 1)
        assert ok
        # two points over different ends: component counts of the slices
        # jump along the base arrow
        C = core.discrete_category(["a", "b"])
        bad = core.Functor(C, core.interval(1), {"a": "0", "b": "1"},
                           {"id_a": "0->0", "id_b": "1->1"})
        ok2, witness2 = homology.theoremB_hypothesis(bad, 1)
        assert not ok2 and witness2["base_morphism"] == "0->1"

    def test_final_closure_driver_reports_no_violations(self):
        rng = random.Random(51)
        assert homology.check_final_closure(rng, rounds=10) == []


class TestChainMapCertificates:
    def test_identity_is_an_iso(self):
        assert homology.chain_map_induces_homology_iso(
            core.identity_functor(core.interval(2)), 2)

    def test_adjoint_collapse_is_an_iso(self):
        W = core.walking_isomorphism()
        assert homology.chain_map_induces_homology_iso(core.point(W, "a"), 2)

    def test_group_point_is_not_an_iso(self):
        Z2 = core.cyclic_group_category(2)
        assert not homology.chain_map_induces_homology_iso(
            core.point(Z2, "*"), 2)
