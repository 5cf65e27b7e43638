import json
import os
import random
import subprocess
import sys

import pytest

from fibcat import cli, core, correspondences as corrs, documents as docs
from fibcat import fixtures, randgen
from fibcat.homology import SetValuedFunctor

FIXTURES = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures")


def run_cli(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", "fibcat.cli", *argv],
        capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    if os.path.isdir(FIXTURES):
        return FIXTURES
    path = tmp_path_factory.mktemp("fixtures")
    fixtures.write_fixtures(str(path))
    return str(path)


class TestDocuments:
    def test_category_round_trip_is_byte_identical(self):
        for C in [core.interval(2), core.retract_category(),
                  core.walking_isomorphism()]:
            text = docs.dumps(docs.category_to_doc(C))
            parsed = docs.category_from_doc(docs.loads(text))
            assert docs.dumps(docs.category_to_doc(parsed)) == text
            assert parsed == C

    def test_functor_round_trip(self):
        Ar, ev_s, ev_t = core.arrow_category(core.interval(1))
        text = docs.dumps(docs.functor_to_doc(ev_t))
        parsed = docs.functor_from_doc(docs.loads(text))
        assert parsed == ev_t

    def test_profunctor_round_trip(self):
        rng = random.Random(0)
        A = randgen.random_category(rng, 2, 5, prefix="a.")
        B = randgen.random_category(rng, 2, 5, prefix="b.")
        P = randgen.random_profunctor(rng, A, B)
        text = docs.dumps(docs.profunctor_to_doc(P))
        parsed = docs.profunctor_from_doc(docs.loads(text))
        assert docs.dumps(docs.profunctor_to_doc(parsed)) == text

    def test_correspondence_round_trip(self):
        c = corrs.identity_correspondence(core.interval(1))
        text = docs.dumps(docs.correspondence_to_doc(c))
        parsed = docs.correspondence_from_doc(docs.loads(text))
        assert docs.dumps(docs.correspondence_to_doc(parsed)) == text

    def test_set_valued_round_trip(self):
        F = SetValuedFunctor(
            core.interval(1), {"0": ("a",), "1": ("b", "c")},
            {"0->0": {"a": "a"}, "1->1": {"b": "b", "c": "c"},
             "0->1": {"a": "b"}}).validate()
        text = docs.dumps(docs.set_valued_to_doc(F))
        parsed = docs.set_valued_from_doc(docs.loads(text))
        assert docs.dumps(docs.set_valued_to_doc(parsed)) == text

    def test_schema_violation_raises_document_error(self):
        with pytest.raises(docs.DocumentError):
            docs.category_from_doc({"format_version": "1", "type": "category",
                                    "objects": "oops", "morphisms": [],
                                    "identities": {}, "compose": []})

    def test_missing_composite_is_a_validation_failure(self):
        doc = docs.category_to_doc(core.interval(2))
        doc["compose"] = [e for e in doc["compose"]
                          if e != ["1->2", "0->1", "0->2"]]
        with pytest.raises(docs.ValidationFailure) as err:
            docs.category_from_doc(doc)
        assert any("missing composite" in line for line in err.value.report)


class TestCliExitContract:
    def test_parse_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, out, err = run_cli("homology", str(bad))
        assert code == 2

    def test_validation_error_is_3(self, fixture_dir):
        code, out, err = run_cli(
            "homology", os.path.join(fixture_dir, "defect_missing_composite.json"))
        assert code == 3
        assert "missing composite" in err

    def test_bad_composite_is_3(self, fixture_dir):
        code, out, err = run_cli(
            "homology", os.path.join(fixture_dir, "defect_bad_composite.json"))
        assert code == 3

    def test_precondition_refusal_is_4(self, fixture_dir, tmp_path):
        ident = docs.dumps(docs.functor_to_doc(
            core.identity_functor(core.full_subcategory(core.interval(2),
                                                        ["0", "2"]))))
        z = tmp_path / "z.json"
        z.write_text(ident)
        code, out, err = run_cli(
            "pushforward",
            "--fibration", os.path.join(fixture_dir, "inclusion_02_in_2.json"),
            "--over", str(z))
        assert code == 4
        assert "precondition" in err

    def test_success_is_0_even_with_negative_verdicts(self, fixture_dir):
        code, out, err = run_cli(
            "classify", "--functor",
            os.path.join(fixture_dir, "inclusion_02_in_2.json"))
        assert code == 0
        report = json.loads(out)
        assert report["verdicts"]["exponentiable"] is False
        assert report["witnesses"]["exponentiable"]["factorizations"] == 0


class TestCliCommands:
    def test_classify_arrow_evaluation(self, fixture_dir):
        code, out, err = run_cli(
            "classify", "--functor",
            os.path.join(fixture_dir, "ev_t_arrow_2.json"))
        assert code == 0
        verdicts = json.loads(out)["verdicts"]
        assert verdicts["cocartesian"] and verdicts["left_final"]
        assert not verdicts["discrete_opfib"]

    def test_compose_prof_idem_ret(self, fixture_dir):
        code, out, err = run_cli(
            "compose", "--mode", "prof",
            os.path.join(fixture_dir, "idem_to_ret_bimodule.json"),
            os.path.join(fixture_dir, "ret_to_idem_bimodule.json"))
        assert code == 0
        report = json.loads(out)
        assert report["verdicts"]["route_coherence_checked"]
        elements = report["composite"]["elements"]["*"]["*"]
        assert len(elements) == 2

    def test_compose_corr_mode(self, fixture_dir):
        code, out, err = run_cli(
            "compose", "--mode", "corr",
            os.path.join(fixture_dir, "two_step_left.json"),
            os.path.join(fixture_dir, "two_step_right.json"))
        assert code == 0, err
        report = json.loads(out)
        assert report["verdicts"]["route_coherence_checked"]
        total = report["composite"]["total"]
        assert sorted(report["composite"]["fiber_s_objects"]) == ["a*"]

    def test_compose_bifib_matches_prof(self, fixture_dir):
        a = os.path.join(fixture_dir, "idem_to_ret_bimodule.json")
        b = os.path.join(fixture_dir, "ret_to_idem_bimodule.json")
        _, out_prof, _ = run_cli("compose", "--mode", "prof", a, b)
        _, out_bifib, _ = run_cli("compose", "--mode", "bifib", a, b)
        sizes = lambda o: {k: len(v) for k, v in
                           json.loads(o)["composite"]["elements"]["*"].items()}
        assert sizes(out_prof) == sizes(out_bifib)

    def test_roundtrip_identity_correspondence(self, fixture_dir):
        code, out, err = run_cli(
            "roundtrip",
            os.path.join(fixture_dir, "identity_corr_interval_1.json"))
        assert code == 0
        assert all(json.loads(out)["verdicts"].values())

    def test_final_on_product_projection(self, fixture_dir):
        code, out, err = run_cli(
            "final", "--functor",
            os.path.join(fixture_dir, "product_proj_1x1.json"),
            "--certify-dim", "2")
        assert code == 0
        assert json.loads(out)["verdicts"]["final"]

    def test_replace_lfib_emits_a_diagram(self, fixture_dir):
        code, out, err = run_cli(
            "replace", "--kind", "lfib", "--functor",
            os.path.join(fixture_dir, "ev_t_arrow_1.json"))
        assert code == 0
        report = json.loads(out)
        assert report["verdicts"]["discrete_opfibration"]
        assert report["verdicts"]["universal_property_spot_check"]

    def test_initial_on_product_projection(self, fixture_dir):
        code, out, err = run_cli(
            "initial", "--functor",
            os.path.join(fixture_dir, "product_proj_1x1.json"))
        assert code == 0
        assert json.loads(out)["verdicts"]["initial"]

    def test_replace_cart_and_rfib(self, fixture_dir):
        path = os.path.join(fixture_dir, "ev_t_arrow_1.json")
        code, out, err = run_cli("replace", "--kind", "cart",
                                 "--functor", path)
        assert code == 0 and json.loads(out)["verdicts"]["cartesian"]
        code, out, err = run_cli("replace", "--kind", "rfib",
                                 "--functor", path)
        assert code == 0
        assert json.loads(out)["verdicts"]["discrete_fibration"]

    def test_pushforward_success_path(self, fixture_dir, tmp_path):
        I1 = core.interval(1)
        Z = core.prefix_relabel(I1, "z.")
        zeta = core.Functor(Z, I1, {"z.0": "0", "z.1": "1"},
                            {"z.0->0": "0->0", "z.0->1": "0->1",
                             "z.1->1": "1->1"})
        fib_path = tmp_path / "pi.json"
        fib_path.write_text(docs.dumps(docs.functor_to_doc(
            core.identity_functor(I1))))
        z_path = tmp_path / "zeta.json"
        z_path.write_text(docs.dumps(docs.functor_to_doc(zeta)))
        code, out, err = run_cli("pushforward", "--fibration", str(fib_path),
                                 "--over", str(z_path))
        assert code == 0, err
        report = json.loads(out)
        assert report["verdicts"]["adjunction_spot_check"]
        assert len(report["pushforward"]["source"]["objects"]) == 2

    def test_homology_reports_exact_groups(self, fixture_dir):
        code, out, err = run_cli(
            "homology", os.path.join(fixture_dir, "cyclic_2.json"),
            "--max-dim", "3")
        assert code == 0
        report = json.loads(out)
        assert report["betti"] == [1, 0, 0, 0]
        assert report["torsion"] == [[], [2], [], [2]]

    def test_reports_are_deterministic(self, fixture_dir):
        path = os.path.join(fixture_dir, "ev_t_arrow_1.json")
        _, out1, _ = run_cli("classify", "--functor", path)
        _, out2, _ = run_cli("classify", "--functor", path)
        assert out1 == out2


class TestSuiteRunner:
    def test_suite_passes_and_is_thread_invariant(self, tmp_path):
        code1, out1, err1 = run_cli("suite", "--seed", "5", "--size", "1")
        assert code1 == 0, err1
        report = json.loads(out1)
        assert report["verdicts"]["all_passed"], report
        code2, out2, _ = run_cli("suite", "--seed", "5", "--size", "1",
                                 "--jobs", "4")
        assert out1 == out2

    def test_failure_artifacts_are_written(self, tmp_path, monkeypatch):
        # force a failing case by running a size-0 suite with a stubbed case
        from fibcat import cli as cli_mod
        art = tmp_path / "artifacts"
        cases = [("planted", lambda: (False, {
            "instance.json": docs.category_to_doc(core.interval(1))}))]
        monkeypatch.setattr(cli_mod, "_suite_cases", lambda seed, size: cases)
        parser = cli_mod.build_parser()
        args = parser.parse_args(["suite", "--seed", "0", "--size", "1",
                                  "--artifacts", str(art)])
        args._echo = ["suite"]
        args._t0 = 0.0
        import io
        import contextlib
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = args.func(args)
        assert (art / "planted__instance.json").exists()
