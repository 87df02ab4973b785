"""Command-line interface: exit codes, JSON schema, file loading."""

import json

import pytest

from sistruct import systems, verify
from sistruct.cli import main, parse_report, report_document, serialize_report
from sistruct.systems import SystemFileError, load_system


class TestLoadSystem:
    def test_builtins(self):
        sw3 = load_system("sw:3")
        assert sw3.n == 3 and len(sw3.basis) == 5 and len(sw3.killing) == 3
        em1 = load_system("em1")
        assert em1.n == 3 and len(em1.basis) == 4
        assert load_system("osc-trivial").basis
        assert load_system("sphere3").lc_ricci_factor == 2.0

    def test_sw_dimension_parametrized(self):
        assert load_system("sw:5").n == 5
        with pytest.raises(SystemFileError, match="at least 3"):
            load_system("sw:2")

    def test_reserved_builtins(self):
        for name in ("em2", "em3"):
            with pytest.raises(SystemFileError, match="reserved"):
                load_system(name)

    def test_unknown_reference(self):
        with pytest.raises(SystemFileError, match="neither a builtin"):
            load_system("missing.toml")


GOOD_FILE = """
[system]
name = "sw3-file"
dimension = 3
coordinates = ["x", "y", "z"]

[potential]
potential = "a0*(x^2+y^2+z^2) + a1/x^2 + a2/y^2 + a3/z^2 + a4"
params = ["a0", "a1", "a2", "a3", "a4"]

[domain]
x = [0.5, 2.0]
y = [0.5, 2.0]
z = [0.5, 2.0]
excluded = ["x", "y", "z"]

[[killing]]
kind = "proper"
K1_1 = "1"

[tolerances]
"cotton-identity" = 1e-5
"""


class TestSystemFiles:
    def test_param_linear_family_loads(self, tmp_path):
        path = tmp_path / "sw3.toml"
        path.write_text(GOOD_FILE)
        system = load_system(str(path))
        assert system.name == "sw3-file"
        assert len(system.basis) == 5
        assert system.tolerances["cotton-identity"] == 1e-5
        report = verify.run_suite(system, 10, 42)
        assert report.mode == "nondeg"
        assert report.all_passed

    def test_metric_defaults_and_shorthand_keys(self, tmp_path):
        path = tmp_path / "m.toml"
        path.write_text(
            """
[system]
name = "curved"
dimension = 3
coordinates = ["x", "y", "z"]

[metric]
g11 = "4 / (1 + x^2 + y^2 + z^2)^2"
g2_2 = "4 / (1 + x^2 + y^2 + z^2)^2"
g33 = "4 / (1 + x^2 + y^2 + z^2)^2"
ricci_factor = 2.0

[domain]
x = [-0.5, 0.5]
y = [-0.5, 0.5]
z = [-0.5, 0.5]
"""
        )
        system = load_system(str(path))
        report = verify.run_suite(system, 10, 42)
        assert report.mode == "smoke"
        assert report.all_passed

    @pytest.mark.parametrize(
        "mutation,match",
        [
            ("dimension = 2", "dimension"),
            ('coordinates = ["x", "y"]', "coordinates"),
            ('kind = "weird"', "kind"),
            ('potential = "a0*a1*x"\nparams = ["a0", "a1"]', "product"),
        ],
    )
    def test_bad_files_rejected(self, tmp_path, mutation, match):
        text = GOOD_FILE
        if mutation.startswith("dimension"):
            text = text.replace("dimension = 3", mutation)
        elif mutation.startswith("coordinates"):
            text = text.replace('coordinates = ["x", "y", "z"]', mutation)
        elif mutation.startswith("kind"):
            text = text.replace('kind = "proper"', mutation)
        else:
            text = text.replace(
                'potential = "a0*(x^2+y^2+z^2) + a1/x^2 + a2/y^2 + a3/z^2 + a4"\n'
                'params = ["a0", "a1", "a2", "a3", "a4"]',
                mutation,
            )
        path = tmp_path / "bad.toml"
        path.write_text(text)
        with pytest.raises(SystemFileError, match=match):
            load_system(str(path))

    def test_missing_domain_rejected(self, tmp_path):
        path = tmp_path / "nodomain.toml"
        path.write_text(
            """
[system]
name = "x"
dimension = 3
coordinates = ["x", "y", "z"]
"""
        )
        with pytest.raises(SystemFileError, match="domain"):
            load_system(str(path))

    def test_toml_syntax_error_located(self, tmp_path):
        path = tmp_path / "syntax.toml"
        path.write_text("[system\nname = 3")
        with pytest.raises(SystemFileError, match="syntax.toml"):
            load_system(str(path))

    def test_expression_error_located(self, tmp_path):
        path = tmp_path / "expr.toml"
        path.write_text(
            GOOD_FILE.replace('excluded = ["x", "y", "z"]', 'excluded = ["2*("]')
        )
        with pytest.raises(SystemFileError, match=r"\[domain\] excluded"):
            load_system(str(path))


class TestExitCodes:
    def test_verify_pass_is_zero(self, capsys):
        assert main(["verify", "sw:3", "--points", "10"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_verify_failure_is_one(self, capsys):
        code = main(
            ["verify", "sw:3", "--points", "10",
             "--tol", "wilczynski-residual=1e-30"]
        )
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_usage_errors_are_two(self, capsys):
        assert main(["verify", "missing.toml"]) == 2
        assert main(["verify", "em2"]) == 2
        assert main(["verify", "sw:3", "--points", "4"]) == 2
        assert main(["analyze", "sphere3"]) == 2
        assert main(["show", "sw:3", "--point", "1,1"]) == 2
        assert main(["show", "sw:3", "--point", "0,1,1"]) == 2
        assert main(["show", "sw:3", "--point", "banana,1,1"]) == 2
        capsys.readouterr()

    def test_bad_tol_is_two(self, capsys):
        assert main(["verify", "sw:3", "--tol", "nonsense"]) == 2
        assert main(["verify", "sw:3", "--tol", "a=b"]) == 2
        capsys.readouterr()


class TestJsonReport:
    def test_schema_and_roundtrip(self, capsys):
        assert main(["verify", "sw:3", "--points", "10", "--json"]) == 0
        out = capsys.readouterr().out
        doc = json.loads(out)  # no non-JSON bytes
        assert list(doc.keys()) == [
            "system", "mode", "seed", "points", "sign_convention",
            "classification", "checks", "summary", "properness", "condition",
        ]
        assert doc["system"] == "sw:3"
        assert doc["summary"]["failed"] == 0
        assert doc["summary"]["total"] == len(doc["checks"])
        for check in doc["checks"]:
            assert list(check.keys()) == [
                "name", "paper_ref", "max_abs_residual", "scale",
                "rel_residual", "tolerance", "pass",
            ]
            assert check["pass"] is True

    def test_parse_serialize_identity(self):
        report = verify.run_suite(systems.load_system("em1"), 10, 42)
        text = serialize_report(report)
        assert parse_report(text) == report_document(report)

    def test_byte_determinism(self, capsys):
        main(["verify", "sw:3", "--points", "10", "--json", "--seed", "42"])
        first = capsys.readouterr().out
        main(["verify", "sw:3", "--points", "10", "--json", "--seed", "42"])
        second = capsys.readouterr().out
        assert first == second
        assert first.encode("ascii")

    def test_em1_json_carries_variant_and_properness(self, capsys):
        assert main(["verify", "em1", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["properness"]["verdict"] == "conformal"
        assert doc["mode"] == "semideg"
        (variant,) = doc["variants"]
        assert variant["name"] == "eta-from-ricci-paper-variant"
        assert variant["pass"] is False
        assert doc["summary"]["failed"] == 0  # variant does not gate

    def test_seventeen_digit_reals(self, capsys):
        main(["verify", "sw:3", "--points", "10", "--json"])
        doc = json.loads(capsys.readouterr().out)
        value = doc["checks"][0]["tolerance"]
        assert value == 1e-8


class TestCommands:
    def test_analyze_nondeg(self, capsys):
        assert main(["analyze", "sw:4", "--points", "10"]) == 0
        out = capsys.readouterr().out
        assert "NonDegenerate" in out and "proper" in out

    def test_analyze_semideg_prints_relation(self, capsys):
        assert main(["analyze", "em1"]) == 0
        out = capsys.readouterr().out
        assert "SemiDegenerate" in out
        assert "alpha" in out and "s = (" in out
        assert "conformal" in out

    def test_analyze_osc(self, capsys):
        assert main(["analyze", "osc-trivial"]) == 0
        out = capsys.readouterr().out
        assert "NonDegenerate" in out and "proper" in out

    def test_analyze_json(self, capsys):
        assert main(["analyze", "em1", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["classification"]["class"] == "SemiDegenerate"
        assert doc["semi_degeneracy"]["alpha"] is not None

    def test_show_unit_point_B_table(self, capsys):
        assert main(["show", "sw:3", "--point", "1,1,1"]) == 0
        out = capsys.readouterr().out
        assert "B:" in out
        b_block = out.split("B:")[1].splitlines()
        row = b_block[2].split()
        assert row[1:] == ["2", "-2", "-2"]

    def test_show_em1_matches_ricci_formula(self, capsys):
        assert main(["show", "em1", "--point", "0.4,0.5,0.6"]) == 0
        out = capsys.readouterr().out
        assert "Ric:" in out and "eta:" in out
        r2 = 0.4**2 + 0.5**2 + 0.6**2
        ric_xx = 24 * 0.4 * 0.4 / ((r2 + 1) * r2)
        assert f"{ric_xx:14.8g}".strip() in out

    def test_show_smoke_system(self, capsys):
        assert main(["show", "sphere3", "--point", "0.1,0.2,-0.3"]) == 0
        out = capsys.readouterr().out
        assert "Ric (Levi-Civita):" in out

    def test_list_builtin(self, capsys):
        assert main(["list-builtin"]) == 0
        out = capsys.readouterr().out
        for name in ("sw:<n>", "em1", "osc-trivial", "sphere3", "em2", "em3"):
            assert name in out
        assert "eta = 0, R = 0" in out  # documents the reserved systems

    def test_verify_exercises_file_route(self, tmp_path, capsys):
        path = tmp_path / "sys.toml"
        path.write_text(GOOD_FILE)
        assert main(["verify", str(path), "--points", "10"]) == 0
        capsys.readouterr()
