import csv
import io
import json
import math

import numpy as np
import pytest

from mtbounds.bounds import BoundConfig, evaluate_bound
from mtbounds.cli import main
from mtbounds.errors import ParseError, SchemaError
from mtbounds.family import ReferenceSpec, make_gaussian_family, product_extend
from mtbounds.risk import exact_bayes_success
from mtbounds.scenario import (
    COLUMNS,
    ReportRow,
    parse_scenario,
    render_csv,
    render_json,
    rows_from_json,
    scenario_from_dict,
)

PAIR = {
    "family_spec": {"type": "finite", "atoms": [0, 1], "weights": [1, 1],
                    "densities": [[0.6, 0.4], [0.4, 0.6]]},
    "bounds": ["two_point"],
}
TRIPLE = {
    "family_spec": {"type": "finite", "densities": [[0.7, 0.3], [0.5, 0.5], [0.3, 0.7]]},
    "bounds": ["fano_ih", "fano_new", "birge", "vj_improved", "phi_hinge", "phi_entropy"],
}
GAUSS = {
    "family_spec": {"type": "gaussian", "means": [[0.0], [1.0]], "sigma": 1.0},
    "bounds": ["two_point", "fano_new", "vj_improved"],
    "reference": {"kind": "indexed", "index": 0},
    "mc": {"samples": 20000, "seed": 5},
}


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(path)


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestScenarioParsing:
    def test_defaults_filled(self, tmp_path):
        sc = parse_scenario(write(tmp_path, PAIR))
        d = sc.to_dict()
        assert d["product_n"] == 1 and d["reference"]["kind"] == "uniform_mixture"
        assert d["lambda_policy"] == {"kind": "fixed", "lambda": 1.0}
        assert d["mc"] == {"samples": 100000, "seed": 42}
        assert d["oracle"]["enum_cap"] == 100000

    def test_bad_json_reports_position(self, tmp_path):
        with pytest.raises(ParseError, match="line 2"):
            parse_scenario(write(tmp_path, '{\n "bounds": [,]}'))

    @pytest.mark.parametrize("patch, match", [
        ({"bounds": ["nope"]}, "unknown bound"),
        ({"bounds": []}, "non-empty"),
        ({"extra": 1}, "unknown key"),
        ({"product_n": 0}, "product_n"),
        ({"lambda_policy": {"kind": "fixed", "lambda": -1}}, "positive"),
        ({"lambda_policy": {"kind": "optimize", "range": [5, 1]}}, "range"),
        ({"reference": {"kind": "median"}}, "reference.kind"),
        ({"mc": {"samples": 0}}, "mc.samples"),
        ({"family_spec": {"type": "poisson"}}, "family_spec.type"),
    ])
    def test_schema_errors(self, patch, match):
        with pytest.raises(SchemaError, match=match):
            scenario_from_dict({**PAIR, **patch})

    def test_missing_family(self):
        with pytest.raises(SchemaError, match="family_spec"):
            scenario_from_dict({"bounds": ["two_point"]})

    def test_scalar_gaussian_means(self):
        sc = scenario_from_dict({**GAUSS, "family_spec": {"type": "gaussian", "means": [0, 2],
                                                         "sigma": 1}})
        assert sc.build_family().dim == 1


class TestReportRows:
    def test_na_and_booleans(self):
        row = ReportRow.make("two_point", "bayes_success", None, None, n=3)
        fields = row.csv_fields()
        assert fields[2] == "n/a" and fields[4] == "false" and fields[8] == "n/a"

    def test_json_round_trip(self):
        rows = [ReportRow.make("a", "bayes_success", 0.123456789012345, math.inf, vacuous=True,
                               lambda_star=0.5, reference_label="P0", n=2, notes="x; y"),
                ReportRow.make("b", "minimax_success", None, None)]
        back = rows_from_json(render_json(rows))
        assert back == rows
        assert render_csv(back) == render_csv(rows)

    def test_header(self):
        assert render_csv([]).strip() == ",".join(COLUMNS)


class TestEval:
    def test_pair_rows(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, PAIR)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == ",".join(COLUMNS)
        assert "two_point,bayes_success,0.6,0.6,false,,,1,0.4," in out
        assert "exact_bayes,bayes_success,0.6,0.6,false,,,1,0.4,pointwise-max sum" in out

    def test_triple_values(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, TRIPLE)]) == 0
        rows = {r["method"]: r for r in csv_rows(capsys.readouterr().out)}
        assert float(rows["exact_bayes"]["value"]) == pytest.approx(7 / 15, abs=1e-11)
        assert rows["fano_ih"]["vacuous"] == "true"
        assert float(rows["fano_new"]["value"]) == pytest.approx(0.656757553548, abs=1e-11)
        assert float(rows["minimax_lower"]["value"]) == pytest.approx(7 / 17, abs=1e-6)
        assert "minimax_deterministic" in rows
        assert list(rows)[:6] == TRIPLE["bounds"]

    def test_byte_identical(self, tmp_path):
        path = write(tmp_path, GAUSS)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["eval", path, "--out", str(a)]) == 0
        assert main(["eval", path, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_json_format(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, TRIPLE), "--format", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["scenario"]["mc"]["seed"] == 42 and doc["columns"] == list(COLUMNS)
        assert rows_from_json(json.dumps(doc))[0].method == "fano_ih"

    def test_gaussian_mc_row(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, GAUSS)]) == 0
        rows = {r["method"]: r for r in csv_rows(capsys.readouterr().out)}
        assert "ci99=[" in rows["mc_bayes"]["notes"] and "seed=5" in rows["mc_bayes"]["notes"]

    def test_product_n(self, tmp_path, capsys):
        doc = {**PAIR, "product_n": 3, "bounds": ["two_point", "phi_hinge"]}
        assert main(["eval", write(tmp_path, doc)]) == 0
        rows = {r["method"]: r for r in csv_rows(capsys.readouterr().out)}
        fam = product_extend(scenario_from_dict(PAIR).build_family(), 3)
        assert float(rows["exact_bayes"]["value"]) == pytest.approx(exact_bayes_success(fam))
        assert rows["two_point"]["value"] == rows["exact_bayes"]["value"]


class TestExitCodes:
    def test_parse_error(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, "{oops")]) == 1
        assert "line 1" in capsys.readouterr().err

    def test_schema_error(self, tmp_path):
        assert main(["eval", write(tmp_path, {**PAIR, "bounds": ["nope"]})]) == 1

    def test_inapplicable_bound(self, tmp_path, capsys):
        assert main(["eval", write(tmp_path, {**PAIR, "bounds": ["fano_ih"]})]) == 1
        assert "fano_ih" in capsys.readouterr().err

    def test_domain_error(self, tmp_path):
        bad = {**PAIR, "family_spec": {"type": "finite", "densities": [[0.6, 0.5], [0.4, 0.6]]}}
        assert main(["eval", write(tmp_path, bad)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["eval", str(tmp_path / "absent.json")]) == 2

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2


class TestSweep:
    def test_zero_rejected(self, tmp_path):
        assert main(["sweep", write(tmp_path, PAIR), "--n", "0,1"]) == 1

    def test_finite_exact_until_cap(self, tmp_path, capsys):
        doc = {**PAIR, "bounds": ["two_point", "vj_improved", "phi_hinge"],
               "oracle": {"product_size_cap": 16}}
        assert main(["sweep", write(tmp_path, doc), "--n", "1,4,5"]) == 0
        rows = csv_rows(capsys.readouterr().out)
        by = {(r["method"], r["n"]): r for r in rows}
        fam4 = product_extend(scenario_from_dict(PAIR).build_family(), 4)
        assert float(by["exact_bayes", "4"]["value"]) == pytest.approx(exact_bayes_success(fam4))
        assert by["two_point", "5"]["value"] == "n/a"
        assert by["exact_bayes", "5"]["value"] == "n/a"
        # power sum 2 * 1.04^n against the uniform mixture
        assert float(by["vj_improved", "5"]["raw_value"]) == pytest.approx(
            math.sqrt(2 * 1.04**5) / 2, rel=1e-11)

    def test_gaussian_against_product(self, tmp_path, capsys):
        assert main(["sweep", write(tmp_path, GAUSS), "--n", "1,2,3"]) == 0
        rows = {(r["method"], r["n"]): r for r in csv_rows(capsys.readouterr().out)}
        for n in (1, 2, 3):
            assert float(rows["vj_improved", str(n)]["raw_value"]) == pytest.approx(
                math.sqrt(1 + math.exp(n)) / 2, rel=1e-11)
            explicit = make_gaussian_family([np.zeros(n), np.ones(n)], 1.0)
            # two_point at n equals the TV of the explicit n-dimensional pair
            tv = math.erf(math.sqrt(n) / (2 * math.sqrt(2)))
            assert float(rows["two_point", str(n)]["value"]) == pytest.approx((1 + tv) / 2,
                                                                              abs=1e-11)
            cfg = BoundConfig(reference=ReferenceSpec.indexed(0))
            for m in ("vj_improved", "two_point", "fano_new"):
                direct = evaluate_bound(m, explicit, cfg)
                assert float(rows[m, str(n)]["raw_value"]) == pytest.approx(direct.raw_value,
                                                                            rel=1e-10)


class TestVerify:
    def test_small_run_passes(self, tmp_path, capsys):
        assert main(["verify", "--seed", "3", "--families", "15",
                     "--reproducer", str(tmp_path / "r.json")]) == 0
        assert "all invariants pass" in capsys.readouterr().out
        assert not (tmp_path / "r.json").exists()

    def test_fault_injection(self, tmp_path, capsys):
        rep = tmp_path / "r.json"
        assert main(["verify", "--families", "20", "--fault-vj-scale", "0.5",
                     "--reproducer", str(rep)]) == 3
        assert "FAILED" in capsys.readouterr().out
        sc = parse_scenario(rep)
        assert sc.build_family().n_members >= 2
