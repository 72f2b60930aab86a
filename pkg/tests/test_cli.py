"""Command line entry points: instance loading, CSV output, exit codes."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import pytest

from ocselect import InstanceFormatError, load_instance, parse_instance
from ocselect.cli import main

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
TWO_BOX = str(DATA_DIR / "two_box.json")
FOUR_BOX = str(DATA_DIR / "four_box.json")

PHI = (1.0 + math.sqrt(5.0)) / 2.0


def read_rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def write_instance(tmp_path: Path, name: str, boxes: list[dict]) -> str:
    path = tmp_path / name
    path.write_text(json.dumps({"boxes": boxes}))
    return str(path)


class TestLoader:
    def test_loads_bundled_two_box(self):
        instance = load_instance(TWO_BOX)
        assert [b.box_id for b in instance.boxes] == ["steady", "risky"]
        assert instance.boxes[1].dist.atoms[1][0] == 2.0

    def test_near_unit_mass_renormalizes_with_warning(self):
        text = json.dumps(
            {"boxes": [{"id": "a", "atoms": [[1.0, 0.5], [2.0, 0.4999999995]]}]}
        )
        with pytest.warns(RuntimeWarning):
            instance = parse_instance(text)
        probs = [p for _, p in instance.boxes[0].dist.atoms]
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-15)

    def test_mass_outside_tolerance_rejected(self):
        text = json.dumps({"boxes": [{"id": "a", "atoms": [[1.0, 0.5], [2.0, 0.4999]]}]})
        with pytest.raises(InstanceFormatError):
            parse_instance(text)

    def test_malformed_atom_names_the_box(self):
        text = json.dumps(
            {"boxes": [{"id": "fine", "atoms": [[1.0, 1.0]]}, {"id": "bad", "atoms": [[2.0]]}]}
        )
        with pytest.raises(InstanceFormatError, match="bad"):
            parse_instance(text)

    def test_duplicate_ids_rejected(self):
        text = json.dumps(
            {
                "boxes": [
                    {"id": "a", "atoms": [[1.0, 1.0]]},
                    {"id": "a", "atoms": [[2.0, 1.0]]},
                ]
            }
        )
        with pytest.raises(InstanceFormatError):
            parse_instance(text)

    def test_negative_value_rejected(self):
        text = json.dumps({"boxes": [{"id": "a", "atoms": [[-1.0, 1.0]]}]})
        with pytest.raises(InstanceFormatError):
            parse_instance(text)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InstanceFormatError):
            load_instance(str(tmp_path / "nope.json"))


class TestEvalCommand:
    def test_two_box_auto_target_clears_golden_floor(self, capsys):
        code = main(["eval", "--instance", TWO_BOX, "--policy", "tva", "--g0", "auto"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert [r["order_id"] for r in rows] == ["risky|steady", "steady|risky"]
        ratios = [float(r["ratio"]) for r in rows]
        assert min(ratios) >= 1.0 / PHI - 1e-9
        assert min(ratios) == pytest.approx(2.0 / 3.0, abs=1e-9)

    def test_known_optimum_target_is_exact_on_every_order(self, capsys):
        code = main(["eval", "--instance", FOUR_BOX, "--policy", "tva", "--g0", "opt"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 24
        for row in rows:
            assert float(row["ratio"]) >= 1.0 - 1e-9
            assert float(row["ratio"]) <= 1.0 + 1e-9

    def test_single_box_is_trivial(self, capsys, tmp_path):
        path = write_instance(tmp_path, "one.json", [{"id": "only", "atoms": [[1.0, 1.0]]}])
        code = main(["eval", "--instance", path, "--policy", "tva", "--g0", "0"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 1
        assert float(rows[0]["ratio"]) == pytest.approx(1.0, abs=1e-12)

    def test_randomized_detecting_policy_clears_its_floor(self, capsys):
        code = main(["eval", "--instance", FOUR_BOX, "--policy", "tvd-rand-732"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 24
        assert min(float(r["ratio"]) for r in rows) >= 0.732 - 2e-3

    def test_random_order_subset(self, capsys):
        code = main(
            [
                "eval",
                "--instance",
                FOUR_BOX,
                "--policy",
                "tva",
                "--g0",
                "auto",
                "--orders",
                "random:3",
                "--seed",
                "7",
            ]
        )
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 3
        for row in rows:
            assert sorted(row["order_id"].split("|")) == ["a", "b", "c", "d"]

    def test_orders_file(self, capsys, tmp_path):
        orders_path = tmp_path / "orders.json"
        orders_path.write_text(json.dumps([["risky", "steady"]]))
        code = main(
            [
                "eval",
                "--instance",
                TWO_BOX,
                "--policy",
                "tva",
                "--g0",
                "auto",
                "--orders",
                f"file:{orders_path}",
            ]
        )
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert [r["order_id"] for r in rows] == ["risky|steady"]

    def test_out_file_and_summary_split(self, capsys, tmp_path):
        out = tmp_path / "report.csv"
        code = main(
            [
                "eval",
                "--instance",
                TWO_BOX,
                "--policy",
                "tva",
                "--g0",
                "auto",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "min_ratio=" in captured.out
        text = out.read_text()
        assert text.splitlines()[0] == "order_id,opt,value,ratio"
        assert len(read_rows(text)) == 2

    def test_eval_output_is_deterministic(self, tmp_path):
        outs = []
        for name in ("first.csv", "second.csv"):
            out = tmp_path / name
            code = main(
                [
                    "eval",
                    "--instance",
                    FOUR_BOX,
                    "--policy",
                    "tvd",
                    "--g0",
                    "auto",
                    "--out",
                    str(out),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestEvalValidation:
    def test_enumeration_guard_trips(self, capsys, tmp_path):
        boxes = [{"id": f"b{i:02d}", "atoms": [[float(i + 1), 1.0]]} for i in range(12)]
        path = write_instance(tmp_path, "wide.json", boxes)
        code = main(["eval", "--instance", path, "--policy", "tva", "--g0", "0"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_guarded_instance_still_works_with_random_orders(self, capsys, tmp_path):
        boxes = [{"id": f"b{i:02d}", "atoms": [[float(i + 1), 1.0]]} for i in range(12)]
        path = write_instance(tmp_path, "wide.json", boxes)
        code = main(
            [
                "eval",
                "--instance",
                path,
                "--policy",
                "tva",
                "--g0",
                "0",
                "--orders",
                "random:4",
                "--seed",
                "5",
            ]
        )
        assert code == 0
        assert len(read_rows(capsys.readouterr().out)) == 4

    def test_random_orders_need_seed(self, capsys):
        code = main(
            ["eval", "--instance", TWO_BOX, "--policy", "tva", "--g0", "0", "--orders", "random:2"]
        )
        assert code == 2

    def test_sta_needs_tau(self):
        assert main(["eval", "--instance", TWO_BOX, "--policy", "sta"]) == 2
        assert main(["eval", "--instance", TWO_BOX, "--policy", "sta", "--g0", "1"]) == 2

    def test_targeted_policies_reject_tau(self):
        code = main(["eval", "--instance", TWO_BOX, "--policy", "tva", "--tau", "1.0"])
        assert code == 2

    def test_bad_g0_string(self):
        code = main(["eval", "--instance", TWO_BOX, "--policy", "tva", "--g0", "soon"])
        assert code == 2

    def test_negative_g0(self):
        code = main(["eval", "--instance", TWO_BOX, "--policy", "tva", "--g0", "-1"])
        assert code == 2

    def test_bad_orders_spec(self):
        code = main(
            ["eval", "--instance", TWO_BOX, "--policy", "tva", "--g0", "0", "--orders", "bogus"]
        )
        assert code == 2

    def test_unknown_id_in_orders_file(self, tmp_path):
        orders_path = tmp_path / "orders.json"
        orders_path.write_text(json.dumps([["risky", "mystery"]]))
        code = main(
            [
                "eval",
                "--instance",
                TWO_BOX,
                "--policy",
                "tva",
                "--g0",
                "auto",
                "--orders",
                f"file:{orders_path}",
            ]
        )
        assert code == 2

    def test_missing_required_flag_is_usage_error(self):
        assert main(["eval", "--instance", TWO_BOX]) == 1

    def test_unknown_subcommand_is_usage_error(self):
        assert main(["frobnicate"]) == 1


class TestHardnessCommand:
    def test_default_run_is_clean(self, capsys):
        code = main(["hardness"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert [r["bound"] for r in rows] == [
            "general-dual",
            "detection-dual",
            "general-primal",
            "detection-primal",
        ]
        by_name = {r["bound"]: r for r in rows}
        assert float(by_name["general-dual"]["value"]) == pytest.approx(
            0.8292693210370199, abs=1e-9
        )
        assert float(by_name["detection-dual"]["value"]) == pytest.approx(
            0.7581835229538507, abs=1e-9
        )
        assert float(by_name["general-primal"]["value"]) == pytest.approx(
            0.8284067709324809, abs=1e-9
        )
        assert float(by_name["detection-primal"]["value"]) == pytest.approx(
            0.7582341449730822, abs=1e-9
        )
        for name in ("general-dual", "detection-dual"):
            assert float(by_name[name]["residual"]) <= 1e-8

    def test_refine_adds_monotone_rows(self, capsys):
        code = main(["hardness", "--refine"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 8
        general = [float(r["value"]) for r in rows if r["bound"] == "general-primal"]
        detection = [float(r["value"]) for r in rows if r["bound"] == "detection-primal"]
        assert len(general) == len(detection) == 3
        assert general[0] < general[1] < general[2]
        assert detection[0] > detection[1] > detection[2]

    def test_injected_error_flips_exit_code(self, capsys):
        code = main(["hardness", "--inject-certificate-error", "1e-3"])
        assert code == 3
        assert "violation" in capsys.readouterr().err

    def test_rejects_bad_lp_step(self):
        assert main(["hardness", "--lp-step", "0.2"]) == 2
        assert main(["hardness", "--lp-step", "0"]) == 2

    def test_rejects_small_dual_grid(self):
        assert main(["hardness", "--dual-grid", "100"]) == 2


class TestSimulateCommand:
    def test_deterministic_case_pins_z_to_zero(self, capsys, tmp_path):
        path = write_instance(tmp_path, "one.json", [{"id": "only", "atoms": [[1.0, 1.0]]}])
        code = main(
            [
                "simulate",
                "--instance",
                path,
                "--policy",
                "tva",
                "--g0",
                "0",
                "--runs",
                "500",
                "--seed",
                "3",
            ]
        )
        assert code == 0
        row = read_rows(capsys.readouterr().out)[0]
        assert row == {
            "runs": "500",
            "empirical_mean": "1",
            "exact_value": "1",
            "std_error": "0",
            "z_score": "0",
        }

    def test_same_seed_reproduces_bytes(self, tmp_path):
        blobs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            code = main(
                [
                    "simulate",
                    "--instance",
                    TWO_BOX,
                    "--policy",
                    "tva",
                    "--g0",
                    "auto",
                    "--order",
                    "risky,steady",
                    "--runs",
                    "2000",
                    "--seed",
                    "11",
                    "--out",
                    str(out),
                ]
            )
            assert code == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_sampler_agrees_with_exact_value(self, capsys):
        code = main(
            [
                "simulate",
                "--instance",
                TWO_BOX,
                "--policy",
                "tva",
                "--g0",
                "auto",
                "--order",
                "risky,steady",
                "--runs",
                "2000",
                "--seed",
                "11",
            ]
        )
        assert code == 0
        row = read_rows(capsys.readouterr().out)[0]
        assert float(row["exact_value"]) == pytest.approx(1.0, abs=1e-12)
        assert abs(float(row["z_score"])) <= 4.0

    def test_different_seed_changes_the_sample(self, tmp_path):
        blobs = []
        for seed in ("11", "12"):
            out = tmp_path / f"seed{seed}.csv"
            code = main(
                [
                    "simulate",
                    "--instance",
                    TWO_BOX,
                    "--policy",
                    "tva",
                    "--g0",
                    "auto",
                    "--order",
                    "risky,steady",
                    "--runs",
                    "2000",
                    "--seed",
                    seed,
                    "--out",
                    str(out),
                ]
            )
            assert code == 0
            blobs.append(out.read_bytes())
        assert blobs[0] != blobs[1]

    def test_seed_required_at_parser_level(self):
        code = main(["simulate", "--instance", TWO_BOX, "--policy", "tva", "--g0", "0"])
        assert code == 1


class TestVerifyDensityCommand:
    def test_both_densities_clean(self, capsys):
        code = main(["verify-density"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert [r["density"] for r in rows] == ["rho-656", "rho-732"]
        for row in rows:
            assert float(row["min_ratio"]) >= float(row["gamma"]) - 1e-6
            assert abs(float(row["mass_residual"])) <= 1e-8

    def test_single_density_selection(self, capsys):
        code = main(["verify-density", "--density", "656"])
        assert code == 0
        rows = read_rows(capsys.readouterr().out)
        assert [r["density"] for r in rows] == ["rho-656"]
        assert float(rows[0]["gamma"]) == pytest.approx(0.6562802677328851, abs=1e-9)

    def test_small_grid_rejected(self):
        assert main(["verify-density", "--grid", "500"]) == 2
