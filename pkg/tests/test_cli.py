import json

import pytest

from ratsos.cli import EXIT_BUILD, EXIT_PARSE, main
from ratsos.families import gen_unit_ball_mix
from ratsos.problem import parse, serialize


@pytest.fixture
def ball_mix_file(tmp_path):
    path = tmp_path / "ballmix.srfo"
    path.write_text(serialize(gen_unit_ball_mix()))
    return str(path)


@pytest.fixture
def trivial_file(tmp_path):
    path = tmp_path / "trivial.srfo"
    path.write_text("vars x1\nratio: (x1^2)/(1)\nconstraint: 1 - x1^2 >= 0\n")
    return str(path)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


class TestSolve:
    def test_dense_order_three(self, capsys, ball_mix_file):
        code, payload = run_json(
            capsys, ["solve", ball_mix_file, "--method", "dense", "--order", "3"]
        )
        assert code == 0
        assert payload["schema"] == 1
        assert payload["bound"] == pytest.approx(-0.3465, abs=1e-3)
        assert payload["status"] in ("optimal", "near_optimal")
        assert payload["certified"] is True
        assert set(payload["time_ms"]) == {"build", "solve"}
        assert isinstance(payload["block_size_histogram"], dict)

    def test_ratio_order_case_three(self, capsys, ball_mix_file):
        code, payload = run_json(
            capsys,
            [
                "solve", ball_mix_file, "--method", "signsym",
                "--order", "2", "--ratio-order", "3,1,2",
            ],
        )
        assert code == 0
        assert payload["bound"] == pytest.approx(-0.4738, abs=1e-3)

    def test_trivial_dense(self, capsys, trivial_file):
        code, payload = run_json(
            capsys, ["solve", trivial_file, "--method", "dense", "--order", "1"]
        )
        assert code == 0
        assert payload["bound"] == pytest.approx(0.0, abs=1e-6)

    def test_order_sweep(self, capsys, ball_mix_file):
        code, payload = run_json(
            capsys, ["solve", ball_mix_file, "--orders", "2..3"]
        )
        assert code == 0
        ks = [entry["k"] for entry in payload["sweep"]]
        assert ks == [2, 3]

    def test_default_order_is_minimum(self, capsys, trivial_file):
        code, payload = run_json(capsys, ["solve", trivial_file])
        assert code == 0
        assert payload["k"] == 1

    def test_parse_error_exit_code(self, capsys, tmp_path):
        bad = tmp_path / "bad.srfo"
        bad.write_text("vars x1\nratio: ( x1 + ) / (1)\n")
        assert main(["solve", str(bad)]) == EXIT_PARSE
        assert "parse error" in capsys.readouterr().err

    def test_build_error_exit_code(self, capsys, tmp_path):
        f = tmp_path / "deg.srfo"
        f.write_text("vars x1\nratio: (x1^6)/(1)\nconstraint: 1 - x1^2 >= 0\n")
        assert main(["solve", str(f), "--order", "1"]) == EXIT_BUILD
        assert "build error" in capsys.readouterr().err

    def test_sdpa_export(self, capsys, trivial_file, tmp_path):
        target = str(tmp_path / "out.dat-s")
        code, payload = run_json(
            capsys,
            ["solve", trivial_file, "--solver", "sdpa-export", "--out", target],
        )
        assert code == 0
        assert payload["status"] == "exported"
        from ratsos.sdp import read_sdpa, solve_internal

        back = read_sdpa(target)
        rep = solve_internal(back, tol=1e-9)
        assert rep.primal == pytest.approx(0.0, abs=1e-6)

    def test_maximize_flag(self, capsys, tmp_path):
        f = tmp_path / "max.srfo"
        f.write_text(
            "vars x1\nratio: ( 2 - x1^2 )/( 1 )\nconstraint: 1 - x1^2 >= 0\n"
        )
        code, payload = run_json(
            capsys, ["solve", str(f), "--maximize", "--order", "1"]
        )
        assert code == 0
        assert payload["bound"] == pytest.approx(2.0, abs=1e-6)

    def test_out_file(self, capsys, trivial_file, tmp_path):
        target = tmp_path / "res.json"
        code = main(["solve", trivial_file, "--order", "1", "--out", str(target)])
        assert code == 0
        payload = json.loads(target.read_text())
        assert payload["schema"] == 1

    def test_psd_cap_env_override(self, capsys, ball_mix_file, monkeypatch):
        monkeypatch.setenv("RATSOS_PSD_CAP", "5")
        code = main(["solve", ball_mix_file, "--method", "dense", "--order", "2"])
        assert code == 5
        assert "export" in capsys.readouterr().err


class TestAnalyze:
    def test_ball_mix_ranks(self, capsys, ball_mix_file):
        assert main(["analyze", ball_mix_file]) == 0
        out = capsys.readouterr().out
        assert "measure 1: sign-symmetry rank 0" in out
        assert "measure 2: sign-symmetry rank 2" in out
        assert "measure 3: sign-symmetry rank 1" in out

    def test_all_even_full_rank(self, capsys, tmp_path):
        f = tmp_path / "even.srfo"
        f.write_text(
            "vars x1 x2\nratio: (x1^2)/(1 + x1^2 + x2^2)\n"
            "constraint: 1 - x1^2 - x2^2 >= 0\n"
        )
        assert main(["analyze", str(f)]) == 0
        out = capsys.readouterr().out
        assert "rank 2" in out

    def test_rip_witness_printed(self, capsys, tmp_path):
        f = tmp_path / "rip.srfo"
        f.write_text(
            "vars x1 x2 x3 x4\n"
            "ratio: (x1^2 + x2^2)/(1)\n"
            "ratio: (x3^2 + x4^2)/(1)\n"
            "ratio: (x1^2 + x3^2)/(1)\n"
            "constraint: 2 - x1^2 - x2^2 >= 0\n"
            "constraint: 2 - x3^2 - x4^2 >= 0\n"
            "constraint: 2 - x1^2 - x3^2 >= 0\n"
            "clique: 1 2\nclique: 3 4\nclique: 1 3\n"
        )
        assert main(["analyze", str(f)]) == 0
        out = capsys.readouterr().out
        assert "violated by the given order at clique 3" in out
        assert "repaired order" in out


class TestGen:
    def test_gen_parse_solve_pipeline(self, capsys, tmp_path):
        # this small chain is exact one order past the minimum
        target = tmp_path / "chain.srfo"
        assert main(
            ["gen", "reznick", "--M", "3", "--d", "1", "--out", str(target)]
        ) == 0
        prob = parse(target.read_text())
        assert prob.num_ratios == 2
        code, payload = run_json(
            capsys, ["solve", str(target), "--method", "signsym", "--order", "4"]
        )
        assert code == 0
        assert payload["bound"] == pytest.approx(2.0, abs=1e-2)

    def test_gen_rand_reproducible(self, capsys):
        outs = []
        for _ in range(2):
            assert main(
                ["gen", "rand", "--N", "4", "--n", "4", "--d", "3",
                 "--xi", "0.2", "--seed", "7"]
            ) == 0
            outs.append(capsys.readouterr().out)
        assert outs[0] == outs[1]

    def test_gen_unknown_family(self, capsys):
        assert main(["gen", "nosuch"]) == EXIT_BUILD

    def test_gen_missing_params(self, capsys):
        assert main(["gen", "reznick"]) == EXIT_BUILD
        assert "needs" in capsys.readouterr().err


class TestBench:
    def test_table1_markdown(self, capsys):
        assert main(["bench", "table1"]) == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if ln.startswith("|")]
        # header + separator + 11 rows
        assert len(lines) == 13
        assert "-0.3465" in out

    def test_table8_csv(self, capsys):
        assert main(["bench", "table8", "--format", "csv"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "problem,method,k,bound,status,time_s"
        assert len(out.splitlines()) == 4

    def test_unknown_table(self, capsys):
        assert main(["bench", "table99"]) == EXIT_BUILD
