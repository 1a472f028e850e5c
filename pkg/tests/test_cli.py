import numpy as np
import pytest

from voidrod import __version__
from voidrod.cli import FIXTURES, builtin_fixture, main
from voidrod.io import dump_limit_config, parse_void_set


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


class TestFixtures:
    @pytest.mark.parametrize("name", FIXTURES)
    def test_valid(self, name):
        builtin_fixture(name, 1.0, 64).validate()


class TestExitCodes:
    def test_bad_arguments(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 2
        assert capsys.readouterr().err.startswith("error config.invalid")

    def test_invalid_rho(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[geometry]\nrho = 0.02\n")
        code, _, err = run(["--config", str(cfg), "cell-problem"], capsys)
        assert code == 2 and err.splitlines()[0] == "error config.invalid"

    def test_missing_input(self, tmp_path, capsys):
        code, _, err = run(["--output-dir", str(tmp_path), "rod1d-eval", "--input", str(tmp_path / "x")], capsys)
        assert code == 2 and err.startswith("error input.invalid")

    def test_precondition(self, tmp_path, capsys):
        code, _, err = run(["--output-dir", str(tmp_path), "rigidity-probe", "--h", "0.25", "--T", "4"], capsys)
        assert code == 4 and err.startswith("error precondition")


class TestSubcommands:
    def test_cell_problem(self, tmp_path, capsys):
        code, out, _ = run(["--output-dir", str(tmp_path), "cell-problem", "--n", "8", "--no-refinement"], capsys)
        assert code == 0 and out.startswith("row,col0,col1,col2")
        text = (tmp_path / "cell_problem_B.csv").read_text().splitlines()
        assert text[0] == f"# voidrod {__version__}" and text[1].startswith("# config-sha256 ")
        assert float(rows(tmp_path / "cell_problem_B.csv")[1].split(",")[1]) == pytest.approx(0.14247996406, rel=1e-9)

    def test_refinement_table(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[material]\nlambda = 0\n[mesh]\ncell_refinement = 4, 8\ncell_n = 4\n")
        code, out, _ = run(["--config", str(cfg), "--output-dir", str(tmp_path), "cell-problem"], capsys)
        assert code == 0 and "reference torsion" in out
        assert rows(tmp_path / "cell_refinement.csv")[0].startswith("n,B11,B22,B33,B11_extrap")

    def test_rod1d_eval_roundtrip(self, tmp_path, capsys):
        path = tmp_path / "kink.txt"
        path.write_text(dump_limit_config(builtin_fixture("kink", 1.0, 32)))
        code, out, _ = run(["--output-dir", str(tmp_path), "rod1d-eval", "--input", str(path)], capsys)
        assert code == 0 and out.splitlines()[1].split(",")[-1] == "2"

    def test_rod1d_minimize(self, tmp_path, capsys):
        cfg = tmp_path / "m.ini"
        cfg.write_text("[geometry]\nL = 1/20\n[mesh]\nrod_samples = 32\n"
                       "[rod1d]\nright_frame = 0 0 1.5707963267948966\ncandidates = 1/40\nmax_discontinuities = 1\n")
        code, out, _ = run(["--config", str(cfg), "--output-dir", str(tmp_path), "rod1d-minimize"], capsys)
        assert code == 0 and float(out.splitlines()[1].split(",")[-1]) == pytest.approx(2.0)
        assert len(rows(tmp_path / "rod1d_candidates.csv")) == 3
        assert (tmp_path / "rod1d_minimized.txt").exists()

    def test_recovery_and_rod3d_eval(self, tmp_path, capsys):
        base = ["--output-dir", str(tmp_path), "--fixture", "void-and-kink"]
        code, out, _ = run(base + ["recovery", "--h", "0.125"], capsys)
        assert code == 0
        assert len(parse_void_set((tmp_path / "recovery_void.txt").read_text()).primitives) == 2
        code, out2, _ = run(base + ["rod3d-eval", "--void", str(tmp_path / "recovery_void.txt"),
                                    "--deformation", str(tmp_path / "recovery_deformation.txt")], capsys)
        assert code == 0
        assert out2.splitlines()[1].split(",")[-1] == out.splitlines()[1].split(",")[4]

    def test_isoperimetry_exhaustive(self, tmp_path, capsys):
        code, out, _ = run(["--output-dir", str(tmp_path), "isoperimetry-test", "--dims", "6x3"], capsys)
        assert code == 0 and out.splitlines()[1].startswith("6x3,262144,10,8,0.1666")

    def test_isoperimetry_random_deterministic(self, tmp_path, capsys):
        args = ["isoperimetry-test", "--dims", "32x4x4", "--mode", "random", "--samples", "200", "--seed", "9"]
        run(["--output-dir", str(tmp_path / "a")] + args, capsys)
        run(["--output-dir", str(tmp_path / "b")] + args, capsys)
        a = (tmp_path / "a" / "isoperimetry_random.csv").read_bytes()
        assert a == (tmp_path / "b" / "isoperimetry_random.csv").read_bytes()

    def test_convergence_study_deterministic(self, tmp_path, capsys):
        cfg = tmp_path / "s.ini"
        cfg.write_text("[study]\nh_list = 1/8, 1/16\n[mesh]\nn2 = 4\ncell_n = 8\n")
        for sub in ("a", "b"):
            code, _, _ = run(["--config", str(cfg), "--output-dir", str(tmp_path / sub), "-q", "convergence-study"], capsys)
            assert code == 0
        a = (tmp_path / "a" / "convergence_study.csv").read_bytes()
        assert a == (tmp_path / "b" / "convergence_study.csv").read_bytes()
        assert rows(tmp_path / "a" / "convergence_study.csv")[0] == "h,elastic,perimeter,curvature,total,E0,gap"
        assert (tmp_path / "a" / "plot_convergence_study.py").exists()

    def test_rigidity_probe(self, tmp_path, capsys):
        code, out, _ = run(["--output-dir", str(tmp_path), "--fixture", "straight", "rigidity-probe",
                            "--h", "0.0625", "--T", "4"], capsys)
        assert code == 0
        table = [r.split(",") for r in out.splitlines()[1:]]
        assert [r[1] for r in table[1:-1]] == ["good"] * (len(table) - 2)
        assert np.isnan(float(table[0][5]))
