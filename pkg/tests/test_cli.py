import numpy as np
import pytest

from magmapc import cli, problems


class TestParser:
    def test_subcommands_present(self):
        ap = cli.build_parser()
        args = ap.parse_args(["mms", "--n", "4", "--alpha", "2.0"])
        assert args.case == "mms"
        assert args.n == 4
        assert args.alpha == 2.0

    def test_unknown_flag_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            cli.build_parser().parse_args(["mms", "--frobnicate"])
        assert exc.value.code == 1

    def test_missing_subcommand_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            cli.build_parser().parse_args([])
        assert exc.value.code == 1

    def test_bad_pc_choice_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            cli.build_parser().parse_args(["mms", "--pc", "cholesky"])
        assert exc.value.code == 1


class TestSweepConfig:
    def test_cartesian_product(self):
        text = "case=mms n=4,8 alpha=0,1 pc=lu\n"
        cfgs = cli.parse_sweep_config(text)
        assert len(cfgs) == 4
        assert {(c.n, c.alpha) for c in cfgs} == {(4, 0.0), (4, 1.0),
                                                 (8, 0.0), (8, 1.0)}

    def test_comments_and_blank_lines(self):
        text = "# a comment\n\ncase=mms n=4  # trailing\n"
        cfgs = cli.parse_sweep_config(text)
        assert len(cfgs) == 1

    def test_multiple_lines_concatenate(self):
        text = "case=mms n=4\ncase=wedge-corner n=4,8\n"
        cfgs = cli.parse_sweep_config(text)
        assert len(cfgs) == 3

    def test_k_range_and_smoother_keys(self):
        text = "case=mms n=4 k-min=0.1 k-max=0.9 pc=amg smoother-apps=3\n"
        (cfg,) = cli.parse_sweep_config(text)
        assert cfg.k_star == 0.1
        assert cfg.k_sup == 0.9
        assert cfg.smoother.applications == 3

    def test_unknown_key_raises(self):
        with pytest.raises(ValueError):
            cli.parse_sweep_config("case=mms nx=4\n")

    def test_missing_case_raises(self):
        with pytest.raises(ValueError):
            cli.parse_sweep_config("n=4 alpha=1\n")

    def test_malformed_token_raises(self):
        with pytest.raises(ValueError):
            cli.parse_sweep_config("case=mms 4\n")


class TestMain:
    def test_mms_run_csv_and_vtk(self, tmp_path, capsys):
        out = tmp_path / "runs.csv"
        vtk = tmp_path / "sol.vtk"
        rc = cli.main(["mms", "--n", "4", "--out", str(out),
                       "--vtk", str(vtk)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == problems.CaseResult.CSV_HEADER
        assert len(lines) == 2
        text = vtk.read_text()
        assert text.startswith("# vtk DataFile Version")
        assert "POINTS" in text and "CELL_TYPES" in text
        assert "VECTORS u " in text and "VECTORS u_f " in text
        msg = capsys.readouterr().out
        assert "iterations" in msg

    def test_csv_append_no_duplicate_header(self, tmp_path):
        out = tmp_path / "runs.csv"
        assert cli.main(["mms", "--n", "2", "--out", str(out)]) == 0
        assert cli.main(["mms", "--n", "4", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        assert lines[1] != lines[0]

    def test_nonconvergence_exit_2(self):
        rc = cli.main(["mms", "--n", "4", "--max-iters", "2"])
        assert rc == 2

    def test_invalid_alpha_exit_1(self, capsys):
        rc = cli.main(["mms", "--alpha", "-0.9"])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_missing_sweep_file_exit_1(self, capsys):
        rc = cli.main(["sweep", "/nonexistent/sweep.txt"])
        assert rc == 1

    def test_spectra_ok(self, tmp_path, capsys):
        out = tmp_path / "spectra.csv"
        rc = cli.main(["spectra", "--n", "4", "--alpha", "1",
                       "--out", str(out)])
        assert rc == 0
        assert "[ok]" in capsys.readouterr().out
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("alpha,k_star")
        assert len(lines) == 2

    def test_sweep_runs_and_writes(self, tmp_path):
        cfgfile = tmp_path / "sweep.txt"
        cfgfile.write_text("case=mms n=2,4 alpha=1\n")
        out = tmp_path / "sweep.csv"
        rc = cli.main(["sweep", str(cfgfile), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3

    def test_wedge_traction_smoke(self):
        assert cli.main(["wedge-traction", "--n", "3"]) == 0
