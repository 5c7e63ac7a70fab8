from tethersim import cli

QUICK_SETS = [
    "--set", "step_start_s=0.5",
    "--set", "step_duration_s=1.0",
    "--set", "post_s=0.5",
]


def run_cli(*argv) -> int:
    return cli.main(list(argv))


class TestSimulate:
    def test_bundled_config_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = run_cli(
            "simulate", "--config", "gamma_b_nominal", "--out", str(out), *QUICK_SETS
        )
        assert code == 0
        assert out.exists()
        metrics = tmp_path / "trace.metrics.csv"
        assert metrics.exists()
        text = capsys.readouterr().out
        assert "seed: 42" in text
        assert "phase3" in text
        header = out.read_text().splitlines()[1]
        assert header.startswith("t,x1,x2,x3,x4")

    def test_config_file_and_overrides(self, tmp_path):
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text("controller = gammaB\nseed = 5\n")
        out = tmp_path / "t.csv"
        code = run_cli(
            "simulate", "--config", str(cfgfile), "--out", str(out), "--seed", "9",
            *QUICK_SETS,
        )
        assert code == 0
        assert "seed=9" in out.read_text().splitlines()[0]

    def test_malformed_config_exits_2_without_outputs(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("this is not a config")
        out = tmp_path / "t.csv"
        code = run_cli("simulate", "--config", str(cfgfile), "--out", str(out))
        assert code == 2
        assert not out.exists()

    def test_unknown_key_exits_2(self, tmp_path):
        out = tmp_path / "t.csv"
        code = run_cli("simulate", "--set", "bogus=1", "--out", str(out))
        assert code == 2
        assert not out.exists()

    def test_unknown_bundled_name_exits_2(self, tmp_path):
        code = run_cli(
            "simulate", "--config", "no_such_bundle", "--out", str(tmp_path / "t.csv")
        )
        assert code == 2

    def test_diverged_exits_3(self, tmp_path):
        out = tmp_path / "t.csv"
        code = run_cli(
            "simulate", "--out", str(out),
            "--set", "step_start_s=0.5", "--set", "step_duration_s=1.0",
            "--set", "post_s=5.0", "--set", "delta_j_r=-0.95",
        )
        assert code == 3
        assert out.exists()  # trace up to the abort is still written

    def test_unwritable_output_exits_4(self, tmp_path):
        code = run_cli(
            "simulate", "--out", str(tmp_path / "no_dir" / "t.csv"), *QUICK_SETS
        )
        assert code == 4

    def test_deterministic_outputs(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run_cli("simulate", "--out", str(out), *QUICK_SETS) == 0
        assert a.read_text() == b.read_text()


class TestSweep:
    def test_grid_rows(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep", "--out", str(out), *QUICK_SETS,
            "--grid", "delta_m_r=-0.1,0,0.1",
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2 + 3 * 3  # comment + header + cells x phases
        assert lines[1] == "delta_m_r,seed,phase,e_mean,e_std,diverged"

    def test_bad_grid_exits_2(self, tmp_path):
        code = run_cli("sweep", "--out", str(tmp_path / "s.csv"), "--grid", "nope")
        assert code == 2


class TestFlatnessCheck:
    def test_pass(self, capsys):
        assert run_cli("flatness-check", "gamma_a_step") == 0
        assert "passed" in capsys.readouterr().out

    def test_unknown_scenario(self):
        assert run_cli("flatness-check", "mystery") == 2


def test_observer_demo(capsys, tmp_path):
    code = run_cli(
        "observer-demo", "--set", "post_s=1.0", "--config", "gamma_b_observer"
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "convergence_time_s" in out
