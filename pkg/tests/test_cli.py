import csv
import math

import numpy as np
import pytest

from whittlelearn import cli
from whittlelearn.cli import ConfigError, ExperimentConfig, parse_config, report, run_experiment

K25 = """\
# inverse-count re-initialisation on the 25-state walk
example=random_walk k_states=25 rho=0.95
algorithm=index_qlearn policy=eg reinit=inverse_count
alpha=0.05 gamma=0.01 k_max=300 t_max=5000 delta=0.005
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParse:
    def test_empty(self):
        cfg = parse_config("")
        assert (cfg.example, cfg.algorithm, cfg.policy, cfg.beta, cfg.epsilon) == ("circular", "qlearn", "eg", 0.9, 0.4)

    def test_comments_and_lines(self):
        cfg = parse_config("alpha=0.2   # fast\n\n  epsilon=0.3 beta=0.5\n")
        assert (cfg.alpha, cfg.epsilon, cfg.beta) == (0.2, 0.3, 0.5)

    def test_timescale_ordering(self):
        with pytest.raises(ConfigError, match="gamma") as exc:
            parse_config("algorithm=index_qlearn\ngamma=0.05 alpha=0.05")
        assert "line 2" in str(exc.value)

    def test_ordering_ignored_for_qlearn(self):
        assert parse_config("gamma=0.05 alpha=0.05").algorithm == "qlearn"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 3.*colour"):
            parse_config("alpha=0.1\n\ncolour=blue")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="line 1.*k_max"):
            parse_config("k_max=many")

    def test_not_key_value(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("alpha")

    @pytest.mark.parametrize("text", ["policy=ucb", "example=maze", "reinit=often", "beta=1.0", "epsilon=2", "delta=nan"])
    def test_constraints(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_k25_echo(self):
        cfg = parse_config(K25)
        assert "alpha=0.05 gamma=0.01 k_max=300 t_max=5000 delta=0.005" in cfg.echo()
        assert cfg.scheme.kind == "inverse_count"

    def test_text_roundtrip(self):
        cfg = parse_config(K25)
        assert parse_config(cfg.to_text()) == cfg


class TestRun:
    def test_solve_circular(self, tmp_path):
        out = run_experiment(ExperimentConfig(algorithm="solve", out_dir=str(tmp_path)))
        rows = read_rows(out["index"])
        assert rows[0] == ["state", "learned_index", "oracle_index"]
        assert len(rows) == 5
        assert all(r[1] == "" for r in rows[1:])
        assert float(rows[1][2]) == pytest.approx(-0.45, abs=1e-8)
        assert "summary" not in out

    def test_qlearn_summary(self, tmp_path):
        cfg = parse_config(f"alpha=0.01 epsilon=0.3 t_max=30000 out_dir={tmp_path}")
        out = run_experiment(cfg)
        rows = read_rows(out["summary"])
        assert rows[0] == ["algorithm", "policy", "iterations", "compute_time_min", "final_error"]
        assert rows[1][:3] == ["QL", "EG", "30000"]
        curve = read_rows(out["curve"])
        assert curve[0] == ["iter", "error", "wallclock_ms"]
        assert len(curve) == 301
        assert float(rows[1][4]) == float(curve[-1][1])

    def test_index_outputs(self, tmp_path):
        cfg = parse_config(f"example=random_walk rho=0.9 algorithm=index_qlearn k_max=5 t_max=200 out_dir={tmp_path}")
        out = run_experiment(cfg)
        curve = read_rows(out["curve"])
        assert curve[0] == ["iter", "error", "wallclock_ms", "index_error"]
        idx = read_rows(out["index"])
        assert [float(r[2]) for r in idx[1:]] == pytest.approx(list(0.9 ** np.arange(5)))
        assert read_rows(out["summary"])[1][:3] == ["QLL", "EG", "5"]

    @pytest.mark.parametrize("algorithm,extra", [
        ("qlearn", "t_max=3000 policy=so reinit=periodic:50"),
        ("index_qlearn", "k_max=4 t_max=300 reinit=inverse_count"),
        ("index_fa", "example=random_walk k_states=30 group_size=5 k_max=4 t_max=300"),
        ("index_dqn", "example=random_walk k_max=2 t_max=30 minibatch=8 memory_size=32 policy=es epsilon=0.1"),
    ])
    def test_byte_identical(self, tmp_path, algorithm, extra):
        texts = []
        for d in ("a", "b"):
            cfg = parse_config(f"algorithm={algorithm} {extra} timing=false seed=3 out_dir={tmp_path / d}")
            out = run_experiment(cfg)
            texts.append({k: p.read_bytes() for k, p in out.items() if k != "config"})
        assert texts[0] == texts[1]

    def test_timing_columns_only_differ(self, tmp_path):
        curves = []
        for d in ("a", "b"):
            out = run_experiment(parse_config(f"t_max=2000 seed=1 out_dir={tmp_path / d}"))
            curves.append([r[:2] for r in read_rows(out["curve"])])
        assert curves[0] == curves[1]

    def test_all_numbers_finite(self, tmp_path):
        out = run_experiment(parse_config(f"algorithm=index_qlearn k_max=3 t_max=100 out_dir={tmp_path}"))
        for key in ("curve", "index", "summary"):
            for row in read_rows(out[key])[1:]:
                for cell in row:
                    try:
                        assert math.isfinite(float(cell))
                    except ValueError:
                        assert cell in ("QLL", "EG", "")

    def test_config_written(self, tmp_path):
        cfg = parse_config(K25.replace("k_max=300", "k_max=1") + f"t_max=10 out_dir={tmp_path}")
        out = run_experiment(cfg)
        assert parse_config(out["config"].read_text()) == cfg

    def test_file_model(self, tmp_path):
        model = tmp_path / "m.json"
        model.write_text('{"n_states": 2, "p0": [[0.5, 0.5], [0.5, 0.5]], "p1": [[1, 0], [1, 0]], "rewards": [[0, 1], [0, 0.5]]}')
        out = run_experiment(parse_config(f"example=file model_file={model} algorithm=solve out_dir={tmp_path}"))
        assert len(read_rows(out["index"])) == 3


class TestReport:
    def test_order_and_format(self, tmp_path):
        for pol in ("es", "so", "eg"):
            run_experiment(parse_config(f"policy={pol} t_max=1000 out_dir={tmp_path}"))
        text = report(tmp_path)
        lines = text.splitlines()
        assert lines[0] == "Example with circular dynamics"
        assert "#Iterations" in lines[1] and "Compute Time" in lines[1] and "Error" in lines[1]
        assert [ln.split()[1] for ln in lines[2:5]] == ["(EG)", "(SO)", "(ES)"]
        time_cells = [ln.split()[3] for ln in lines[2:5]]
        assert all(len(c.split(".")[1]) == 2 for c in time_cells)
        assert len({len(ln) for ln in lines[1:5]}) == 1

    def test_one_row(self, tmp_path):
        run_experiment(parse_config(f"t_max=500 out_dir={tmp_path}"))
        assert len(report(tmp_path).strip().splitlines()) == 3

    def test_blocks(self, tmp_path):
        run_experiment(parse_config(f"t_max=500 out_dir={tmp_path / 'c'}"))
        run_experiment(parse_config(f"example=restart t_max=500 out_dir={tmp_path / 'r'}"))
        text = report(tmp_path)
        assert "Example with circular dynamics" in text and "Example with restart model" in text

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            report(tmp_path)


class TestMain:
    def test_success(self, tmp_path, capsys):
        assert cli.main(["solve", "--example", "restart", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "index_solve.csv").exists()

    def test_flags_override_file(self, tmp_path, capsys):
        conf = tmp_path / "run.txt"
        conf.write_text(K25)
        assert cli.main(["index-qlearn", "--config", str(conf), "--k-max", "1", "--t-max", "20",
                         "--out-dir", str(tmp_path / "o")]) == 0
        echo = capsys.readouterr().out.splitlines()[0]
        assert "k_max=1 t_max=20" in echo and "k_states=25" in echo

    def test_subcommand_sets_algorithm(self, tmp_path, capsys):
        conf = tmp_path / "run.txt"
        conf.write_text("algorithm=index_dqn\n")
        assert cli.main(["solve", "--config", str(conf), "--out-dir", str(tmp_path)]) == 0
        assert "algorithm=solve" in capsys.readouterr().out

    def test_config_error(self, tmp_path, capsys):
        assert cli.main(["index-qlearn", "--alpha", "0.01", "--gamma", "0.05", "--out-dir", str(tmp_path)]) == 2
        assert "gamma" in capsys.readouterr().err
        assert not any(tmp_path.iterdir())

    def test_unwritable(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert cli.main(["qlearn", "--t-max", "100", "--out-dir", str(blocker / "sub")]) == 1

    def test_report(self, tmp_path, capsys):
        assert cli.main(["report", str(tmp_path)]) == 1
        cli.main(["qlearn", "--t-max", "100", "--out-dir", str(tmp_path)])
        capsys.readouterr()
        assert cli.main(["report", str(tmp_path)]) == 0
        assert "QL (EG)" in capsys.readouterr().out
