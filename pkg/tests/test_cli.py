import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smcomplete import cli, synth
from smcomplete.smc import BlockPartition


@pytest.fixture
def rank2_files(tmp_path):
    A = synth.make_exact_rank(40, 36, 2, np.random.default_rng(2)) * 10
    b = BlockPartition.from_matrix(A, 10, 9)
    paths = {}
    for name in ("a11", "a12", "a21", "a22"):
        paths[name] = tmp_path / f"{name}.csv"
        cli.write_matrix(paths[name], getattr(b, name))
    paths["out"] = tmp_path / "out.csv"
    return b, paths


def block_argv(paths):
    return ["--a11", str(paths["a11"]), "--a12", str(paths["a12"]),
            "--a21", str(paths["a21"]), "--out", str(paths["out"])]


def test_impute_default(rank2_files, capsys):
    b, paths = rank2_files
    assert cli.main(["impute", *block_argv(paths)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "r_hat=2" in out.splitlines()
    assert "mode=row" in out
    assert any(line.startswith("s=9 d_norm=singular") for line in out.splitlines())
    est = cli.read_matrix(paths["out"])
    assert np.linalg.norm(est - b.a22) / np.linalg.norm(b.a22) <= 1e-8


def test_impute_column_mode(rank2_files, capsys):
    b, paths = rank2_files
    assert cli.main(["impute", *block_argv(paths), "--mode", "col"]) == 0
    assert "mode=col" in capsys.readouterr().out
    est = cli.read_matrix(paths["out"])
    assert np.linalg.norm(est - b.a22) / np.linalg.norm(b.a22) <= 1e-8


def test_impute_known_rank(rank2_files, capsys):
    b, paths = rank2_files
    assert cli.main(["impute", *block_argv(paths), "--rank", "2"]) == 0
    assert "rank=2" in capsys.readouterr().out
    est = cli.read_matrix(paths["out"])
    assert np.linalg.norm(est - b.a22) / np.linalg.norm(b.a22) <= 1e-8


def test_impute_rank_above_true_rank_is_numerical_failure(rank2_files, capsys):
    _, paths = rank2_files
    assert cli.main(["impute", *block_argv(paths), "--rank", "3"]) == cli.EXIT_NUMERIC
    assert "r=3" in capsys.readouterr().err


def test_impute_rank_and_threshold_exclusive(rank2_files, capsys):
    _, paths = rank2_files
    code = cli.main(["impute", *block_argv(paths), "--rank", "2", "--threshold", "3"])
    assert code == cli.EXIT_INPUT


def test_impute_mismatched_a12(rank2_files, capsys):
    b, paths = rank2_files
    cli.write_matrix(paths["a12"], b.a12[:-1])
    assert cli.main(["impute", *block_argv(paths)]) == cli.EXIT_INPUT
    assert "a12" in capsys.readouterr().err


def test_impute_bad_csv_names_block(rank2_files, capsys):
    _, paths = rank2_files
    paths["a21"].write_text("1,2\n3\n")
    assert cli.main(["impute", *block_argv(paths)]) == cli.EXIT_INPUT
    err = capsys.readouterr().err
    assert "a21" in err and "line 2" in err


def test_impute_missing_file(rank2_files, tmp_path, capsys):
    _, paths = rank2_files
    paths["a11"] = tmp_path / "nope.csv"
    assert cli.main(["impute", *block_argv(paths)]) == cli.EXIT_INPUT


def test_impute_zero_rank_warns(rank2_files, capsys):
    _, paths = rank2_files
    assert cli.main(["impute", *block_argv(paths), "--threshold", "1e-9"]) == 0
    out = capsys.readouterr().out
    assert "r_hat=0" in out and "warning" in out
    assert not cli.read_matrix(paths["out"]).any()


def test_impute_header_files(rank2_files, tmp_path):
    b, paths = rank2_files
    for name in ("a11", "a12", "a21"):
        cli.write_matrix(paths[name], getattr(b, name), header=True)
    assert cli.main(["impute", *block_argv(paths), "--header"]) == 0
    est = cli.read_matrix(paths["out"], header=True)
    assert est.shape == b.a22.shape


def test_nnm_fixed_t(rank2_files, capsys):
    b, paths = rank2_files
    assert cli.main(["nnm", *block_argv(paths), "--t", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "t_star=0.01" in out and "converged=True" in out
    assert cli.read_matrix(paths["out"]).shape == b.a22.shape


def test_nnm_cross_validated(rank2_files, capsys):
    _, paths = rank2_files
    assert cli.main(["nnm", *block_argv(paths), "--N", "4", "--H", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("t=") for line in out) == 5


def test_spectrum(tmp_path, capsys):
    path = tmp_path / "m.csv"
    cli.write_matrix(path, np.diag([3.0, 4.0]))
    assert cli.main(["spectrum", str(path)]) == 0
    assert capsys.readouterr().out.split() == ["4", "3"]


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@pytest.mark.property
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_roundtrip_bit_exact(tmp_path, M):
    path = tmp_path / "m.csv"
    cli.write_matrix(path, M)
    back = cli.read_matrix(path)
    assert back.shape == M.shape
    # compare bit patterns so that -0.0 and 0.0 are told apart
    np.testing.assert_array_equal(back.view(np.uint64), (M + 0.0 * (M != 0)).view(np.uint64))


# --- simulate ----------------------------------------------------------------

CONFIG = """\
[experiment]
p1 = 60
p2 = 60
m1 = 12
m2 = 12
spectrum = gap
r = 2
g = 5
solvers = smc-row, smc-col
reps = {reps}
seed = 7
"""


def test_simulate_deterministic(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONFIG.format(reps=1) + "\n[sweep]\ng = 1, 10\n")
    out1, out2 = tmp_path / "o1.csv", tmp_path / "o2.csv"
    assert cli.main(["simulate", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["simulate", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:2] == ["g", "solver"]
    for col in ("rel_spectral_mean", "rel_spectral_sd", "rel_spectral_se",
                "rel_frobenius_mean", "mean_r_hat", "reps", "base_seed"):
        assert col in header
    assert len(lines) == 1 + 2 * 2


def test_simulate_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONFIG.format(reps=1) + "treshold_const = 3\n")
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_INPUT
    assert "treshold_const" in capsys.readouterr().err


def test_simulate_requires_seed(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONFIG.format(reps=1).replace("seed = 7\n", ""))
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_INPUT
    assert "seed" in capsys.readouterr().err


def test_simulate_bad_number_names_key(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONFIG.format(reps="two"))
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_INPUT
    assert "reps" in capsys.readouterr().err


def test_simulate_unknown_section(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CONFIG.format(reps=1) + "[plots]\nx = 1\n")
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_INPUT


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--help"])
    out = capsys.readouterr().out
    for key in cli.EXPERIMENT_KEYS:
        assert key in out
