import hashlib

import pytest

from mlprec.cli import RunConfig, build_parser, main, read_config_file, resolve_config

from conftest import DATA

TOY = DATA / "toy" / "run.cfg"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def digests(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "a.cfg"
    cfg_file.write_text("alpha = 0.25\nepochs = 7\nratings = r.csv\nrating_scale = 0, 10\n")
    args = build_parser().parse_args(["train", "--config", str(cfg_file), "--alpha", "0.75"])
    cfg = resolve_config(args)
    assert cfg.alpha == 0.75  # flag beats file
    assert cfg.epochs == 7  # file beats default
    assert cfg.b == RunConfig().b  # default
    assert cfg.ratings == tmp_path / "r.csv"
    assert cfg.threshold == 5.0


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    with pytest.raises(ValueError):
        read_config_file(bad, RunConfig())
    code, _, err = run(capsys, "train", "--config", str(bad))
    assert code == 1 and "no_such_key" in err
    code, _, err = run(capsys, "train", "--config", str(tmp_path / "missing.cfg"))
    assert code == 1 and "missing.cfg" in err


def test_section_header_optional(tmp_path):
    f = tmp_path / "s.cfg"
    f.write_text("[run]\nseed = 5\nbias = yes\n")
    cfg = RunConfig()
    read_config_file(f, cfg)
    assert cfg.seed == 5 and cfg.bias is True


def test_train_writes_models(tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--config", str(TOY), "--model-dir", str(tmp_path), "--quiet", "--epochs", "50")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "user_id,final_cost" and len(lines) == 11
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"u{k:02d}.model" for k in range(1, 11)]


def test_train_is_reproducible_and_job_independent(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--config", str(TOY), "--quiet", "--epochs", "40", "--seed", "3"]
    assert run(capsys, "train", *common, "--model-dir", str(a))[0] == 0
    assert run(capsys, "train", *common, "--model-dir", str(b), "--jobs", "2")[0] == 0
    assert digests(a) == digests(b)


def test_train_user_subset_and_unknown(tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--config", str(TOY), "--model-dir", str(tmp_path), "--quiet",
                       "--epochs", "5", "--user", "u03", "--user", "u01")
    assert code == 0 and [line.split(",")[0] for line in out.splitlines()[1:]] == ["u03", "u01"]
    code, _, err = run(capsys, "train", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "nobody")
    assert code == 1 and "nobody" in err


def test_train_missing_features_named(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--config", str(TOY), "--features", str(tmp_path / "nope.csv"))
    assert code == 1 and "nope.csv" in err


def test_train_keep_going(tmp_path, capsys):
    ratings = tmp_path / "r.csv"
    ratings.write_text("a,i1,5\na,i2,1\nb,i1,5\nb,i2,1\n")
    feats = tmp_path / "f.csv"
    feats.write_text("i1,1\ni2,-1\n")
    argv = ["train", "--ratings", str(ratings), "--features", str(feats), "--model-dir", str(tmp_path / "m"),
            "--topology", "1,1", "--preprocessing", "scale", "--quiet", "--alpha", "1e300", "--lambda", "1",
            "--epochs", "5"]
    code, out, err = run(capsys, *argv, "--keep-going")
    assert code == 1 and err.count("ERROR") == 2


def test_gradcheck_passes_by_default(capsys):
    code, out, _ = run(capsys, "gradcheck", "--config", str(TOY), "--quiet")
    assert code == 0
    eps = float(out.splitlines()[0].split(",")[1])
    assert eps <= 1e-7


def test_gradcheck_paper_literal_relu_exits_2(capsys):
    code, out, _ = run(capsys, "gradcheck", "--config", str(TOY), "--quiet", "--activation", "relu",
                       "--init-bound", "1.0", "--paper-literal-backprop")
    assert code == 2 and out.splitlines()[-1] == "result,fail"


def test_gradcheck_unreadable_ratings(tmp_path, capsys):
    code, _, err = run(capsys, "gradcheck", "--config", str(TOY), "--ratings", str(tmp_path / "gone.csv"))
    assert code == 1 and "gone.csv" in err


def test_tune_grid_rows(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(f"ratings = {DATA / 'toy' / 'ratings.csv'}\nfeatures = {DATA / 'toy' / 'features.csv'}\n"
                   "tune_alpha = 0.1, 1.0\ntune_lambda = 0.0, 1.0\ntune_b = 10\nepochs = 20\n")
    code, out, err = run(capsys, "tune", "--config", str(cfg), "--quiet")
    assert code == 0 and len(out.splitlines()) == 5
    assert "best:" in err


def test_tune_random_deterministic(capsys):
    argv = ["tune", "--config", str(TOY), "--quiet", "--random", "--trials", "8", "--seed", "7", "--epochs", "20"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0 and first[1] == second[1]
    assert len(first[1].splitlines()) == 9


def test_tune_divergent_alpha_flagged(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(f"ratings = {DATA / 'toy' / 'ratings.csv'}\nfeatures = {DATA / 'toy' / 'features.csv'}\n"
                   "tune_alpha = 0.5, 1e300\ntune_lambda = 1.0\nepochs = 10\n")
    code, out, _ = run(capsys, "tune", "--config", str(cfg), "--quiet")
    rows = out.splitlines()[1:]
    assert code == 0
    assert rows[-1].endswith(",yes") and rows[0].endswith(",no")


def test_tune_empty_space(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(f"ratings = {DATA / 'toy' / 'ratings.csv'}\nfeatures = {DATA / 'toy' / 'features.csv'}\ntune_alpha =\n")
    assert run(capsys, "tune", "--config", str(cfg), "--quiet")[0] == 1


@pytest.mark.parametrize("extra", ["tune_fraction = 0.999\n", "mode = minibatch\ntune_b = 100\n"])
def test_tune_unsatisfiable_split(tmp_path, capsys, extra):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(f"ratings = {DATA / 'toy' / 'ratings.csv'}\nfeatures = {DATA / 'toy' / 'features.csv'}\n"
                   "epochs = 1\n" + extra)
    assert run(capsys, "tune", "--config", str(cfg), "--quiet")[0] == 1


def test_recommend_table_and_thresholds(tmp_path, capsys):
    assert run(capsys, "train", "--config", str(TOY), "--model-dir", str(tmp_path), "--quiet", "--user", "u01")[0] == 0
    code, out, _ = run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01", "--quiet")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "item_id,score,recommended" and len(lines) == 6
    scores = [float(line.split(",")[1]) for line in lines[1:]]
    assert scores == sorted(scores, reverse=True) and all(0 < s < 1 for s in scores)
    _, low, _ = run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01",
                    "--decision-threshold", "1e-300", "--quiet")
    assert all(line.endswith(",yes") for line in low.splitlines()[1:])
    _, high, _ = run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01",
                     "--decision-threshold", "1", "--quiet")
    assert all(line.endswith(",no") for line in high.splitlines()[1:])


def test_recommend_failures(tmp_path, capsys):
    code, _, err = run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01")
    assert code == 1 and "u01" in err
    assert run(capsys, "train", "--config", str(TOY), "--model-dir", str(tmp_path), "--quiet", "--user", "u01",
               "--epochs", "5")[0] == 0
    bad = tmp_path / "cands.csv"
    bad.write_text("n1,1,2,3\nn2,1,2\n")
    code, _, _ = run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01",
                     "--candidates", str(bad))
    assert code == 1
    (tmp_path / "u01.model").write_text("{not json")
    assert run(capsys, "recommend", "--config", str(TOY), "--model-dir", str(tmp_path), "--user", "u01")[0] == 1


def test_output_flag_writes_file(tmp_path, capsys):
    target = tmp_path / "eps.csv"
    code, out, _ = run(capsys, "gradcheck", "--config", str(TOY), "--quiet", "--output", str(target))
    assert code == 0 and out == "" and target.read_text().startswith("epsilon,")


def test_eval_xor(capsys):
    code, out, _ = run(capsys, "eval", "--config", str(DATA / "xor" / "run.cfg"), "--quiet")
    assert code == 0
    last = out.splitlines()[-1].split(",")
    assert last[0] == "ALL"
    mlp, linear, cf = float(last[3]), float(last[5]), float(last[7])
    assert mlp >= 0.95 and linear <= 0.80 and cf <= 0.80


def test_eval_empty_validation(tmp_path, capsys):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(f"ratings = {DATA / 'toy' / 'ratings.csv'}\nfeatures = {DATA / 'toy' / 'features.csv'}\n"
                   "epochs = 1\neval_fraction = 0.999\n")
    code, _, err = run(capsys, "eval", "--config", str(cfg), "--quiet")
    assert code == 1 and "empty" in err


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "mlprec", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gradcheck" in proc.stdout
