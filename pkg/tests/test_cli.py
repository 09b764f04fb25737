import io

import numpy as np
import pytest

from mvcan import checkpoint
from mvcan import cli
from mvcan import data as mvd
from mvcan import engine as en
from mvcan import verification as vf

TINY = ["--hidden", "6,5", "--embed-dim", "3", "--epochs", "4", "--t2", "2",
        "--pretrain-epochs", "3", "--batch-size", "16", "--lr", "1e-3", "--kmeans-init", "3",
        "--threads", "1"]


def run(*argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.mvds"
    code, _ = run("generate", "--n", 60, "--k", 3, "--views", "inf:4,inf:5",
                  "--noise-views", 1, "--seed", 7, "--out", path)
    assert code == 0
    return path


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    outdir = tmp_path_factory.mktemp("run")
    code, text = run("train", "--data", dataset, "--out", outdir, *TINY)
    assert code == 0
    return outdir, text


def test_generate_writes_three_views(dataset):
    ds = mvd.load(dataset)
    assert ds.n_views == 3 and ds.widths == [4, 5, 4] and ds.k_hint == 3
    assert dataset.with_name(dataset.name + ".manifest.txt").exists()


def test_generate_is_byte_identical(tmp_path, dataset):
    other = tmp_path / "again.mvds"
    run("generate", "--n", 60, "--k", 3, "--views", "inf:4,inf:5", "--noise-views", 1,
        "--seed", 7, "--out", other)
    assert other.read_bytes() == dataset.read_bytes()


def test_generate_prints_sanity_metrics(tmp_path):
    code, text = run("generate", "--n", 40, "--k", 2, "--views", "inf:3,noise:3",
                     "--seed", 1, "--out", tmp_path / "x.mvds")
    assert code == 0 and "chance level" in text and "noise1: K-means ACC" in text


def test_missing_k_is_usage_error(tmp_path):
    code, _ = run("generate", "--n", 10, "--views", "inf:2", "--out", tmp_path / "x")
    assert code == 2


def test_bad_view_spec_and_bad_config_are_usage_errors(tmp_path, dataset):
    assert run("generate", "--n", 10, "--k", 2, "--views", "inf:x", "--out", tmp_path / "x")[0] == 2
    assert run("generate", "--n", 1, "--k", 2, "--views", "inf:2", "--out", tmp_path / "x")[0] == 2
    assert run("train", "--data", dataset, "--out", tmp_path, "--lam", "-1")[0] == 2
    assert run("train", "--data", dataset, "--out", tmp_path, "--t1", "0")[0] == 2


def test_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MVCAN_SEED", "7")
    path = tmp_path / "env.mvds"
    run("generate", "--n", 60, "--k", 3, "--views", "inf:4,inf:5", "--noise-views", 1,
        "--out", path)
    monkeypatch.delenv("MVCAN_SEED")
    explicit = tmp_path / "explicit.mvds"
    run("generate", "--n", 60, "--k", 3, "--views", "inf:4,inf:5", "--noise-views", 1,
        "--seed", 7, "--out", explicit)
    assert path.read_bytes() == explicit.read_bytes()
    monkeypatch.setenv("MVCAN_SEED", "abc")
    assert run("generate", "--n", 6, "--k", 2, "--views", "inf:2", "--out", path)[0] == 2


def test_train_defaults_follow_method():
    args = cli.build_parser().parse_args(["train", "--data", "d", "--out", "o"])
    assert (args.lam, args.t1, args.t2, args.batch_size, args.lr, args.embed_dim) == \
        (100.0, 2, 100, 256, 1e-4, 10)
    assert args.hidden == (500, 500, 2000)


def test_train_outputs(trained):
    outdir, text = trained
    assert (outdir / "model.mvck").exists() and (outdir / "report.jsonl").exists()
    assert "ACC" in text and "weights" in text


def test_eval_reproduces_train_metrics(trained, dataset):
    outdir, text = trained
    code, evaluated = run("eval", "--model", outdir / "model.mvck", "--data", dataset)
    assert code == 0
    line = [ln for ln in text.splitlines() if ln.startswith("ACC")][0]
    assert line in evaluated


def test_export_rows(trained, dataset, tmp_path):
    code, _ = run("export", "--model", trained[0] / "model.mvck", "--data", dataset,
                  "--out", tmp_path / "emb.mvds")
    assert code == 0
    exp = mvd.load(tmp_path / "emb.mvds")
    assert exp.n_samples == 60 and exp.widths == [9, 3]
    assert np.allclose(exp.views[1].sum(axis=1), 1.0)


def test_eval_mismatched_dataset(trained, tmp_path):
    other = tmp_path / "other.mvds"
    run("generate", "--n", 20, "--k", 3, "--views", "inf:4,inf:6,inf:4", "--out", other)
    code = cli.main(["eval", "--model", str(trained[0] / "model.mvck"), "--data", str(other)],
                    out=io.StringIO())
    assert code == 1


def test_mismatch_message_names_widths(trained, tmp_path):
    model = checkpoint.load(trained[0] / "model.mvck")
    ds = mvd.MultiViewDataset([np.zeros((2, 4)), np.zeros((2, 6)), np.zeros((2, 4))])
    with pytest.raises(ValueError, match=r"expected \[4, 5, 4\], got \[4, 6, 4\]"):
        en.predict(model, ds)


def test_same_seed_same_metrics(dataset, tmp_path, trained):
    code, text = run("train", "--data", dataset, "--out", tmp_path, *TINY)
    assert code == 0
    assert (tmp_path / "report.jsonl").read_bytes() == (trained[0] / "report.jsonl").read_bytes()
    assert (tmp_path / "model.mvck").read_bytes() == (trained[0] / "model.mvck").read_bytes()


def test_ablate_routes_to_mode(dataset, tmp_path):
    code, text = run("train", "--data", dataset, "--out", tmp_path / "a", "--ablate", "rec-only",
                     *TINY)
    assert code == 0 and "mode rec-only" in text
    code, text = run("ablate", "kmeans-concat", "--data", dataset, "--out", tmp_path / "b", *TINY)
    assert code == 0 and "mode kmeans-concat" in text
    assert not (tmp_path / "b" / "model.mvck").exists()


def test_missing_dataset_is_runtime_error(tmp_path):
    assert run("train", "--data", tmp_path / "nope.mvds", "--out", tmp_path)[0] == 1


def test_verify_single_and_all(tmp_path):
    code, text = run("verify", "--theorem", "4", "--trials", 10)
    assert code == 0 and text.count("theorem:") == 1
    code, text = run("verify", "--all", "--trials", 20, "--seed", 0, "--out", tmp_path / "r.txt")
    assert code == 0 and text.count("theorem:") == 5
    assert (tmp_path / "r.txt").read_text() == text
    assert run("verify", "--all", "--trials", 0)[0] == 2


def test_verify_sign_bug_exits_three(monkeypatch):
    def flipped(zs, mus, weights):
        z = np.concatenate([w * z for w, z in zip(weights, zs)])
        c = np.hstack([w * mu for w, mu in zip(weights, mus)])
        q = 1.0 + np.sum((c - z) ** 2, axis=1)
        return q / q.sum()
    monkeypatch.setattr(vf, "fused_soft_labels", flipped)
    code, text = run("verify", "--theorem", "3", "--trials", 20)
    assert code == 3 and "status: FAIL" in text


# ---------------------------------------------------------------- checkpoint format

def test_checkpoint_round_trip(trained):
    path = trained[0] / "model.mvck"
    model = checkpoint.load(path)
    assert checkpoint.to_bytes(model) == path.read_bytes()
    assert model.config.hidden == (6, 5) and model.scaling is not None
    assert len(model.views[0].optimizer.m) == len(model.views[0].parameters())


def test_checkpoint_errors(trained):
    buf = (trained[0] / "model.mvck").read_bytes()
    with pytest.raises(checkpoint.CheckpointError, match="magic"):
        checkpoint.from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(checkpoint.CheckpointError, match="truncated"):
        checkpoint.from_bytes(buf[:-8])
    bad = buf.replace(b'"mvcan-ckpt/1"', b'"mvcan-ckpt/9"')
    with pytest.raises(checkpoint.CheckpointError, match="version"):
        checkpoint.from_bytes(bad)
    with pytest.raises(checkpoint.CheckpointError, match="expects"):
        checkpoint.from_bytes(buf + b"\0" * 8)
