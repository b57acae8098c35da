from __future__ import annotations

import json
from pathlib import Path

import pytest

from splat_contrib.illumsplat.cli.commands import eval as eval_command
from splat_contrib.illumsplat.cli.root import run
from splat_contrib.illumsplat.models import EvalRow
from splat_contrib.illumsplat.scene import read_image
from splat_contrib.illumsplat.synthbench import SynthDataset, read_dataset
from splat_contrib.illumsplat.testing import make_tiny_config
from splat_contrib.illumsplat.trainer import TrainState, write_config


def last_json(out: str) -> dict[str, object]:
    return json.loads(out[out.index("{") :])


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory: pytest.TempPathFactory, dataset_dir: Path) -> Path:
    root = tmp_path_factory.mktemp("cli")
    config = root / "tiny.conf"
    write_config(config, make_tiny_config(iterations=2))
    out = root / "ckpt"
    run(["train", "--data", str(dataset_dir), "--out", str(out), "--config", str(config), "--no-progress"])
    return out


class TestSynth:
    ARGS = ["--gaussians", "40", "--views", "6", "--test-views", "2", "--styles", "2", "--size", "16x16", "--clean-images", "2"]

    def test_writes_dataset(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        out = tmp_path / "data"
        run(["synth", "--out", str(out), "--seed", "3", *self.ARGS])
        summary = last_json(capsys.readouterr().out)
        assert summary["images"] == 8 * 3
        assert summary["seed"] == 3
        dataset = read_dataset(out)
        assert dataset.style_count == 3
        assert dataset.views("test") == [6, 7]

    def test_refuses_non_empty_directory(self, tmp_path: Path) -> None:
        (tmp_path / "keep.txt").write_text("x")
        with pytest.raises(SystemExit) as exc_info:
            run(["synth", "--out", str(tmp_path), *self.ARGS])
        assert exc_info.value.code == 2
        assert (tmp_path / "keep.txt").is_file()

    def test_force_overwrites(self, tmp_path: Path) -> None:
        (tmp_path / "stale.txt").write_text("x")
        run(["synth", "--out", str(tmp_path), "--force", *self.ARGS])
        assert not (tmp_path / "stale.txt").exists()
        assert (tmp_path / "manifest.txt").is_file()

    def test_negative_count(self, tmp_path: Path) -> None:
        with pytest.raises(SystemExit) as exc_info:
            run(["synth", "--out", str(tmp_path / "d"), "--styles", "-1"])
        assert exc_info.value.code == 2

    def test_bad_size_is_an_argparse_error(self, tmp_path: Path) -> None:
        with pytest.raises(SystemExit) as exc_info:
            run(["synth", "--out", str(tmp_path), "--size", "16"])
        assert exc_info.value.code == 2


class TestTrain:
    def test_summary(self, checkpoint: Path) -> None:
        assert (checkpoint / "metrics.csv").is_file()
        assert (checkpoint / "cameras.txt").is_file()

    def test_zero_iterations(self, tmp_path: Path, dataset_dir: Path, capsys: pytest.CaptureFixture[str]) -> None:
        config = tmp_path / "tiny.conf"
        write_config(config, make_tiny_config(iterations=5))
        run(
            [
                "train",
                "--data",
                str(dataset_dir),
                "--out",
                str(tmp_path / "ckpt"),
                "--config",
                str(config),
                "--iterations",
                "0",
                "--variant",
                "M1",
                "--no-progress",
            ]
        )
        summary = last_json(capsys.readouterr().out)
        assert summary["iterations"] == 0
        assert summary["variant"] == "M1"
        assert summary["gaussians"] == 30

    def test_missing_data(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv("ILLUMSPLAT_DATA", raising=False)
        with pytest.raises(SystemExit) as exc_info:
            run(["train", "--out", str(tmp_path / "ckpt")])
        assert exc_info.value.code == 2

    def test_data_from_environment(self, tmp_path: Path, dataset_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("ILLUMSPLAT_DATA", str(dataset_dir))
        config = tmp_path / "tiny.conf"
        write_config(config, make_tiny_config(iterations=1))
        run(["train", "--out", str(tmp_path / "ckpt"), "--config", str(config), "--no-progress"])
        assert (tmp_path / "ckpt" / "metrics.csv").is_file()


class TestRender:
    @pytest.mark.parametrize("latent", [["sample", "3"], ["sample", "4"]])
    def test_writes_image(self, checkpoint: Path, tmp_path: Path, latent: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        out = tmp_path / "view.ppm"
        run(["render", "--ckpt", str(checkpoint), "--camera", "1", "--latent", *latent, "--out", str(out)])
        summary = last_json(capsys.readouterr().out)
        assert summary["field_evaluations"] == 1
        assert summary["latent"] == " ".join(latent)
        assert read_image(out).shape == (16, 16, 3)

    def test_latent_from_image(self, checkpoint: Path, dataset_dir: Path, tmp_path: Path) -> None:
        out = tmp_path / "view.ppm"
        image = dataset_dir / "img_0_1.ppm"
        run(["render", "--ckpt", str(checkpoint), "--camera", "0", "--latent", "from-image", str(image), "--out", str(out), "--maxval", "65535"])
        assert out.read_bytes().startswith(b"P6")

    def test_same_seed_same_features(self, checkpoint: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        hashes = []
        for name in ("a.ppm", "b.ppm"):
            run(["render", "--ckpt", str(checkpoint), "--camera", "2", "--latent", "sample", "7", "--out", str(tmp_path / name)])
            hashes.append(last_json(capsys.readouterr().out)["feature_hash"])
        assert hashes[0] == hashes[1]
        assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()

    def test_seed_stands_for_sample_latent(self, checkpoint: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        run(["render", "--ckpt", str(checkpoint), "--camera", "2", "--latent", "sample", "7", "--out", str(tmp_path / "a.ppm")])
        explicit = last_json(capsys.readouterr().out)
        run(["render", "--ckpt", str(checkpoint), "--camera", "2", "--seed", "7", "--out", str(tmp_path / "b.ppm")])
        seeded = last_json(capsys.readouterr().out)
        assert seeded["latent"] == "sample 7"
        assert seeded["feature_hash"] == explicit["feature_hash"]
        assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()

    @pytest.mark.parametrize(
        "extra",
        [
            ["--camera", "99", "--latent", "sample", "1"],
            ["--camera", "0"],
            ["--camera", "0", "--latent", "style-queue", "9"],
            ["--camera", "0", "--latent", "sample", "x"],
            ["--camera", "0", "--latent", "bogus", "1"],
        ],
    )
    def test_invalid_arguments(self, checkpoint: Path, tmp_path: Path, extra: list[str]) -> None:
        with pytest.raises(SystemExit) as exc_info:
            run(["render", "--ckpt", str(checkpoint), "--out", str(tmp_path / "x.ppm"), *extra])
        assert exc_info.value.code == 2


class TestEval:
    def test_prints_table(self, checkpoint: Path, dataset_dir: Path, capsys: pytest.CaptureFixture[str]) -> None:
        run(["eval", "--ckpt", str(checkpoint), "--data", str(dataset_dir), "--latent", "sample"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == EvalRow.header()
        # two test views times three styles, then the mean row
        assert len(lines) == 1 + 2 * 3 + 1
        for line in lines[1:]:
            assert line.count(",") == 3

    def test_seed_reaches_evaluation(self, checkpoint: Path, dataset_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        seeds: list[int | None] = []

        def recording(state: TrainState, dataset: SynthDataset, split: str = "test", seed: int | None = None) -> list[EvalRow]:
            seeds.append(seed)
            return []

        monkeypatch.setattr(eval_command, "evaluate", recording)
        monkeypatch.delenv("ILLUMSPLAT_SEED", raising=False)
        run(["eval", "--ckpt", str(checkpoint), "--data", str(dataset_dir), "--latent", "sample", "--seed", "5"])
        run(["--seed", "6", "eval", "--ckpt", str(checkpoint), "--data", str(dataset_dir)])
        run(["eval", "--ckpt", str(checkpoint), "--data", str(dataset_dir)])
        assert seeds == [5, 6, None]

    def test_missing_checkpoint(self, tmp_path: Path, dataset_dir: Path) -> None:
        with pytest.raises(SystemExit) as exc_info:
            run(["eval", "--ckpt", str(tmp_path), "--data", str(dataset_dir)])
        assert exc_info.value.code != 0


class TestCheckGrad:
    def test_opacity_suite(self, capsys: pytest.CaptureFixture[str]) -> None:
        run(["check-grad", "--cases", "opacity"])
        report = last_json(capsys.readouterr().out)
        assert report["passed"] is True
        assert report["cases"] == "opacity"

    def test_unknown_case(self) -> None:
        with pytest.raises(SystemExit) as exc_info:
            run(["check-grad", "--cases", "nope"])
        assert exc_info.value.code == 2


class TestInspect:
    def test_checkpoint(self, checkpoint: Path, capsys: pytest.CaptureFixture[str]) -> None:
        run(["inspect", str(checkpoint)])
        summary = last_json(capsys.readouterr().out)
        assert summary["iteration"] == 2
        assert summary["variant"] == "M6"
        assert summary["cameras"] == 8

    def test_seed_reports_sample_features(self, checkpoint: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        run(["inspect", str(checkpoint), "--seed", "7"])
        summary = last_json(capsys.readouterr().out)
        run(["render", "--ckpt", str(checkpoint), "--camera", "1", "--latent", "sample", "7", "--out", str(tmp_path / "v.ppm")])
        rendered = last_json(capsys.readouterr().out)
        assert summary["sample_feature_hash"] == rendered["feature_hash"]

    def test_no_seed_no_sample_features(self, checkpoint: Path, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv("ILLUMSPLAT_SEED", raising=False)
        run(["inspect", str(checkpoint)])
        assert "sample_feature_hash" not in last_json(capsys.readouterr().out)

    def test_scene_file(self, dataset_dir: Path, capsys: pytest.CaptureFixture[str]) -> None:
        run(["inspect", str(dataset_dir / "gt.scene")])
        summary = last_json(capsys.readouterr().out)
        assert summary["gaussians"] == 40
        assert summary["sh_degree"] == 1
