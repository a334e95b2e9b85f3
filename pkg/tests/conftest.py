"""Shared fixtures.

`pipeline` runs the full command-line workflow once per test session on the
bundled synthetic corpus (annotate -> pca -> cluster -> six trained models ->
frame predictor -> generate -> evaluate) and hands its workspace plus phase
timings to every acceptance test that inspects trained artifacts.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest
from click.testing import CliRunner

from storykit.cli import main

TRAIN_YAML = """\
learning_rate: 0.003
max_epochs: 60
patience: 8
batch_size: 32
seed: 0
"""

PIPELINE_ATTRIBUTES = ("none", "sentiment", "length3", "predicates", "frames",
                       "bow")


@dataclass
class PipelineRun:
    workdir: Path
    timings: dict = field(default_factory=dict)

    @property
    def total_seconds(self) -> float:
        return sum(self.timings.values())


def _run(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, f"{args!r} failed:\n{result.output}"
    return result


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory) -> PipelineRun:
    workdir = tmp_path_factory.mktemp("pipeline")
    run = PipelineRun(workdir=workdir)
    cfg = workdir / "train_config.yaml"
    cfg.write_text(TRAIN_YAML, encoding="utf-8")
    ws = str(workdir)

    def phase(name, args):
        t0 = time.perf_counter()
        _run(args)
        run.timings[name] = time.perf_counter() - t0

    phase("make-synthetic", ["make-synthetic", "--workdir", ws,
                             "--n", "500", "--seed", "7"])
    phase("annotate", ["annotate", "--workdir", ws,
                       "--split", "train", "--split", "dev", "--split", "test"])
    phase("fit-pca", ["fit-pca", "--workdir", ws])
    phase("cluster", ["cluster", "--workdir", ws])
    for attr in PIPELINE_ATTRIBUTES:
        phase(f"train-{attr}", ["train", "--workdir", ws, "--attribute", attr,
                                "--config", str(cfg)])
    phase("train-frame-predictor", ["train-frame-predictor", "--workdir", ws])
    phase("generate", ["generate", "--workdir", ws, "--attribute", "sentiment",
                       "--split", "dev", "--limit", "5",
                       "--out", str(workdir / "generations.jsonl")])
    phase("evaluate", ["evaluate", "--workdir", ws, "--what", "all",
                       "--split", "dev", "--limit", "30"])
    return run
