"""The whole pipeline through the command line, stage by stage.

Copies the bundled mini-corpus config into a temporary directory, then
drives: index -> tune-bm25 -> build-bitext -> train-model1 ->
extract-features -> train-ltr -> run -> evaluate, and finally compares
the re-ranked run against the --no-rerank BM25 baseline.

Run:  python demos/05_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from fieldrank.cli import main as fieldrank

DATA = Path(__file__).parent.parent / "data" / "mini"

workdir = Path(tempfile.mkdtemp(prefix="fieldrank-demo-"))
config = {
    "workdir": str(workdir / "artifacts"),
    "corpus": str(DATA / "docs.tsv"),
    "wordpiece_vocab": str(DATA / "wp_vocab.txt"),
    "queries": {s: str(DATA / f"queries_{s}.tsv") for s in ("train", "dev", "test")},
    "qrels": {s: str(DATA / f"qrels_{s}.txt") for s in ("train", "dev", "test")},
    "candidate_depth": 1000,
    "bm25": {"k1": 1.2, "b": 0.75,
             "tune_grid": {"k1": [0.6, 1.2, 2.0], "b": [0.3, 0.75, 0.9]}},
    "model1": {"chunk_len": 8, "iterations": 5},
    "ltr": {"num_trees": 25, "num_leaves": 5, "learning_rate": 0.1,
            "min_leaf_instances": 2, "ndcg_truncation": 10, "sigma": 1.0},
    "run_tag": "demo",
}
config_path = workdir / "config.json"
config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
print(f"artifacts in {workdir}")

for command in ("index", "tune-bm25", "build-bitext", "train-model1",
                "extract-features", "train-ltr"):
    print(f"\n$ fieldrank {command}")
    assert fieldrank([command, "--config", str(config_path)]) == 0

print("\n$ fieldrank run  (re-ranked)")
assert fieldrank(["run", "--config", str(config_path)]) == 0
print("\n$ fieldrank evaluate")
assert fieldrank(["evaluate", "--config", str(config_path)]) == 0

print("\n$ fieldrank run --no-rerank  (tuned BM25 baseline)")
baseline = workdir / "baseline.run"
assert fieldrank(["run", "--config", str(config_path), "--no-rerank",
                  "--output", str(baseline)]) == 0
print("\n$ fieldrank evaluate --run baseline.run")
assert fieldrank(["evaluate", "--config", str(config_path),
                  "--run", str(baseline)]) == 0

print("\nrun file head:")
run_path = workdir / "artifacts" / "runs" / "test.run"
for line in run_path.read_text().splitlines()[:5]:
    print(f"  {line}")
