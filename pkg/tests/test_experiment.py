import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from qatune.chimera import build_chimera, choi_clique_embedding
from qatune.embedding import find_embedding, write_embedding
from qatune.errors import ConfigError
from qatune.experiment import load_config, parse_config, recompute_pi, run_experiment, unpack_states
from qatune.generators import generate, write_instance
from qatune.metrics import CSV_COLUMNS


@pytest.fixture
def workspace(tmp_path):
    G = build_chimera(2)
    for i in range(2):
        write_instance(generate("RAN", i, G=G, R=3), tmp_path / f"ran_{i}.txt")
    inst = generate("3MC", 5, n=8)
    write_instance(inst, tmp_path / "mc.txt")
    write_embedding(find_embedding(inst.H, G, seed=0), tmp_path / "mc.emb")
    return tmp_path


def _config(ws, **over):
    data = {
        "seed": 3,
        "target": {"k": 2},
        "instances": [{"glob": "ran_*.txt"}, {"path": "mc.txt", "embedding": "mc.emb"}],
        "reads": 60,
        "gauges": [1, 3],
        "scales": [1.0, 0.5],
        "kappa": 2.0,
        "postprocess": [[], ["majority_vote"], ["descent_embedded"]],
        "output": "out/results.csv",
    }
    data.update(over)
    path = ws / "exp.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_produces_expected_rows(workspace):
    cfg = load_config(_config(workspace))
    text = run_experiment(cfg)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    # native: 2 settings x 2 scales x 2 stage lists x 2 criteria; embedded: 3 stage lists
    assert len(lines) - 1 == 2 * (2 * 2 * 2 * 2) + 2 * 2 * 3 * 2
    assert (workspace / "out" / "results.csv").read_text() == text


def test_results_identical_across_worker_counts(workspace):
    path = _config(workspace, output=None)
    base = run_experiment(load_config(path))
    for w in (4, 8):
        assert run_experiment(load_config(_config(workspace, output=None, workers=w))) == base


def test_archive_recomputes_success(workspace):
    cfg = load_config(_config(workspace, archive_dir="arch", postprocess=[[]], scales=[1.0], gauges=[1]))
    text = run_experiment(cfg)
    manifest = json.loads((workspace / "arch" / "manifest.json").read_text())
    assert len(manifest) == 3
    rows = [line.split(",") for line in text.splitlines()[1:]]
    col = {c: i for i, c in enumerate(CSV_COLUMNS)}
    for entry in manifest:
        row = next(r for r in rows if r[col["instance_id"]] == entry["instance_id"]
                   and r[col["criterion"]].startswith("exact_ground"))
        pi = recompute_pi(workspace / "arch" / entry["file"], entry["reference_energy"])
        assert pi == pytest.approx(float(row[col["pi"]]))
        with np.load(workspace / "arch" / entry["file"]) as z:
            states = unpack_states(z["packed"], entry["width"])
        assert set(np.unique(states)) <= {-1, 1}
        assert hashlib.sha256(np.ascontiguousarray(states).tobytes()).hexdigest() == entry["states_sha256"]


def test_empty_instance_list_gives_header_only(tmp_path):
    cfg = parse_config({"instances": []}, tmp_path)
    assert run_experiment(cfg) == ",".join(CSV_COLUMNS) + "\n"


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"kappa": "strong"},
    {"kappa": -1},
    {"gauges": [0]},
    {"reads": 5, "gauges": [10]},
    {"scales": [0.0]},
    {"anneal_times": [1e-6]},
    {"criteria": ["sometimes"]},
    {"postprocess": [["polish"]]},
    {"instances": [{"path": "missing.txt"}]},
    {"annealer": {"warp": 9}},
    {"target": {"m": 2}},
    [1, 2],
])
def test_bad_configs(tmp_path, data):
    with pytest.raises(ConfigError):
        parse_config(data, tmp_path)


def test_embedded_instance_needs_target(workspace):
    with pytest.raises(ConfigError):
        parse_config({"instances": [{"path": "mc.txt", "embedding": "mc.emb"}]}, workspace)


def test_malformed_yaml(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.yaml")))
def test_shipped_configs_parse(tmp_path, name):
    shutil.copy(CONFIG_DIR / name, tmp_path / name)
    (tmp_path / "instances").mkdir()
    inst = generate("NAE", 0, n=16)
    write_instance(inst, tmp_path / "instances" / "nae_0000.txt")
    (tmp_path / "instances" / "nae_0000.emb").write_text(
        "\n".join(f"{i}: " + " ".join(map(str, c)) for i, c in choi_clique_embedding(4).chains.items()) + "\n")
    cfg = load_config(tmp_path / name)
    assert cfg.reads == 1000 and cfg.output is not None
