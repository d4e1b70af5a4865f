import json
import math
import subprocess
import sys

import numpy as np
import pytest

from edithints.cli import load_model, main
from edithints.policies import KernelParams, fit_model
from edithints.states import sequence
from edithints.traces import DataError, load_dataset

FIG2 = {
    "kind": "sequence",
    "traces": [
        {"id": "t1", "successful": True, "states": [["a"], ["a", "a", "c"]]},
        {"id": "t2", "successful": True, "states": [["b"], ["b", "b", "c"]]},
    ],
}


@pytest.fixture()
def fig2_path(tmp_path):
    path = tmp_path / "fig2.json"
    path.write_text(json.dumps(FIG2))
    return str(path)


def run(args):
    return main(list(args))


def test_dist_two_state_dataset(tmp_path, capsys):
    data = tmp_path / "two.json"
    data.write_text(
        json.dumps(
            {
                "kind": "sequence",
                "traces": [
                    {"id": "t1", "successful": True, "states": [["a", "b"], ["a", "b", "c"]]}
                ],
            }
        )
    )
    assert run(["dist", "--dataset", str(data)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "id,t1:1,t1:2"
    rows = [line.split(",") for line in out[1:]]
    matrix = np.array([[float(v) for v in row[1:]] for row in rows])
    assert np.allclose(matrix, [[0.0, 1.0], [1.0, 0.0]])


def test_dist_single_state(tmp_path, capsys):
    data = tmp_path / "one.json"
    data.write_text(
        json.dumps(
            {
                "kind": "sequence",
                "traces": [{"id": "t", "successful": True, "states": [["a"]]}],
            }
        )
    )
    assert run(["dist", "--dataset", str(data)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out == ["id,t:1", "t:1,0.0"]


def test_dist_symmetric(tmp_path, capsys):
    from edithints.evaluate import synthetic_corpus
    from edithints.traces import dataset_to_dict

    data = tmp_path / "corpus.json"
    data.write_text(json.dumps(dataset_to_dict(synthetic_corpus(3, 4, "abcde", min_missing=1, max_missing=3))))
    assert run(["dist", "--dataset", str(data)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    matrix = np.array([[float(v) for v in line.split(",")[1:]] for line in out[1:]])
    assert np.allclose(matrix, matrix.T)


def test_fit_stores_worked_kernel_matrix(fig2_path, tmp_path):
    model_path = tmp_path / "model.json"
    assert run(
        ["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)]
    ) == 0
    raw = json.loads(model_path.read_text())
    e = math.exp(-0.5)
    assert np.allclose(raw["kernel_matrix"], [[1.0, e], [e, 1.0]], atol=1e-12)
    assert raw["provenance"]["dataset_sha256"]


def test_fit_is_byte_identical(fig2_path, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(
            ["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(path)]
        ) == 0
    assert a.read_bytes() == b.read_bytes()


def test_model_round_trip_preserves_behavior(fig2_path, tmp_path):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    model = load_model(str(model_path))
    direct = fit_model(load_dataset(FIG2), params=KernelParams(1.0, 0.0))
    assert np.allclose(model.kernel_matrix, direct.kernel_matrix)
    assert np.allclose(model.dist_raw, direct.dist_raw)
    raw = model.query_raw_distances(sequence("ab"))
    assert np.allclose(model.gpr_weights(raw), direct.gpr_weights(raw))


def test_corrupted_model_rejected(fig2_path, tmp_path):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    raw = json.loads(model_path.read_text())
    raw["params"]["length_scale"] = 2.0  # tamper without updating the checksum
    model_path.write_text(json.dumps(raw))
    with pytest.raises(DataError):
        load_model(str(model_path))
    assert run(["hint", "--model", str(model_path), "--state", '["a"]']) == 2


def test_hint_worked_example(fig2_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    assert run(["hint", "--model", str(model_path), "--state", '["a","b"]', "--policy", "chf"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["edit"] == {"kind": "insert", "label": "c", "position": 3}
    assert out["policy"] == "chf"


def test_hint_at_solution_null_edit(fig2_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    assert run(["hint", "--model", str(model_path), "--state", '["a","a","c"]']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["edit"] is None


def test_hint_far_state_kernel_decay(fig2_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    far = json.dumps(["z"] * 25)
    assert run(["hint", "--model", str(model_path), "--state", far]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["edit"] is None
    assert out["reason"] == "kernel-decay"


def test_hint_malformed_state_is_data_error(fig2_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    assert run(["hint", "--model", str(model_path), "--state", "not json"]) == 2


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as err:
        run(["frobnicate"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        run(["hint"])  # missing required flags
    assert err.value.code == 1


def test_eval_rmse_files(tmp_path, capsys):
    from edithints.evaluate import synthetic_corpus
    from edithints.traces import dataset_to_dict

    data = tmp_path / "corpus.json"
    data.write_text(json.dumps(dataset_to_dict(synthetic_corpus(5, 5, "abcde", min_missing=1, max_missing=3))))
    prefix = tmp_path / "report"
    assert (
        run(
            [
                "eval",
                "--dataset",
                str(data),
                "--task",
                "rmse",
                "--scheme",
                "do_nothing",
                "--out-prefix",
                str(prefix),
            ]
        )
        == 0
    )
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["kind"] == "rmse"
    assert len(report["per_trace"]) == 5
    csv_lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "trace,rmse_next,rmse_final,states"
    assert len(csv_lines) == 6


def test_eval_quality_files(tmp_path, capsys):
    data = tmp_path / "quality.json"
    data.write_text(
        json.dumps(
            {
                **FIG2,
                "traces": FIG2["traces"]
                + [{"id": "err", "successful": False, "states": [["a", "b"]]}],
                "tutor_hints": [
                    {
                        "trace": "err",
                        "step": 1,
                        "edit": {"kind": "insert", "position": 3, "label": "c"},
                        "quality": 1.0,
                    }
                ],
            }
        )
    )
    prefix = tmp_path / "q"
    assert (
        run(
            [
                "eval",
                "--dataset",
                str(data),
                "--task",
                "quality",
                "--policy",
                "chf",
                "--psi",
                "1.0",
                "--noise",
                "0.0",
                "--out-prefix",
                str(prefix),
            ]
        )
        == 0
    )
    report = json.loads((tmp_path / "q.json").read_text())
    assert report["hintable_fraction"] == 1.0
    assert report["median_quality"] == 1.0


def test_mds_equilateral(tmp_path, capsys):
    data = tmp_path / "tri.json"
    data.write_text(
        json.dumps(
            {
                "kind": "sequence",
                "traces": [
                    {"id": "t1", "successful": True, "states": [["a"]]},
                    {"id": "t2", "successful": True, "states": [["b"]]},
                    {"id": "t3", "successful": True, "states": [["c"]]},
                ],
            }
        )
    )
    assert run(["mds", "--dataset", str(data)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "id,trace,step,x,y"
    assert len(lines) == 4  # one row per retained state
    pts = np.array([[float(v) for v in line.split(",")[3:]] for line in lines[1:]])
    sides = sorted(
        np.linalg.norm(pts[i] - pts[j]) for i, j in ((0, 1), (0, 2), (1, 2))
    )
    assert sides[2] / sides[0] == pytest.approx(1.0, abs=1e-6)


def test_config_file_merging(fig2_path, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": fig2_path, "psi": 1.0, "noise": 0.0}))
    model_path = tmp_path / "model.json"
    assert run(["fit", "--config", str(cfg), "--out", str(model_path)]) == 0
    raw = json.loads(model_path.read_text())
    assert raw["params"]["length_scale"] == 1.0
    # explicit flags beat the config file
    model2 = tmp_path / "model2.json"
    assert run(["fit", "--config", str(cfg), "--psi", "2.0", "--out", str(model2)]) == 0
    assert json.loads(model2.read_text())["params"]["length_scale"] == 2.0
    assert run(["fit", "--config", str(tmp_path / "missing.json"), "--out", "-"]) == 2
    # config reaches options whose argparse default is not None
    cfg2 = tmp_path / "cfg2.json"
    cfg2.write_text(
        json.dumps(
            {
                "dataset": fig2_path,
                "search": True,
                "psi-range": [0.8, 1.2],
                "noise-range": [0.01, 0.02],
                "repeats": 2,
                "seed": 3,
            }
        )
    )
    model3 = tmp_path / "model3.json"
    assert run(["fit", "--config", str(cfg2), "--out", str(model3)]) == 0
    assert json.loads(model3.read_text())["search"]["repeats"] == 2


def test_random_hint_deterministic_across_runs(fig2_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    run(["fit", "--dataset", fig2_path, "--psi", "1.0", "--noise", "0.0", "--out", str(model_path)])
    outputs = []
    for _ in range(2):
        assert (
            run(["hint", "--model", str(model_path), "--state", '["a","b"]', "--policy", "random", "--seed", "11"])
            == 0
        )
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]


def test_search_fit_deterministic(tmp_path):
    from edithints.evaluate import synthetic_corpus
    from edithints.traces import dataset_to_dict

    data = tmp_path / "corpus.json"
    data.write_text(json.dumps(dataset_to_dict(synthetic_corpus(5, 4, "abcde", min_missing=1, max_missing=3))))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert (
            run(
                [
                    "fit",
                    "--dataset",
                    str(data),
                    "--search",
                    "--psi-range",
                    "0.5",
                    "3.0",
                    "--noise-range",
                    "0.01",
                    "0.5",
                    "--repeats",
                    "3",
                    "--seed",
                    "7",
                    "--out",
                    str(path),
                ]
            )
            == 0
        )
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["search"]["seed"] == 7


def test_console_entry_point(fig2_path, tmp_path):
    model_path = tmp_path / "model.json"
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "edithints.cli",
            "fit",
            "--dataset",
            fig2_path,
            "--psi",
            "1.0",
            "--noise",
            "0.0",
            "--out",
            str(model_path),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert model_path.exists()
