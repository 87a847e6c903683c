import math

import pytest

import tricache


def test_metrics_hand_example():
    m = tricache.metrics([[8, 2], [1, 9]])
    assert m["war"] == pytest.approx(0.85)
    assert m["uar"] == pytest.approx(0.85)


def test_ari_and_frechet():
    assert tricache.adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    assert tricache.frechet_diag([0.0], [1.0], [3.0], [4.0]) == pytest.approx(math.sqrt(10.0), abs=1e-8)


def test_entropy_routing_and_dbscan():
    assert [tricache.entropy_route(h) for h in (0.3, 0.6, 0.9)] == ["positive", "negative", "reject"]
    labels = tricache.dbscan([[1, 0], [1, 0.01], [0, 1], [0.01, 1]], eps=0.01, min_pts=2)
    assert labels == [0, 0, 1, 1]


def test_errors_are_translated():
    with pytest.raises(tricache.TricacheError):
        tricache.metrics([[0, 0], [0, 0]])
    with pytest.raises(tricache.TricacheError):
        tricache.synth_generate("/tmp/unused", dim=0)


def test_pipeline_end_to_end(tmp_path):
    summary = tricache.synth_generate(tmp_path / "bench", dim=16, n_source=3, n_target=2, frames_per_video=10,
                                      videos_per_subject_per_class=2, seed=4)
    assert summary["subjects"] == 5
    manifest = tmp_path / "bench" / "manifest.json"
    anchors = tmp_path / "bench" / "anchors.json"
    built = tricache.build_prototypes(manifest, tmp_path / "protos.json", extractor="kmeans1")
    assert built["prototypes"] == built["pairs"] == 6
    report = tricache.run_pipeline(manifest, anchors, protos=tmp_path / "protos.json")
    assert report["format"] == "tricache-eval/1"
    assert len(report["targets"]) == 2
    assert 0.0 <= report["mean"]["war"] <= 1.0
    zero_shot = tricache.run_pipeline(manifest, anchors, cache_variant="none")
    assert zero_shot["gates"]["frames"] == report["gates"]["frames"]


def test_cli_in_process(tmp_path):
    code, out, err = tricache.run_cli(["synth", "gen", "--out", str(tmp_path / "b"), "--dim", "8"])
    assert code == 0, err
    assert "subjects" in out
    code, _, err = tricache.run_cli(["synth", "gen", "--out", str(tmp_path / "c"), "--dim", "0"])
    assert code == 1
    assert err
