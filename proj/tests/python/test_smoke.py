import math

import pytest

import crest_engine as ce


def test_opinion_roundtrip():
    op = ce.opinion_from_evidence([3.0, 0.0, 0.0])
    assert op.uncertainty == pytest.approx(0.5)
    assert op.belief == pytest.approx([0.5, 0.0, 0.0])
    p = ce.project(op)
    assert sum(p) == pytest.approx(1.0)


def test_fusion_properties():
    a = ce.opinion_from_evidence([8.0, 0.0])
    b = ce.opinion_from_evidence([0.0, 3.0])
    fused = ce.fuse(a, b)
    assert sum(fused.belief) + fused.uncertainty == pytest.approx(1.0)
    # Fused uncertainty is the harmonic mean of the inputs.
    expected_u = 2 * a.uncertainty * b.uncertainty / (a.uncertainty + b.uncertainty)
    assert fused.uncertainty == pytest.approx(expected_u)
    c = ce.conflict(a, b)
    assert 0.0 <= c <= 1.0
    assert c == ce.conflict(b, a)


def test_special_functions():
    assert ce.digamma(2.0) - ce.digamma(1.0) == pytest.approx(1.0)
    assert ce.lgamma(5.0) == pytest.approx(math.log(24.0))


def test_losses():
    assert ce.ace_loss([[2.0, 1.0]], [[1.0, 0.0]]) == pytest.approx(0.5)
    assert ce.kl_to_uniform([[1.0, 1.0]], [[1.0, 0.0]]) == pytest.approx(0.0)
    # Two elements: each is the other's positive, so the contrastive loss is 0.
    assert ce.vicl_loss([[1.0, 0.0], [0.0, 1.0]], [0, 0]) == pytest.approx(0.0)
    assert ce.digs_loss([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], 1.0) >= 0.0


def test_prediction_and_metrics():
    z = [[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]]
    seen, unseen = [0, 1], [2]
    pred = ce.predict([1.0, 0.0], z, seen, unseen, delta=0.0, mode="czsl")
    assert pred == 2  # czsl restricts candidates to unseen classes
    assert ce.harmonic_mean(72.4, 71.1) == pytest.approx(71.7, abs=0.05)
    m = ce.gzsl_metrics([0, 1, 2, 2], [0, 1, 2, 2], z, seen, unseen)
    assert m["harmonic"] == pytest.approx(1.0)


def test_end_to_end(tmp_path):
    cfg = "\n".join(
        [
            "class_count = 6",
            "seen_count = 4",
            "attribute_count = 8",
            "regions_per_instance = 4",
            "feature_width = 12",
            "instances_per_class = 6",
            "epochs = 2",
            "batch_size = 8",
            "d_k = 4",
            "bank_size = 6",
            "bank_dim = 4",
            "seed = 7",
        ]
    )
    data_dir = tmp_path / "data"
    info = ce.generate_dataset(cfg, str(data_dir))
    assert info["classes"] == 6
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    result = ce.train_on_dataset(str(data_dir), cfg, str(out_dir))
    assert 0.0 <= result["acc"] <= 1.0
    assert 0.0 <= result["mean_u_fused"] <= 1.0
    assert (out_dir / "params.bin").exists()
    assert (out_dir / "epochs.csv").exists()


def test_errors():
    with pytest.raises(ce.FormatError):
        ce.load_matrix("/nonexistent/matrix.bin")
    with pytest.raises(ce.ConfigError):
        ce.generate_dataset("epochs = -3")
