import numpy as np
import pytest

from wirebench.channel import gain_ratio, spatial_correlation
from wirebench.classical import PgdConfig, epa, pgd_sum_rate
from wirebench.tasks.codebook import beam_gains, beam_labels, beam_oracle, build_codebook, steering_vector
from wirebench.tasks.metrics import weighted_f1
from wirebench.tasks.models import TaskModelSpec
from wirebench.tasks.power import GroupingError, evaluate_se, group_users, make_instance
from wirebench.tasks.training import Schedule, TrainingError, train_classifier, train_power, write_epoch_metrics


# ------------------------------------------------------------------ codebook
def test_codebook_geometry():
    cb = build_codebook(32, 64, 120.0)
    assert cb.angles[0] == pytest.approx(-np.pi / 3)
    assert cb.angles[-1] == pytest.approx(np.pi / 3)
    np.testing.assert_allclose(np.linalg.norm(cb.matrix, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(steering_vector(8, 0.0, 0.5, 1.0), np.ones(8) / np.sqrt(8))


def test_codebook_rejects_single_beam():
    with pytest.raises(ValueError):
        build_codebook(8, 1)
    with pytest.raises(ValueError):
        build_codebook(8, 4, fov_deg=200.0)


def test_beam_self_consistency():
    cb = build_codebook(32, 64, 120.0)
    for j, a in enumerate(cb.angles):
        assert beam_oracle(cb, steering_vector(32, a, 0.5, 1.0)) == j


def test_beam_oracle_is_exhaustive_and_scale_invariant():
    cb = build_codebook(16, 32)
    rng = np.random.default_rng(0)
    for _ in range(20):
        h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        best = max(range(32), key=lambda k: abs(np.vdot(steering_vector(16, cb.angles[k], 0.5, 1.0), h)))
        assert beam_oracle(cb, h) == best
        assert beam_oracle(cb, (2 - 3j) * h) == best


def test_beam_labels_use_subcarrier_average():
    cb = build_codebook(8, 16)
    rng = np.random.default_rng(1)
    H = rng.standard_normal((5, 8, 4)) + 1j * rng.standard_normal((5, 8, 4))
    expect = [beam_oracle(cb, h.mean(axis=1)) for h in H]
    np.testing.assert_array_equal(beam_labels(cb, H), expect)
    assert beam_gains(cb, H.mean(axis=2)).shape == (5, 16)


# ------------------------------------------------------------------- metrics
def test_weighted_f1_hand_case():
    # TP=40 FN=10 FP=20 TN=30: F1_1 = 8/11; class 0 has precision 30/40 and
    # recall 30/50, so F1_0 = 2/3 and the support-weighted mean is 23/33
    labels = np.array([1] * 50 + [0] * 50)
    preds = np.array([1] * 40 + [0] * 10 + [1] * 20 + [0] * 30)
    assert weighted_f1(preds, labels) == pytest.approx(23 / 33, abs=1e-12)


def test_weighted_f1_matches_sklearn():
    from sklearn.metrics import f1_score
    rng = np.random.default_rng(3)
    for C in (2, 3, 7):
        y = rng.integers(0, C, 300)
        p = np.where(rng.random(300) < 0.6, y, rng.integers(0, C, 300))
        assert weighted_f1(p, y, C) == pytest.approx(f1_score(y, p, average="weighted"), abs=1e-12)


def test_weighted_f1_edge_cases():
    y = np.array([0, 1, 2, 1, 0])
    assert weighted_f1(y, y) == 1.0
    balanced = np.array([0, 1] * 10)
    assert weighted_f1(np.ones(20), balanced) == pytest.approx(0.5 * (2 / 3))
    perm = np.random.default_rng(0).permutation(20)
    preds = np.array([0, 0, 1] * 6 + [1, 0])
    assert weighted_f1(preds[perm], balanced[perm]) == pytest.approx(weighted_f1(preds, balanced))
    with pytest.raises(ValueError):
        weighted_f1([], [])


# ------------------------------------------------------------------ grouping
def test_vacuous_grouping_accepts_first_scanned():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((30, 8)) + 1j * rng.standard_normal((30, 8))
    groups = group_users(h, 4, 0.0, 1.0, np.inf, np.random.default_rng(1), num_groups=3)
    assert len(groups) == 3 and all(g.K == 4 for g in groups)
    # replay the sampler: with no constraints each scan accepts its first non-member
    r = np.random.default_rng(1)
    members = [int(r.choice(np.arange(30)))]
    while len(members) < 4:
        for cand in r.permutation(np.arange(30)):
            if cand not in members:
                members.append(int(cand))
                break
    assert list(groups[0].users) == members


def test_grouping_constraints_hold_post_hoc():
    rng = np.random.default_rng(2)
    base = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    h = base + 0.8 * (rng.standard_normal((200, 16)) + 1j * rng.standard_normal((200, 16)))
    h *= rng.uniform(0.5, 3.0, size=(200, 1))
    groups = group_users(h, 4, 0.3, 0.9, 20.0, np.random.default_rng(3), num_groups=10)
    for g in groups:
        for a in range(4):
            for b in range(a + 1, 4):
                ha, hb = h[g.users[a]], h[g.users[b]]
                assert 0.3 <= spatial_correlation(ha, hb) <= 0.9
                assert gain_ratio(ha, hb) < 20.0
        np.testing.assert_allclose(np.linalg.norm(g.precoders, axis=1), 1.0)
        np.testing.assert_allclose(np.diag(g.gains), np.linalg.norm(g.channels, axis=1) ** 2)


def test_grouping_orthogonal_users_fails_with_diagnostic():
    h = np.eye(8, dtype=complex)
    with pytest.raises(GroupingError, match="rejected"):
        group_users(h, 2, 0.3, 0.9, 20.0, np.random.default_rng(0), max_attempts=5)


# ---------------------------------------------------------------- evaluate_se
def test_evaluate_se_closed_forms():
    h = np.array([[1.0, 2.0, 0.5j]])
    inst = make_instance(h, 0.3, p_total=2.0)
    assert evaluate_se([2.0], inst) == pytest.approx(np.log2(1 + 5.25 * 2.0 / 0.3))
    inst3 = make_instance(np.random.default_rng(0).standard_normal((3, 4)) + 0j, 1.0)
    assert evaluate_se(np.zeros(3), inst3) == 0.0


# ------------------------------------------------------------------ training
def test_los_separable_toy_reaches_perfect_f1():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 6))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    X[:, 0] += np.where(y == 1, 1.0, -1.0)   # open a margin
    spec = TaskModelSpec("los", 6, hidden=32)
    model = train_classifier(spec, X, y, X, y, Schedule(epochs=30, batch_size=32, lr=3e-3))
    assert weighted_f1(model.predict(X), y) == 1.0
    assert model.curve[-1][1] == "f1"


def test_classifier_label_mismatch():
    spec = TaskModelSpec("los", 3)
    with pytest.raises(TrainingError):
        train_classifier(spec, np.zeros((4, 3)), np.array([0, 1, 2, 1]))


def test_beam_model_shapes():
    spec = TaskModelSpec("beam", 64, num_classes=16)
    model = train_classifier(spec, np.random.default_rng(0).standard_normal((40, 64)),
                             np.arange(40) % 16, schedule=Schedule(epochs=1, batch_size=16))
    assert model.logits(np.zeros((3, 64))).shape == (3, 16)


def _power_problem(n, K=4, d=6, seed=0):
    rng = np.random.default_rng(seed)
    insts, feats = [], []
    for _ in range(n):
        h = rng.standard_normal((K, 8)) + 1j * rng.standard_normal((K, 8))
        h *= rng.uniform(0.3, 2.0, size=(K, 1))
        insts.append(make_instance(h, 2.0))
        gains = np.log(np.diag(insts[-1].gains))
        feats.append(np.concatenate([gains[:, None], rng.standard_normal((K, d - 1))], axis=1))
    return np.stack(feats), insts


def test_power_outputs_are_feasible():
    X, insts = _power_problem(20)
    spec = TaskModelSpec("power", 6, num_users=4, channels=8, blocks=1, p_total=1.0)
    model = train_power(spec, X, insts, [None] * 20, schedule=Schedule(epochs=1, batch_size=8))
    p = model.predict(np.random.default_rng(5).standard_normal((10, 4, 6)) * 10)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_warmup_regression_beats_epa_mse():
    X, insts = _power_problem(60)
    cfg = PgdConfig(iterations=60, restarts=2)
    labels = [pgd_sum_rate(i, cfg)[0] for i in insts]
    spec = TaskModelSpec("power", 6, num_users=4, channels=16, blocks=1)
    sched = Schedule(epochs=40, batch_size=16, lr=3e-3, warmup_fraction=1.0)
    model = train_power(spec, X, insts, dict(enumerate(labels)), schedule=sched)
    target = np.stack(labels)
    model_mse = np.mean(np.sum((model.predict(X) - target) ** 2, axis=1))
    epa_mse = np.mean(np.sum((epa(4, 1.0) - target) ** 2, axis=1))
    assert model_mse < epa_mse


def test_training_is_deterministic(tmp_path):
    X, insts = _power_problem(24)
    spec = TaskModelSpec("power", 6, num_users=4, channels=8, blocks=1)
    sched = Schedule(epochs=3, batch_size=8)
    labels = {i: np.full(4, 0.25) for i in range(6)}
    a = train_power(spec, X, insts, labels, X, insts, sched)
    b = train_power(spec, X, insts, labels, X, insts, sched)
    assert a.curve == b.curve
    path = tmp_path / "curve.csv"
    write_epoch_metrics(path, a, "power", "toy", 0)
    lines = path.read_text().splitlines()
    assert lines[0] == "task,representation,epoch,split,metric,value,seed"
    assert len(lines) == 4
