import numpy as np
import pytest

from attacks import (
    REPORT_COLUMNS, AttackSpec, evaluate_robust_accuracy, load_report, pgd_attack, save_report,
)
from datasets import DatasetSpec, average_norm, generate_synthetic_dataset
from errors import ConfigError
from losses import LogisticLoss, QuadraticLoss


@pytest.fixture(scope="module")
def blobs():
    return generate_synthetic_dataset(DatasetSpec(n_per_class=50, d=2, seed=3))


def test_pgd_on_a_linear_classifier_moves_against_the_label():
    model = LogisticLoss(np.array([1.0]), 2)
    theta = np.array([3.0, 4.0])
    adv = pgd_attack(theta, np.array([1.0, 1.0]), 1.0, model, radius=0.5)
    np.testing.assert_allclose(adv, np.array([1.0, 1.0]) - 0.5 * theta / 5.0, atol=1e-12)
    adv = pgd_attack(theta, np.array([1.0, 1.0]), -1.0, model, radius=0.5)
    np.testing.assert_allclose(adv, np.array([1.0, 1.0]) + 0.5 * theta / 5.0, atol=1e-12)


def test_pgd_stays_in_the_ball_and_zero_radius_is_identity():
    model = LogisticLoss(np.array([1.0]), 2)
    x = np.array([0.3, -0.2])
    np.testing.assert_array_equal(pgd_attack(np.array([1.0, 0.0]), x, 1.0, model, radius=0.0), x)
    adv = pgd_attack(np.array([1.0, 0.0]), x, 1.0, model, radius=0.7, steps=7, step_size=0.3)
    assert np.linalg.norm(adv - x) <= 0.7 + 1e-12
    with pytest.raises(ConfigError):
        pgd_attack(np.ones(2), x, 1.0, model, radius=-0.1)


@pytest.mark.parametrize("kwargs", [dict(radius_fractions=()), dict(radius_fractions=(-0.1, 0.2)),
                                    dict(radius_fractions=(0.2, 0.1)), dict(steps=-1),
                                    dict(step_fraction=0.0)])
def test_attack_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        AttackSpec(**kwargs)


def test_zero_theta_misclassifies_exactly_one_class(blobs):
    _, test = blobs
    model = LogisticLoss(test.labels, 2)
    report = evaluate_robust_accuracy(np.zeros(2), test, model)
    assert report.misclassification == (0.5,) * 5
    assert report.clean_accuracy == 0.5


def test_misclassification_grows_with_the_radius(blobs):
    train, test = blobs
    model = LogisticLoss(train.labels, 2)
    attack = AttackSpec(radius_fractions=(0.0, 0.25, 0.5, 1.0))
    report = evaluate_robust_accuracy(np.array([2.0, 0.0]), test, model, attack, solver="erm")
    rates = report.misclassification
    assert rates[0] == pytest.approx(1.0 - report.clean_accuracy)
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert rates[-1] > rates[0]
    np.testing.assert_allclose(report.radii, np.array(attack.radius_fractions) * average_norm(test))


def test_evaluation_does_not_depend_on_workers(blobs):
    _, test = blobs
    model = LogisticLoss(test.labels, 2)
    serial = evaluate_robust_accuracy(np.array([1.0, 0.5]), test, model, workers=1)
    threaded = evaluate_robust_accuracy(np.array([1.0, 0.5]), test, model, workers=3)
    assert serial.misclassification == threaded.misclassification


def test_evaluation_needs_labels_and_a_classifier(blobs, benchmark_anchors):
    _, test = blobs
    with pytest.raises(ConfigError):
        evaluate_robust_accuracy(np.zeros(1), benchmark_anchors, LogisticLoss(np.ones(4), 1))
    with pytest.raises(ConfigError):
        evaluate_robust_accuracy(np.zeros(1), test, QuadraticLoss(0.5, 2.0, 2))


def test_report_csv(tmp_path, blobs):
    _, test = blobs
    model = LogisticLoss(test.labels, 2)
    reports = [evaluate_robust_accuracy(np.array([1.0, 0.0]), test, model, solver=name) for name in ("erm", "wdro")]
    path = tmp_path / "report.csv"
    save_report(str(path), reports)
    lines = path.read_text().splitlines()
    assert lines[0] == "solver,radius_fraction,radius,misclassification,clean_accuracy"
    assert len(lines) == 1 + 2 * 5
    rows = load_report(str(path))
    assert [row["solver"] for row in rows] == ["erm"] * 5 + ["wdro"] * 5
    assert rows[3]["misclassification"] == reports[0].misclassification[3]
    assert tuple(rows[0]) == REPORT_COLUMNS
