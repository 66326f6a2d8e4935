import numpy as np
import pytest

from regionattack import (
    AttackConfig,
    EvalRecord,
    PointPrompt,
    Report,
    evaluate_pair,
    iou,
    miou,
    s_ra,
    sample_grid_points,
)


def brute_force_iou(a, b):
    inter = union = 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] and b[i, j]:
                inter += 1
            if a[i, j] or b[i, j]:
                union += 1
    return 1.0 if union == 0 else inter / union


def test_iou_trivials():
    a = np.zeros((4, 4), dtype=bool)
    a[1, 1] = a[2, 2] = True
    assert iou(a, a) == 1.0
    b = np.zeros((4, 4), dtype=bool)
    b[0, 3] = True
    assert iou(a, b) == 0.0  # disjoint nonempty


def test_iou_hand_case():
    a = np.zeros((2, 2), dtype=bool)
    b = np.zeros((2, 2), dtype=bool)
    a[0, 0] = a[0, 1] = True
    b[0, 1] = b[1, 1] = True
    assert iou(a, b) == pytest.approx(1.0 / 3.0)


def test_iou_edge_conventions():
    empty = np.zeros((3, 3), dtype=bool)
    full = np.ones((3, 3), dtype=bool)
    assert iou(empty, empty) == 1.0
    assert iou(empty, full) == 0.0
    assert iou(full, empty) == 0.0


def test_iou_symmetry_and_self(rng):
    for _ in range(50):
        a = rng.random((5, 6)) > 0.5
        b = rng.random((5, 6)) > 0.5
        assert iou(a, b) == iou(b, a)
        assert iou(a, a) == 1.0


def test_iou_matches_brute_force(rng):
    for _ in range(200):
        h, w = rng.integers(1, 17), rng.integers(1, 17)
        a = rng.random((h, w)) > rng.random()
        b = rng.random((h, w)) > rng.random()
        assert iou(a, b) == pytest.approx(brute_force_iou(a, b), abs=0.0)


def test_iou_shape_mismatch():
    with pytest.raises(ValueError, match="shapes differ"):
        iou(np.zeros((2, 2), bool), np.zeros((3, 2), bool))


def test_miou_basics():
    recs = [
        EvalRecord("a", PointPrompt(0, 0), 1.0, 5, 5),
        EvalRecord("b", PointPrompt(0, 0), 0.0, 5, 0),
    ]
    assert miou(recs) == 0.5
    assert miou(recs[:1]) == 1.0
    with pytest.raises(ValueError, match="empty"):
        miou([])


def test_miou_permutation_invariant_and_matches_sum_oracle(rng):
    vals = rng.random(200)
    recs = [EvalRecord(f"i{k}", PointPrompt(0, 0), float(v), 1, 1) for k, v in enumerate(vals)]
    total = 0.0
    for v in vals:
        total += float(v)
    assert abs(miou(recs) - total / 200.0) < 1e-12
    shuffled = list(recs)
    rng.shuffle(shuffled)
    assert miou(shuffled) == pytest.approx(miou(recs), abs=1e-15)


def test_report_miou():
    recs = [EvalRecord("a", PointPrompt(0, 0), 0.25, 4, 1)]
    assert Report(records=recs).miou == 0.25


def test_evaluate_pair_identical_images(toy, small_corpus, rng):
    item = small_corpus[0]
    rec = evaluate_pair(toy, item.image, item.image, item.region, rng, image_id=item.image_id)
    assert rec.iou == 1.0
    assert rec.clean_mask_px == rec.adv_mask_px > 0
    assert item.region.contains(rec.test_point)


def test_evaluate_pair_erasure_scores_zero(rng, centered_region):
    class Flip:
        """Nonempty mask on the clean image, empty on any perturbed one."""

        name = "flip"
        has_gradient = False
        concurrent_safe = True

        def __init__(self, clean):
            self.clean = clean

        def forward(self, prompt, image):
            if np.array_equal(image, self.clean):
                return np.ones(image.shape[:2])
            return np.full(image.shape[:2], -1.0)

        def gradient(self, prompt, image, cotangent):
            raise NotImplementedError

    clean = np.full((32, 32, 3), 0.5)
    adv = clean + 0.01
    rec = evaluate_pair(Flip(clean), clean, adv, centered_region, rng, epsilon=0.02)
    assert rec.iou == 0.0 and rec.adv_mask_px == 0


def test_evaluate_pair_checks_ball(toy, small_corpus, rng):
    item = small_corpus[0]
    adv = np.clip(item.image + 0.1, 0, 1)
    with pytest.raises(ValueError, match="epsilon ball"):
        evaluate_pair(toy, item.image, adv, item.region, rng, epsilon=0.05)


def test_evaluate_pair_seeded_byte_stability(toy, small_corpus):
    item = small_corpus[1]
    adv = s_ra(toy, item.image, item.region, AttackConfig(epsilon=8 / 255, steps=6))
    recs = [
        evaluate_pair(toy, item.image, adv, item.region, np.random.default_rng(99), epsilon=8 / 255)
        for _ in range(2)
    ]
    assert recs[0] == recs[1]


def test_evaluation_point_independent_of_attack_grid(toy, small_corpus):
    # the drawn test point is uniform over the region, not snapped to the
    # lambda grid the attack optimized
    item = small_corpus[2]
    grid = set(sample_grid_points(item.region, 7).points)
    hits = 0
    for k in range(50):
        rec = evaluate_pair(toy, item.image, item.image, item.region, np.random.default_rng(k))
        hits += rec.test_point in grid
    assert hits < 10
