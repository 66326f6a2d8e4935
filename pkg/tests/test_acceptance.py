"""Acceptance suite: one test per criterion, tolerances pinned inline.

Run with ``pytest tests/test_acceptance.py -s -v`` to see one PASS/FAIL line
per criterion. Two criteria encode targets that the built-in analytic toy
segmenter provably cannot reach (they are achievable only with real
checkpoint-backed models) and are expected to fail, with the measured
numbers and the reason stated in their failure messages: 4a, because pixels
sharing the prompt pixel's color co-move under any gradient attack and so
can never leave its mask at these budgets; and 5, because the toy's loss is
monotone far past both variants' mask thresholds, leaving no surrogate
overfitting for spectrum augmentation to smooth away.
"""

import os
import time

import numpy as np
import pytest

from regionattack import (
    AttackConfig,
    AttackTrace,
    PointPrompt,
    Region,
    ToySegmenter,
    RunConfig,
    create_adapter,
    dct2,
    evaluate_pair,
    generate_synthetic_corpus,
    idct2,
    iou,
    run_attack_sweep,
    s_ra,
    sample_grid_points,
    t_ra,
)
from regionattack.attack import point_loss, point_loss_and_grad

from test_spectrum import naive_dct2
from test_evaluation import brute_force_iou

SEED = 0
EPS_SWEEP = (2 / 255, 4 / 255, 8 / 255, 16 / 255)
RANGE_TOL = 1e-12  # one-ulp slack for box clamping; the epsilon ball is exact


def _verdict(tag, ok, detail):
    print(f"\n[{tag}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{tag}: {detail}"


def test_criterion_1_spectral_correctness():
    start = time.time()
    rng = np.random.default_rng(SEED)
    worst_rt = worst_pars = 0.0
    for _ in range(100):
        x = rng.random((rng.integers(2, 32), rng.integers(2, 32), 3))
        worst_rt = max(worst_rt, float(np.abs(idct2(dct2(x)) - x).max()))
        worst_pars = max(worst_pars, abs(np.linalg.norm(x) - np.linalg.norm(dct2(x))))
    worst_oracle = 0.0
    for h in range(1, 9):
        for w in range(1, 9):
            x = rng.random((h, w, 1))
            worst_oracle = max(worst_oracle, float(np.abs(dct2(x) - naive_dct2(x)).max()))
    elapsed = time.time() - start
    _verdict(
        "criterion 1",
        worst_rt < 1e-6 and worst_oracle < 1e-8 and worst_pars < 1e-6 and elapsed < 10,
        f"round trip {worst_rt:.2e} (<1e-6), naive oracle {worst_oracle:.2e} (<1e-8), "
        f"Parseval {worst_pars:.2e} (<1e-6), {elapsed:.1f}s (<10s)",
    )


def test_criterion_2_gradient_fidelity():
    start = time.time()
    toy = ToySegmenter()
    rng = np.random.default_rng(SEED)
    h = 1e-4
    worst = 0.0
    for _ in range(10):
        x = np.clip(rng.random((24, 24, 3)), 0.02, 0.98)
        p = PointPrompt(int(rng.integers(24)), int(rng.integers(24)))
        _, grad = point_loss_and_grad(toy, x, p, -10.0)
        for _ in range(4):
            i, j, c = rng.integers(24), rng.integers(24), rng.integers(3)
            e = np.zeros_like(x)
            e[i, j, c] = h
            fd = (point_loss(toy, x + e, p, -10.0) - point_loss(toy, x - e, p, -10.0)) / (2 * h)
            worst = max(worst, abs(grad[i, j, c] - fd) / max(abs(fd), 1e-9))
    elapsed = time.time() - start
    _verdict(
        "criterion 2",
        worst < 1e-4 and elapsed < 30,
        f"max relative error {worst:.2e} (<1e-4) over 10 probes, {elapsed:.1f}s (<30s)",
    )


@pytest.fixture(scope="module")
def whitebox_sweep():
    """Seeded 20-image S-RA sweep over the four epsilon levels, with traces."""
    toy = ToySegmenter()
    corpus = generate_synthetic_corpus(20, seed=SEED)
    start = time.time()
    runs = {}
    for ei, eps in enumerate(EPS_SWEEP):
        for ii, item in enumerate(corpus):
            trace = AttackTrace()
            adv = s_ra(toy, item.image, item.region, AttackConfig(epsilon=eps), trace=trace)
            runs[(ei, ii)] = (item, adv, trace)
    return {"corpus": corpus, "runs": runs, "elapsed": time.time() - start, "toy": toy}


def _budget_violations(x, eps, trace):
    bad = sum(1 for m in trace.max_abs_delta if m > eps)
    bad += sum(1 for v in trace.adv_min if v < -RANGE_TOL)
    bad += sum(1 for v in trace.adv_max if v > 1.0 + RANGE_TOL)
    return bad


def test_criterion_3_budget_safety(whitebox_sweep):
    violations = 0
    checked = 0
    for (ei, ii), (item, adv, trace) in whitebox_sweep["runs"].items():
        eps = EPS_SWEEP[ei]
        violations += _budget_violations(item.image, eps, trace)
        violations += int(float(np.abs(adv - item.image).max()) > eps + RANGE_TOL)
        checked += len(trace.max_abs_delta)
    toy = whitebox_sweep["toy"]
    for ii, item in enumerate(whitebox_sweep["corpus"]):
        for ei, eps in enumerate(EPS_SWEEP):
            trace = AttackTrace()
            rng = np.random.default_rng(np.random.SeedSequence((SEED, 31, ii, ei)))
            adv = t_ra(toy, item.image, item.region, AttackConfig(epsilon=eps), rng, trace=trace)
            violations += _budget_violations(item.image, eps, trace)
            violations += int(float(np.abs(adv - item.image).max()) > eps + RANGE_TOL)
            checked += len(trace.max_abs_delta)
    _verdict(
        "criterion 3",
        violations == 0,
        f"{violations} violations over {checked} recorded steps "
        f"(S-RA and T-RA, 20 images x 4 epsilons; ball exact, box tol {RANGE_TOL})",
    )


def _sweep_mious(whitebox_sweep):
    toy = whitebox_sweep["toy"]
    mious = []
    for ei, eps in enumerate(EPS_SWEEP):
        vals = []
        for ii, item in enumerate(whitebox_sweep["corpus"]):
            _, adv, _ = whitebox_sweep["runs"][(ei, ii)]
            rng = np.random.default_rng(np.random.SeedSequence((SEED, 2, ii, ei, 0, 0, 0)))
            vals.append(evaluate_pair(toy, item.image, adv, item.region, rng, epsilon=eps).iou)
        mious.append(100.0 * float(np.mean(vals)))
    return mious


def test_criterion_4a_whitebox_efficacy(whitebox_sweep):
    mious = _sweep_mious(whitebox_sweep)
    at8 = mious[EPS_SWEEP.index(8 / 255)]
    _verdict(
        "criterion 4a",
        at8 < 10.0,
        f"S-RA mIoU at eps=8/255 is {at8:.2f}% (target <10%). The toy color-threshold "
        "geometry caps achievable mask damage: pixels sharing the prompt pixel's color "
        "receive identical updates and can never be pushed past the mask threshold "
        "(max separable squared distance 12*eps^2 = 0.012 < tau = 0.05), and at most "
        "four color classes can be mutually separable at this budget, so mIoU >= ~25% "
        "for any corpus texture. Reaching the target takes a checkpoint-backed model "
        "(see criterion 10).",
    )


def test_criterion_4b_miou_monotone_in_epsilon(whitebox_sweep):
    mious = _sweep_mious(whitebox_sweep)
    ok = all(b <= a + 1e-9 for a, b in zip(mious, mious[1:]))
    _verdict(
        "criterion 4b",
        ok,
        "mIoU non-increasing across eps sweep: "
        + " -> ".join(f"{v:.2f}%" for v in mious),
    )


def test_criterion_4c_clean_control_is_100(whitebox_sweep):
    toy = whitebox_sweep["toy"]
    vals = []
    for ii, item in enumerate(whitebox_sweep["corpus"]):
        rng = np.random.default_rng(np.random.SeedSequence((SEED, 4, ii)))
        vals.append(evaluate_pair(toy, item.image, item.image, item.region, rng).iou)
    control = 100.0 * float(np.mean(vals))
    _verdict("criterion 4c", control == 100.0, f"clean-vs-clean control mIoU {control:.2f}%")


def test_criterion_4d_runtime(whitebox_sweep):
    elapsed = whitebox_sweep["elapsed"]
    _verdict("criterion 4 runtime", elapsed < 300, f"20-image sweep took {elapsed:.1f}s (<300s)")


def test_criterion_5_transfer_gap():
    toy_a = create_adapter("toy")
    toy_b = create_adapter("toy:g=15,tau=0.08")
    corpus = generate_synthetic_corpus(20, seed=SEED)
    eps = 8 / 255
    s_vals, t_vals = [], []
    for k, item in enumerate(corpus):
        cfg = AttackConfig(epsilon=eps, rho=0.1)
        adv_s = s_ra(toy_a, item.image, item.region, cfg)
        adv_t = t_ra(
            toy_a,
            item.image,
            item.region,
            cfg,
            np.random.default_rng(np.random.SeedSequence((SEED, 51, k))),
        )
        rng_pair = np.random.SeedSequence((SEED, 52, k))
        s_vals.append(
            evaluate_pair(toy_b, item.image, adv_s, item.region, np.random.default_rng(rng_pair)).iou
        )
        t_vals.append(
            evaluate_pair(toy_b, item.image, adv_t, item.region, np.random.default_rng(rng_pair)).iou
        )
    s_mean, t_mean = 100.0 * float(np.mean(s_vals)), 100.0 * float(np.mean(t_vals))
    _verdict(
        "criterion 5",
        t_mean < s_mean,
        f"transfer to toy_b: T-RA {t_mean:.2f}% vs S-RA {s_mean:.2f}% over 20 paired trials "
        "(target: T-RA strictly lower). The toy_b mask radius lies well inside the "
        "surrogate's gradient support, so every mask-relevant pixel already gets full "
        "white-box gradients and augmentation cannot flip additional mask pixels. The "
        "augmentation benefit is real but loss-level only on this model family (see "
        "tests/test_attack.py::test_t_ra_transfers_lower_loss_than_s_ra); a mask-level "
        "gap requires checkpoint-backed models with feature-level decision boundaries.",
    )


def test_criterion_6_reduction_identity():
    toy = ToySegmenter()
    item = generate_synthetic_corpus(1, seed=SEED + 6)[0]
    cfg_s = AttackConfig(epsilon=8 / 255, steps=12)
    cfg_t = AttackConfig(epsilon=8 / 255, steps=12, samples=1, rho=0.0, sigma=0.0)
    tr_s, tr_t = AttackTrace(record_deltas=True), AttackTrace(record_deltas=True)
    adv_s = s_ra(toy, item.image, item.region, cfg_s, trace=tr_s)
    adv_t = t_ra(toy, item.image, item.region, cfg_t, np.random.default_rng(SEED), trace=tr_t)
    identical = len(tr_s.deltas) == len(tr_t.deltas) and all(
        np.array_equal(a, b) for a, b in zip(tr_s.deltas, tr_t.deltas)
    )
    _verdict(
        "criterion 6",
        identical and np.array_equal(adv_s, adv_t),
        f"T-RA(M=1, rho=0, sigma=0) delta bitwise-identical to S-RA at all {len(tr_s.deltas)} steps",
    )


def test_criterion_7_protocol_determinism(tmp_path):
    def cfg(out):
        return RunConfig(
            out_dir=str(out),
            gen_count=4,
            attack="t_ra",
            epsilons=(2 / 255, 8 / 255),
            steps=3,
            samples=4,
            eval_models=("toy", "toy:g=15,tau=0.08"),
            seed=SEED,
        )

    r1 = run_attack_sweep(cfg(tmp_path / "a"))
    r2 = run_attack_sweep(cfg(tmp_path / "b"))
    same = (
        r1.records_csv.read_bytes() == r2.records_csv.read_bytes()
        and r1.summary_csv.read_bytes() == r2.summary_csv.read_bytes()
    )
    _verdict("criterion 7", same, "rerun with identical config and seed gives byte-identical CSVs")


def test_criterion_8_iou_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    checked = 0
    for k in range(1000):
        h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        density_a, density_b = rng.random(), rng.random()
        a = rng.random((h, w)) < density_a
        b = rng.random((h, w)) < density_b
        if k % 50 == 0:
            a = np.zeros((h, w), dtype=bool)  # exercise the empty-mask conventions
        if k % 100 == 0:
            b = np.zeros((h, w), dtype=bool)
        if iou(a, b) != brute_force_iou(a, b):
            _verdict("criterion 8", False, f"mismatch on pair {k}")
        checked += 1
    _verdict("criterion 8", checked == 1000, "library iou == brute-force oracle on 1000 pairs")


def test_criterion_9_grid_density_law():
    region = Region(0, 0, 300, 300)
    counts = {lam: len(sample_grid_points(region, lam).points) for lam in (50, 60, 75)}
    _verdict(
        "criterion 9",
        counts == {50: 36, 60: 25, 75: 16},
        f"300x300 region, lambda 50/60/75 -> {counts[50]}/{counts[60]}/{counts[75]} points",
    )


@pytest.mark.skipif(
    "REGIONATTACK_SAM_CHECKPOINT" not in os.environ,
    reason="optional checkpoint-backed criterion; set REGIONATTACK_SAM_CHECKPOINT "
    "and REGIONATTACK_NATURAL_CORPUS to run",
)
def test_criterion_10_optional_real_checkpoint():
    from regionattack import load_corpus

    checkpoint = os.environ["REGIONATTACK_SAM_CHECKPOINT"]
    corpus = load_corpus(os.environ["REGIONATTACK_NATURAL_CORPUS"])
    assert len(corpus) >= 20, "need at least 20 natural images"
    model = create_adapter(f"vit_b:checkpoint={checkpoint}")
    eps = 8 / 255
    vals = []
    for k, item in enumerate(corpus[:20]):
        adv = s_ra(model, item.image, item.region, AttackConfig(epsilon=eps, lam=50))
        rng = np.random.default_rng(np.random.SeedSequence((SEED, 10, k)))
        vals.append(evaluate_pair(model, item.image, adv, item.region, rng, epsilon=eps).iou)
    miou_pct = 100.0 * float(np.mean(vals))
    _verdict("criterion 10", miou_pct <= 10.0, f"ViT-B white-box mIoU {miou_pct:.2f}% (target <=10%)")
