"""Acceptance gate: one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail
line per criterion (each test also prints a PASS line with the measured
numbers when it succeeds).
"""

import itertools
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mtraj.cli import EXIT_OK, main
from mtraj.conformance import run_conformance
from mtraj.core import PredictionSet, RunConfig, Scene, Trajectory
from mtraj.echo_sut import straight_line_sut
from mtraj.fixtures import default_cases, generate_scene, straight_case
from mtraj.harness import SuiteReport, builtin_sut, run_suite, run_test_case
from mtraj.metrics import ade, displacement_scores, fde
from mtraj.ot import solve_assignment, wasserstein
from mtraj.report import threshold_sweep
from mtraj.sutproto import RemoteSut
from mtraj.stats import VariationMeasures, normal_cdf, z_test
from mtraj.transforms import (
    MIRROR_H,
    MIRROR_V,
    parse_mr_list,
    rescale,
    transform_input,
    transform_output,
)

from conftest import dyadic_prediction_set, random_case, random_prediction_set

REPO_ROOT = Path(__file__).resolve().parents[1]
ECHO_SPEC = f"cmd:{sys.executable} -m mtraj.echo_sut"
ADAPTER_SPEC = f"cmd:{sys.executable} -m sut_adapter.straight_line"


def note(message: str) -> None:
    print(f"ACCEPTANCE PASS: {message}")


def brute_force_min(cost: np.ndarray) -> float:
    n = cost.shape[0]
    return min(
        sum(cost[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )


def test_criterion_assignment_exactness():
    """200 random cost matrices per K in 2..7 match brute force within 1e-9."""
    rng = np.random.default_rng(2024)
    t0 = time.monotonic()
    checked = 0
    for k in range(2, 8):
        for _ in range(200):
            c = rng.random((k, k)) * rng.uniform(0.5, 20)
            got = solve_assignment(c).total_cost
            want = brute_force_min(c)
            assert abs(got - want) <= 1e-9, (k, got, want)
            checked += 1
    elapsed = time.monotonic() - t0
    assert elapsed < 30.0, f"assignment exactness took {elapsed:.1f}s"
    note(f"assignment exactness: {checked} matrices, {elapsed:.1f}s")


def test_criterion_wasserstein_metric_properties():
    """Symmetry/triangle within 1e-9 on 500 triples; identity and
    permutation invariance exact."""
    rng = np.random.default_rng(77)
    for i in range(500):
        a = random_prediction_set(rng, k=5, horizon=6)
        b = random_prediction_set(rng, k=5, horizon=6)
        c = random_prediction_set(rng, k=5, horizon=6)
        dab = wasserstein(a, b)
        assert dab >= 0.0
        assert abs(dab - wasserstein(b, a)) <= 1e-9
        assert dab <= wasserstein(a, c) + wasserstein(c, b) + 1e-9
        if i % 10 == 0:
            assert wasserstein(a, a) == 0.0
            perm = rng.permutation(5)
            shuffled = PredictionSet(tuple(a.trajectories[j] for j in perm))
            assert wasserstein(shuffled, b) == dab
    note("wasserstein metric properties: 500 triples")


def test_criterion_transform_algebra():
    """Mirror involution and rescale round-trip within 1e-12 on 1000
    random cases; mirror isometry and scale equivariance within 1e-12."""
    rng = np.random.default_rng(4096)
    for i in range(1000):
        tc = random_case(rng, n=4, horizon=5, with_gt=True)
        mirror = MIRROR_V if i % 2 else MIRROR_H
        twice = transform_input(mirror, transform_input(mirror, tc))
        err = np.abs(twice.observed.xy - tc.observed.xy).max()
        assert err <= 1e-12, f"mirror involution error {err}"
        assert twice.scene == tc.scene

        r = float(rng.uniform(0.1, 0.6))
        there = transform_input(rescale(r), tc)
        back = transform_input(rescale(tc.scene.rescale_factor), there)
        err = np.abs(back.observed.xy - tc.observed.xy).max()
        err = max(err, np.abs(back.ground_truth.xy - tc.ground_truth.xy).max())
        assert err <= 1e-12, f"rescale round-trip error {err}"

    scene = Scene.from_grid(np.zeros((48, 48), dtype=np.uint8), num_classes=6)
    for i in range(200):
        a = dyadic_prediction_set(rng, k=5, horizon=6)
        b = dyadic_prediction_set(rng, k=5, horizon=6)
        base = wasserstein(a, b)
        for mirror in (MIRROR_V, MIRROR_H):
            ma = transform_output(mirror, a, scene)
            mb = transform_output(mirror, b, scene)
            assert abs(wasserstein(ma, mb) - base) <= 1e-12
        mr = rescale(float(rng.uniform(0.1, 0.6)))
        s = mr.param / scene.rescale_factor
        scaled = wasserstein(
            transform_output(mr, a, scene), transform_output(mr, b, scene)
        )
        assert abs(scaled - s * base) <= 1e-12
    note("transform algebra: 1000 round-trips, 200 isometry/equivariance checks")


def test_criterion_statistics():
    """Reference CDF values within 1e-6, worked z-test example within
    1e-5, degenerate-sigma rules exact."""
    assert abs(normal_cdf(2.0) - 0.97725) <= 1e-5
    assert abs(normal_cdf(2.0) - 0.9772498680518208) <= 1e-6
    assert abs(normal_cdf(1.6449) - 0.9500047825316537) <= 1e-6
    vm = VariationMeasures(mu=1.0, sigma=0.5, count=28)
    assert abs(z_test(2.0, vm) - 0.02275) <= 1e-5
    degenerate = VariationMeasures(mu=1.0, sigma=0.0, count=28)
    assert z_test(1.0, degenerate) == 1.0
    assert z_test(1.0 + 1e-6, degenerate) == 0.0
    note("statistics: CDF references, z-test example, degenerate rules")


def test_criterion_calibration_false_positive_bound():
    """Equivariant predictor at N=8, K=20, p=0.05 over 200 cases per
    relation stays within a 1..15 percent violation rate."""
    cfg = RunConfig.short_term(seed=2025)
    cases = default_cases(2025, 200)
    mrs = parse_mr_list("mirror-h,mirror-v,rescale:0.2")
    t0 = time.monotonic()
    report = run_suite(builtin_sut("builtin:cvg"), cases, mrs, cfg)
    elapsed = time.monotonic() - t0
    rates = {a.mr.spec: a.wvc_rate for a in report.aggregates()}
    for spec, rate in rates.items():
        assert 1.0 <= rate <= 15.0, f"{spec}: {rate:.2f}%"
    assert elapsed < 180.0, f"calibration took {elapsed:.0f}s"
    note(
        "calibration: "
        + ", ".join(f"{spec} {rate:.1f}%" for spec, rate in rates.items())
        + f" in {elapsed:.0f}s"
    )


def test_criterion_detection_fault_injection():
    """Planted drift is caught under mirrors at >= 80 percent; fixed
    (non-scaling) noise is caught by rescale at >= 3x its mirror rate."""
    cfg = RunConfig.short_term(seed=31)
    cases = default_cases(31, 100)

    biased = run_suite(
        builtin_sut("builtin:biased"), cases, parse_mr_list("mirror-h,mirror-v"), cfg
    )
    biased_rates = {a.mr.spec: a.wvc_rate for a in biased.aggregates()}
    for spec, rate in biased_rates.items():
        assert rate >= 80.0, f"{spec}: {rate:.1f}%"

    fixed = run_suite(
        builtin_sut("builtin:cvg?scale_noise_with_frame=false"),
        cases,
        parse_mr_list("mirror-v,rescale:0.2"),
        cfg,
    )
    fixed_rates = {a.mr.spec: a.wvc_rate for a in fixed.aggregates()}
    mirror_rate = max(fixed_rates["mirror-v"], 1e-9)
    assert fixed_rates["rescale:0.2"] >= 3.0 * mirror_rate, fixed_rates
    note(
        f"detection: biased mirrors {min(biased_rates.values()):.0f}%+, "
        f"scale sensitivity {fixed_rates['rescale:0.2']:.0f}% vs mirror "
        f"{fixed_rates['mirror-v']:.1f}%"
    )


def test_criterion_agreement_with_label_criteria():
    """On a mixed healthy/faulty population the label-free decisions
    agree with Mean-ADE labels (accuracy >= 0.8) and recall is monotone
    across the threshold sweep."""
    rng = np.random.default_rng(5)
    scene = generate_scene(rng, "agree", 192, 192)
    cfg = RunConfig.short_term(seed=5)
    mrs = parse_mr_list("mirror-v")
    healthy = [
        straight_case(rng, scene, 8, 12, gt_noise=0.5, case_id=f"eq{i}") for i in range(25)
    ]
    faulty = [
        straight_case(rng, scene, 8, 12, drift=(2.0, 2.0), gt_noise=0.5, case_id=f"bi{i}")
        for i in range(25)
    ]
    rep_healthy = run_suite(builtin_sut("builtin:cvg"), healthy, mrs, cfg)
    rep_faulty = run_suite(builtin_sut("builtin:biased"), faulty, mrs, cfg)
    merged = SuiteReport(
        config=cfg,
        sut_name="mixed",
        mrs=mrs,
        case_reports=rep_healthy.case_reports + rep_faulty.case_reports,
    )
    sweep = threshold_sweep(merged, "mean_ade", [0.01, 0.025, 0.05, 0.10, 0.15, 0.20])
    at_05 = next(r for r in sweep if r.threshold == 0.05)
    assert at_05.accuracy >= 0.8, f"accuracy {at_05.accuracy:.3f}"
    recalls = [r.recall for r in sweep]
    assert recalls == sorted(recalls), f"recall not monotone: {recalls}"
    note(f"agreement: accuracy {at_05.accuracy:.3f} at 0.05, recall monotone")


def test_criterion_displacement_metrics():
    """Worked ADE/FDE examples exact; BoN <= Mean on 1000 random sets."""
    pred = Trajectory(((0.0, 0.0), (1.0, 0.0)))
    gt = Trajectory(((0.0, 1.0), (1.0, 1.0)))
    assert ade(pred, gt) == 1.0
    assert fde(pred, gt) == 1.0
    assert ade(gt, gt) == 0.0
    assert fde(gt, gt) == 0.0
    assert ade(Trajectory(((0.0, 0.0), (0.0, 0.0))), Trajectory(((3.0, 4.0), (0.0, 0.0)))) == 2.5
    assert fde(Trajectory(((9.0, 9.0), (0.0, 0.0))), Trajectory(((9.0, 9.0), (3.0, 4.0)))) == 5.0

    rng = np.random.default_rng(88)
    for _ in range(1000):
        k = int(rng.integers(1, 24))
        preds = random_prediction_set(rng, k=k, horizon=6)
        target = random_prediction_set(rng, k=1, horizon=6).trajectories[0]
        scores = displacement_scores(preds, target)
        assert scores.bon_ade <= scores.mean_ade
        assert scores.bon_fde <= scores.mean_fde
    note("displacement metrics: worked examples exact, dominance on 1000 sets")


def test_criterion_run_determinism(tmp_path):
    """Identical flags and seed give byte-identical reports; 8 workers
    match serial output."""
    base = [
        "run", "--sut", "builtin:cvg", "--mr", "mirror-v,rescale:0.2",
        "--seed", "13", "--cases", "10",
    ]
    for name, jobs in (("a", 1), ("b", 1), ("c", 8)):
        rc = main(base + ["--out", str(tmp_path / f"{name}.jsonl"), "--jobs", str(jobs)])
        assert rc == EXIT_OK
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes(), "serial runs differ"
    assert a == (tmp_path / "c.jsonl").read_bytes(), "parallel differs from serial"
    note("determinism: byte-identical reports, jobs=8 equals serial")


def test_criterion_protocol_conformance():
    """Golden transcripts pass against the built-in echo predictor over
    the subprocess transport."""
    failures = run_conformance(ECHO_SPEC, timeout=30)
    assert failures == [], failures
    note("protocol conformance: echo predictor passes golden transcripts")


@pytest.fixture
def adapter_on_path(monkeypatch):
    adapter_src = REPO_ROOT / "sut_adapter" / "src"
    if not adapter_src.exists():
        pytest.skip("sut_adapter package not present")
    extra = str(adapter_src)
    current = os.environ.get("PYTHONPATH", "")
    monkeypatch.setenv("PYTHONPATH", extra + (os.pathsep + current if current else ""))


def test_secondary_adapter_conformance(adapter_on_path):
    """The adapter-served straight-line predictor passes the same golden
    transcripts and reproduces the in-process reports bit for bit."""
    failures = run_conformance(ADAPTER_SPEC, timeout=30)
    assert failures == [], failures

    rng = np.random.default_rng(17)
    tc = random_case(rng, with_gt=True)
    cfg = RunConfig.short_term(seed=99, n_source=4)
    expected = run_test_case(straight_line_sut(), tc, MIRROR_V, cfg)
    remote = RemoteSut.open(ADAPTER_SPEC, timeout=30)
    try:
        got = run_test_case(remote.handle(), tc, MIRROR_V, cfg)
    finally:
        remote.close()
    assert got == expected
    note("secondary adapter: transcripts pass, reports identical to in-process")
