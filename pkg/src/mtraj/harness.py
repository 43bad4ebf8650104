"""End-to-end test process: sample, transform, compare, decide.

For one test case and one metamorphic relation the process is:

1. Preparation: invoke the predictor N times on the source case (seeds
   ``seed+1 .. seed+N``), compute all pairwise Wasserstein distances
   between the N prediction sets and their mean/standard deviation.
2. Transformation: build the follow-up case and invoke the predictor
   once on it (seed ``seed+N+1``).
3. Evaluation: map the follow-up prediction back into the source frame,
   compute its Wasserstein distance to each of the N source sets, and
   z-test each distance against the null statistics. When ground truth
   is available, displacement-metric baselines are evaluated the same
   way (follow-up score vs the N source scores).

Ground truth is never required for the label-free criterion.

The module also ships seeded synthetic predictors: an equivariant
constant-velocity predictor for calibration, a drift-biased variant for
fault injection, and a map-dependent goal-seeking predictor.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_RESCALE_FACTOR,
    DEFAULT_WALKABLE_CLASSES,
    MtrajError,
    PredictionSet,
    RunConfig,
    TestCase,
    derive_seed,
)
from .metrics import METRIC_KEYS, baseline_criterion, displacement_scores
from .stats import (
    EmptyInput,
    VariationMeasures,
    is_violation,
    pairwise_distances,
    variation_measures,
    z_test,
)
from .transforms import (
    MetamorphicRelation,
    inverse_transform_output,
    transform_input,
    transform_output,
)
from .ot import wasserstein


class SutFailure(MtrajError):
    pass


class TooShortHistory(MtrajError):
    pass


class NoWalkableCells(MtrajError):
    pass


class UnknownSut(MtrajError):
    pass


@dataclass(frozen=True)
class SutHandle:
    """A system under test: a capability producing K samples per call.

    ``invoke(tc, k, seed)`` must return a PredictionSet with exactly k
    trajectories of length ``tc.horizon``. Handles that are not safe for
    concurrent invocation set ``concurrent_safe=False`` and are wrapped
    in a serializing gate by the suite runner.
    """

    name: str
    invoke: Callable[[TestCase, int, int], PredictionSet]
    deterministic_given_seed: bool = True
    concurrent_safe: bool = True
    closer: Optional[Callable[[], None]] = None

    def close(self) -> None:
        if self.closer is not None:
            self.closer()


@dataclass(frozen=True)
class Comparison:
    distance: float
    p_value: float
    violation: bool


@dataclass(frozen=True)
class BaselineResult:
    followup_score: float
    source_mean: float
    source_sigma: float
    p_value: float
    violation: bool


@dataclass(frozen=True)
class TestCaseReport:
    __test__ = False  # domain type, not a pytest class

    test_case_id: str
    mr: MetamorphicRelation
    mu_src: float
    sigma_src: float
    pairwise_src: tuple[float, ...]
    comparisons: tuple[Comparison, ...]
    violation_counter: int
    baselines: Optional[dict[str, BaselineResult]] = None


@dataclass(frozen=True)
class MrAggregate:
    """Violation rates (in percent) for one metamorphic relation."""

    mr: MetamorphicRelation
    cases: int
    comparisons: int
    wvc_violations: int
    wvc_rate: float
    baseline_cases: int
    baseline_violations: dict[str, int]
    baseline_rates: dict[str, float]


@dataclass(frozen=True)
class SuiteReport:
    config: RunConfig
    sut_name: str
    mrs: tuple[MetamorphicRelation, ...]
    case_reports: tuple[TestCaseReport, ...]

    def aggregates(self) -> list[MrAggregate]:
        out = []
        for mr in self.mrs:
            reports = [r for r in self.case_reports if r.mr == mr]
            comparisons = sum(len(r.comparisons) for r in reports)
            violations = sum(r.violation_counter for r in reports)
            with_baselines = [r for r in reports if r.baselines is not None]
            bviol = {
                key: sum(1 for r in with_baselines if r.baselines[key].violation)
                for key in METRIC_KEYS
            }
            brate = {
                key: (100.0 * bviol[key] / len(with_baselines)) if with_baselines else 0.0
                for key in METRIC_KEYS
            }
            out.append(
                MrAggregate(
                    mr=mr,
                    cases=len(reports),
                    comparisons=comparisons,
                    wvc_violations=violations,
                    wvc_rate=100.0 * violations / comparisons if comparisons else 0.0,
                    baseline_cases=len(with_baselines),
                    baseline_violations=bviol,
                    baseline_rates=brate,
                )
            )
        return out


# ---------------------------------------------------------------------------
# Synthetic predictors


def _noise_sd(tc: TestCase, noise_scale: float, scale_with_frame: bool, reference_factor: float) -> float:
    if scale_with_frame:
        return noise_scale * (tc.scene.rescale_factor / reference_factor)
    return noise_scale


def cvg_predict(
    tc: TestCase,
    k: int,
    seed: int,
    noise_scale: float = 1.0,
    scale_noise_with_frame: bool = True,
    reference_factor: float = DEFAULT_RESCALE_FACTOR,
) -> PredictionSet:
    """Constant-velocity extrapolation with per-step Gaussian noise.

    Equivariant under mirroring and, when the noise is scaled with the
    frame, under rescaling: transforming the input then predicting gives
    the same distribution as predicting then transforming.
    """
    if len(tc.observed) < 2:
        raise TooShortHistory("constant-velocity extrapolation needs >= 2 observed points")
    obs = tc.observed.xy
    last = obs[-1]
    vel = obs[-1] - obs[-2]
    steps = np.arange(1, tc.horizon + 1, dtype=np.float64)[:, None]
    base = last[None, :] + steps * vel[None, :]
    sd = _noise_sd(tc, noise_scale, scale_noise_with_frame, reference_factor)
    rng = np.random.default_rng(seed)
    samples = base[None, :, :] + rng.normal(0.0, sd, size=(k, tc.horizon, 2))
    return PredictionSet.from_array(samples, tc.observed.frame_interval)


def biased_predict(
    tc: TestCase,
    k: int,
    seed: int,
    drift: tuple[float, float] = (2.0, 2.0),
    noise_scale: float = 1.0,
    scale_noise_with_frame: bool = True,
    reference_factor: float = DEFAULT_RESCALE_FACTOR,
) -> PredictionSet:
    """Constant-velocity predictor plus a cumulative drift in a fixed
    direction that does not follow frame transformations (a planted
    equivariance fault)."""
    base = cvg_predict(
        tc,
        k,
        seed,
        noise_scale=noise_scale,
        scale_noise_with_frame=scale_noise_with_frame,
        reference_factor=reference_factor,
    )
    steps = np.arange(1, tc.horizon + 1, dtype=np.float64)[:, None]
    offset = steps * np.asarray(drift, dtype=np.float64)[None, :]
    return PredictionSet.from_array(
        base.stacked + offset[None, :, :], tc.observed.frame_interval
    )


def goal_predict(
    tc: TestCase,
    k: int,
    seed: int,
    walkable_classes: frozenset[int] = DEFAULT_WALKABLE_CLASSES,
    noise_scale: float = 1.0,
    radius: float = 30.0,
    scale_with_frame: bool = True,
    reference_factor: float = DEFAULT_RESCALE_FACTOR,
) -> PredictionSet:
    """Goal-seeking predictor: per sample, pick a walkable cell near the
    last observed position uniformly at random and walk straight to it.

    Cell (i, j) is targeted at the pixel sample point (x=j, y=i), which
    makes the goal distribution mirror exactly with the scene.
    """
    grid = tc.scene.grid
    walk_rows, walk_cols = np.nonzero(np.isin(grid, list(walkable_classes)))
    if walk_rows.size == 0:
        raise NoWalkableCells(f"scene {tc.scene.scene_id!r} has no walkable cell")
    ratio = tc.scene.rescale_factor / reference_factor if scale_with_frame else 1.0
    last = tc.observed.xy[-1]
    d2 = (walk_cols - last[0]) ** 2 + (walk_rows - last[1]) ** 2
    r = radius * ratio
    candidates = np.nonzero(d2 <= r * r)[0]
    while candidates.size == 0:
        r *= 2.0
        candidates = np.nonzero(d2 <= r * r)[0]

    rng = np.random.default_rng(seed)
    picks = candidates[rng.integers(0, candidates.size, size=k)]
    goals = np.stack([walk_cols[picks], walk_rows[picks]], axis=1).astype(np.float64)
    fractions = (np.arange(1, tc.horizon + 1, dtype=np.float64) / tc.horizon)[None, :, None]
    base = last[None, None, :] + fractions * (goals[:, None, :] - last[None, None, :])
    sd = noise_scale * ratio
    samples = base + rng.normal(0.0, sd, size=(k, tc.horizon, 2))
    return PredictionSet.from_array(samples, tc.observed.frame_interval)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UnknownSut(f"bad boolean value {text!r}")


def _parse_opts(text: str) -> dict[str, str]:
    opts = {}
    for part in text.split("&"):
        if not part:
            continue
        if "=" not in part:
            raise UnknownSut(f"bad option {part!r}, expected key=value")
        key, value = part.split("=", 1)
        opts[key.strip()] = value.strip()
    return opts


def builtin_sut(spec: str) -> SutHandle:
    """Build one of the synthetic predictors from a spec string.

    Syntax: ``builtin:<name>[?key=value&...]``, e.g.
    ``builtin:cvg?noise_scale=0.5&scale_noise_with_frame=false`` or
    ``builtin:biased?drift=2,2``.
    """
    body = spec[len("builtin:"):] if spec.startswith("builtin:") else spec
    name, _, query = body.partition("?")
    opts = _parse_opts(query)

    def pop_float(key: str, default: float) -> float:
        return float(opts.pop(key)) if key in opts else default

    def pop_bool(key: str, default: bool) -> bool:
        return _parse_bool(opts.pop(key)) if key in opts else default

    if name == "cvg":
        noise = pop_float("noise_scale", 1.0)
        frame_noise = pop_bool("scale_noise_with_frame", True)

        def fn(tc, k, seed):
            return cvg_predict(
                tc, k, seed, noise_scale=noise, scale_noise_with_frame=frame_noise
            )

    elif name == "biased":
        noise = pop_float("noise_scale", 1.0)
        if "drift" in opts:
            parts = opts.pop("drift").split(",")
            if len(parts) != 2:
                raise UnknownSut("drift must be 'dx,dy'")
            drift = (float(parts[0]), float(parts[1]))
        else:
            drift = (2.0 * noise, 2.0 * noise)

        def fn(tc, k, seed):
            return biased_predict(tc, k, seed, drift=drift, noise_scale=noise)

    elif name == "goal":
        noise = pop_float("noise_scale", 1.0)
        radius = pop_float("radius", 30.0)
        if "walkable" in opts:
            walkable = frozenset(int(v) for v in opts.pop("walkable").split(","))
        else:
            walkable = DEFAULT_WALKABLE_CLASSES

        def fn(tc, k, seed):
            return goal_predict(
                tc, k, seed, walkable_classes=walkable, noise_scale=noise, radius=radius
            )

    else:
        raise UnknownSut(f"unknown builtin predictor {name!r}")
    if opts:
        raise UnknownSut(f"unknown options for builtin:{name}: {sorted(opts)}")
    return SutHandle(name=spec, invoke=fn)


def resolve_sut(spec: str) -> SutHandle:
    """Resolve a SUT spec: ``builtin:...``, ``cmd:<command>`` or ``tcp://host:port``."""
    if spec.startswith("builtin:"):
        return builtin_sut(spec)
    if spec.startswith("cmd:") or spec.startswith("tcp://"):
        from .sutproto import RemoteSut

        return RemoteSut.open(spec).handle()
    raise UnknownSut(f"unknown SUT spec {spec!r}")


# ---------------------------------------------------------------------------
# Test process


def _checked_invoke(sut: SutHandle, tc: TestCase, k: int, seed: int) -> PredictionSet:
    try:
        preds = sut.invoke(tc, k, seed)
    except MtrajError:
        raise
    except Exception as exc:  # malformed output from arbitrary predictors
        raise SutFailure(f"SUT {sut.name!r} failed: {exc}") from exc
    if not isinstance(preds, PredictionSet):
        raise SutFailure(f"SUT {sut.name!r} returned {type(preds).__name__}")
    if preds.k != k or preds.horizon != tc.horizon:
        raise SutFailure(
            f"SUT {sut.name!r} returned {preds.k}x{preds.horizon}, "
            f"expected {k}x{tc.horizon}"
        )
    return preds


@dataclass(frozen=True)
class _SourcePrep:
    sets: tuple[PredictionSet, ...]
    pairwise: tuple[float, ...]
    vm: VariationMeasures
    metric_scores: Optional[dict[str, tuple[float, ...]]]


def _prepare_source(sut: SutHandle, tc: TestCase, cfg: RunConfig) -> _SourcePrep:
    sets = tuple(
        _checked_invoke(sut, tc, cfg.k, cfg.seed + i) for i in range(1, cfg.n_source + 1)
    )
    pairwise = tuple(pairwise_distances(sets))
    vm = variation_measures(pairwise)
    metric_scores = None
    if tc.ground_truth is not None:
        per_set = [displacement_scores(s, tc.ground_truth) for s in sets]
        metric_scores = {
            key: tuple(getattr(d, key) for d in per_set) for key in METRIC_KEYS
        }
    return _SourcePrep(sets=sets, pairwise=pairwise, vm=vm, metric_scores=metric_scores)


def _evaluate_mr(
    sut: SutHandle,
    tc: TestCase,
    prep: _SourcePrep,
    mr: MetamorphicRelation,
    cfg: RunConfig,
) -> TestCaseReport:
    followup_tc = transform_input(mr, tc)
    followup = _checked_invoke(sut, followup_tc, cfg.k, cfg.seed + cfg.n_source + 1)
    followup_src = inverse_transform_output(mr, followup, tc.scene)

    if cfg.followup_frame == "source":
        probe, targets = followup_src, prep.sets
    else:
        probe = followup
        targets = tuple(transform_output(mr, s, tc.scene) for s in prep.sets)

    comparisons = []
    for target in targets:
        d = wasserstein(probe, target)
        p = z_test(d, prep.vm, two_sided=cfg.two_sided)
        comparisons.append(Comparison(d, p, is_violation(p, cfg.p_threshold)))

    baselines = None
    if prep.metric_scores is not None:
        # Follow-up displacement is evaluated in the source frame (back-
        # mapped predictions against the original ground truth), which
        # keeps metric units commensurate with the source scores for any
        # transformation.
        followup_scores = displacement_scores(followup_src, tc.ground_truth)
        baselines = {}
        for key in METRIC_KEYS:
            sources = prep.metric_scores[key]
            score = getattr(followup_scores, key)
            p, viol = baseline_criterion(
                sources, score, cfg.p_threshold, two_sided=cfg.two_sided
            )
            vm = variation_measures(list(sources))
            baselines[key] = BaselineResult(
                followup_score=score,
                source_mean=vm.mu,
                source_sigma=vm.sigma,
                p_value=p,
                violation=viol,
            )

    return TestCaseReport(
        test_case_id=tc.id,
        mr=mr,
        mu_src=prep.vm.mu,
        sigma_src=prep.vm.sigma,
        pairwise_src=prep.pairwise,
        comparisons=tuple(comparisons),
        violation_counter=sum(1 for c in comparisons if c.violation),
        baselines=baselines,
    )


def run_test_case(
    sut: SutHandle, tc: TestCase, mr: MetamorphicRelation, cfg: RunConfig
) -> TestCaseReport:
    """Full test process for a single case and metamorphic relation."""
    prep = _prepare_source(sut, tc, cfg)
    return _evaluate_mr(sut, tc, prep, mr, cfg)


def _serialized(sut: SutHandle) -> SutHandle:
    lock = threading.Lock()
    inner = sut.invoke

    def invoke(tc, k, seed):
        with lock:
            return inner(tc, k, seed)

    return replace(sut, invoke=invoke)


def run_suite(
    sut: SutHandle,
    cases: Sequence[TestCase],
    mrs: Sequence[MetamorphicRelation],
    cfg: RunConfig,
    jobs: int = 1,
) -> SuiteReport:
    """Run every case against every relation and aggregate rates.

    Each test case gets its own seed region derived from ``cfg.seed``
    and the case id, so results are independent of execution order and
    of the degree of parallelism. Source predictions are sampled once
    per case and shared by all relations (the null statistics depend
    only on the source input).
    """
    if not cases:
        raise EmptyInput("no test cases")
    if not mrs:
        raise EmptyInput("no metamorphic relations")
    ids = [tc.id for tc in cases]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate test case ids in suite")
    if not sut.concurrent_safe and jobs > 1:
        sut = _serialized(sut)

    def run_one(tc: TestCase) -> list[TestCaseReport]:
        case_cfg = cfg.with_seed(derive_seed(cfg.seed, tc.id))
        prep = _prepare_source(sut, tc, case_cfg)
        return [_evaluate_mr(sut, tc, prep, mr, case_cfg) for mr in mrs]

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_case = list(pool.map(run_one, cases))
    else:
        per_case = [run_one(tc) for tc in cases]

    reports = tuple(r for case_reports in per_case for r in case_reports)
    return SuiteReport(
        config=cfg, sut_name=sut.name, mrs=tuple(mrs), case_reports=reports
    )
