import csv
import io
import json
import math

import numpy as np
import pytest

from sobolev_lab import (
    CERTIFIED,
    CSV_COLUMNS,
    GAUSSIAN,
    INCONCLUSIVE,
    SOUND,
    STATED,
    SUB_TWO,
    SUPER_TWO,
    VIOLATED,
    BubbleParams,
    ConstructionError,
    NormMismatchError,
    PerturbationDirection,
    QuadratureScheme,
    RunConfig,
    bubble,
    corollary_ratio,
    generate_corpus,
    make_exponents,
    make_perturbed_bubble,
    normalized_base,
    order_deficits_check,
    recertify,
    reduction_certificate,
    reduction_constants,
    run_corpus,
    sobolev_constant,
    verdict_for,
)
import sobolev_lab.certify as certify_module

from oracles import TALENTI

SCHEME = QuadratureScheme(resolution=128)


def test_stated_constants():
    assert reduction_constants(make_exponents(2, 1.5)) == (3.0, 8.0, 12.0)
    assert reduction_constants(make_exponents(3, 2.5)) == pytest.approx(
        (2.5, 2**2.5, 2.5 * 2**1.5))
    a, c1, c2 = reduction_constants(make_exponents(3, 2.0), shrink=64)
    assert (a, c1, c2) == (2.0, 4.0 / 64, 4.0 / 64)


def test_sound_constants_scale_distance_term():
    e = make_exponents(2, 1.5)
    S = TALENTI[(2, 1.5)]
    _, c1, c2 = reduction_constants(e, constants=SOUND, sobolev=S)
    assert c1 == 8.0 and c2 == pytest.approx(12.0 * S**3)
    with pytest.raises(ValueError):
        reduction_constants(e, constants=SOUND)
    with pytest.raises(ValueError):
        reduction_constants(e, constants="loose")


def test_verdict_bands():
    assert verdict_for(0.0, 1e-6) == CERTIFIED
    assert verdict_for(-1e-6, 1e-6) == CERTIFIED
    assert verdict_for(-5e-6, 1e-6) == INCONCLUSIVE
    assert verdict_for(-9.9e-6, 1e-6) == INCONCLUSIVE
    assert verdict_for(-1.1e-5, 1e-6) == VIOLATED


@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 2.0), (3, 2.5)])
def test_same_bubble_is_certified_with_zero_slack(n, p):
    e = make_exponents(n, p)
    params = BubbleParams(1.3, 0.9, (0.1,) * n)
    rec = reduction_certificate(bubble(params, e), params, e, QuadratureScheme(resolution=64))
    assert rec.lhs == 0.0 and rec.distance_term == 0.0
    assert abs(rec.deficit_term) <= rec.slack_budget
    assert rec.verdict == CERTIFIED


@pytest.mark.parametrize("n,p", [(2, 1.5), (2, 1.2), (3, 2.0), (3, 2.5), (3, 1.2)])
def test_negated_bubble(n, p):
    """u = -v: lhs = (2S)^alpha, no deficit, distance term 2 C2.

    With the stated constants this needs (2S)^alpha <= 2 alpha 2^(alpha-1),
    i.e. S^alpha <= alpha, which fails whenever S^alpha > alpha.  The sound
    constants carry the missing factor S^alpha and always certify.
    """
    e = make_exponents(n, p)
    params = BubbleParams(1.0, 1.0, (0.0,) * n)
    u = -bubble(params, e)
    scheme = QuadratureScheme(resolution=64)
    S = sobolev_constant(e, QuadratureScheme(kind="Radial1D", resolution=64))
    a = e.alpha
    rec = reduction_certificate(u, params, e, scheme)
    assert rec.lhs == pytest.approx((2 * S) ** a, rel=1e-6)
    assert rec.distance_term == pytest.approx(2 * a * 2 ** (a - 1), rel=1e-6)
    assert abs(rec.deficit_term) <= 1e-6
    expected = VIOLATED if S**a > a else CERTIFIED
    assert rec.verdict == expected
    sound = reduction_certificate(u, params, e, scheme, constants=SOUND)
    assert sound.verdict == CERTIFIED
    # sound: 2 a 2^(a-1) S^a = a (2S)^a >= (2S)^a since a >= 1
    assert sound.distance_term == pytest.approx(a * rec.lhs, rel=1e-6)


def test_negated_bubble_verdicts_known_cases():
    # S^alpha against alpha, from the closed-form constants
    for (n, p), S in TALENTI.items():
        a = make_exponents(n, p).alpha
        if (n, p) in ((2, 1.5), (3, 2.0)):
            assert S**a > a
        if (n, p) == (3, 2.5):
            assert S**a < a


def test_norm_mismatch_rejected():
    e = make_exponents(2, 1.5)
    params = BubbleParams(1.0, 1.0, (0.0, 0.0))
    with pytest.raises(NormMismatchError):
        reduction_certificate(bubble(params, e), BubbleParams(1.01, 1.0, (0.0, 0.0)), e, SCHEME)


def _perturbed(e, eps, shape=GAUSSIAN, seed=0):
    rng = np.random.default_rng(seed)
    base = BubbleParams(1.2, 1.1, tuple(rng.uniform(-0.5, 0.5, e.n)))
    d = PerturbationDirection(shape, center=tuple(np.array(base.center) + 0.4), width=0.7,
                              amplitude=1.0)
    return base, make_perturbed_bubble(base, d, eps, e)


def test_branch_consistency_at_two():
    e = make_exponents(3, 2.0)
    scheme = QuadratureScheme(resolution=64)
    for seed in range(3):
        base, u = _perturbed(e, 0.2, seed=seed)
        v = normalized_base(base, u, e, scheme)
        a = reduction_certificate(u, v, e, scheme, branch=SUB_TWO)
        b = reduction_certificate(u, v, e, scheme, branch=SUPER_TWO, norms=a.norms)
        for f in ("lhs", "deficit_term", "distance_term", "slack"):
            assert abs(getattr(a, f) - getattr(b, f)) <= 1e-10


def test_slack_terms_vanish_as_eps_shrinks():
    e = make_exponents(2, 1.5)
    rows = []
    for eps in (0.3, 0.1, 0.03, 0.01, 0.003, 0.0):
        base, u = _perturbed(e, eps)
        v = normalized_base(base, u, e, SCHEME)
        rows.append(reduction_certificate(u, v, e, SCHEME))
    for field in ("lhs", "distance_term"):
        vals = [getattr(r, field) for r in rows]
        assert all(b < a for a, b in zip(vals[:-2], vals[1:-1])), (field, vals)
        assert vals[-1] <= rows[-1].slack_budget + 1e-12
    assert abs(rows[-1].deficit_term) <= rows[-1].slack_budget
    assert rows[-2].deficit_term < rows[0].deficit_term


def test_order_deficits_cases():
    e = make_exponents(2, 1.5)
    v = bubble(BubbleParams(1.0, 1.0, (0.0, 0.0)), e)
    for f in (v, -v):
        r = order_deficits_check(f, e, SCHEME)
        assert r.holds and abs(r.lhs) <= 1e-9 and abs(r.rhs) <= 1e-9
    margins = []
    for eps in (0.05, 0.2, 0.5):
        _, u = _perturbed(e, eps)
        r = order_deficits_check(u, e, SCHEME)
        assert r.holds
        margins.append(r.slack)
    assert margins == sorted(margins)


def test_corollary_ratio_excludes_members():
    e = make_exponents(2, 1.5)
    r = corollary_ratio(bubble(BubbleParams(1.0, 1.0, (0.0, 0.0)), e), e,
                        QuadratureScheme(resolution=64))
    assert r.excluded and math.isnan(r.ratio)


def test_corollary_ratio_for_perturbation():
    e = make_exponents(2, 1.5)
    _, u = _perturbed(e, 0.3)
    r = corollary_ratio(u, e, QuadratureScheme(resolution=64))
    assert not r.excluded
    assert r.asymmetry_upper > 0 and r.deficit_val > 0
    assert math.isfinite(r.log10_ratio)
    assert r.log10_ratio == pytest.approx(
        math.log10(r.deficit_val) - e.beta_cor * math.log10(r.asymmetry_upper))


# -- corpora -------------------------------------------------------------


def test_corpus_layout():
    cfg = RunConfig(samples=9)
    samples = generate_corpus(cfg)
    assert [s.sample_id for s in samples] == [f"s{i:05d}" for i in range(9)]
    assert [s.kind for s in samples[:3]] == list(cfg.perturbation_kinds)
    assert [s.eps for s in samples[::3]] == list(cfg.eps_grid)
    assert generate_corpus(cfg) == samples
    # prefix stability: a longer corpus starts with the same samples
    assert generate_corpus(RunConfig(samples=12))[:9] == samples


def test_empty_corpus():
    rep = run_corpus(RunConfig(samples=0))
    assert rep.records == [] and rep.counts()[VIOLATED] == 0
    text = rep.to_csv()
    assert text.splitlines()[-1] == ",".join(CSV_COLUMNS)


def test_small_corpus_certified_and_deterministic():
    cfg = RunConfig(samples=9, seed=5)
    a, b = run_corpus(cfg), run_corpus(cfg)
    assert a.to_csv() == b.to_csv()
    assert a.counts()[CERTIFIED] == 9
    s = a.summary()
    assert s["order_deficits_violations"] == 0 and s["min_slack"] > 0


def test_parallel_matches_serial():
    cfg = RunConfig(samples=4, seed=3)
    par = run_corpus(RunConfig(samples=4, seed=3, workers=2))
    assert par.to_csv().replace("workers = 2", "workers = 1") == run_corpus(cfg).to_csv()


def test_csv_schema():
    rep = run_corpus(RunConfig(samples=3))
    body = [ln for ln in rep.to_csv().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    assert tuple(rows[0]) == CSV_COLUMNS
    for row, rec in zip(rows[1:], rep.records):
        assert float(row[5]) == rec.lhs  # 17 significant digits round-trip exactly
        assert row[-1] == rec.verdict


def test_json_report():
    rep = run_corpus(RunConfig(samples=3, ratios=True, resolution=64))
    doc = json.loads(rep.to_json())
    assert doc["config"]["samples"] == 3
    assert len(doc["records"]) == 3
    assert all("ratio" in r and "orderDeficits" in r for r in doc["records"])
    assert doc["summary"]["counts"][CERTIFIED] == 3


def test_sample_errors_recorded(monkeypatch):
    real = certify_module.make_perturbed_bubble

    def flaky(base, direction, eps, exps):
        if direction.shape == GAUSSIAN:
            raise ConstructionError("synthetic failure")
        return real(base, direction, eps, exps)

    monkeypatch.setattr(certify_module, "make_perturbed_bubble", flaky)
    rep = run_corpus(RunConfig(samples=3))
    assert rep.counts()["Error"] == 1
    assert rep.errors[0][0] == "s00000" and "synthetic" in rep.errors[0][1]
    assert "s00000,2,1.5,0.01,GaussianBump,nan" in rep.to_csv()


def test_recertify_shrunk_constants():
    rep = run_corpus(RunConfig(samples=6))
    same = recertify(rep)
    assert [r.slack for r in same] == [r.slack for r in rep.records]
    shrunk = recertify(rep, shrink=1e6)
    assert any(r.verdict == VIOLATED for r in shrunk)
    assert all(s.lhs == r.lhs for s, r in zip(shrunk, rep.records))


def test_stated_and_sound_agree_on_default_corpus():
    rep = run_corpus(RunConfig(samples=6))
    sound = recertify(rep, constants=SOUND)
    assert all(r.verdict == CERTIFIED for r in sound)
    assert all(s.slack >= r.slack for s, r in zip(sound, rep.records))


def test_constants_flag_in_config():
    rep = run_corpus(RunConfig(samples=2, constants=STATED))
    assert "constants = stated" in rep.to_csv()


def test_projected_certificates():
    rep = run_corpus(RunConfig(samples=3, resolution=64, projected=True))
    assert len(rep.projected_records) == 3
    assert rep.summary()["projected_counts"][CERTIFIED] == 3
    for o in rep.outcomes:
        # the projection is at least as close in L^p* as the generating bubble
        assert o.projected.distance_term <= o.record.distance_term * (1 + 1e-6)
    doc = json.loads(rep.to_json())
    assert all(r["projected"]["verdict"] == CERTIFIED for r in doc["records"])
    assert run_corpus(RunConfig(samples=1)).summary()["projected_counts"] is None
