"""Certification of the gradient reduction inequality over generated corpora.

For ``u`` and a bubble ``v`` with equal L^{p*} norms the checked inequality is

    (||grad u - grad v||_p / ||u||_{p*})^alpha
        <= C1 * delta(u) + C2 * ||u - v||_{p*} / ||u||_{p*}

with ``alpha = p'``, ``C1 = 2^{p'}``, ``C2 = p' 2^{p'-1}`` for p < 2 and the
same with p in place of p' for p >= 2 ("stated" constants).  The chain of
estimates behind it carries a factor ``S^alpha`` on the distance term; the
"sound" constants include it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import RunConfig
from .errors import NormMismatchError, SobolevLabError
from .functions import (
    TANGENT,
    BubbleParams,
    Exponents,
    PerturbationDirection,
    TestFunction,
    bubble,
    make_exponents,
    make_perturbed_bubble,
)
from .inequalities import SlackResult
from .manifold import asymmetry_gradient, asymmetry_lpstar
from .quadrature import (
    QuadratureScheme,
    Refined,
    integrand_decay,
    lp_norm_refined,
    radial_grid,
    tensor_grid,
)
from .sobolev import (
    EPS,
    Norms,
    deficit,
    deficit_from_norms,
    homogeneity,
    linear_deficit_from_norms,
    norms_refined,
    propagate,
    sobolev_constant_refined,
    unit_bubble,
)

CERTIFIED = "Certified"
VIOLATED = "Violated"
INCONCLUSIVE = "Inconclusive"
ERROR = "Error"

STATED = "stated"
SOUND = "sound"

ASYMMETRY_FLOOR = 1e-6
NORM_MATCH_RTOL = 1e-6

CSV_COLUMNS = ("sampleId", "n", "p", "eps", "kind", "lhs", "deficitTerm",
               "distanceTerm", "slack", "slackBudget", "verdict")


def reduction_constants(exps: Exponents, *, branch: str | None = None,
                        constants: str = STATED, sobolev: float | None = None,
                        shrink: float = 1.0) -> tuple[float, float, float]:
    """``(alpha, C1, C2)`` for the reduction inequality, divided by ``shrink``."""
    q = homogeneity(exps, branch)
    c1 = 2.0**q
    c2 = q * 2.0 ** (q - 1)
    if constants == SOUND:
        if sobolev is None:
            raise ValueError("sound constants need the Sobolev constant")
        c2 *= sobolev**q
    elif constants != STATED:
        raise ValueError(f"unknown constants {constants!r}")
    return q, c1 / shrink, c2 / shrink


def verdict_for(slack: float, budget: float) -> str:
    if slack >= -budget:
        return CERTIFIED
    if slack < -10.0 * budget:
        return VIOLATED
    return INCONCLUSIVE


@dataclass(frozen=True)
class CertificateRecord:
    sample_id: str
    exps: Exponents
    lhs: float
    deficit_term: float
    distance_term: float
    slack: float
    slack_budget: float
    verdict: str
    eps: float = 0.0
    kind: str = ""
    deficit: float = 0.0
    distance_ratio: float = 0.0
    gradient_ratio: float = 0.0
    norms: "PairNorms | None" = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class PairNorms:
    """Refined norms of u, of grad u, and of the differences to v."""

    grad_u: Refined
    norm_u: Refined
    grad_diff: Refined
    diff: Refined


def pair_norms(u: TestFunction, v: TestFunction, exps: Exponents,
               scheme: QuadratureScheme) -> PairNorms:
    """All four norms from one grid per resolution."""
    decay = min(
        integrand_decay(w, q, g) for w in (u, v)
        for q, g in ((exps.p, True), (exps.p_star, False))
    )
    same_center = (u.radial_center is not None and v.radial_center is not None
                   and np.allclose(u.radial_center, v.radial_center, rtol=0, atol=1e-14))
    reach = max(u.scale, v.scale + float(np.linalg.norm(v.anchor_array - u.anchor_array)))

    def at(res):
        if same_center:
            g = radial_grid(u.n, res, center=u.radial_center, scale=reach, decay=decay,
                            tail_map=scheme.tail_map)
        else:
            g = tensor_grid(u.n, res, center=u.anchor, scale=reach, decay=decay,
                            tail_map=scheme.tail_map)
        gu, gv = u.grad(g.points), v.grad(g.points)
        fu, fv = u.value(g.points), v.value(g.points)

        def pn(vals, q):
            return max(g.integrate(np.abs(vals) ** q), 0.0) ** (1.0 / q)

        mag = lambda a: np.sqrt(np.einsum("...i,...i->...", a, a))  # noqa: E731
        return (pn(mag(gu), exps.p), pn(fu, exps.p_star),
                pn(mag(gu - gv), exps.p), pn(fu - fv, exps.p_star))

    fine, coarse = at(2 * scheme.resolution), at(scheme.resolution)
    return PairNorms(*(Refined(a, b) for a, b in zip(fine, coarse)))


def bubble_lpstar_norm(params: BubbleParams, exps: Exponents,
                       scheme: QuadratureScheme) -> float:
    """``|c| lam^{-n/p*} ||vbar||_{p*}`` from the radial rule."""
    radial = QuadratureScheme(kind="Radial1D", resolution=scheme.resolution,
                              tail_map=scheme.tail_map)
    vbar = lp_norm_refined(unit_bubble(exps), exps.p_star, radial).value
    return abs(params.c) * params.lam_scale ** (-exps.n / exps.p_star) * vbar


def normalized_base(base: BubbleParams, u: TestFunction, exps: Exponents,
                    scheme: QuadratureScheme, norm_u: float | None = None) -> BubbleParams:
    """``base`` rescaled in amplitude so its L^{p*} norm matches ``u``."""
    if norm_u is None:
        norm_u = lp_norm_refined(u, exps.p_star, scheme).value
    factor = norm_u / bubble_lpstar_norm(base, exps, scheme)
    return BubbleParams(base.c * factor, base.lam_scale, base.center)


def _certificate_slack(alpha, c1, c2):
    def fn(G, N, D, E, S):
        return c1 * (G**alpha - S**alpha * N**alpha) / N**alpha + c2 * E / N - (D / N) ** alpha

    return fn


def reduction_certificate(u: TestFunction, v: BubbleParams, exps: Exponents,
                          scheme: QuadratureScheme, *, sample_id: str = "",
                          constants: str = STATED, shrink: float = 1.0,
                          branch: str | None = None, eps: float = 0.0,
                          kind: str = "", norms: PairNorms | None = None) -> CertificateRecord:
    """Evaluate both sides of the reduction inequality for ``u`` against ``v``.

    ``norms`` reuses quadrature results of an earlier certificate of the same pair.
    """
    pn = pair_norms(u, bubble(v, exps), exps, scheme) if norms is None else norms
    norm_v = bubble_lpstar_norm(v, exps, scheme)
    if abs(pn.norm_u.value / norm_v - 1.0) > NORM_MATCH_RTOL:
        raise NormMismatchError(
            f"||u||_p* = {pn.norm_u.value:.10g} but ||v||_p* = {norm_v:.10g}"
        )
    S = sobolev_constant_refined(exps, scheme)
    alpha, c1, c2 = reduction_constants(exps, branch=branch, constants=constants,
                                        sobolev=S.value, shrink=shrink)
    fine = dict(G=pn.grad_u.value, N=pn.norm_u.value, D=pn.grad_diff.value,
                E=pn.diff.value, S=S.value)
    coarse = dict(G=pn.grad_u.coarse, N=pn.norm_u.coarse, D=pn.grad_diff.coarse,
                  E=pn.diff.coarse, S=S.coarse)
    G, N, D, E = fine["G"], fine["N"], fine["D"], fine["E"]
    delta = (G**alpha - S.value**alpha * N**alpha) / N**alpha
    lhs = (D / N) ** alpha
    deficit_term = c1 * delta
    distance_term = c2 * E / N
    slack = _certificate_slack(alpha, c1, c2)(**fine)
    rounding = 64 * EPS * (c1 * ((G / N) ** alpha + S.value**alpha) + lhs + distance_term)
    budget = propagate(_certificate_slack(alpha, c1, c2), fine, coarse) + rounding
    return CertificateRecord(
        sample_id=sample_id, exps=exps, lhs=lhs, deficit_term=deficit_term,
        distance_term=distance_term, slack=slack, slack_budget=budget,
        verdict=verdict_for(slack, budget), eps=eps, kind=kind, deficit=delta,
        distance_ratio=E / N, gradient_ratio=D / N, norms=pn,
    )


def order_deficits_check(u: TestFunction, exps: Exponents, scheme: QuadratureScheme,
                         norms: Norms | None = None, branch: str | None = None) -> SlackResult:
    """Linear deficit against the homogenised deficit: ``lhs <= rhs``."""
    if norms is None:
        norms = norms_refined(u, exps, scheme)
    S = sobolev_constant_refined(exps, scheme)
    lin, lin_slack = linear_deficit_from_norms(norms, S)
    dv = deficit_from_norms(norms, S, exps, branch)
    return SlackResult.of(lin, dv.value, tolerance=lin_slack + dv.numerical_slack)


@dataclass(frozen=True)
class RatioRecord:
    """Deficit over asymmetry^beta, kept in log10 form since beta is large."""

    sample_id: str
    asymmetry_upper: float
    deficit_val: float
    log10_ratio: float
    ratio: float
    caveat: bool
    excluded: bool


def corollary_ratio(u: TestFunction, exps: Exponents, scheme: QuadratureScheme, *,
                    sample_id: str = "", deficit_val: float | None = None) -> RatioRecord:
    proj = asymmetry_gradient(u, exps, scheme)
    if deficit_val is None:
        deficit_val = deficit(u, exps, scheme).value
    a = proj.value
    if not a > ASYMMETRY_FLOOR:
        return RatioRecord(sample_id, a, deficit_val, math.nan, math.nan,
                           not proj.converged, True)
    log10_ratio = (math.log10(deficit_val) if deficit_val > 0 else -math.inf) \
        - exps.beta_cor * math.log10(a)
    ratio = 10.0**log10_ratio if log10_ratio < 308 else math.inf
    return RatioRecord(sample_id, a, deficit_val, log10_ratio, ratio,
                       not proj.converged, False)


# -- corpora ----------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSample:
    sample_id: str
    eps: float
    kind: str
    base: BubbleParams
    direction: PerturbationDirection


def _sample(cfg: RunConfig, index: int, rng: np.random.Generator) -> CorpusSample:
    n = cfg.n
    kinds, grid = cfg.perturbation_kinds, cfg.eps_grid
    kind = kinds[index % len(kinds)]
    eps = grid[(index // len(kinds)) % len(grid)]
    sign = 1.0 if rng.random() < 0.5 else -1.0
    c = sign * rng.uniform(0.5, 2.0)
    lam = math.exp(rng.uniform(-0.7, 0.7))
    center = rng.uniform(-1.0, 1.0, n)
    base = BubbleParams(c, lam, tuple(center))
    length = 1.0 / lam
    if kind == TANGENT:
        xi = rng.standard_normal(n + 2)
        xi /= np.linalg.norm(xi)
        direction = PerturbationDirection(kind, amplitude=rng.uniform(0.5, 1.0), tangent=tuple(xi))
    else:
        offset = rng.uniform(-1.0, 1.0, n) * length
        direction = PerturbationDirection(
            kind, center=tuple(center + offset), width=rng.uniform(0.4, 1.0) * length,
            amplitude=c * rng.uniform(0.5, 1.0),
        )
    return CorpusSample(f"s{index:05d}", float(eps), kind, base, direction)


def generate_corpus(cfg: RunConfig) -> list[CorpusSample]:
    """Samples drawn with PCG64; sample i uses the i-th spawned child seed."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.samples)
    return [_sample(cfg, i, np.random.Generator(np.random.PCG64(s)))
            for i, s in enumerate(children)]


@dataclass
class SampleOutcome:
    sample: CorpusSample
    record: CertificateRecord | None = None
    order: dict | None = None
    ratio: RatioRecord | None = None
    projected: CertificateRecord | None = None
    error: str | None = None


def projected_certificate(u: TestFunction, exps: Exponents, scheme: QuadratureScheme,
                          cfg: RunConfig, sample: CorpusSample) -> CertificateRecord:
    """Certificate against the norm-matched bubble closest to ``u`` in L^{p*}."""
    nearest = asymmetry_lpstar(u, exps, scheme).argmin
    return reduction_certificate(
        u, nearest, exps, scheme, sample_id=sample.sample_id, constants=cfg.constants,
        shrink=cfg.shrink_constants, eps=sample.eps, kind=sample.kind,
    )


def process_sample(cfg: RunConfig, sample: CorpusSample) -> SampleOutcome:
    exps = make_exponents(cfg.n, cfg.p)
    scheme = QuadratureScheme(resolution=cfg.resolution)
    out = SampleOutcome(sample)
    try:
        u = make_perturbed_bubble(sample.base, sample.direction, sample.eps, exps)
        v = normalized_base(sample.base, u, exps, scheme)
        rec = reduction_certificate(
            u, v, exps, scheme, sample_id=sample.sample_id, constants=cfg.constants,
            shrink=cfg.shrink_constants, eps=sample.eps, kind=sample.kind,
        )
        out.record = rec
        chk = order_deficits_check(u, exps, scheme, Norms(rec.norms.grad_u, rec.norms.norm_u))
        out.order = dict(sampleId=sample.sample_id, linearDeficit=chk.lhs,
                         deficit=chk.rhs, slack=chk.slack, tolerance=chk.tolerance,
                         holds=bool(chk.holds))
        if cfg.ratios:
            out.ratio = corollary_ratio(u, exps, scheme, sample_id=sample.sample_id,
                                        deficit_val=rec.deficit)
        if cfg.projected:
            out.projected = projected_certificate(u, exps, scheme, cfg, sample)
    except SobolevLabError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def recertify(report: "CorpusReport", *, shrink: float = 1.0, constants: str = STATED,
              branch: str | None = None) -> list[CertificateRecord]:
    """Re-judge every record of ``report`` with other constants, reusing its norms."""
    cfg = report.config
    scheme = QuadratureScheme(resolution=cfg.resolution)
    out = []
    for o in report.outcomes:
        r = o.record
        if r is None:
            continue
        v = normalized_base(o.sample.base, None, r.exps, scheme, r.norms.norm_u.value)
        out.append(reduction_certificate(
            None, v, r.exps, scheme, sample_id=r.sample_id, constants=constants,
            shrink=shrink, branch=branch, eps=r.eps, kind=r.kind, norms=r.norms,
        ))
    return out


def _process_indexed(args):
    cfg, sample = args
    return process_sample(cfg, sample)


@dataclass
class CorpusReport:
    config: RunConfig
    outcomes: list = field(default_factory=list)

    @property
    def records(self) -> list[CertificateRecord]:
        return [o.record for o in self.outcomes if o.record is not None]

    @property
    def ratios(self) -> list[RatioRecord]:
        return [o.ratio for o in self.outcomes if o.ratio is not None]

    @property
    def projected_records(self) -> list[CertificateRecord]:
        return [o.projected for o in self.outcomes if o.projected is not None]

    @property
    def errors(self) -> list[tuple[str, str]]:
        return [(o.sample.sample_id, o.error) for o in self.outcomes if o.error]

    def counts(self) -> dict:
        out = {CERTIFIED: 0, VIOLATED: 0, INCONCLUSIVE: 0, ERROR: len(self.errors)}
        for r in self.records:
            out[r.verdict] += 1
        return out

    def projected_counts(self) -> dict:
        out = {CERTIFIED: 0, VIOLATED: 0, INCONCLUSIVE: 0}
        for r in self.projected_records:
            out[r.verdict] += 1
        return out

    def summary(self) -> dict:
        recs = self.records
        margins = [(r.deficit_term + r.distance_term) / r.lhs for r in recs if r.lhs > 0]
        orders = [o.order for o in self.outcomes if o.order is not None]
        usable = [r for r in self.ratios if not r.excluded]
        return {
            "samples": len(self.outcomes),
            "counts": self.counts(),
            "min_slack": min((r.slack for r in recs), default=None),
            "min_rhs_over_lhs": min(margins, default=None),
            "order_deficits_violations": sum(not o["holds"] for o in orders),
            "ratio_count": len(usable),
            "ratio_excluded": len(self.ratios) - len(usable),
            "max_log10_ratio": max((r.log10_ratio for r in usable), default=None),
            "min_log10_ratio": min((r.log10_ratio for r in usable), default=None),
            "ratio_unconverged": sum(r.caveat for r in usable),
            "projected_counts": self.projected_counts() if self.config.projected else None,
        }

    # serialisation -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.config.to_lines():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for o in self.outcomes:
            s = o.sample
            if o.record is None:
                w.writerow([s.sample_id, self.config.n, _f(self.config.p), _f(s.eps), s.kind]
                           + ["nan"] * 5 + [ERROR])
                continue
            r = o.record
            w.writerow([r.sample_id, r.exps.n, _f(r.exps.p), _f(r.eps), r.kind, _f(r.lhs),
                        _f(r.deficit_term), _f(r.distance_term), _f(r.slack),
                        _f(r.slack_budget), r.verdict])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "summary": self.summary(),
            "records": [],
        }
        for o in self.outcomes:
            s = o.sample
            entry = {"sampleId": s.sample_id, "eps": s.eps, "kind": s.kind,
                     "base": asdict(s.base), "direction": asdict(s.direction)}
            if o.record is not None:
                r = o.record
                entry.update(lhs=r.lhs, deficitTerm=r.deficit_term,
                             distanceTerm=r.distance_term, slack=r.slack,
                             slackBudget=r.slack_budget, verdict=r.verdict,
                             deficit=r.deficit)
            else:
                entry.update(verdict=ERROR, error=o.error)
            if o.order is not None:
                entry["orderDeficits"] = o.order
            if o.ratio is not None:
                entry["ratio"] = asdict(o.ratio)
            if o.projected is not None:
                q = o.projected
                entry["projected"] = dict(lhs=q.lhs, deficitTerm=q.deficit_term,
                                          distanceTerm=q.distance_term, slack=q.slack,
                                          slackBudget=q.slack_budget, verdict=q.verdict)
            doc["records"].append(entry)
        return json.dumps(doc, indent=1, sort_keys=True, default=_json_default,
                          allow_nan=True) + "\n"


def _f(x: float) -> str:
    return format(float(x), ".17g")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def run_corpus(cfg: RunConfig) -> CorpusReport:
    """Certify every corpus sample; per-sample failures are recorded, not raised."""
    cfg.validate()
    samples = generate_corpus(cfg)
    if cfg.workers > 1 and len(samples) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_process_indexed, [(cfg, s) for s in samples]))
    else:
        outcomes = [process_sample(cfg, s) for s in samples]
    outcomes.sort(key=lambda o: o.sample.sample_id)
    return CorpusReport(cfg, outcomes)


__all__ = [
    "CertificateRecord", "RatioRecord", "CorpusReport", "CorpusSample",
    "reduction_constants", "reduction_certificate", "projected_certificate", "order_deficits_check",
    "corollary_ratio", "generate_corpus", "run_corpus", "process_sample",
    "pair_norms", "normalized_base", "recertify", "bubble_lpstar_norm", "verdict_for",
    "CERTIFIED", "VIOLATED", "INCONCLUSIVE", "STATED", "SOUND", "CSV_COLUMNS",
]
