"""Decoy-state finite-key analysis and the single-bit signing comparison.

Given per-intensity detection counts from a four-intensity decoy
protocol (signal mu and decoy nu keyed in Z, omega keyed in X, plus
vacuum), the pipeline bounds the vacuum and single-photon event counts,
bounds the phase error rate by random sampling without replacement, and
evaluates the final key length

    l = s0 + s1 * (1 - h(phi1)) - lambda_EC - log2(2/eps_cor)
        - 6 * log2(22/eps_sec)

with the error-correction leakage lambda_EC taken as an input.

Statistical fluctuations use a Chernoff-type variant.  Observed -> expected:

    upper = x + beta + sqrt(2 beta x + beta^2)
    lower = x - beta/2 - sqrt(2 beta x + beta^2 / 4)

and expected -> observed:

    upper = x* + beta/2 + sqrt(2 beta x* + beta^2 / 4)
    lower = x* - sqrt(2 beta x*)

where beta = ln(22 / eps).  Note on calibration: the published
reference values these routines reproduce are only consistent with the
fluctuation epsilon set to 1e-15 (the correctness epsilon) while the
sampling term gamma and the key-length constants keep eps_sec = 1e-10;
``SecurityParams.eps_beta`` therefore defaults to 1e-15 and is
configurable.

The single-bit comparison models signing one bit with 2L raw key bits,
where the abort/repudiation/forgery failure probabilities are all
``2 exp(-delta^2 L)`` with ``delta = (p_e - E)/3``, and p_e solves
``h(p_e) = c0 + c1 (1 - h(phi1))`` on the lower entropy branch.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field

from .errors import NumericalDomainError
from .specials import binary_entropy

OBSERVATION_FIELDS = ("n_mu_z", "n_nu_z", "n_omega_z", "n_0_z",
                      "n_mu_x", "n_nu_x", "n_omega_x", "n_0_x", "m_omega_z")


@dataclass(frozen=True)
class DecoyObservations:
    """Raw event counts for one link plus the accumulation time (s).

    ``m_omega_z`` carries its tabulated name; it is the error count of
    the omega-intensity pulses in the X (phase) basis and feeds the
    phase-error bound.
    """

    n_mu_z: int
    n_nu_z: int
    n_omega_z: int
    n_0_z: int
    n_mu_x: int
    n_nu_x: int
    n_omega_x: int
    n_0_x: int
    m_omega_z: int
    accumulation_s: float

    def __post_init__(self):
        for name in OBSERVATION_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.accumulation_s <= 0:
            raise ValueError("accumulation time must be positive")


@dataclass(frozen=True)
class DecoyIntensities:
    mu: float = 0.35
    nu: float = 0.15
    omega: float = 0.30
    p_mu: float = 0.78
    p_nu: float = 0.10
    p_omega: float = 0.08
    p_0: float = 0.04

    def __post_init__(self):
        if not self.mu > self.nu > 0.0:
            raise ValueError("need mu > nu > 0")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        total = self.p_mu + self.p_nu + self.p_omega + self.p_0
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"intensity probabilities sum to {total}, not 1")
        if min(self.p_mu, self.p_nu, self.p_omega, self.p_0) <= 0.0:
            raise ValueError("intensity probabilities must be positive")


@dataclass(frozen=True)
class SecurityParams:
    eps_sec: float = 1e-10
    eps_cor: float = 1e-15
    eps_beta: float = 1e-15  # fluctuation epsilon; see module docstring

    def __post_init__(self):
        for name in ("eps_sec", "eps_cor", "eps_beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1)")

    @property
    def beta(self) -> float:
        return math.log(22.0 / self.eps_beta)


@dataclass
class FiniteKeyResult:
    s0: float          # vacuum-event lower bound (observed)
    s1: float          # single-photon lower bound (observed, Z basis)
    phi1: float        # phase-error upper bound
    ell: float         # final key length, clamped at 0
    rate_bps: float    # ell / accumulation time
    lambda_ec: float
    components: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# fluctuation bounds
# --------------------------------------------------------------------------


def chernoff_expected_bounds(x: float, beta: float) -> tuple[float, float]:
    """(upper, lower) bounds on the expected value behind an observation."""
    if x < 0 or beta <= 0:
        raise ValueError("need x >= 0 and beta > 0")
    upper = x + beta + math.sqrt(2.0 * beta * x + beta * beta)
    lower = x - beta / 2.0 - math.sqrt(2.0 * beta * x + beta * beta / 4.0)
    return upper, max(lower, 0.0)


def observed_bounds_from_expected(x_star: float, beta: float) -> tuple[float, float]:
    """(upper, lower) bounds on an observation given its expected value."""
    if x_star < 0 or beta <= 0:
        raise ValueError("need x* >= 0 and beta > 0")
    upper = x_star + beta / 2.0 + math.sqrt(2.0 * beta * x_star + beta * beta / 4.0)
    lower = x_star - math.sqrt(2.0 * beta * x_star)
    return upper, max(lower, 0.0)


def _expected_lower(x: float, beta: float) -> float:
    return chernoff_expected_bounds(x, beta)[1]


def _expected_upper(x: float, beta: float) -> float:
    return chernoff_expected_bounds(x, beta)[0]


def _observed_lower(x_star: float, beta: float) -> float:
    return observed_bounds_from_expected(x_star, beta)[1]


# --------------------------------------------------------------------------
# decoy bounds
# --------------------------------------------------------------------------


def s0_bound(obs: DecoyObservations, intens: DecoyIntensities,
             beta: float) -> float:
    """Observed lower bound on vacuum events in the Z-basis key."""
    tau = (math.exp(-intens.mu) * intens.p_mu
           + math.exp(-intens.nu) * intens.p_nu)
    expected = tau * _expected_lower(obs.n_0_z, beta) / intens.p_0
    return _observed_lower(expected, beta)


def _s1_expected(obs: DecoyObservations, intens: DecoyIntensities,
                 beta: float, basis: str) -> float:
    mu, nu = intens.mu, intens.nu
    if basis == "z":
        prefactor = (mu * mu * math.exp(-mu) * intens.p_mu
                     + mu * nu * math.exp(-nu) * intens.p_nu)
        n_nu, n_mu, n_0 = obs.n_nu_z, obs.n_mu_z, obs.n_0_z
    elif basis == "x":
        prefactor = mu * intens.omega * math.exp(-intens.omega) * intens.p_omega
        n_nu, n_mu, n_0 = obs.n_nu_x, obs.n_mu_x, obs.n_0_x
    else:
        raise ValueError("basis must be 'z' or 'x'")
    denom = mu * nu - nu * nu
    if denom <= 0:
        raise ValueError("decoy bound needs mu > nu")
    bracket = (math.exp(nu) * _expected_lower(n_nu, beta) / intens.p_nu
               - (nu * nu) / (mu * mu) * math.exp(mu)
               * _expected_upper(n_mu, beta) / intens.p_mu
               - (mu * mu - nu * nu) / (mu * mu)
               * _expected_upper(n_0, beta) / intens.p_0)
    return prefactor / denom * bracket


def s1_bound(obs: DecoyObservations, intens: DecoyIntensities, beta: float,
             basis: str = "z") -> float:
    """Observed lower bound on single-photon events in the given basis."""
    return _observed_lower(max(_s1_expected(obs, intens, beta, basis), 0.0), beta)


def gamma_u(n: float, k: float, lam: float, eps: float) -> float:
    """Random-sampling-without-replacement correction term.

    Valid for lam in (0, 0.5]; raises outside that domain.
    """
    if not 0.0 < lam <= 0.5:
        raise NumericalDomainError(f"gamma needs 0 < lambda <= 0.5, got {lam}")
    if n <= 0 or k <= 0 or not 0.0 < eps < 1.0:
        raise ValueError("need n, k > 0 and eps in (0, 1)")
    a = max(n, k)
    g = (n + k) / (n * k) * math.log((n + k) / (2.0 * math.pi * n * k
                                                * lam * (1.0 - lam) * eps * eps))
    ag = a * g / (n + k)
    num = (1.0 - 2.0 * lam) * ag + math.sqrt(ag * ag + 4.0 * lam * (1.0 - lam) * g)
    den = 2.0 + 2.0 * a * ag / (n + k)
    return num / den


def phase_error(obs: DecoyObservations, intens: DecoyIntensities,
                sec: SecurityParams) -> tuple[float, dict]:
    """Upper bound on the Z-basis single-photon phase error rate.

    Returns (phi1, components); components carries the intermediate
    bounds for reporting.
    """
    beta = sec.beta
    s1_zz = s1_bound(obs, intens, beta, "z")
    s1_xx = s1_bound(obs, intens, beta, "x")
    if s1_xx <= 0:
        raise NumericalDomainError("no single-photon events survive in the X basis")
    t0_expected = (math.exp(-intens.omega) * intens.p_omega
                   / (2.0 * intens.p_0) * _expected_lower(obs.n_0_x, beta))
    t0_xx = _observed_lower(t0_expected, beta)
    t1_xx = obs.m_omega_z - t0_xx
    if t1_xx < 0:
        t1_xx = 0.0
    lam = t1_xx / s1_xx
    gamma = gamma_u(s1_zz, s1_xx, lam, sec.eps_sec / 22.0)
    phi1 = lam + gamma
    comps = {"s1_zz": s1_zz, "s1_xx": s1_xx, "t0_xx": t0_xx, "t1_xx": t1_xx,
             "lambda": lam, "gamma": gamma}
    return phi1, comps


def key_length(s0: float, s1: float, phi1: float, lambda_ec: float,
               sec: SecurityParams, accumulation_s: float) -> tuple[float, float]:
    """(l, rate) with l clamped at zero."""
    ell = (s0 + s1 * (1.0 - binary_entropy(phi1)) - lambda_ec
           - math.log2(2.0 / sec.eps_cor) - 6.0 * math.log2(22.0 / sec.eps_sec))
    ell = max(ell, 0.0)
    return ell, ell / accumulation_s


def analyze_link(obs: DecoyObservations, intens: DecoyIntensities,
                 sec: SecurityParams, lambda_ec: float) -> FiniteKeyResult:
    """Full pipeline for one link: counts in, key length out."""
    beta = sec.beta
    s0 = s0_bound(obs, intens, beta)
    s1 = s1_bound(obs, intens, beta, "z")
    phi1, comps = phase_error(obs, intens, sec)
    ell, rate = key_length(s0, s1, phi1, lambda_ec, sec, obs.accumulation_s)
    return FiniteKeyResult(s0=s0, s1=s1, phi1=phi1, ell=ell, rate_bps=rate,
                           lambda_ec=lambda_ec, components=comps)


# --------------------------------------------------------------------------
# single-bit-per-signature comparison
# --------------------------------------------------------------------------


def solve_entropy_inverse(target: float, tol: float = 1e-12) -> float:
    """p in (0, 0.5] with h(p) = target, by bisection (h is monotone there)."""
    if not 0.0 < target < 1.0:
        raise NumericalDomainError(f"entropy target must be in (0, 1), got {target}")
    lo, hi = 1e-9, 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if binary_entropy(mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


@dataclass
class SingleBitComparison:
    p_e: float
    s_a: float
    s_v: float
    e_bar: float
    two_l: float                # raw key bits to sign one bit at target_eps
    target_eps: float
    raw_rate_bps: float         # usable raw key per second (worse link)
    doc_bits: int
    per_link_pe: dict

    @property
    def keys_per_document(self) -> float:
        return self.two_l * self.doc_bits

    @property
    def signature_tps(self) -> float:
        return self.raw_rate_bps / self.keys_per_document

    @property
    def document_eps(self) -> float:
        """Per-bit failure composed over the whole document (log domain)."""
        return -math.expm1(self.doc_bits * math.log1p(-self.target_eps))


def single_bit_qds_analysis(links: dict[str, tuple[DecoyObservations, FiniteKeyResult]],
                            e_bar: float, target_eps: float,
                            doc_bits: int = 10 ** 6) -> SingleBitComparison:
    """Key cost of signing bit by bit, for comparison with the hash scheme.

    ``links`` maps a label to (observations, finite-key result).  The
    bit-error ceiling E is an input (its derivation from the tabulated
    counts is underdetermined); p_e takes the minimum over links and the
    raw rate the minimum of n_mu_z / accumulation time.
    """
    if not links:
        raise ValueError("need at least one link")
    per_link = {}
    for label, (obs, res) in links.items():
        c0 = res.s0 / obs.n_mu_z
        c1 = res.s1 / obs.n_mu_z
        target = c0 + c1 * (1.0 - binary_entropy(res.phi1))
        if not 0.0 < target < 1.0:
            raise NumericalDomainError(
                f"entropy equation right side {target} out of (0, 1) on {label}")
        per_link[label] = solve_entropy_inverse(target)
    p_e = min(per_link.values())
    if p_e <= e_bar:
        raise NumericalDomainError("p_e must exceed the bit-error ceiling")
    delta = (p_e - e_bar) / 3.0
    s_a = e_bar + delta
    s_v = e_bar + 2.0 * delta
    # All three failure modes share 2 exp(-delta^2 L) = target_eps.
    ell = math.log(2.0 / target_eps) / (delta * delta)
    raw = min(obs.n_mu_z / obs.accumulation_s for obs, _ in links.values())
    return SingleBitComparison(p_e=p_e, s_a=s_a, s_v=s_v, e_bar=e_bar,
                               two_l=2.0 * ell, target_eps=target_eps,
                               raw_rate_bps=raw, doc_bits=doc_bits,
                               per_link_pe=per_link)


# --------------------------------------------------------------------------
# input files and report rendering
# --------------------------------------------------------------------------


@dataclass
class AnalysisInput:
    links: dict[str, DecoyObservations]
    lambda_ec: dict[str, float]
    intensities: DecoyIntensities
    security: SecurityParams
    e_bar: float = 0.0324
    target_eps: float = 1e-38
    doc_bits: int = 10 ** 6
    hash_bits: int = 128


def _obs_from_mapping(values: dict, label: str) -> tuple[DecoyObservations, float]:
    try:
        obs = DecoyObservations(
            **{name: int(float(values[name])) for name in OBSERVATION_FIELDS},
            accumulation_s=float(values["Lambda"]),
        )
    except KeyError as exc:
        raise ValueError(f"link {label!r} is missing field {exc.args[0]}") from None
    return obs, float(values["lambda_EC"])


def load_analysis_input(path) -> AnalysisInput:
    """Read link observations from an INI-style or CSV file.

    INI: one section per link with the tabulated count names plus
    ``Lambda`` and ``lambda_EC``; optional ``[intensities]``,
    ``[security]`` and ``[comparison]`` sections.  CSV: one row per
    link, columns ``link``, the count names, ``Lambda``, ``lambda_EC``.
    """
    text = open(path).read()
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if str(path).endswith(".csv") or first.startswith("link,"):
        return _load_csv(text)
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep Lambda / lambda_EC casing
    parser.read_string(text)
    links = {}
    lambda_ec = {}
    intens_kwargs: dict[str, float] = {}
    sec_kwargs: dict[str, float] = {}
    extra: dict[str, float] = {}
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "intensities":
            intens_kwargs = {k: float(v) for k, v in items.items()}
        elif section == "security":
            sec_kwargs = {k: float(v) for k, v in items.items()}
        elif section == "comparison":
            extra = {k: float(v) for k, v in items.items()}
        else:
            links[section], lambda_ec[section] = _obs_from_mapping(items, section)
    if not links:
        raise ValueError("no link sections found")
    return AnalysisInput(
        links=links, lambda_ec=lambda_ec,
        intensities=DecoyIntensities(**intens_kwargs),
        security=SecurityParams(**sec_kwargs),
        e_bar=extra.get("e_bar", 0.0324),
        target_eps=extra.get("target_eps", 1e-38),
        doc_bits=int(extra.get("doc_bits", 10 ** 6)),
        hash_bits=int(extra.get("hash_bits", 128)),
    )


def _load_csv(text: str) -> AnalysisInput:
    links = {}
    lambda_ec = {}
    for row in csv.DictReader(text.splitlines()):
        label = row.pop("link")
        links[label], lambda_ec[label] = _obs_from_mapping(row, label)
    if not links:
        raise ValueError("no link rows found")
    return AnalysisInput(links=links, lambda_ec=lambda_ec,
                         intensities=DecoyIntensities(),
                         security=SecurityParams())


@dataclass
class AnalysisReport:
    results: dict[str, FiniteKeyResult]
    comparison: SingleBitComparison
    hash_bits: int

    @property
    def final_rate_bps(self) -> float:
        return min(r.rate_bps for r in self.results.values())

    @property
    def hash_scheme_tps(self) -> float:
        return self.final_rate_bps / (3 * self.hash_bits)

    @property
    def improvement(self) -> float:
        return self.hash_scheme_tps / self.comparison.signature_tps


def analyze(inputs: AnalysisInput) -> AnalysisReport:
    results = {
        label: analyze_link(obs, inputs.intensities, inputs.security,
                            inputs.lambda_ec[label])
        for label, obs in inputs.links.items()
    }
    comparison = single_bit_qds_analysis(
        {label: (inputs.links[label], res) for label, res in results.items()},
        inputs.e_bar, inputs.target_eps, inputs.doc_bits)
    return AnalysisReport(results=results, comparison=comparison,
                          hash_bits=inputs.hash_bits)


def render_report(report: AnalysisReport, inputs: AnalysisInput) -> str:
    lines = ["finite-key analysis", "=" * 55]
    for label, res in report.results.items():
        lines += [
            f"[{label}]",
            f"  R_QKD (bps)        {res.rate_bps:12.1f}",
            f"  s0 lower bound     {res.s0:12.1f}",
            f"  s1 lower bound     {res.s1:12.1f}",
            f"  lambda_EC          {res.lambda_ec:12.1f}",
            f"  key length l       {res.ell:12.1f}",
            f"  phase error phi1   {100.0 * res.phi1:11.2f}%",
            f"  eps_sec            {inputs.security.eps_sec:12g}",
        ]
    cmp_ = report.comparison
    lines += [
        "",
        f"single-bit signing comparison (document of {cmp_.doc_bits} bits)",
        "-" * 55,
        f"  E ceiling          {100.0 * cmp_.e_bar:11.2f}%",
        f"  p_e                {100.0 * cmp_.p_e:11.2f}%",
        f"  s_a                {100.0 * cmp_.s_a:11.2f}%",
        f"  s_v                {100.0 * cmp_.s_v:11.2f}%",
        f"  2L per bit         {cmp_.two_l:12.3e}  (eps = {cmp_.target_eps:g})",
        f"  keys per document  {cmp_.keys_per_document:12.3e} bits",
        f"  raw rate           {cmp_.raw_rate_bps:12.1f} bps",
        f"  signature rate     {cmp_.signature_tps:12.3e} tps",
        f"  document eps       {cmp_.document_eps:12.3e}",
        "",
        "hash-based signing on the same links",
        "-" * 55,
        f"  final key rate     {report.final_rate_bps:12.1f} bps",
        f"  key per signature  {3 * report.hash_bits:12d} bits",
        f"  signature rate     {report.hash_scheme_tps:12.4f} tps",
        f"  improvement        {report.improvement:12.3e}x",
    ]
    return "\n".join(lines) + "\n"
