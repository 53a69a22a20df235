//! Nonlinearities `F(x, s)` with their limits `F^∞` at spatial infinity,
//! analytic partial derivatives, and a sampling checker for the structural
//! assumptions (growth, superquadraticity, domination by `F^∞`, ...).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial decay shape shared by the profiles `p(r)` and `q(r) − q∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `e^{-r}`
    #[default]
    Exponential,
    /// `(1 + r)^{-t}`
    PowerLaw { t: f64 },
}

impl Profile {
    fn decay(&self, r: f64) -> f64 {
        match *self {
            Profile::Exponential => (-r).exp(),
            Profile::PowerLaw { t } => (1.0 + r).powf(-t),
        }
    }
}

/// Parametrized nonlinearity. Serialized under `"nonlinearity"` in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `p(r)|s|² + q(r) Σⱼ Πᵢ |sᵢ|^{lᵢⱼ+1}` with `p = p₀·d(r)`, `q = q∞ + q₁·d(r)`.
    PaperExample {
        m: usize,
        p0: f64,
        q_inf: f64,
        q1: f64,
        #[serde(default)]
        profile: Profile,
        /// One exponent vector `(l₁ⱼ, …, l_mⱼ)` per coupling monomial.
        terms: Vec<Vec<f64>>,
    },
    /// `|s₁|^{2p}/(2p) + |s₂|^{2p}/(2p) + (β/p)|s₁|^p|s₂|^p`.
    CoupledPower { p: f64, beta: f64 },
    /// `coefficient · |s|^degree`, x-independent.
    PurePower {
        m: usize,
        coefficient: f64,
        degree: f64,
    },
}

/// Mass-criticality class of the growth exponent `ℓ` relative to `4/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl NonlinearitySpec {
    /// Paper-example family with one coupling term, m = 2.
    pub fn example(p0: f64, q_inf: f64, q1: f64, l1: f64, l2: f64) -> Self {
        NonlinearitySpec::PaperExample {
            m: 2,
            p0,
            q_inf,
            q1,
            profile: Profile::Exponential,
            terms: vec![vec![l1, l2]],
        }
    }

    /// The default family used throughout the harness:
    /// `p₀ = q∞ = q₁ = 1`, one coupling `(1, 1)`.
    pub fn default_example() -> Self {
        Self::example(1.0, 1.0, 1.0, 1.0, 1.0)
    }

    pub fn pure_power(m: usize, coefficient: f64, degree: f64) -> Self {
        NonlinearitySpec::PurePower {
            m,
            coefficient,
            degree,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            NonlinearitySpec::PaperExample { m, .. } | NonlinearitySpec::PurePower { m, .. } => *m,
            NonlinearitySpec::CoupledPower { .. } => 2,
        }
    }

    /// Largest growth exponent `ℓ` (degree minus two).
    pub fn growth_exponent(&self) -> f64 {
        match self {
            NonlinearitySpec::PaperExample { terms, .. } => terms
                .iter()
                .map(|t| t.iter().sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            NonlinearitySpec::CoupledPower { p, .. } => 2.0 * p - 2.0,
            NonlinearitySpec::PurePower { degree, .. } => degree - 2.0,
        }
    }

    /// Smallest growth exponent among the terms of `F^∞`.
    pub fn min_growth_exponent(&self) -> f64 {
        match self {
            NonlinearitySpec::PaperExample { terms, .. } => terms
                .iter()
                .map(|t| t.iter().sum::<f64>())
                .fold(f64::INFINITY, f64::min),
            _ => self.growth_exponent(),
        }
    }

    pub fn regime(&self, dim: usize) -> Regime {
        let critical = 4.0 / dim as f64;
        let ell = self.growth_exponent();
        if (ell - critical).abs() <= 1e-12 * critical {
            Regime::Critical
        } else if ell < critical {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }

    /// True when `F ≢ F^∞` somewhere (the strict domination region is nonempty).
    pub fn has_strict_region(&self) -> bool {
        match self {
            NonlinearitySpec::PaperExample { p0, q1, .. } => *p0 > 0.0 || *q1 > 0.0,
            _ => false,
        }
    }

    /// Checks parameter ranges. The paper-example family must be mass-subcritical
    /// in dimension `dim`; the power families may be in any regime.
    pub fn validate(&self, dim: usize) -> Result<Regime> {
        let bad = |msg: String| Err(Error::InvalidNonlinearity(msg));
        match self {
            NonlinearitySpec::PaperExample {
                m,
                p0,
                q_inf,
                q1,
                profile,
                terms,
            } => {
                if *m == 0 {
                    return bad("component count must be positive".into());
                }
                if !(*p0 >= 0.0 && *q_inf >= 0.0 && *q1 >= 0.0) {
                    return bad("profile amplitudes p0, q_inf, q1 must be nonnegative".into());
                }
                if let Profile::PowerLaw { t } = profile {
                    if !(*t > 0.0) {
                        return bad(format!("power-law decay exponent must be positive, got {t}"));
                    }
                }
                if terms.is_empty() {
                    return bad("at least one coupling term is required".into());
                }
                let critical = 4.0 / dim as f64;
                for (j, term) in terms.iter().enumerate() {
                    if term.len() != *m {
                        return bad(format!("term {j} has {} exponents, expected {m}", term.len()));
                    }
                    if term.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                        return bad(format!("term {j} exponents must be positive"));
                    }
                    let degree: f64 = term.iter().sum();
                    if degree >= critical {
                        return bad(format!(
                            "term {j} is not mass-subcritical: Σ l = {degree} >= 4/N = {critical}"
                        ));
                    }
                }
            }
            NonlinearitySpec::CoupledPower { p, beta } => {
                if !(*p >= 1.0 && p.is_finite() && beta.is_finite()) {
                    return bad(format!("coupled-power needs p >= 1 and finite beta, got p = {p}"));
                }
            }
            NonlinearitySpec::PurePower {
                m,
                coefficient,
                degree,
            } => {
                if *m == 0 {
                    return bad("component count must be positive".into());
                }
                if !(*degree > 2.0 && degree.is_finite() && coefficient.is_finite()) {
                    return bad(format!("pure-power degree must exceed 2, got {degree}"));
                }
            }
        }
        Ok(self.regime(dim))
    }

    /// `F(x, s)`.
    pub fn eval_f(&self, x: &[f64], s: &[f64]) -> f64 {
        match self {
            NonlinearitySpec::PaperExample {
                p0,
                q_inf,
                q1,
                profile,
                terms,
                ..
            } => {
                let d = profile.decay(norm(x));
                let p = p0 * d;
                let q = q_inf + q1 * d;
                p * norm_sq(s) + q * terms.iter().map(|t| monomial(t, s)).sum::<f64>()
            }
            _ => self.eval_finf(x, s),
        }
    }

    /// `∂ᵢF(x, s)` for every component, written into `out`.
    pub fn eval_df(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        match self {
            NonlinearitySpec::PaperExample {
                p0,
                q_inf,
                q1,
                profile,
                terms,
                ..
            } => {
                let d = profile.decay(norm(x));
                let p = p0 * d;
                let q = q_inf + q1 * d;
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = 2.0 * p * s[i] + q * terms.iter().map(|t| monomial_partial(t, s, i)).sum::<f64>();
                }
            }
            _ => self.eval_dfinf(x, s, out),
        }
    }

    /// `F^∞(x, s)`; x-independent for every built-in family.
    pub fn eval_finf(&self, _x: &[f64], s: &[f64]) -> f64 {
        match self {
            NonlinearitySpec::PaperExample { q_inf, terms, .. } => {
                q_inf * terms.iter().map(|t| monomial(t, s)).sum::<f64>()
            }
            NonlinearitySpec::CoupledPower { p, beta } => {
                let a = s[0].abs().powf(*p);
                let b = s[1].abs().powf(*p);
                (a * a + b * b) / (2.0 * p) + beta / p * a * b
            }
            NonlinearitySpec::PurePower {
                coefficient, degree, ..
            } => coefficient * norm(s).powf(*degree),
        }
    }

    pub fn eval_dfinf(&self, _x: &[f64], s: &[f64], out: &mut [f64]) {
        match self {
            NonlinearitySpec::PaperExample { q_inf, terms, .. } => {
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = q_inf * terms.iter().map(|t| monomial_partial(t, s, i)).sum::<f64>();
                }
            }
            NonlinearitySpec::CoupledPower { p, beta } => {
                let a = s[0].abs().powf(*p);
                let b = s[1].abs().powf(*p);
                let da = signed_pow(s[0], p - 1.0);
                let db = signed_pow(s[1], p - 1.0);
                out[0] = a * da + beta * da * b;
                out[1] = b * db + beta * db * a;
            }
            NonlinearitySpec::PurePower {
                coefficient, degree, ..
            } => {
                let r = norm(s);
                if r == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let scale = coefficient * degree * r.powf(degree - 2.0);
                for (slot, si) in out.iter_mut().zip(s) {
                    *slot = scale * si;
                }
            }
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// `sgn(s)|s|^e` (zero at the origin for `e > 0`).
fn signed_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(e)
    }
}

/// `Πᵢ |sᵢ|^{lᵢ+1}`.
fn monomial(exponents: &[f64], s: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(s)
        .map(|(l, si)| si.abs().powf(l + 1.0))
        .product()
}

/// `∂ᵢ Πₖ |sₖ|^{lₖ+1} = (lᵢ+1) sgn(sᵢ)|sᵢ|^{lᵢ} Π_{k≠i} |sₖ|^{lₖ+1}`.
fn monomial_partial(exponents: &[f64], s: &[f64], i: usize) -> f64 {
    exponents
        .iter()
        .zip(s)
        .enumerate()
        .map(|(k, (l, sk))| {
            if k == i {
                (l + 1.0) * signed_pow(*sk, *l)
            } else {
                sk.abs().powf(l + 1.0)
            }
        })
        .product()
}

/// Candidate constants for the structural assumptions. The assumptions only
/// assert existence; these are the values a run commits to and checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConstants {
    /// Growth bound on `F`.
    pub a: f64,
    /// Growth bound on `∂F`.
    pub b: f64,
    /// Lower bound `F > Δ|x|^{-t} Π|sᵢ|^{αᵢ}` on `|x| ≥ R`, `|s| < S`.
    pub delta: f64,
    pub s_bound: f64,
    pub r_bound: f64,
    pub t: f64,
    pub alphas: Vec<f64>,
    /// Growth bounds on `F^∞` and its derivative.
    pub a_prime: f64,
    pub b_prime: f64,
    pub beta: f64,
    pub ell: f64,
    /// Scaling exponent of `F^∞`.
    pub sigma: f64,
    /// Exponent in the decay quotient `(F − F^∞)/(|s|² + |s|^{α+2})`.
    pub alpha: f64,
}

impl AssumptionConstants {
    /// Constants that hold for `spec` by the elementary bounds `|sᵢ| ≤ |s|`.
    pub fn suggested(spec: &NonlinearitySpec) -> Self {
        let ell = spec.growth_exponent();
        let ell_min = spec.min_growth_exponent();
        match spec {
            NonlinearitySpec::PaperExample {
                p0, q_inf, q1, terms, ..
            } => {
                let k = terms.len() as f64;
                let max_power = terms
                    .iter()
                    .flat_map(|t| t.iter().map(|l| l + 1.0))
                    .fold(0.0, f64::max);
                AssumptionConstants {
                    a: p0 + k * (q_inf + q1) + 1.0,
                    b: 2.0 * p0 + k * (q_inf + q1) * max_power + 1.0,
                    delta: 0.5 * q_inf,
                    s_bound: 1.0,
                    r_bound: 1.0,
                    t: 0.0,
                    alphas: terms[0].iter().map(|l| l + 1.0).collect(),
                    a_prime: k * q_inf + 1.0,
                    b_prime: k * q_inf * max_power + 1.0,
                    beta: 0.5 * ell_min,
                    ell,
                    sigma: ell_min,
                    alpha: ell,
                }
            }
            NonlinearitySpec::CoupledPower { p, beta } => {
                let a = (1.0 + beta.abs()) / p + 1.0;
                let b = 2.0 * (1.0 + beta.abs()) + 1.0;
                AssumptionConstants {
                    a,
                    b,
                    delta: ((1.0 + beta) / (2.0 * p)).max(1e-3),
                    s_bound: 1.0,
                    r_bound: 1.0,
                    t: 0.0,
                    alphas: vec![*p, *p],
                    a_prime: a,
                    b_prime: b,
                    beta: 0.5 * ell,
                    ell,
                    sigma: ell,
                    alpha: ell,
                }
            }
            NonlinearitySpec::PurePower {
                m,
                coefficient,
                degree,
            } => {
                let a = coefficient.abs() + 1.0;
                let b = coefficient.abs() * degree + 1.0;
                AssumptionConstants {
                    a,
                    b,
                    delta: 0.5 * coefficient,
                    s_bound: 1.0,
                    r_bound: 1.0,
                    t: 0.0,
                    alphas: vec![degree / *m as f64; *m],
                    a_prime: a,
                    b_prime: b,
                    beta: 0.5 * ell,
                    ell,
                    sigma: ell,
                    alpha: ell,
                }
            }
        }
    }

    fn alpha_sum(&self) -> f64 {
        self.alphas.iter().sum()
    }

    /// Range restrictions on the constants themselves.
    pub fn validate(&self, dim: usize, m: usize) -> Result<()> {
        let critical = 4.0 / dim as f64;
        let bad = |msg: String| Err(Error::Config(format!("assumption constants: {msg}")));
        if self.alphas.len() != m {
            return bad(format!("need {m} exponents alpha_i, got {}", self.alphas.len()));
        }
        if !(self.a > 0.0 && self.b > 0.0 && self.a_prime > 0.0 && self.b_prime > 0.0) {
            return bad("A, B, A', B' must be positive".into());
        }
        if !(self.delta > 0.0 && self.s_bound > 0.0 && self.r_bound > 0.0) {
            return bad("Delta, S, R must be positive".into());
        }
        if self.alphas.iter().any(|&a| !(a > 0.0)) {
            return bad("alpha_i must be positive".into());
        }
        if !(0.0 < self.ell && self.ell < critical) {
            return bad(format!("need 0 < ell < 4/N, got {}", self.ell));
        }
        if !(0.0 < self.beta && self.beta < self.ell) {
            return bad(format!("need 0 < beta < ell, got {}", self.beta));
        }
        if !(0.0 <= self.t && self.t < 2.0) {
            return bad(format!("need t in [0, 2), got {}", self.t));
        }
        if !(0.0 <= self.sigma && self.sigma < critical) {
            return bad(format!("need sigma in [0, 4/N), got {}", self.sigma));
        }
        if !(0.0 < self.alpha && self.alpha < critical) {
            return bad(format!("need 0 < alpha < 4/N, got {}", self.alpha));
        }
        Ok(())
    }
}

/// Sample counts and ranges for [`check_assumptions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    pub samples: usize,
    pub r_max: f64,
    pub s_max: f64,
    pub thetas: Vec<f64>,
    pub seed: u64,
    /// Largest acceptable decay quotient at `|x| = r_max`.
    pub decay_tolerance: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            samples: 100_000,
            r_max: 32.0,
            s_max: 8.0,
            thetas: vec![1.0, 2.0, 4.0, 8.0],
            seed: 0,
            decay_tolerance: 1e-6,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("sampling plan needs at least one sample".into()));
        }
        if !(self.r_max > 0.0 && self.s_max > 0.0 && self.r_max.is_finite() && self.s_max.is_finite()) {
            return Err(Error::Config("sampling ranges must be positive and finite".into()));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
            return Err(Error::Config("scaling factors theta must be >= 1".into()));
        }
        if !(self.decay_tolerance > 0.0) {
            return Err(Error::Config("decay tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Sample point where a margin attains its minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    /// Worst slack over the samples; negative means violated.
    pub margin: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub dim: usize,
    pub samples: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running minimum of a slack with its witness.
struct MinTracker {
    name: &'static str,
    margin: f64,
    witness: Option<Witness>,
}

impl MinTracker {
    fn new(name: &'static str) -> Self {
        MinTracker {
            name,
            margin: f64::INFINITY,
            witness: None,
        }
    }

    /// Records `slack`, snapping values within rounding of `scale` to zero.
    fn observe(&mut self, slack: f64, scale: f64, x: &[f64], s: &[f64], theta: Option<f64>) {
        let slack = if slack.abs() <= 1e-12 * (1.0 + scale.abs()) { 0.0 } else { slack };
        if slack < self.margin || self.witness.is_none() {
            self.margin = slack;
            self.witness = Some(Witness {
                x: x.to_vec(),
                s: s.to_vec(),
                theta,
            });
        }
    }

    fn finish(self, strict: bool) -> AssumptionCheck {
        let holds = if strict { self.margin > 0.0 } else { self.margin >= 0.0 };
        AssumptionCheck {
            name: self.name.to_string(),
            margin: self.margin,
            holds,
            witness: if holds { None } else { self.witness },
            note: None,
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, r_lo: f64, r_hi: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&dir);
    let r = rng.gen_range(r_lo..=r_hi);
    if n == 0.0 {
        dir[0] = r;
        return dir;
    }
    dir.iter_mut().for_each(|v| *v *= r / n);
    dir
}

fn random_in_ball(rng: &mut ChaCha8Rng, m: usize, radius: f64) -> Vec<f64> {
    loop {
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm(&s) < 1.0 {
            return s.into_iter().map(|v| v * radius).collect();
        }
    }
}

/// Samples every assumption and reports its worst margin with a witness.
pub fn check_assumptions(
    spec: &NonlinearitySpec,
    constants: &AssumptionConstants,
    plan: &SamplingPlan,
    dim: usize,
) -> Result<AssumptionReport> {
    plan.validate()?;
    if !(1..=3).contains(&dim) {
        return Err(Error::Config(format!("dimension {dim} not in 1..=3")));
    }
    let m = spec.m();
    if constants.alphas.len() != m {
        return Err(Error::Config(format!(
            "need {m} exponents alpha_i, got {}",
            constants.alphas.len()
        )));
    }
    let c = constants;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

    let mut a0_lower = MinTracker::new("A0.lower");
    let mut a0_upper = MinTracker::new("A0.upper");
    let mut a0_deriv = MinTracker::new("A0.derivative");
    let mut a1 = MinTracker::new("A1");
    let mut a1_inf = MinTracker::new("A1.infinity");
    let mut a2 = MinTracker::new("A2");
    let mut a3 = MinTracker::new("A3");
    let mut a4_lower = MinTracker::new("A4.lower");
    let mut a4_upper = MinTracker::new("A4.upper");
    let mut a4_deriv = MinTracker::new("A4.derivative");
    let mut a5 = MinTracker::new("A5");
    let mut a6 = MinTracker::new("A6");
    let mut strict_count = 0usize;

    let mut df = vec![0.0; m];
    let mut dfinf = vec![0.0; m];
    let mut scaled = vec![0.0; m];
    let r_a1_lo = c.r_bound.min(plan.r_max);

    for _ in 0..plan.samples {
        let x = random_point(&mut rng, dim, 0.0, plan.r_max);
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-plan.s_max..=plan.s_max)).collect();
        let ns = norm(&s);
        let f = spec.eval_f(&x, &s);
        let finf = spec.eval_finf(&x, &s);

        a0_lower.observe(f, f, &x, &s, None);
        let bound = c.a * (ns * ns + ns.powf(c.ell + 2.0));
        a0_upper.observe(bound - f, bound, &x, &s, None);
        spec.eval_df(&x, &s, &mut df);
        let dbound = c.b * (ns + ns.powf(c.ell + 1.0));
        for &d in &df {
            a0_deriv.observe(dbound - d, dbound, &x, &s, None);
        }

        let bound_inf = c.a_prime * (ns.powf(c.beta + 2.0) + ns.powf(c.ell + 2.0));
        a4_lower.observe(finf, finf, &x, &s, None);
        a4_upper.observe(bound_inf - finf, bound_inf, &x, &s, None);
        spec.eval_dfinf(&x, &s, &mut dfinf);
        let dbound_inf = c.b_prime * (ns.powf(c.beta + 1.0) + ns.powf(c.ell + 1.0));
        for &d in &dfinf {
            a4_deriv.observe(dbound_inf - d, dbound_inf, &x, &s, None);
        }

        for &theta in &plan.thetas {
            scaled.iter_mut().zip(&s).for_each(|(o, v)| *o = theta * v);
            let ft = spec.eval_f(&x, &scaled);
            a2.observe(ft - theta * theta * f, ft, &x, &s, Some(theta));
            let ftinf = spec.eval_finf(&x, &scaled);
            a5.observe(ftinf - theta.powf(c.sigma + 2.0) * finf, ftinf, &x, &s, Some(theta));
        }

        let gap = f - finf;
        a6.observe(gap, f, &x, &s, None);
        if gap > 1e-12 * (1.0 + f.abs()) {
            strict_count += 1;
        }

        // Lower bound region |x| >= R, |s| < S.
        let xr = random_point(&mut rng, dim, r_a1_lo, plan.r_max.max(r_a1_lo));
        let sr = random_in_ball(&mut rng, m, c.s_bound);
        let weight: f64 = sr
            .iter()
            .zip(&c.alphas)
            .map(|(si, ai)| si.abs().powf(*ai))
            .product::<f64>()
            * norm(&xr).powf(-c.t)
            * c.delta;
        let fr = spec.eval_f(&xr, &sr);
        a1.observe(fr - weight, fr, &xr, &sr, None);
        let frinf = spec.eval_finf(&xr, &sr);
        a1_inf.observe(frinf - weight, frinf, &xr, &sr, None);

        // Decay quotient at the outer radius.
        let xf = random_point(&mut rng, dim, plan.r_max, plan.r_max);
        let q = (spec.eval_f(&xf, &s) - spec.eval_finf(&xf, &s)).abs() / (ns * ns + ns.powf(c.alpha + 2.0));
        if q.is_finite() {
            a3.observe(plan.decay_tolerance - q, 0.0, &xf, &s, None);
        }
    }

    let alpha_total = c.alpha_sum();
    let structure = dim as f64 * (1.0 - alpha_total / 2.0) + 2.0 - c.t;
    let strict_fraction = strict_count as f64 / plan.samples as f64;
    let mut checks = vec![
        a0_lower.finish(false),
        a0_upper.finish(false),
        a0_deriv.finish(false),
        a1.finish(true),
        a1_inf.finish(true),
        AssumptionCheck {
            name: "A1.structure".into(),
            margin: structure.min(2.0 - c.t),
            holds: structure > 0.0 && (0.0..2.0).contains(&c.t),
            witness: None,
            note: Some(format!("N(1 - alpha/2) + 2 - t with alpha = {alpha_total}")),
        },
        a2.finish(false),
        a3.finish(false),
        a4_lower.finish(false),
        a4_upper.finish(false),
        a4_deriv.finish(false),
        AssumptionCheck {
            name: "A4.structure".into(),
            margin: (c.ell - c.beta).min(c.beta).min(4.0 / dim as f64 - c.ell),
            holds: 0.0 < c.beta && c.beta < c.ell && c.ell < 4.0 / dim as f64,
            witness: None,
            note: Some("0 < beta < ell < 4/N".into()),
        },
        a5.finish(false),
        AssumptionCheck {
            name: "A5.structure".into(),
            margin: c.sigma.min(4.0 / dim as f64 - c.sigma),
            holds: 0.0 <= c.sigma && c.sigma < 4.0 / dim as f64,
            witness: None,
            note: Some("sigma in [0, 4/N)".into()),
        },
        a6.finish(false),
        AssumptionCheck {
            name: "A6.strict".into(),
            margin: strict_fraction,
            holds: strict_fraction > 0.0,
            witness: None,
            note: Some("fraction of samples with F > F^inf".into()),
        },
    ];
    // -0.0 → 0.0
    checks.iter_mut().for_each(|c| c.margin += 0.0);
    Ok(AssumptionReport {
        dim,
        samples: plan.samples,
        checks,
    })
}
