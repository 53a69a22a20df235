//! The functionals `J` and `J^∞`, their L² gradients, the Lagrange
//! multiplier estimate and Euler–Lagrange residual, and
//! Gagliardo–Nirenberg tooling for the coercivity bounds.
//!
//! Sign convention: `grad J(u) = −Δu − ∂F(x, u)`, so stationary points on the
//! mass sphere satisfy `grad J(u) = λ u`, i.e. `Δuᵢ + ∂ᵢF + λuᵢ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{tree_sum, tree_sum_by, Grid, ScalarField};
use crate::nonlin::NonlinearitySpec;

/// Which nonlinearity the energy uses: `F` or its limit `F^∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    #[serde(rename = "J")]
    J,
    #[serde(rename = "Jinf")]
    JInf,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::J => "J",
            Functional::JInf => "Jinf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½ Σᵢ ∫|∇uᵢ|²`
    pub kinetic: f64,
    /// `∫ F(x, u)` (or `F^∞`)
    pub potential: f64,
    pub total: f64,
}

pub fn potential(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> f64 {
    let grid = u.grid();
    let n = grid.dim();
    let mut s = vec![0.0; u.m()];
    let values: Vec<f64> = (0..grid.total_points())
        .map(|j| {
            let x = grid.point(j);
            u.at(j, &mut s);
            match functional {
                Functional::J => spec.eval_f(&x[..n], &s),
                Functional::JInf => spec.eval_finf(&x[..n], &s),
            }
        })
        .collect();
    grid.cell_volume() * tree_sum(&values)
}

pub fn energy(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> EnergyBreakdown {
    let kinetic = 0.5 * u.grad_norm_sq();
    let potential = potential(u, spec, functional);
    EnergyBreakdown {
        kinetic,
        potential,
        total: kinetic - potential,
    }
}

pub fn energy_j(u: &VectorField, spec: &NonlinearitySpec) -> EnergyBreakdown {
    energy(u, spec, Functional::J)
}

pub fn energy_jinf(u: &VectorField, spec: &NonlinearitySpec) -> EnergyBreakdown {
    energy(u, spec, Functional::JInf)
}

/// `∂ᵢF(x, u(x))` per component at every grid point.
pub fn nonlinear_force(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> VectorField {
    let grid = u.grid();
    let n = grid.dim();
    let m = u.m();
    let mut out = vec![vec![0.0; grid.total_points()]; m];
    let mut s = vec![0.0; m];
    let mut d = vec![0.0; m];
    for j in 0..grid.total_points() {
        let x = grid.point(j);
        u.at(j, &mut s);
        match functional {
            Functional::J => spec.eval_df(&x[..n], &s, &mut d),
            Functional::JInf => spec.eval_dfinf(&x[..n], &s, &mut d),
        }
        for (o, v) in out.iter_mut().zip(&d) {
            o[j] = *v;
        }
    }
    VectorField::new(
        out.into_iter()
            .map(|v| ScalarField::from_values_unchecked(grid.clone(), v))
            .collect(),
    )
    .expect("components share the grid")
}

/// L² gradient `−Δuᵢ − ∂ᵢF(x, u)`.
pub fn grad(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> VectorField {
    let force = nonlinear_force(u, spec, functional);
    let comps = u
        .components()
        .iter()
        .zip(force.components())
        .map(|(ui, fi)| ui.laplacian().axpby(-1.0, fi, -1.0))
        .collect();
    VectorField::new(comps).expect("components share the grid")
}

pub fn grad_j(u: &VectorField, spec: &NonlinearitySpec) -> VectorField {
    grad(u, spec, Functional::J)
}

pub fn grad_jinf(u: &VectorField, spec: &NonlinearitySpec) -> VectorField {
    grad(u, spec, Functional::JInf)
}

/// Multiplier and Euler–Lagrange residual evaluated from one gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub multiplier: f64,
    pub residual: f64,
    /// `‖grad J(u) − λu‖_{L²}`
    pub residual_norm: f64,
    pub grad_norm: f64,
}

pub fn stationarity(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> Result<Stationarity> {
    let mass = u.mass();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let g = grad(u, spec, functional);
    Ok(stationarity_from_grad(u, &g, mass))
}

pub(crate) fn stationarity_from_grad(u: &VectorField, g: &VectorField, mass: f64) -> Stationarity {
    let multiplier = g.inner(u) / mass;
    let r = g.axpby(1.0, u, -multiplier);
    let residual_norm = r.mass().sqrt();
    let grad_norm = g.mass().sqrt();
    Stationarity {
        multiplier,
        residual: residual_norm / grad_norm.max(f64::EPSILON),
        residual_norm,
        grad_norm,
    }
}

/// `λ = ⟨grad J(u), u⟩ / mass(u)`.
pub fn multiplier(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> Result<f64> {
    stationarity(u, spec, functional).map(|s| s.multiplier)
}

/// `‖grad J(u) − λu‖ / max(‖grad J(u)‖, ε_mach)`.
pub fn el_residual(u: &VectorField, spec: &NonlinearitySpec, functional: Functional) -> Result<f64> {
    stationarity(u, spec, functional).map(|s| s.residual)
}

/// One Gagliardo–Nirenberg comparison `‖u‖_{ℓ+2}^{ℓ+2} ≤ A″ ‖u‖₂^{(1−σ)(ℓ+2)} ‖∇u‖₂^{σ(ℓ+2)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnReport {
    pub sigma: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub a_dd: f64,
    pub ratio: f64,
}

impl GnReport {
    pub fn holds(&self) -> bool {
        self.ratio <= 1.0
    }
}

/// `σ = (N/2)·ℓ/(ℓ+2)`.
pub fn gn_sigma(dim: usize, ell: f64) -> f64 {
    0.5 * dim as f64 * ell / (ell + 2.0)
}

/// `(‖u‖_{ℓ+2}^{ℓ+2}, ‖u‖₂^{(1−σ)(ℓ+2)} ‖∇u‖₂^{σ(ℓ+2)})`.
fn gn_sides(u: &ScalarField, ell: f64) -> (f64, f64) {
    let dim = u.grid().dim();
    let sigma = gn_sigma(dim, ell);
    let p = ell + 2.0;
    let lhs = u.grid().cell_volume() * tree_sum_by(u.values().len(), |j| u.values()[j].abs().powf(p));
    let l2 = u.norm_sq().sqrt();
    let grad = u.grad_norm_sq().sqrt();
    (lhs, l2.powf((1.0 - sigma) * p) * grad.powf(sigma * p))
}

/// Gagliardo–Nirenberg quotient with unit constant.
pub fn gn_quotient(u: &ScalarField, ell: f64) -> f64 {
    let (lhs, norms) = gn_sides(u, ell);
    lhs / norms
}

pub fn gn_check(u: &ScalarField, ell: f64, a_dd: f64) -> Result<GnReport> {
    let dim = u.grid().dim();
    if !(ell > 0.0 && ell <= 4.0 / dim as f64 + 1e-12) {
        return Err(Error::Precondition(format!("need 0 < ell <= 4/N, got {ell}")));
    }
    if !(a_dd > 0.0) {
        return Err(Error::Precondition("Gagliardo-Nirenberg constant must be positive".into()));
    }
    let (lhs, norms) = gn_sides(u, ell);
    if !(norms > 0.0) {
        return Err(Error::Precondition("Gagliardo-Nirenberg check needs a nonconstant, nonzero field".into()));
    }
    let rhs = a_dd * norms;
    Ok(GnReport {
        sigma: gn_sigma(dim, ell),
        lhs,
        rhs,
        a_dd,
        ratio: lhs / rhs,
    })
}

/// Radial trial profiles used to bound the sharp constant from below.
pub fn gn_trial_family(grid: &Grid) -> Vec<ScalarField> {
    let h = grid.spacing();
    let l = grid.half_length();
    let mut trials = Vec::new();
    let widths = |lo: f64, hi: f64| -> Vec<f64> {
        if hi < lo {
            return Vec::new();
        }
        let count = 6;
        (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect()
    };
    let radius = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for w in widths(6.0 * h, l / 4.0) {
        trials.push(ScalarField::from_fn(grid, |x| (-(radius(x) / w).powi(2)).exp()));
    }
    for &a in &[0.25, 0.5, 1.0, 2.0] {
        for w in widths(6.0 * h, a * l / 12.0) {
            trials.push(ScalarField::from_fn(grid, |x| (1.0 / (radius(x) / w).cosh()).powf(a)));
        }
    }
    trials
}

/// Largest GN quotient over the built-in trial family.
pub fn estimate_gn_constant(grid: &Grid, ell: f64) -> f64 {
    estimate_gn_constant_with(grid, ell, &[])
}

/// As [`estimate_gn_constant`], also maximizing over `extra` trials (for
/// example the components of converged minimizers).
pub fn estimate_gn_constant_with(grid: &Grid, ell: f64, extra: &[ScalarField]) -> f64 {
    gn_trial_family(grid)
        .iter()
        .chain(extra.iter())
        .map(|u| gn_quotient(u, ell))
        .filter(|q| q.is_finite())
        .fold(0.0, f64::max)
}

/// Lower bound `J(u) ≥ a1·‖∇u‖² − Σₖ coefₖ·c^{expₖ}` on the sphere of radius `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityBound {
    pub gradient_coefficient: f64,
    /// `(coefficient, exponent of c)` pairs.
    pub mass_terms: Vec<(f64, f64)>,
}

impl CoercivityBound {
    pub fn value(&self, grad_norm_sq: f64, c: f64) -> f64 {
        self.gradient_coefficient * grad_norm_sq
            - self
                .mass_terms
                .iter()
                .map(|(k, e)| k * c.powf(*e))
                .sum::<f64>()
    }
}

/// Young splitting of one GN-controlled power `growth·∫|u|^{p+2}`, with
/// `ε` chosen so the gradient term costs exactly `budget`.
/// Returns `(budget, coefficient, exponent)`.
fn young_term(growth: f64, p: f64, a_dd: f64, dim: usize, m: usize, budget: f64) -> (f64, f64) {
    let n = dim as f64;
    // |s|^{p+2} ≤ m^{(p+2)/2 − 1} Σ|sᵢ|^{p+2}
    let kappa = (m as f64).powf((p + 2.0) / 2.0 - 1.0);
    let k = growth * kappa;
    let young_p = 4.0 / (n * p);
    let q = young_p / (young_p - 1.0);
    // k·(Np/4)·ε^{4/(Np)} = budget
    let eps = (budget / (k * n * p / 4.0)).powf(1.0 / young_p);
    let sigma = gn_sigma(dim, p);
    let coefficient = k * m as f64 * (a_dd / eps).powf(q) / q;
    let exponent = (1.0 - sigma) * (p + 2.0) * q;
    (coefficient, exponent)
}

/// Coercivity bound for `J` with `F ≤ A(|s|² + |s|^{ℓ+2})`; `a1 = ¼`.
pub fn coercivity_bound_j(a: f64, ell: f64, a_dd: f64, dim: usize, m: usize) -> CoercivityBound {
    let (k, e) = young_term(a, ell, a_dd, dim, m, 0.25);
    CoercivityBound {
        gradient_coefficient: 0.25,
        mass_terms: vec![(a, 2.0), (k, e)],
    }
}

/// Coercivity bound for `J^∞` with `F^∞ ≤ A′(|s|^{β+2} + |s|^{ℓ+2})`;
/// each exponent is paired with its own GN constant. `b1 = ¼`.
pub fn coercivity_bound_jinf(
    a_prime: f64,
    beta: f64,
    a_dd_beta: f64,
    ell: f64,
    a_dd_ell: f64,
    dim: usize,
    m: usize,
) -> CoercivityBound {
    let (k_beta, e_beta) = young_term(a_prime, beta, a_dd_beta, dim, m, 0.125);
    let (k_ell, e_ell) = young_term(a_prime, ell, a_dd_ell, dim, m, 0.125);
    CoercivityBound {
        gradient_coefficient: 0.25,
        mass_terms: vec![(k_beta, e_beta), (k_ell, e_ell)],
    }
}
