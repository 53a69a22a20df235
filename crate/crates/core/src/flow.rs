//! Normalized gradient flow on the mass sphere: a descent step on `J`
//! followed by rescaling back to `mass = c²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyBreakdown, Functional, Stationarity};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{Grid, ScalarField};
use crate::nonlin::NonlinearitySpec;

const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 30;
const STAGNATION_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `u − τ·grad J(u)`
    Explicit,
    /// `(1 + τ(|k|² + a)) û⁺ = ((1 + τ(a + λ))u + τ∂F(x, u))^` with `λ` the
    /// current multiplier and `a = max(−λ, 0)`
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStyle {
    GaussianBumps,
    RandomSmooth,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub scheme: Scheme,
    pub tau: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Relative per-step energy change counted as stagnation.
    pub energy_tol: f64,
    pub backtracking: bool,
    pub seed: u64,
    pub multistart: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            scheme: Scheme::SemiImplicit,
            tau: 100.0,
            max_iters: 20_000,
            residual_tol: 1e-6,
            energy_tol: 1e-10,
            backtracking: true,
            seed: 0,
            multistart: 1,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("flow step tau must be positive, got {}", self.tau)));
        }
        if !(self.residual_tol > 0.0 && self.energy_tol > 0.0) {
            return Err(Error::Config("flow tolerances must be positive".into()));
        }
        if self.multistart == 0 {
            return Err(Error::Config("multistart must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// `|mass − c²| / c²`
    pub mass_error: f64,
    pub residual: f64,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Residual,
    EnergyStagnation,
    /// Backtracking could not lower the energy beyond rounding.
    RoundoffFloor,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub minimizer: VectorField,
    pub energy: f64,
    pub breakdown: EnergyBreakdown,
    pub multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    /// `el_residual ≤ residual_tol` at exit.
    pub converged: bool,
    pub stop: StopReason,
    /// Rough size of the energy error left by the solver.
    pub energy_error: f64,
}

pub fn minimize(
    init: &VectorField,
    c: f64,
    spec: &NonlinearitySpec,
    config: &FlowConfig,
    functional: Functional,
) -> Result<MinimizeResult> {
    minimize_observed(init, c, spec, config, functional, |_, _| {})
}

/// [`minimize`] with a callback on every accepted iterate (iteration 0 is the
/// projected initial field).
pub fn minimize_observed<O: FnMut(usize, &VectorField)>(
    init: &VectorField,
    c: f64,
    spec: &NonlinearitySpec,
    config: &FlowConfig,
    functional: Functional,
    mut observer: O,
) -> Result<MinimizeResult> {
    config.validate()?;
    if init.m() != spec.m() {
        return Err(Error::Precondition(format!(
            "field has {} components, nonlinearity expects {}",
            init.m(),
            spec.m()
        )));
    }
    let target = c * c;
    let mut u = init.project_mass(c)?;
    let mut e = energy::energy(&u, spec, functional);
    if !e.total.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut g = energy::grad(&u, spec, functional);
    let mut st = energy::stationarity_from_grad(&u, &g, u.mass());
    let mut trace = vec![row(0, &e, &u, target, &st, config.tau)];
    observer(0, &u);

    let mut tau = config.tau;
    let mut stagnant = 0usize;
    let mut last_delta = f64::INFINITY;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0usize;

    for iter in 1..=config.max_iters {
        if st.residual <= config.residual_tol {
            stop = StopReason::Residual;
            break;
        }
        let mut halvings = 0usize;
        let accepted = loop {
            let cand = descent_step(&u, &g, st.multiplier, spec, functional, config.scheme, tau).project_mass(c)?;
            let ec = energy::energy(&cand, spec, functional);
            let finite = ec.total.is_finite() && cand.is_finite();
            if finite && (!config.backtracking || ec.total <= e.total) {
                break Some((cand, ec));
            }
            if !config.backtracking {
                return Err(Error::NonFinite { iteration: iter });
            }
            if halvings == MAX_HALVINGS {
                let floor = 1e-10 * (1.0 + e.kinetic.abs() + e.potential.abs());
                if finite && ec.total - e.total <= floor {
                    break None;
                }
                if !finite {
                    return Err(Error::NonFinite { iteration: iter });
                }
                return Err(Error::BacktrackingExhausted {
                    iteration: iter,
                    halvings,
                });
            }
            tau *= SHRINK;
            halvings += 1;
        };
        let Some((cand, ec)) = accepted else {
            stop = StopReason::RoundoffFloor;
            break;
        };
        iterations = iter;
        let delta = (ec.total - e.total).abs();
        last_delta = delta;
        u = cand;
        e = ec;
        g = energy::grad(&u, spec, functional);
        st = energy::stationarity_from_grad(&u, &g, u.mass());
        trace.push(row(iter, &e, &u, target, &st, tau));
        observer(iter, &u);

        if delta <= config.energy_tol * e.total.abs() {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        if st.residual <= config.residual_tol {
            stop = StopReason::Residual;
            break;
        }
        if stagnant >= STAGNATION_WINDOW {
            stop = StopReason::EnergyStagnation;
            break;
        }
        if halvings == 0 {
            tau = (tau / SHRINK).min(config.tau);
        }
    }

    // quadratic model with the multiplier as a stand-in for the spectral gap
    let gap = st.multiplier.abs().max(1e-2);
    let tail = if last_delta.is_finite() { STAGNATION_WINDOW as f64 * last_delta } else { 0.0 };
    let energy_error = st.residual_norm * st.residual_norm / gap + tail;
    Ok(MinimizeResult {
        energy: e.total,
        breakdown: e,
        multiplier: st.multiplier,
        residual: st.residual,
        iterations,
        trace,
        converged: st.residual <= config.residual_tol,
        stop,
        energy_error,
        minimizer: u,
    })
}

fn row(iter: usize, e: &EnergyBreakdown, u: &VectorField, target: f64, st: &Stationarity, tau: f64) -> TraceRow {
    TraceRow {
        iter,
        energy: e.total,
        kinetic: e.kinetic,
        potential: e.potential,
        mass_error: (u.mass() - target).abs() / target,
        residual: st.residual,
        tau,
    }
}

fn descent_step(
    u: &VectorField,
    g: &VectorField,
    multiplier: f64,
    spec: &NonlinearitySpec,
    functional: Functional,
    scheme: Scheme,
    tau: f64,
) -> VectorField {
    match scheme {
        Scheme::Explicit => u.axpby(1.0, g, -tau),
        Scheme::SemiImplicit => {
            // The multiplier term keeps Euler-Lagrange solutions as fixed points
            // after projection; the shift keeps the operator positive.
            let shift = (-multiplier).max(0.0);
            let force = energy::nonlinear_force(u, spec, functional);
            let rhs = u.axpby(1.0 + tau * (shift + multiplier), &force, tau);
            rhs.map_components(|c| {
                let grid = c.grid();
                let mut spec = grid.forward(c.values());
                for (z, &k2) in spec.iter_mut().zip(grid.k_squared()) {
                    *z /= 1.0 + tau * (k2 + shift);
                }
                ScalarField::from_values_unchecked(grid.clone(), grid.inverse_real(spec))
            })
        }
    }
}

/// Initial field of mass `c²`.
pub fn default_init(grid: &Grid, m: usize, c: f64, style: InitStyle, seed: u64) -> Result<VectorField> {
    let raw = match style {
        InitStyle::Constant => {
            let value = c / (m as f64 * grid.period().powi(grid.dim() as i32)).sqrt();
            return Ok(VectorField::new(vec![ScalarField::constant(grid, value); m])?);
        }
        InitStyle::GaussianBumps => {
            let w = grid.half_length() / 8.0;
            VectorField::from_fn(grid, m, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                vec![(-r2 / (2.0 * w * w)).exp(); m]
            })
        }
        InitStyle::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corr = grid.half_length() / 16.0;
            let env = grid.half_length() / 4.0;
            let comps = (0..m)
                .map(|_| {
                    let noise: Vec<f64> = (0..grid.total_points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let mut spec = grid.forward(&noise);
                    for (z, &k2) in spec.iter_mut().zip(grid.k_squared()) {
                        *z *= (-0.5 * k2 * corr * corr).exp();
                    }
                    let smooth = grid.inverse_real(spec);
                    let values = smooth
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let r = grid.radius(j);
                            v * (-0.5 * (r / env).powi(2)).exp()
                        })
                        .collect();
                    ScalarField::from_values_unchecked(grid.clone(), values)
                })
                .collect();
            VectorField::new(comps)?
        }
    };
    raw.project_mass(c)
}

/// Energies of every multistart run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub style: InitStyle,
    pub seed: u64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct MultistartResult {
    pub best: MinimizeResult,
    pub runs: Vec<RunSummary>,
    /// Converged runs disagree by more than `1e-4·max(1, |best|)`.
    pub possible_local_minima: bool,
}

/// Styles cycled by [`solve_multistart`].
pub const MULTISTART_STYLES: [InitStyle; 2] = [InitStyle::GaussianBumps, InitStyle::RandomSmooth];

pub fn solve_multistart(
    grid: &Grid,
    c: f64,
    spec: &NonlinearitySpec,
    config: &FlowConfig,
    functional: Functional,
) -> Result<MultistartResult> {
    config.validate()?;
    let starts: Vec<(InitStyle, u64)> = (0..config.multistart)
        .map(|k| (MULTISTART_STYLES[k % MULTISTART_STYLES.len()], config.seed + k as u64))
        .collect();
    let results: Vec<Result<MinimizeResult>> = starts
        .par_iter()
        .map(|&(style, seed)| {
            let init = default_init(grid, spec.m(), c, style, seed)?;
            minimize(&init, c, spec, config, functional)
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let runs: Vec<RunSummary> = starts
        .iter()
        .zip(&results)
        .map(|(&(style, seed), r)| RunSummary {
            style,
            seed,
            energy: r.energy,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    let any_converged = results.iter().any(|r| r.converged);
    let best = results
        .into_iter()
        .filter(|r| r.converged || !any_converged)
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .expect("at least one run");
    let spread = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.energy - best.energy)
        .fold(0.0, f64::max);
    Ok(MultistartResult {
        possible_local_minima: spread > 1e-4 * best.energy.abs().max(1.0),
        best,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub c: f64,
    pub energy: f64,
    pub multiplier: f64,
    pub residual: f64,
    pub converged: bool,
    pub cold_energy: f64,
    pub warm_energy: Option<f64>,
}

/// Minimum energy along increasing masses; each point after the first also
/// runs a warm start from the previous minimizer rescaled to the new mass.
pub fn scan_mass(
    grid: &Grid,
    c_values: &[f64],
    spec: &NonlinearitySpec,
    config: &FlowConfig,
    functional: Functional,
) -> Result<Vec<ScanPoint>> {
    if c_values.is_empty() {
        return Err(Error::Precondition("mass scan needs at least one value".into()));
    }
    if c_values.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Precondition("mass scan values must be positive".into()));
    }
    if c_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("mass scan values must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(c_values.len());
    let mut previous: Option<VectorField> = None;
    for &c in c_values {
        let cold = solve_multistart(grid, c, spec, config, functional)?.best;
        let warm = match &previous {
            Some(prev) => Some(minimize(&prev.project_mass(c)?, c, spec, config, functional)?),
            None => None,
        };
        let cold_energy = cold.energy;
        let warm_energy = warm.as_ref().map(|w| w.energy);
        let best = match warm {
            Some(w) if w.energy < cold.energy && (w.converged || !cold.converged) => w,
            _ => cold,
        };
        points.push(ScanPoint {
            c,
            energy: best.energy,
            multiplier: best.multiplier,
            residual: best.residual,
            converged: best.converged,
            cold_energy,
            warm_energy,
        });
        previous = Some(best.minimizer);
    }
    Ok(points)
}
