//! Concentration function, trichotomy classifier, and the verification
//! harness that turns the structural inequalities of the minimization
//! problem into numerical measurements with explicit verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::energy::{self, estimate_gn_constant, Functional};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flow::{solve_multistart, FlowConfig, MinimizeResult, StopReason};
use crate::grid::{Grid, ScalarField};
use crate::nonlin::{NonlinearitySpec, Regime};

/// Hex SHA-256 of the canonical JSON of `value` (object keys sorted).
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub radii: Vec<f64>,
    #[serde(rename = "Q_values")]
    pub q_values: Vec<f64>,
    pub total_mass: f64,
    /// Largest distance on the torus, `L√N`.
    pub box_scale: f64,
    /// Grid point where the best ball is centered, per radius.
    pub centers: Vec<usize>,
}

impl ConcentrationProfile {
    /// `Q` at the largest listed radius not exceeding `r` (0 below the first).
    pub fn q_at(&self, r: f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.q_values)
            .filter(|(&ri, _)| ri <= r * (1.0 + 1e-12))
            .map(|(_, &q)| q)
            .fold(0.0, f64::max)
    }
}

/// `Q(R) = max_y Σ_{|x − y| ≤ R} |u(x)|² h^N` with `y` over grid points.
pub fn concentration_q(u: &VectorField, radii: &[f64]) -> Result<ConcentrationProfile> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Precondition("concentration radii must be positive".into()));
    }
    let grid = u.grid();
    let rho = u.density();
    let total_mass = u.mass();
    let rho_hat = grid.forward(rho.values());
    let origin = grid.flat_index(&vec![grid.points() / 2; grid.dim()]);
    let dist: Vec<f64> = (0..grid.total_points())
        .map(|j| grid.periodic_distance(origin, j))
        .collect();
    let reach = dist.iter().cloned().fold(0.0, f64::max);

    let raw: Vec<(f64, usize)> = radii
        .par_iter()
        .map(|&r| {
            if r >= reach {
                return (total_mass, origin);
            }
            // ball indicator centred at the origin node, rolled to index 0
            let mut kernel = vec![0.0; grid.total_points()];
            let shift: Vec<isize> = vec![(grid.points() / 2) as isize; grid.dim()];
            for (j, &d) in dist.iter().enumerate() {
                if d <= r {
                    kernel[j] = 1.0;
                }
            }
            let kernel = ScalarField::new(grid.clone(), kernel)
                .expect("kernel on grid")
                .shift_cells(&shift);
            let k_hat = grid.forward(kernel.values());
            // ball indicator is symmetric, so correlation equals convolution
            let product = rho_hat.iter().zip(&k_hat).map(|(a, b)| a * b).collect();
            let conv = grid.inverse_real(product);
            let (best, value) = conv
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            (grid.cell_volume() * value, best)
        })
        .collect();

    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut q_values = vec![0.0; radii.len()];
    let mut centers = vec![0; radii.len()];
    let mut running = 0.0f64;
    let mut running_center = origin;
    for &i in &order {
        let (q, center) = raw[i];
        let q = q.clamp(0.0, total_mass);
        if q >= running {
            running = q;
            running_center = center;
        }
        q_values[i] = running;
        centers[i] = running_center;
    }
    Ok(ConcentrationProfile {
        radii: radii.to_vec(),
        q_values,
        total_mass,
        box_scale: grid.max_distance(),
        centers,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trichotomy {
    Vanishing,
    Dichotomy,
    Compact,
    Inconclusive,
}

pub const VANISHING_FRACTION: f64 = 0.05;
pub const COMPACT_FRACTION: f64 = 0.95;
pub const PLATEAU_WIDTH: f64 = 0.25;
/// Variation of `Q` (as a fraction of the mass) still counted as flat.
pub const PLATEAU_FLATNESS: f64 = 0.02;

/// Heuristic reading of a sequence of profiles, all of mass `mass`.
///
/// Vanishing is tested at the smallest radius of the first profile; compact
/// needs one radius, at most half the box scale, holding `0.95·mass` in every
/// profile; dichotomy needs a flat stretch of the final profile at an
/// intermediate level spanning a quarter of the box scale.
pub fn classify_trichotomy(profiles: &[ConcentrationProfile], mass: f64) -> Result<Trichotomy> {
    if profiles.len() < 2 {
        return Err(Error::Precondition("trichotomy needs at least two profiles".into()));
    }
    if !(mass > 0.0) {
        return Err(Error::Precondition("trichotomy needs a positive mass".into()));
    }
    let first = &profiles[0];
    let last = profiles.last().expect("nonempty");
    let min_scale = profiles.iter().map(|p| p.box_scale).fold(f64::INFINITY, f64::min);

    let compact = first
        .radii
        .iter()
        .filter(|&&r| r <= 0.5 * min_scale)
        .any(|&r| profiles.iter().all(|p| p.q_at(r) >= COMPACT_FRACTION * mass));
    if compact {
        return Ok(Trichotomy::Compact);
    }

    let r0 = first.radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let q_first = first.q_at(r0);
    let q_last = last.q_at(r0);
    if q_last < VANISHING_FRACTION * mass && q_last <= q_first {
        return Ok(Trichotomy::Vanishing);
    }

    let mut pts: Vec<(f64, f64)> = last.radii.iter().cloned().zip(last.q_values.iter().cloned()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = VANISHING_FRACTION * mass;
    let hi = COMPACT_FRACTION * mass;
    for i in 0..pts.len() {
        if !(pts[i].1 > lo && pts[i].1 < hi) {
            continue;
        }
        for j in (i + 1)..pts.len() {
            if !(pts[j].1 < hi) || pts[j].1 - pts[i].1 > PLATEAU_FLATNESS * mass {
                break;
            }
            if pts[j].0 - pts[i].0 >= PLATEAU_WIDTH * last.box_scale {
                return Ok(Trichotomy::Dichotomy);
            }
        }
    }
    Ok(Trichotomy::Inconclusive)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub c: f64,
    /// Split masses `a` where the check uses them.
    pub a: Vec<f64>,
    pub spec_digest: String,
    pub grid_digest: String,
    pub parameters: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub inputs: ReportInputs,
    pub measurements: Value,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn measurement(&self, key: &str) -> Option<f64> {
        self.measurements.get(key).and_then(Value::as_f64)
    }
}

/// Splitting measurement `J(u) − J(v) − J^∞(w)` for one cutoff pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDefect {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub annulus_mass: f64,
    pub energy_u: f64,
    pub energy_v: f64,
    pub energy_inf_w: f64,
    /// `|J(u) − J(v) − J^∞(w)|`
    pub defect: f64,
}

pub fn splitting_defect(
    u: &VectorField,
    spec: &NonlinearitySpec,
    center: usize,
    inner_radius: f64,
    outer_radius: f64,
) -> Result<SplitDefect> {
    let pair = u.split(center, inner_radius, outer_radius)?;
    let energy_u = energy::energy_j(u, spec).total;
    let energy_v = energy::energy_j(&pair.v, spec).total;
    let energy_inf_w = energy::energy_jinf(&pair.w, spec).total;
    Ok(SplitDefect {
        inner_radius,
        outer_radius,
        annulus_mass: pair.annulus_mass,
        energy_u,
        energy_v,
        energy_inf_w,
        defect: (energy_u - energy_v - energy_inf_w).abs(),
    })
}

/// `(1/(2·A·A″))^{N/4}`.
pub fn critical_mass(a: f64, a_dd: f64, dim: usize) -> f64 {
    (1.0 / (2.0 * a * a_dd)).powf(dim as f64 / 4.0)
}

/// Radial Gaussian of total mass `c²`, split evenly over `m` components.
pub fn gaussian_trial(grid: &Grid, m: usize, c: f64, width: f64) -> Result<VectorField> {
    let u = VectorField::from_fn(grid, m, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        vec![(-r2 / (2.0 * width * width)).exp(); m]
    });
    u.project_mass(c)
}

/// Grid, flow settings and resource limits shared by the verifiers.
#[derive(Clone, Debug)]
pub struct Harness {
    pub grid: Grid,
    pub flow: FlowConfig,
    /// Largest grid (total points) a dilation probe may refine to.
    pub point_budget: usize,
}

/// Outcome of one inner solve as reported.
struct Solve {
    c: f64,
    functional: Functional,
    outcome: Result<MinimizeResult>,
}

impl Solve {
    /// Runs that hit the residual tolerance or stalled on a flat landscape
    /// are usable; running out of iterations or erroring is a failure.
    fn ok(&self) -> Option<&MinimizeResult> {
        self.outcome
            .as_ref()
            .ok()
            .filter(|r| r.converged || r.stop != StopReason::MaxIterations)
    }

    fn failure(&self) -> Option<String> {
        match &self.outcome {
            Err(e) => Some(format!("{} solve at c = {} failed: {e}", self.functional.name(), self.c)),
            Ok(r) if self.ok().is_none() => Some(format!(
                "{} solve at c = {} did not converge (residual {:.3e})",
                self.functional.name(),
                self.c,
                r.residual
            )),
            Ok(_) => None,
        }
    }

    fn stalled(&self) -> Option<String> {
        match &self.outcome {
            Ok(r) if !r.converged && self.ok().is_some() => Some(format!(
                "{} solve at c = {} stopped on {:?} at residual {:.3e}",
                self.functional.name(),
                self.c,
                r.stop,
                r.residual
            )),
            _ => None,
        }
    }
}

fn solve_notes(solves: &[Solve]) -> (Vec<String>, Vec<String>) {
    (
        solves.iter().filter_map(Solve::failure).collect(),
        solves.iter().filter_map(Solve::stalled).collect(),
    )
}

fn strict_tolerance(energy_c: f64, errors: impl Iterator<Item = f64>) -> f64 {
    let err = errors.fold(0.0, f64::max);
    (1e-4 * energy_c.abs()).max(5.0 * err)
}

impl Harness {
    pub fn new(grid: Grid, flow: FlowConfig) -> Self {
        Harness {
            grid,
            flow,
            point_budget: 1 << 22,
        }
    }

    fn inputs(&self, spec: &NonlinearitySpec, c: f64, a: Vec<f64>, parameters: Value) -> Result<ReportInputs> {
        Ok(ReportInputs {
            c,
            a,
            spec_digest: digest(spec)?,
            grid_digest: digest(&self.grid.spec())?,
            parameters,
        })
    }

    fn solve_all(&self, spec: &NonlinearitySpec, jobs: &[(f64, Functional)]) -> Vec<Solve> {
        jobs.par_iter()
            .map(|&(c, functional)| Solve {
                c,
                functional,
                outcome: solve_multistart(&self.grid, c, spec, &self.flow, functional).map(|r| r.best),
            })
            .collect()
    }

    /// Energies `J(Φ_λ)` along the dilation curve of `phi` (default: a
    /// Gaussian of mass `c²`); pass iff one of them is below `−tol`.
    pub fn verify_negativity(
        &self,
        spec: &NonlinearitySpec,
        c: f64,
        phi: Option<&VectorField>,
        lambdas: &[f64],
    ) -> Result<VerificationReport> {
        if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(Error::Precondition("dilation factors must lie in (0, 1]".into()));
        }
        if !(c > 0.0) {
            return Err(Error::Precondition("mass parameter c must be positive".into()));
        }
        spec.validate(self.grid.dim())?;
        let phi = match phi {
            Some(p) => p.project_mass(c)?,
            None => gaussian_trial(&self.grid, spec.m(), c, self.grid.half_length() / 32.0)?,
        };
        let mut notes = Vec::new();
        let mut energies = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let d = phi.dilate_onto(lambda, &self.grid)?;
            notes.extend(d.warnings);
            energies.push(energy::energy_j(&d.field, spec).total);
        }
        let base = energy::energy_j(&phi, spec);
        let tol = 1e-8 * (1.0 + base.kinetic.abs() + base.potential.abs());
        let best = energies.iter().cloned().fold(f64::INFINITY, f64::min);

        // exponent from the two smallest factors
        let mut idx: Vec<usize> = (0..lambdas.len()).collect();
        idx.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
        let exponent = if idx.len() >= 2 {
            let (i, j) = (idx[0], idx[1]);
            let (ei, ej) = (energies[i], energies[j]);
            if ei < 0.0 && ej < 0.0 && lambdas[i] != lambdas[j] {
                Some((ei.abs() / ej.abs()).ln() / (lambdas[i] / lambdas[j]).ln())
            } else {
                None
            }
        } else {
            None
        };
        let predicted = negativity_exponent(spec, self.grid.dim());
        let verdict = if best < -tol { Verdict::Pass } else { Verdict::Fail };
        Ok(VerificationReport {
            lemma: "negativity".into(),
            inputs: self.inputs(spec, c, vec![], json!({ "lambdas": lambdas }))?,
            measurements: json!({
                "lambdas": lambdas,
                "energies": energies,
                "min_energy": best,
                "fitted_exponent": exponent,
                "predicted_exponent": predicted,
            }),
            tolerance: tol,
            verdict,
            notes,
        })
    }

    /// `Î_c ≤ Î_a + Î_b` with `a = f·c`, `b = √(c² − a²)`; strict for `J^∞`.
    pub fn verify_subadditivity(
        &self,
        spec: &NonlinearitySpec,
        c: f64,
        fractions: &[f64],
        functional: Functional,
    ) -> Result<VerificationReport> {
        if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::Precondition("split fractions must lie in (0, 1)".into()));
        }
        if !(c > 0.0) {
            return Err(Error::Precondition("mass parameter c must be positive".into()));
        }
        spec.validate(self.grid.dim())?;
        let splits: Vec<(f64, f64)> = fractions
            .iter()
            .map(|&f| {
                let a = f * c;
                (a, (c * c - a * a).sqrt())
            })
            .collect();
        let mut jobs = vec![(c, functional)];
        for &(a, b) in &splits {
            jobs.push((a, functional));
            jobs.push((b, functional));
        }
        let solves = self.solve_all(spec, &jobs);
        let (failures, notes) = solve_notes(&solves);
        let strict = functional == Functional::JInf;
        let parameters = json!({ "fractions": fractions, "functional": functional, "strict": strict });
        let inputs = self.inputs(spec, c, splits.iter().map(|s| s.0).collect(), parameters)?;
        if !failures.is_empty() {
            return Ok(inconclusive("subadditivity", inputs, failures));
        }
        let res: Vec<&MinimizeResult> = solves.iter().map(|s| s.ok().expect("checked")).collect();
        let energy_c = res[0].energy;
        let tol = strict_tolerance(energy_c, res.iter().map(|r| r.energy_error));
        let mut gaps = Vec::new();
        let mut rows = Vec::new();
        for (k, &(a, b)) in splits.iter().enumerate() {
            let (ea, eb) = (res[1 + 2 * k].energy, res[2 + 2 * k].energy);
            let gap = ea + eb - energy_c;
            gaps.push(gap);
            rows.push(json!({ "fraction": fractions[k], "a": a, "b": b, "energy_a": ea, "energy_b": eb, "gap": gap }));
        }
        let holds = if strict {
            gaps.iter().all(|&g| g > tol)
        } else {
            gaps.iter().all(|&g| g >= -tol)
        };
        Ok(VerificationReport {
            lemma: "subadditivity".into(),
            inputs,
            measurements: json!({
                "energy_c": energy_c,
                "splits": rows,
                "min_gap": gaps.iter().cloned().fold(f64::INFINITY, f64::min),
            }),
            tolerance: tol,
            verdict: if holds { Verdict::Pass } else { Verdict::Fail },
            notes,
        })
    }

    /// `Î_c < Î^∞_c` and `Î_c < Î_a + Î^∞_{√(c²−a²)}` for `a/c ∈ {0.3, 0.5, 0.7}`.
    pub fn verify_comparison(&self, spec: &NonlinearitySpec, c: f64) -> Result<VerificationReport> {
        if !(c > 0.0) {
            return Err(Error::Precondition("mass parameter c must be positive".into()));
        }
        spec.validate(self.grid.dim())?;
        let fractions = [0.3, 0.5, 0.7];
        let splits: Vec<(f64, f64)> = fractions
            .iter()
            .map(|&f| {
                let a = f * c;
                (a, (c * c - a * a).sqrt())
            })
            .collect();
        let mut jobs = vec![(c, Functional::J), (c, Functional::JInf)];
        for &(a, b) in &splits {
            jobs.push((a, Functional::J));
            jobs.push((b, Functional::JInf));
        }
        let solves = self.solve_all(spec, &jobs);
        let (failures, mut notes) = solve_notes(&solves);
        let inputs = self.inputs(spec, c, splits.iter().map(|s| s.0).collect(), json!({ "fractions": fractions }))?;
        if !failures.is_empty() {
            return Ok(inconclusive("comparison", inputs, failures));
        }
        if !spec.has_strict_region() {
            notes.push("F equals its limit everywhere; no strict gap is expected".into());
        }
        let res: Vec<&MinimizeResult> = solves.iter().map(|s| s.ok().expect("checked")).collect();
        let (energy_c, energy_inf) = (res[0].energy, res[1].energy);
        let tol = strict_tolerance(energy_c, res.iter().map(|r| r.energy_error));
        let gap = energy_inf - energy_c;
        let mut split_gaps = Vec::new();
        let mut rows = Vec::new();
        for (k, &(a, b)) in splits.iter().enumerate() {
            let (ea, eb) = (res[2 + 2 * k].energy, res[3 + 2 * k].energy);
            let g = ea + eb - energy_c;
            split_gaps.push(g);
            rows.push(json!({ "fraction": fractions[k], "a": a, "b": b, "energy_a": ea, "energy_inf_b": eb, "gap": g }));
        }
        // A6 domination evaluated at the minimizer of J^∞
        let u_inf = &res[1].minimizer;
        let j_at_inf = energy::energy_j(u_inf, spec).total;
        let holds = gap > tol && split_gaps.iter().all(|&g| g > tol);
        Ok(VerificationReport {
            lemma: "comparison".into(),
            inputs,
            measurements: json!({
                "energy_c": energy_c,
                "energy_inf_c": energy_inf,
                "gap": gap,
                "splits": rows,
                "j_at_inf_minimizer": j_at_inf,
                "jinf_at_inf_minimizer": energy_inf,
            }),
            tolerance: tol,
            verdict: if holds { Verdict::Pass } else { Verdict::Fail },
            notes,
        })
    }

    /// Three-point check `|Î_{c±δ} − Î_c| ≤ 0.2·|Î_c|`, reporting the
    /// observed Lipschitz ratio.
    pub fn verify_continuity(&self, spec: &NonlinearitySpec, c: f64, delta: f64) -> Result<VerificationReport> {
        if !(c > 0.0) {
            return Err(Error::Precondition("mass parameter c must be positive".into()));
        }
        if !(delta > 0.0 && delta < 0.5 * c) {
            return Err(Error::Precondition(format!("need 0 < delta < c/2, got {delta}")));
        }
        spec.validate(self.grid.dim())?;
        let jobs = [(c - delta, Functional::J), (c, Functional::J), (c + delta, Functional::J)];
        let solves = self.solve_all(spec, &jobs);
        let (failures, notes) = solve_notes(&solves);
        let inputs = self.inputs(spec, c, vec![], json!({ "delta": delta }))?;
        if !failures.is_empty() {
            return Ok(inconclusive("continuity", inputs, failures));
        }
        let res: Vec<&MinimizeResult> = solves.iter().map(|s| s.ok().expect("checked")).collect();
        let (lo, mid, hi) = (res[0].energy, res[1].energy, res[2].energy);
        let k_obs = (lo - mid).abs().max((hi - mid).abs()) / delta;
        let rescaled = energy::energy_j(&res[1].minimizer.project_mass(c + delta)?, spec).total;
        let tol = 0.2 * mid.abs();
        let holds = (lo - mid).abs() <= tol && (hi - mid).abs() <= tol;
        Ok(VerificationReport {
            lemma: "continuity".into(),
            inputs,
            measurements: json!({
                "energy_minus": lo,
                "energy_c": mid,
                "energy_plus": hi,
                "forward_difference": hi - mid,
                "backward_difference": mid - lo,
                "k_obs": k_obs,
                "rescaled_energy_plus": rescaled,
                "rescale_upper_bound_holds": hi <= rescaled + 1e-10 * (1.0 + rescaled.abs()),
            }),
            tolerance: tol,
            verdict: if holds { Verdict::Pass } else { Verdict::Fail },
            notes,
        })
    }

    /// Energies `J(Φ_λ)` for `λ = 2^0 … 2^max_power`, refining the grid so
    /// each shrunken profile stays resolved. Pass iff one is below `−bound`.
    pub fn probe_supercritical(
        &self,
        spec: &NonlinearitySpec,
        c: f64,
        bound: f64,
        max_power: u32,
    ) -> Result<VerificationReport> {
        if !(c > 0.0) {
            return Err(Error::Precondition("mass parameter c must be positive".into()));
        }
        if !(bound >= 0.0) {
            return Err(Error::Precondition("probe bound must be non-negative".into()));
        }
        let regime = spec.validate(self.grid.dim())?;
        let phi = gaussian_trial(&self.grid, spec.m(), c, self.grid.half_length() / 16.0)?;
        let probe = self.dilation_probe(spec, &phi, max_power, bound)?;
        let mut notes = probe.notes;
        if regime != Regime::Supercritical {
            notes.push(format!("growth regime is {regime:?}, not supercritical"));
        }
        Ok(VerificationReport {
            lemma: "supercritical".into(),
            inputs: self.inputs(spec, c, vec![], json!({ "bound": bound, "max_power": max_power }))?,
            measurements: json!({
                "lambdas": probe.lambdas,
                "energies": probe.energies,
                "points": probe.points,
                "min_energy": probe.min_energy,
                "regime": regime,
            }),
            tolerance: bound,
            verdict: probe.verdict,
            notes,
        })
    }

    fn dilation_probe(&self, spec: &NonlinearitySpec, phi: &VectorField, max_power: u32, bound: f64) -> Result<Probe> {
        let mut probe = Probe {
            lambdas: Vec::new(),
            energies: Vec::new(),
            points: Vec::new(),
            min_energy: f64::INFINITY,
            notes: Vec::new(),
            verdict: Verdict::Fail,
        };
        let n = self.grid.dim();
        let mut refine = 0u32;
        for j in 0..=max_power {
            let lambda = 2f64.powi(j as i32);
            let resolved = loop {
                let points = self.grid.points() << refine;
                if points.checked_pow(n as u32).map_or(true, |t| t > self.point_budget) {
                    break None;
                }
                let target = Grid::new(n, points, self.grid.half_length())?;
                let d = phi.dilate_onto(lambda, &target)?;
                if d.warnings.is_empty() {
                    break Some(d.field);
                }
                refine += 1;
            };
            let Some(field) = resolved else {
                probe.notes.push(format!(
                    "λ = {lambda} needs more than {} grid points; probe stopped",
                    self.point_budget
                ));
                probe.verdict = Verdict::Inconclusive;
                break;
            };
            let e = energy::energy_j(&field, spec).total;
            probe.lambdas.push(lambda);
            probe.energies.push(e);
            probe.points.push(field.grid().points());
            probe.min_energy = probe.min_energy.min(e);
            if e < -bound {
                probe.verdict = Verdict::Pass;
                break;
            }
        }
        Ok(probe)
    }

    /// Critical mass `c* = (1/(2·A·A″))^{N/4}` for a mass-critical spec, with
    /// a flow run at `0.5·c*` and a dilation probe at `2·c*`.
    pub fn critical_threshold(&self, spec: &NonlinearitySpec, a: f64, probe_bound: f64) -> Result<CriticalReport> {
        let dim = self.grid.dim();
        if spec.regime(dim) != Regime::Critical {
            return Err(Error::Precondition(format!(
                "critical threshold needs growth exponent 4/N = {}, got {}",
                4.0 / dim as f64,
                spec.growth_exponent()
            )));
        }
        if !(a > 0.0) {
            return Err(Error::Precondition("growth constant A must be positive".into()));
        }
        spec.validate(dim)?;
        let ell = spec.growth_exponent();
        let a_dd = estimate_gn_constant(&self.grid, ell);
        let c_star = critical_mass(a, a_dd, dim);

        let below = solve_multistart(&self.grid, 0.5 * c_star, spec, &self.flow, Functional::J).map(|r| r.best);
        let (below_energy, below_converged, below_note) = match &below {
            Ok(r) => (Some(r.energy), r.converged, None),
            Err(e) => (None, false, Some(format!("flow at 0.5·c* failed: {e}"))),
        };
        let below_verdict = if below_converged && below_energy.is_some_and(f64::is_finite) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };

        let phi = gaussian_trial(&self.grid, spec.m(), 2.0 * c_star, self.grid.half_length() / 16.0)?;
        let probe = self.dilation_probe(spec, &phi, 10, probe_bound)?;

        let mut notes: Vec<String> = below_note.into_iter().collect();
        notes.extend(probe.notes.iter().cloned());
        Ok(CriticalReport {
            c_star,
            a,
            a_dd,
            below: BelowThreshold {
                c: 0.5 * c_star,
                energy: below_energy,
                converged: below_converged,
                verdict: below_verdict,
            },
            above: AboveThreshold {
                c: 2.0 * c_star,
                bound: probe_bound,
                lambdas: probe.lambdas,
                energies: probe.energies,
                min_energy: probe.min_energy,
                verdict: probe.verdict,
            },
            notes,
        })
    }
}

/// Small-dilation exponent `(N/2)·Σαᵢ − N + t` of the suggested constants.
pub fn negativity_exponent(spec: &NonlinearitySpec, dim: usize) -> f64 {
    let k = crate::nonlin::AssumptionConstants::suggested(spec);
    let n = dim as f64;
    0.5 * n * k.alphas.iter().sum::<f64>() - n + k.t
}

struct Probe {
    lambdas: Vec<f64>,
    energies: Vec<f64>,
    points: Vec<usize>,
    min_energy: f64,
    notes: Vec<String>,
    verdict: Verdict,
}

fn inconclusive(lemma: &str, inputs: ReportInputs, notes: Vec<String>) -> VerificationReport {
    VerificationReport {
        lemma: lemma.into(),
        inputs,
        measurements: json!({}),
        tolerance: 0.0,
        verdict: Verdict::Inconclusive,
        notes,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BelowThreshold {
    pub c: f64,
    pub energy: Option<f64>,
    pub converged: bool,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AboveThreshold {
    pub c: f64,
    pub bound: f64,
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub min_energy: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub c_star: f64,
    pub a: f64,
    pub a_dd: f64,
    pub below: BelowThreshold,
    pub above: AboveThreshold,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriticalReport {
    pub fn verdict(&self) -> Verdict {
        match (self.below.verdict, self.above.verdict) {
            (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
            (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Fail,
        }
    }

    pub fn into_report(self, spec: &NonlinearitySpec, grid: &Grid) -> Result<VerificationReport> {
        let verdict = self.verdict();
        let notes = self.notes.clone();
        Ok(VerificationReport {
            lemma: "critical-threshold".into(),
            inputs: ReportInputs {
                c: self.c_star,
                a: vec![],
                spec_digest: digest(spec)?,
                grid_digest: digest(&grid.spec())?,
                parameters: json!({ "A": self.a, "bound": self.above.bound }),
            },
            tolerance: self.above.bound,
            measurements: serde_json::to_value(&self)?,
            verdict,
            notes,
        })
    }
}
