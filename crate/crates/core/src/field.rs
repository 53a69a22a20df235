//! Vector fields on the grid and the geometry of the mass sphere.

use crate::error::{Error, Result};
use crate::grid::{tree_sum_by, Grid, ScalarField};

/// `m` real components sampled on one shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Precondition("vector field needs at least one component".into()))?;
        if components.iter().any(|c| c.grid() != first.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: &Grid, m: usize) -> Self {
        assert!(m >= 1, "component count must be positive");
        VectorField {
            components: vec![ScalarField::zeros(grid); m],
        }
    }

    /// Builds a field from a closure returning all `m` component values at `x`.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: &Grid, m: usize, f: F) -> Self {
        let n = grid.dim();
        let mut comps = vec![Vec::with_capacity(grid.total_points()); m];
        for flat in 0..grid.total_points() {
            let x = grid.point(flat);
            let vals = f(&x[..n]);
            for (c, v) in comps.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        VectorField {
            components: comps
                .into_iter()
                .map(|v| ScalarField::from_values_unchecked(grid.clone(), v))
                .collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Values of all components at one grid point.
    pub fn at(&self, flat: usize, out: &mut [f64]) {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            *slot = c.values()[flat];
        }
    }

    /// `Σᵢ ∫ uᵢ²`.
    pub fn mass(&self) -> f64 {
        self.components.iter().map(ScalarField::norm_sq).sum()
    }

    /// Per-component `∫ uᵢ²` (diagnostic only; the constraint is on the total).
    pub fn component_masses(&self) -> Vec<f64> {
        self.components.iter().map(ScalarField::norm_sq).collect()
    }

    /// `Σᵢ ∫ uᵢ vᵢ`.
    pub fn inner(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// `Σᵢ ∫|∇uᵢ|²`.
    pub fn grad_norm_sq(&self) -> f64 {
        self.components.iter().map(ScalarField::grad_norm_sq).sum()
    }

    /// Pointwise `|u|² = Σᵢ uᵢ²`.
    pub fn density(&self) -> ScalarField {
        let grid = self.grid();
        let values = (0..grid.total_points())
            .map(|j| self.components.iter().map(|c| c.values()[j].powi(2)).sum())
            .collect();
        ScalarField::from_values_unchecked(grid.clone(), values)
    }

    pub fn scaled(&self, factor: f64) -> VectorField {
        self.map_components(|c| c.scaled(factor))
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.axpby(a, y, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.axpby(1.0, other, 1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.values().iter().all(|v| v.is_finite()))
    }

    pub(crate) fn map_components<F: Fn(&ScalarField) -> ScalarField>(&self, f: F) -> VectorField {
        VectorField {
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Rescales onto the sphere `mass = c²`.
    pub fn project_mass(&self, c: f64) -> Result<VectorField> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Precondition(format!("target mass radius must be positive, got {c}")));
        }
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let factor = c / mass.sqrt();
        if factor == 1.0 {
            return Ok(self.clone());
        }
        Ok(self.scaled(factor))
    }

    /// `λ^{N/2} u(λx)` on the same grid.
    pub fn dilate(&self, lambda: f64) -> Result<VectorField> {
        Ok(self.dilate_onto(lambda, self.grid())?.field)
    }

    /// `λ^{N/2} u(λx)` sampled on `target`, which must cover the same box.
    ///
    /// Values of `u` between samples come from its trigonometric interpolant.
    /// Sample points with `λx` outside the box read zero: the field is taken
    /// to be the restriction of a function on `R^N` that has decayed at the
    /// box boundary.
    pub fn dilate_onto(&self, lambda: f64, target: &Grid) -> Result<Dilation> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Precondition(format!("dilation factor must be positive, got {lambda}")));
        }
        let src = self.grid();
        if target.dim() != src.dim() || target.half_length() != src.half_length() {
            return Err(Error::Precondition("dilation target must share the box".into()));
        }
        let n = src.dim();
        let table = AxisTable::new(src, target, lambda);
        let amplitude = lambda.powf(n as f64 / 2.0);
        let mut components = Vec::with_capacity(self.m());
        for comp in &self.components {
            let mut data = comp.values().to_vec();
            let mut shape = [src.points(); 3];
            for axis in 0..n {
                data = table.apply(&data, &mut shape, n, axis);
            }
            for v in data.iter_mut() {
                *v *= amplitude;
            }
            components.push(ScalarField::from_values_unchecked(target.clone(), data));
        }
        let field = VectorField { components };

        let mut warnings = Vec::new();
        let before = self.mass();
        let after = field.mass();
        if before > 0.0 && ((after - before) / before).abs() > 1e-6 {
            warnings.push(format!(
                "dilation by {lambda} changed the mass by {:.3e} (relative); profile reaches the box boundary",
                (after - before) / before
            ));
        }
        let tail = field
            .components
            .iter()
            .map(spectral_tail_fraction)
            .fold(0.0, f64::max);
        if tail > RESOLUTION_TAIL {
            warnings.push(format!(
                "dilation by {lambda} is under-resolved: {tail:.3e} of the spectral weight sits in the upper half band"
            ));
        }
        Ok(Dilation { field, warnings })
    }

    /// `v(x) = u(x + z)` for an integer vector `z` of period cells.
    pub fn lattice_shift(&self, z: &[i64]) -> Result<VectorField> {
        let grid = self.grid();
        if z.len() != grid.dim() {
            return Err(Error::Precondition(format!(
                "shift has {} entries, grid dimension is {}",
                z.len(),
                grid.dim()
            )));
        }
        let cells = cells_per_unit(grid)?;
        let offset: Vec<isize> = z.iter().map(|&zi| zi as isize * cells as isize).collect();
        Ok(self.map_components(|c| c.shift_cells(&offset)))
    }

    /// Cutoff splitting around the grid point `center`: `v` keeps the part
    /// inside `2·R0`, `w` the part outside `Rn`.
    pub fn split(&self, center: usize, inner_radius: f64, outer_radius: f64) -> Result<SplitPair> {
        let grid = self.grid();
        if center >= grid.total_points() {
            return Err(Error::Precondition("split center outside the grid".into()));
        }
        if !(inner_radius > 0.0 && 2.0 * inner_radius < outer_radius && outer_radius < grid.half_length()) {
            return Err(Error::Precondition(format!(
                "need 0 < 2·R0 < Rn < L, got R0 = {inner_radius}, Rn = {outer_radius}, L = {}",
                grid.half_length()
            )));
        }
        let cap = (2.0 * outer_radius).min(grid.max_distance());
        let dist: Vec<f64> = (0..grid.total_points())
            .map(|j| grid.periodic_distance(center, j))
            .collect();
        let chi_in: Vec<f64> = dist
            .iter()
            .map(|&d| (2.0 - d / inner_radius).clamp(0.0, 1.0))
            .collect();
        let chi_out: Vec<f64> = dist
            .iter()
            .map(|&d| ((d - outer_radius) / (cap - outer_radius)).clamp(0.0, 1.0))
            .collect();
        let cut = |chi: &[f64]| {
            self.map_components(|c| {
                let values = c.values().iter().zip(chi).map(|(u, k)| u * k).collect();
                ScalarField::from_values_unchecked(grid.clone(), values)
            })
        };
        let v = cut(&chi_in);
        let w = cut(&chi_out);
        let rho = self.density();
        let annulus_mass = grid.cell_volume()
            * tree_sum_by(dist.len(), |j| {
                let d = dist[j];
                let in_annulus = (d > inner_radius && d < 2.0 * inner_radius) || (d > outer_radius && d < cap);
                if in_annulus {
                    rho.values()[j]
                } else {
                    0.0
                }
            });
        Ok(SplitPair {
            v,
            w,
            center,
            inner_radius,
            outer_radius,
            annulus_mass,
        })
    }
}

const RESOLUTION_TAIL: f64 = 1e-10;

/// Result of a dilation with any resolution or truncation warnings.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub field: VectorField,
    pub warnings: Vec<String>,
}

/// Pair of disjointly supported pieces cut out of a source field.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub v: VectorField,
    pub w: VectorField,
    pub center: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Mass of the source field inside the two transition annuli.
    pub annulus_mass: f64,
}

/// Number of grid cells per unit length; errors unless `1/h` is an integer.
pub fn cells_per_unit(grid: &Grid) -> Result<usize> {
    let inv = 1.0 / grid.spacing();
    let rounded = inv.round();
    if rounded < 1.0 || (inv - rounded).abs() > 1e-9 * inv.max(1.0) {
        return Err(Error::Precondition(format!(
            "lattice shifts need 1/h integral, got 1/h = {inv}"
        )));
    }
    Ok(rounded as usize)
}

/// Fraction of `Σ|f̂|²` carried by modes whose index exceeds `M/4` on some axis.
pub fn spectral_tail_fraction(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let m = grid.points();
    let quarter = m / 4;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (flat, z) in spec.iter().enumerate() {
        let w = z.norm_sqr();
        total += w;
        let idx = grid.multi_index(flat);
        let high = idx[..grid.dim()].iter().any(|&j| j.min(m - j) > quarter);
        if high {
            tail += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

enum Sample {
    Zero,
    Node(usize),
    Weights(Vec<f64>),
}

/// One-axis resampling table: target index → how to read the source line.
struct AxisTable {
    rows: Vec<Sample>,
    src_points: usize,
}

impl AxisTable {
    fn new(src: &Grid, target: &Grid, lambda: f64) -> Self {
        let l = src.half_length();
        let m = src.points();
        let h = src.spacing();
        let rows = (0..target.points())
            .map(|a| {
                let y = lambda * target.coord(a);
                if y < -l * (1.0 + 1e-12) || y > l * (1.0 + 1e-12) {
                    return Sample::Zero;
                }
                let t = (y + l) / h;
                let nearest = t.round();
                if (t - nearest).abs() < 1e-9 {
                    return Sample::Node((nearest as i64).rem_euclid(m as i64) as usize);
                }
                Sample::Weights((0..m).map(|j| dirichlet_weight(y - src.coord(j), m, l)).collect())
            })
            .collect();
        AxisTable { rows, src_points: m }
    }

    /// Resamples `data` (shape `shape[..n]`) along `axis`.
    fn apply(&self, data: &[f64], shape: &mut [usize; 3], n: usize, axis: usize) -> Vec<f64> {
        debug_assert_eq!(shape[axis], self.src_points);
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..n].iter().product();
        let m_in = shape[axis];
        let m_out = self.rows.len();
        let mut out = vec![0.0; outer * m_out * inner];
        for o in 0..outer {
            for (a, row) in self.rows.iter().enumerate() {
                let dst = (o * m_out + a) * inner;
                match row {
                    Sample::Zero => {}
                    Sample::Node(j) => {
                        let src = (o * m_in + j) * inner;
                        out[dst..dst + inner].copy_from_slice(&data[src..src + inner]);
                    }
                    Sample::Weights(w) => {
                        for (j, wj) in w.iter().enumerate() {
                            let src = (o * m_in + j) * inner;
                            for i in 0..inner {
                                out[dst + i] += wj * data[src + i];
                            }
                        }
                    }
                }
            }
        }
        shape[axis] = m_out;
        out
    }
}

/// Weight of the sample at offset `d` in the real trigonometric interpolant
/// on `M` points of period `2L` (Nyquist mode taken as a cosine).
fn dirichlet_weight(d: f64, m: usize, half_length: f64) -> f64 {
    let theta = std::f64::consts::PI * d / half_length;
    let n = (m / 2 - 1) as f64;
    let half = 0.5 * theta;
    let s = half.sin();
    let core = if s.abs() < 1e-8 {
        (-(m as i64 / 2 - 1)..=(m as i64 / 2 - 1))
            .map(|k| (k as f64 * theta).cos())
            .sum::<f64>()
    } else {
        ((n + 0.5) * theta).sin() / s
    };
    (core + (0.5 * m as f64 * theta).cos()) / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(grid: &Grid, m: usize, width: f64, center: f64) -> VectorField {
        VectorField::from_fn(grid, m, |x| {
            let r2: f64 = x.iter().map(|xi| (xi - center).powi(2)).sum();
            vec![(-r2 / (width * width)).exp(); m]
        })
    }

    fn random_field(grid: &Grid, m: usize, rng: &mut ChaCha8Rng) -> VectorField {
        let comps = (0..m)
            .map(|_| {
                ScalarField::new(
                    grid.clone(),
                    (0..grid.total_points()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        VectorField::new(comps).unwrap()
    }

    #[test]
    fn mass_examples() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        assert_eq!(VectorField::zeros(&g, 2).mass(), 0.0);
        let a = 0.7;
        let u = VectorField::new(vec![ScalarField::constant(&g, a); 2]).unwrap();
        assert!((u.mass() - 2.0 * a * a * 6.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_field(&g, 2, &mut rng);
        let parts = r.component_masses();
        assert!((r.mass() - parts[0] - parts[1]).abs() < 1e-14);
    }

    #[test]
    fn mixed_grids_rejected() {
        let g1 = Grid::new(1, 16, 3.0).unwrap();
        let g2 = Grid::new(1, 16, 4.0).unwrap();
        let err = VectorField::new(vec![ScalarField::zeros(&g1), ScalarField::zeros(&g2)]);
        assert!(matches!(err, Err(Error::GridMismatch)));
        assert!(VectorField::new(vec![]).is_err());
    }

    #[test]
    fn project_mass_examples() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let u = gaussian(&g, 2, 1.0, 0.0);
        let on_sphere = u.project_mass(1.3).unwrap();
        assert!((on_sphere.mass() - 1.69).abs() < 1e-12 * 1.69);
        assert_eq!(on_sphere.project_mass(1.3).unwrap(), on_sphere);

        let unit = u.project_mass(1.0).unwrap();
        let doubled = unit.project_mass(2.0).unwrap();
        let direct = unit.scaled(2.0 * (1.0 / unit.mass().sqrt()));
        assert_eq!(doubled, direct);
        assert!((doubled.mass() - 4.0).abs() < 1e-12 * 4.0);

        assert!(matches!(VectorField::zeros(&g, 1).project_mass(1.0), Err(Error::ZeroMass)));
        assert!(u.project_mass(0.0).is_err());
    }

    #[test]
    fn dilation_identity_and_gaussian() {
        let g = Grid::new(1, 256, 8.0).unwrap();
        let u = VectorField::from_fn(&g, 1, |x| vec![(-x[0] * x[0]).exp()]);
        assert_eq!(u.dilate(1.0).unwrap(), u);

        let d = u.dilate_onto(2.0, &g).unwrap();
        assert!(d.warnings.is_empty(), "{:?}", d.warnings);
        let expect = VectorField::from_fn(&g, 1, |x| vec![2f64.sqrt() * (-4.0 * x[0] * x[0]).exp()]);
        let err = d.field.axpby(1.0, &expect, -1.0).max_abs();
        assert!(err < 1e-8, "{err}");

        // Non-aligned factor goes through the interpolant.
        let d = u.dilate(1.37).unwrap();
        let expect = VectorField::from_fn(&g, 1, |x| {
            vec![1.37f64.sqrt() * (-(1.37 * x[0]).powi(2)).exp()]
        });
        assert!(d.axpby(1.0, &expect, -1.0).max_abs() < 1e-8);
    }

    #[test]
    fn dilation_preserves_mass_and_inverts() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let u = gaussian(&g, 2, 1.2, 0.0);
        for &lambda in &[0.7, 1.3, 2.0] {
            let d = u.dilate(lambda).unwrap();
            assert!(((d.mass() - u.mass()) / u.mass()).abs() < 1e-6, "λ = {lambda}");
            let back = d.dilate(1.0 / lambda).unwrap();
            assert!(back.axpby(1.0, &u, -1.0).max_abs() < 1e-6, "λ = {lambda}");
        }
    }

    #[test]
    fn dilation_warns_when_unresolved_or_truncated() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let u = gaussian(&g, 1, 1.0, 0.0);
        assert!(!u.dilate_onto(8.0, &g).unwrap().warnings.is_empty());
        assert!(!u.dilate_onto(0.1, &g).unwrap().warnings.is_empty());
        assert!(u.dilate(0.0).is_err());
    }

    #[test]
    fn lattice_shift_examples() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(&g, 2, &mut rng);
        assert_eq!(u.lattice_shift(&[0, 0]).unwrap(), u);
        let s = u.lattice_shift(&[1, -3]).unwrap();
        assert_eq!(s.lattice_shift(&[-1, 3]).unwrap(), u);
        assert_eq!(s.mass(), u.mass());
        assert!((s.grad_norm_sq() - u.grad_norm_sq()).abs() < 1e-12 * u.grad_norm_sq());
        assert!(u.lattice_shift(&[1]).is_err());

        let bad = Grid::new(1, 10, 2.0).unwrap();
        assert!(VectorField::zeros(&bad, 1).lattice_shift(&[1]).is_err());
    }

    #[test]
    fn lattice_shift_moves_by_whole_cells() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let u = VectorField::from_fn(&g, 1, |x| vec![x[0]]);
        let s = u.lattice_shift(&[1]).unwrap();
        // h = 0.5, so one cell of the lattice is two samples
        assert_eq!(s.component(0).values()[0], u.component(0).values()[2]);
    }

    #[test]
    fn split_plateaus() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let center = g.total_points() / 2;
        let inside = gaussian(&g, 2, 0.3, 0.0);
        let p = inside.split(center, 3.0, 7.0).unwrap();
        assert!(p.v.axpby(1.0, &inside, -1.0).max_abs() < 1e-14);
        assert!(p.w.max_abs() < 1e-12);

        let outside = VectorField::from_fn(&g, 1, |x| {
            let d = x[0].abs();
            vec![if d > 15.0 { 1.0 } else { 0.0 }]
        });
        let p = outside.split(center, 1.0, 7.0).unwrap();
        assert_eq!(p.v.max_abs(), 0.0);
        assert_eq!(p.w, outside);
    }

    #[test]
    fn split_rejects_bad_radii() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let u = gaussian(&g, 1, 1.0, 0.0);
        assert!(u.split(32, 2.0, 3.0).is_err());
        assert!(u.split(32, 0.0, 3.0).is_err());
        assert!(u.split(32, 1.0, 9.0).is_err());
    }

    #[test]
    fn split_two_bumps_mass_balance() {
        // Bumps at the center and at the antipodal cell, masses known by
        // quadrature of each bump alone.
        let g = Grid::new(1, 512, 16.0).unwrap();
        let center = g.total_points() / 2;
        let near = VectorField::from_fn(&g, 1, |x| vec![(-(x[0] / 0.5).powi(2)).exp()]);
        let far = VectorField::from_fn(&g, 1, |x| {
            let d = (16.0 - x[0].abs()) / 0.5;
            vec![0.5 * (-d * d).exp()]
        });
        let u = near.add(&far);
        let p = u.split(center, 3.0, 7.0).unwrap();
        let balance = p.v.mass() + p.w.mass();
        assert!((balance - u.mass()).abs() < 1e-12);
        assert!((p.v.mass() - near.mass()).abs() < 1e-12);
        assert!((p.w.mass() - far.mass()).abs() < 1e-12);
    }

    #[test]
    fn split_invariants_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 1..=2 {
            let g = Grid::new(dim, 32, 8.0).unwrap();
            let u = random_field(&g, 2, &mut rng);
            let center = rng.gen_range(0..g.total_points());
            let p = u.split(center, 1.5, 5.0).unwrap();
            for i in 0..2 {
                let (uu, v, w) = (u.component(i), p.v.component(i), p.w.component(i));
                for j in 0..g.total_points() {
                    assert_eq!(v.values()[j] * w.values()[j], 0.0);
                    assert!(v.values()[j].abs() <= uu.values()[j].abs());
                    assert!(w.values()[j].abs() <= uu.values()[j].abs());
                    let d = g.periodic_distance(center, j);
                    if d >= 3.0 {
                        assert_eq!(v.values()[j], 0.0);
                    }
                    if d <= 5.0 {
                        assert_eq!(w.values()[j], 0.0);
                    }
                }
            }
            assert!(p.v.mass() + p.w.mass() <= u.mass() + p.annulus_mass + 1e-12);
        }
    }
}
