//! Uniform periodic box `[-L, L)^N` with Fourier-basis calculus.
//!
//! Samples are stored row-major with axis 0 slowest. Transforms are
//! unnormalized forward / `1/M^N`-normalized inverse, so that the discrete
//! Parseval identity reads `h^N Σ|f|² = (h^N / M^N) Σ|f̂|²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain description of a grid, as it appears in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(alias = "N")]
    pub dim: usize,
    #[serde(alias = "M")]
    pub points: usize,
    #[serde(alias = "L")]
    pub half_length: f64,
}

struct GridInner {
    dim: usize,
    points: usize,
    half_length: f64,
    spacing: f64,
    total: usize,
    wavenumbers: Vec<f64>,
    k_sq: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

/// Immutable periodic grid. Cloning is cheap (shared inner state).
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("points", &self.points())
            .field("half_length", &self.half_length())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.spec() == other.spec()
    }
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {points}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        let total = points
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidGrid("too many grid points".into()))?;
        let spacing = 2.0 * half_length / points as f64;
        let base = std::f64::consts::PI / half_length;
        let wavenumbers: Vec<f64> = (0..points)
            .map(|j| {
                if j <= points / 2 {
                    base * j as f64
                } else {
                    base * (j as f64 - points as f64)
                }
            })
            .collect();
        let mut k_sq = vec![0.0; total];
        for (flat, slot) in k_sq.iter_mut().enumerate() {
            let idx = unflatten(flat, points, dim);
            *slot = idx[..dim].iter().map(|&j| wavenumbers[j] * wavenumbers[j]).sum();
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(points);
        let ifft = planner.plan_fft_inverse(points);
        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                points,
                half_length,
                spacing,
                total,
                wavenumbers,
                k_sq,
                fft,
                ifft,
            }),
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Self::new(spec.dim, spec.points, spec.half_length)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim(),
            points: self.points(),
            half_length: self.half_length(),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn points(&self) -> usize {
        self.inner.points
    }

    pub fn half_length(&self) -> f64 {
        self.inner.half_length
    }

    /// Grid spacing `h = 2L/M`.
    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    pub fn total_points(&self) -> usize {
        self.inner.total
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Period of the box along every axis.
    pub fn period(&self) -> f64 {
        2.0 * self.half_length()
    }

    /// Largest periodic distance between two points of the box, `L·√N`.
    pub fn max_distance(&self) -> f64 {
        self.half_length() * (self.dim() as f64).sqrt()
    }

    /// Coordinate `x_j = -L + j·h` along one axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_length() + j as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points()).map(|j| self.coord(j)).collect()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// `|k|²` per flat index of the transform.
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.k_sq
    }

    /// Per-axis indices of a flat index; unused trailing axes are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        unflatten(flat, self.points(), self.dim())
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim()]
            .iter()
            .fold(0, |acc, &j| acc * self.points() + j)
    }

    /// Physical coordinates of a grid point; unused trailing axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    /// Euclidean norm of a grid point's coordinates (distance to the box center).
    pub fn radius(&self, flat: usize) -> f64 {
        let x = self.point(flat);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Torus distance between two grid points given by flat index.
    pub fn periodic_distance(&self, a: usize, b: usize) -> f64 {
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        let m = self.points();
        let mut d2 = 0.0;
        for axis in 0..self.dim() {
            let diff = ia[axis].abs_diff(ib[axis]);
            let cells = diff.min(m - diff) as f64 * self.spacing();
            d2 += cells * cells;
        }
        d2.sqrt()
    }

    /// Forward transform of real samples (unnormalized).
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_in_place(&mut data, false);
        data
    }

    /// Inverse transform, normalized by `1/M^N`, keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform_in_place(&mut spectrum, true);
        let scale = 1.0 / self.total_points() as f64;
        spectrum.into_iter().map(|z| z.re * scale).collect()
    }

    fn transform_in_place(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.total_points());
        let fft = if inverse { &self.inner.ifft } else { &self.inner.fft };
        let m = self.points();
        let n = self.dim();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); m];
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(m) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * m;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }
}

fn unflatten(mut flat: usize, points: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for axis in (0..dim).rev() {
        idx[axis] = flat % points;
        flat /= points;
    }
    idx
}

/// Pairwise summation in a fixed tree order.
pub(crate) fn tree_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    tree_sum(lo) + tree_sum(hi)
}

pub(crate) fn tree_sum_by<F: Fn(usize) -> f64>(len: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(start: usize, end: usize, f: &F) -> f64 {
        if end - start <= 64 {
            return (start..end).map(f).sum();
        }
        let mid = start + (end - start) / 2;
        rec(start, mid, f) + rec(mid, end, f)
    }
    rec(0, len, &f)
}

/// A real scalar sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::Precondition(format!(
                "expected {} samples, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite sample".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_points());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.total_points()],
            grid: grid.clone(),
        }
    }

    /// Samples `f(x)` at every grid point; `x` has `N` entries.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        let n = grid.dim();
        let values = (0..grid.total_points())
            .map(|flat| {
                let x = grid.point(flat);
                f(&x[..n])
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rectangle-rule quadrature `h^N Σ f`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * tree_sum(&self.values)
    }

    /// `∫ f·g` by the same quadrature.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert!(self.grid == other.grid);
        self.grid.cell_volume() * tree_sum_by(self.values.len(), |j| self.values[j] * other.values[j])
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `(h^N / M^N) Σ |f̂_k|²`, the transform-side squared L² norm.
    pub fn spectral_norm_sq(&self) -> f64 {
        let spec = self.grid.forward(&self.values);
        let scale = self.grid.cell_volume() / self.grid.total_points() as f64;
        scale * tree_sum_by(spec.len(), |j| spec[j].norm_sqr())
    }

    /// Spectral Laplacian: multiply by `-|k|²` in the Fourier basis.
    pub fn laplacian(&self) -> ScalarField {
        let mut spec = self.grid.forward(&self.values);
        for (z, &k2) in spec.iter_mut().zip(self.grid.k_squared()) {
            *z *= -k2;
        }
        ScalarField {
            values: self.grid.inverse_real(spec),
            grid: self.grid.clone(),
        }
    }

    /// `∫|∇f|²` evaluated as `(h^N / M^N) Σ |k|² |f̂_k|²`.
    pub fn grad_norm_sq(&self) -> f64 {
        let spec = self.grid.forward(&self.values);
        let k2 = self.grid.k_squared();
        let scale = self.grid.cell_volume() / self.grid.total_points() as f64;
        scale * tree_sum_by(spec.len(), |j| k2[j] * spec[j].norm_sqr())
    }

    /// Circular shift by whole grid cells: result(x) = f(x + offset·h).
    pub fn shift_cells(&self, offset: &[isize]) -> ScalarField {
        let grid = &self.grid;
        let m = grid.points() as isize;
        let n = grid.dim();
        let mut out = vec![0.0; self.values.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let idx = grid.multi_index(flat);
            let mut src = [0usize; 3];
            for a in 0..n {
                src[a] = (idx[a] as isize + offset[a]).rem_euclid(m) as usize;
            }
            *slot = self.values[grid.flat_index(&src)];
        }
        ScalarField {
            grid: grid.clone(),
            values: out,
        }
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        debug_assert!(self.grid == other.grid);
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
