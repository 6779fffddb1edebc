//! Periodic grid on the torus `[-π, π)`, grid functions, and initial data.

use std::f64::consts::PI;
use std::ops::Index;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{l_psi, KernelSpec};

pub const TWO_PI: f64 = 2.0 * PI;

/// Uniform cell-centered discretization of the torus.
///
/// Cell `i` is centered at `x_i = -π + (i + 1/2)·dx` with `dx = 2π / n_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n_cells: usize,
}

impl TorusGrid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 8 || !n_cells.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_cells must be even and >= 8, got {n_cells}"
            )));
        }
        Ok(Self { n_cells })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        TWO_PI / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        -PI + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index of `i + offset` with periodic wrap.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        let n = self.n_cells as isize;
        (i as isize + offset).rem_euclid(n) as usize
    }

    /// Geodesic distance between the centers of cells `i` and `j`.
    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        let k = self.offset(i, j);
        k as f64 * self.dx()
    }

    /// Short-arc cell offset between `i` and `j`, in `0..=n_cells/2`.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        d.min(self.n_cells - d)
    }

    /// Samples `f` at the cell centers.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: *self,
            values: (0..self.n_cells).map(|i| f(self.center(i))).collect(),
        }
    }

    pub fn constant(&self, value: f64) -> Field {
        Field {
            grid: *self,
            values: vec![value; self.n_cells],
        }
    }
}

/// A real grid function on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan. Length must still match.
    pub(crate) fn from_vec(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ |f| dx` by the midpoint rule.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.dx()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field::from_vec(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Circular shift by `k` cells: `out[i] = self[i - k]`.
    pub fn shifted(&self, k: isize) -> Field {
        let g = self.grid;
        Field::from_vec(g, (0..g.n_cells()).map(|i| self.values[g.wrap(i, -k)]).collect())
    }
}

impl Index<usize> for Field {
    type Output = f64;

    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Density and velocity at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockState {
    pub rho: Field,
    pub u: Field,
    pub time: f64,
}

impl FlockState {
    pub fn new(rho: Field, u: Field, time: f64) -> Result<Self> {
        if rho.grid() != u.grid() {
            return Err(Error::InvalidField("ρ and u live on different grids".into()));
        }
        let min = rho.min();
        if !(min > 0.0) {
            return Err(Error::InvalidField(format!("density must be positive, min ρ = {min}")));
        }
        Ok(Self { rho, u, time })
    }

    pub fn grid(&self) -> TorusGrid {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.rho)
    }

    pub fn momentum(&self) -> f64 {
        let dx = self.grid().dx();
        self.rho
            .values()
            .iter()
            .zip(self.u.values())
            .map(|(r, u)| r * u)
            .sum::<f64>()
            * dx
    }
}

/// Fourth-order central difference with periodic wrap.
pub fn periodic_derivative(f: &Field) -> Field {
    let g = f.grid();
    let n = g.n_cells();
    let v = f.values();
    let inv = 1.0 / (12.0 * g.dx());
    let out = (0..n)
        .map(|i| {
            let p1 = v[(i + 1) % n];
            let p2 = v[(i + 2) % n];
            let m1 = v[(i + n - 1) % n];
            let m2 = v[(i + n - 2) % n];
            (8.0 * (p1 - m1) - (p2 - m2)) * inv
        })
        .collect();
    Field::from_vec(g, out)
}

/// Midpoint quadrature `Σ f_i dx` over the torus.
pub fn integrate(f: &Field) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().dx()
}

/// Solves `periodic_derivative(u) = g` for the mean-zero `u`.
///
/// The central-difference stencil is circulant with symbol
/// `i (8 sin(k dx) - sin(2k dx)) / (6 dx)`, which vanishes only at `k = 0`
/// and the Nyquist mode; those two components of `g` are discarded.
pub fn antiderivative(g: &Field) -> Field {
    let grid = g.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = g.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || k == n / 2 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let m = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        let theta = m * dx;
        let symbol = (8.0 * theta.sin() - (2.0 * theta).sin()) / (6.0 * dx);
        *c /= Complex64::new(0.0, symbol);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Field::from_vec(grid, buf.iter().map(|c| c.re * scale).collect())
}

/// Initial density families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    Uniform {
        mass: f64,
    },
    /// `∝ 1 + a cos(k x)`.
    CosineBump {
        mass: f64,
        amplitude: f64,
        mode: u32,
    },
    /// `∝ exp((cos x - 1) / width²)`, a periodic Gaussian-like bump centered at 0.
    PeriodicBump {
        mass: f64,
        width: f64,
    },
}

impl DensitySpec {
    pub fn mass(&self) -> f64 {
        match *self {
            DensitySpec::Uniform { mass }
            | DensitySpec::CosineBump { mass, .. }
            | DensitySpec::PeriodicBump { mass, .. } => mass,
        }
    }
}

/// Builds a positive density with `integrate(ρ₀) = mass`.
pub fn make_initial_density(grid: TorusGrid, spec: &DensitySpec) -> Result<Field> {
    let mass = spec.mass();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidDensity(format!("mass must be positive, got {mass}")));
    }
    let shape = match *spec {
        DensitySpec::Uniform { .. } => grid.constant(1.0),
        DensitySpec::CosineBump { amplitude, mode, .. } => {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::InvalidDensity(format!(
                    "cosine amplitude must lie in [0, 1), got {amplitude}"
                )));
            }
            let k = mode as f64;
            grid.sample(|x| 1.0 + amplitude * (k * x).cos())
        }
        DensitySpec::PeriodicBump { width, .. } => {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidDensity(format!(
                    "bump width must be positive, got {width}"
                )));
            }
            let w2 = width * width;
            grid.sample(|x| ((x.cos() - 1.0) / w2).exp())
        }
    };
    normalize_mass(shape, mass)
}

fn normalize_mass(shape: Field, mass: f64) -> Result<Field> {
    let min = shape.min();
    if !(min > 0.0) {
        return Err(Error::InvalidDensity(format!("density not positive (min {min})")));
    }
    let total = integrate(&shape);
    Ok(shape.map(|v| v * mass / total))
}

/// Parses a single-column CSV (header `rho`) of density samples and rescales it to `mass`.
pub fn density_from_csv(text: &str, grid: TorusGrid, mass: f64) -> Result<Field> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("rho") => {}
        other => {
            return Err(Error::InvalidDensity(format!(
                "expected header `rho`, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let values = lines
        .enumerate()
        .map(|(row, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::InvalidDensity(format!("row {}: cannot parse {l:?}: {e}", row + 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidDensity(format!(
            "row {}: density must be positive and finite, got {}",
            i + 2,
            values[i]
        )));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidDensity(format!("mass must be positive, got {mass}")));
    }
    let field = Field::new(grid, values)?;
    normalize_mass(field, mass)
}

/// Velocity whose e-quantity `u' + L_ψ ρ` vanishes, with mean `u_mean`.
pub fn make_zero_e_velocity(rho0: &Field, kernel: &KernelSpec, u_mean: f64) -> Result<Field> {
    let zero = rho0.grid().constant(0.0);
    make_velocity_for_e(rho0, kernel, &zero, u_mean)
}

/// `e = s ρ (sin x - c)` with `c` chosen so that `∫ e = 0` and `s` so that
/// `max |e/ρ|` on the grid equals `sup_q`.
pub fn make_sine_e(rho: &Field, sup_q: f64) -> Field {
    let sines = rho.grid().sample(f64::sin);
    let c = integrate(&rho.zip_map(&sines, |r, s| r * s)) / integrate(rho);
    let shape = sines.map(|s| s - c);
    let scale = sup_q / shape.sup_abs();
    rho.zip_map(&shape, |r, q| r * scale * q)
}

/// Velocity whose e-quantity equals `e_target`, with mean `u_mean`.
///
/// Requires `∫ e_target = 0`; `∫ L_ψ ρ = 0` holds for every symmetric kernel.
pub fn make_velocity_for_e(rho0: &Field, kernel: &KernelSpec, e_target: &Field, u_mean: f64) -> Result<Field> {
    let l_rho = l_psi(kernel, rho0, rho0)?;
    let residual = integrate(&l_rho);
    let tolerance = 1e-10 * rho0.l1_norm();
    if residual.abs() > tolerance {
        return Err(Error::Periodicity {
            residual: residual.abs(),
            tolerance,
        });
    }
    let e_mean = integrate(e_target);
    let e_tol = 1e-10 * (e_target.l1_norm() + rho0.l1_norm());
    if e_mean.abs() > e_tol {
        return Err(Error::Periodicity {
            residual: e_mean.abs(),
            tolerance: e_tol,
        });
    }
    let rhs = e_target.zip_map(&l_rho, |e, l| e - l);
    let u = antiderivative(&rhs);
    Ok(u.map(|v| v + u_mean))
}
