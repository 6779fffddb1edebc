//! Reference evaluation of `L_ψ` by adaptive quadrature on analytic fields.
//!
//! Fields are trigonometric polynomials, so values, derivatives and the
//! topological distance are exact. The singular integral is symmetrized in
//! `±z`, integrated by graded Gauss–Legendre panels down to `δ`, and the
//! `(0, δ)` part is replaced by its leading Taylor term.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::kernels::{KernelSpec, LipschitzProfile};

/// `mean + Σ (a_k cos kx + b_k sin kx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub mean: f64,
    /// `(k, a_k, b_k)` with `k ≥ 1`.
    pub modes: Vec<(u32, f64, f64)>,
}

impl TrigPoly {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            modes: Vec::new(),
        }
    }

    /// `order`-th derivative at `x`.
    pub fn derivative(&self, x: f64, order: u32) -> f64 {
        let base = if order == 0 { self.mean } else { 0.0 };
        self.modes.iter().fold(base, |acc, &(k, a, b)| {
            let kf = f64::from(k);
            let phase = kf * x + f64::from(order) * PI / 2.0;
            acc + kf.powi(order as i32) * (a * phase.cos() + b * phase.sin())
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `∫_x^{x+z} p`.
    pub fn integral(&self, x: f64, z: f64) -> f64 {
        let prim = |y: f64| {
            self.modes.iter().fold(self.mean * y, |acc, &(k, a, b)| {
                let kf = f64::from(k);
                acc + (a * (kf * y).sin() - b * (kf * y).cos()) / kf
            })
        };
        prim(x + z) - prim(x)
    }

    /// Values at the cell centers.
    pub fn sample(&self, grid: TorusGrid) -> Field {
        grid.sample(|x| self.value(x))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

const PANEL_ORDER: usize = 20;
/// Inner cutoff of the singular integral, relative to `R₀`.
const TAYLOR_CUTOFF: f64 = 1e-4;

fn integrate_panels(edges: &[f64], rule: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            rule.iter().map(|&(x, wt)| wt * f(mid + half * x)).sum::<f64>() * half
        })
        .sum()
}

/// `L_ψ f(x) = p.v. ∫ ψ(x, x+z) (f(x+z) - f(x)) dz` by quadrature.
pub fn l_psi_reference(spec: &KernelSpec, rho: &TrigPoly, f: &TrigPoly, x: f64) -> f64 {
    let rule = gauss_legendre(PANEL_ORDER);
    let fx = f.value(x);
    match *spec {
        KernelSpec::Lipschitz { r0, profile, .. } => {
            let edges: Vec<f64> = match profile {
                LipschitzProfile::Constant => (0..=8).map(|j| PI * j as f64 / 8.0).collect(),
                LipschitzProfile::Plateau => (0..=8).map(|j| r0 * j as f64 / 8.0).collect(),
            };
            integrate_panels(&edges, &rule, |z| {
                spec.profile(z) * (f.value(x + z) + f.value(x - z) - 2.0 * fx)
            })
        }
        KernelSpec::Geometric { lambda, r0, alpha } | KernelSpec::Topological { lambda, r0, alpha, .. } => {
            let tau = spec.tau();
            let delta = TAYLOR_CUTOFF * r0;
            let mut edges = vec![r0];
            while *edges.last().unwrap_or(&r0) * 0.5 > delta {
                edges.push(edges.last().copied().unwrap_or(r0) * 0.5);
            }
            edges.push(delta);
            edges.reverse();
            let bracket = |z: f64| {
                let wp = rho.integral(x, z).powf(-tau);
                let wm = rho.integral(x - z, z).powf(-tau);
                wp * (f.value(x + z) - fx) + wm * (f.value(x - z) - fx)
            };
            let far = integrate_panels(&edges, &rule, |z| lambda * z.powf(-1.0 - alpha + tau) * bracket(z));
            let r = rho.value(x);
            let curvature = f.derivative(x, 2) - tau * rho.derivative(x, 1) * f.derivative(x, 1) / r;
            let near = lambda * r.powf(-tau) * curvature * delta.powf(2.0 - alpha) / (2.0 - alpha);
            far + near
        }
    }
}

/// Reference `L_ψ f` at every cell center.
pub fn l_psi_reference_field(spec: &KernelSpec, rho: &TrigPoly, f: &TrigPoly, grid: TorusGrid) -> Result<Field> {
    spec.validate()?;
    let values: Vec<f64> = grid
        .centers()
        .into_iter()
        .map(|x| l_psi_reference(spec, rho, f, x))
        .collect();
    Field::new(grid, values)
}

/// `max |a - b| / max |b|`.
pub fn relative_sup_error(a: &Field, b: &Field) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    let diff = a.zip_map(b, |x, y| x - y).sup_abs();
    let scale = b.sup_abs();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::l_psi;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let rule = gauss_legendre(PANEL_ORDER);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
        let x38: f64 = rule.iter().map(|&(x, w)| w * x.powi(38)).sum();
        assert_relative_eq!(x38, 2.0 / 39.0, max_relative = 1e-12);
    }

    #[test]
    fn trig_poly_calculus() {
        let p = TrigPoly {
            mean: 1.0,
            modes: vec![(1, 0.5, 0.0), (3, 0.0, 0.2)],
        };
        assert_relative_eq!(
            p.value(0.3),
            1.0 + 0.5 * 0.3f64.cos() + 0.2 * 0.9f64.sin(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            p.derivative(0.3, 1),
            -0.5 * 0.3f64.sin() + 0.6 * 0.9f64.cos(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            p.derivative(0.3, 2),
            -0.5 * 0.3f64.cos() - 1.8 * 0.9f64.sin(),
            max_relative = 1e-14
        );
        assert_relative_eq!(p.integral(-PI, 2.0 * PI), 2.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn constant_kernel_closed_form() {
        // ψ ≡ λ: L f = λ (∫f - 2π f(x)).
        let spec = KernelSpec::constant(2.0);
        let f = TrigPoly {
            mean: 0.0,
            modes: vec![(1, 1.0, 0.0)],
        };
        let got = l_psi_reference(&spec, &TrigPoly::constant(1.0), &f, 0.4);
        assert_relative_eq!(got, -2.0 * 2.0 * PI * 0.4f64.cos(), max_relative = 1e-12);
    }

    #[test]
    fn geometric_uniform_cosine_closed_form() {
        // L cos(x) = -2λ cos(x) ∫_0^{R₀} (1 - cos z) z^{-1-α} dz; series integrated termwise.
        let (lambda, r0, alpha): (f64, f64, f64) = (1.0, 1.0, 0.5);
        let mut integral = 0.0;
        let mut term_coef = 1.0;
        for m in 1..40 {
            term_coef /= ((2 * m - 1) * (2 * m)) as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            let p = 2.0 * m as f64 - alpha;
            integral += sign * term_coef * r0.powf(p) / p;
        }
        let spec = KernelSpec::geometric(lambda, r0, alpha);
        let f = TrigPoly {
            mean: 0.0,
            modes: vec![(1, 1.0, 0.0)],
        };
        let got = l_psi_reference(&spec, &TrigPoly::constant(1.0), &f, 0.0);
        assert_relative_eq!(got, -2.0 * lambda * integral, max_relative = 1e-9);
    }

    #[test]
    fn grid_operator_close_to_reference() {
        let g = TorusGrid::new(64).unwrap();
        let rho = TrigPoly {
            mean: 1.0,
            modes: vec![(1, 0.3, 0.1)],
        };
        let f = TrigPoly {
            mean: 0.0,
            modes: vec![(1, 0.0, 1.0), (2, 0.4, 0.0)],
        };
        for spec in [
            KernelSpec::plateau(1.0, 1.0),
            KernelSpec::geometric(1.0, 1.0, 0.5),
            KernelSpec::topological(1.0, 1.0, 0.5, 0.5),
        ] {
            let reference = l_psi_reference_field(&spec, &rho, &f, g).unwrap();
            let grid_value = l_psi(&spec, &rho.sample(g), &f.sample(g)).unwrap();
            let err = relative_sup_error(&grid_value, &reference).unwrap();
            assert!(err < 1e-2, "{spec:?}: {err}");
        }
    }
}
