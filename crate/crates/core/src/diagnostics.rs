//! Conserved quantities, relative entropy and its balance, and the near-diagonal
//! Poincaré constant.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, periodic_derivative, Field, FlockState, TWO_PI};
use crate::kernels::{default_eta, psi_lower_bound, KernelSpec, KernelWeights};

/// Per-snapshot diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub momentum: f64,
    pub mean_density: f64,
    pub entropy: f64,
    pub l1_dev: f64,
    pub l2_dev_sq: f64,
    pub sup_rho: f64,
    pub sup_q: f64,
    pub inf_q: f64,
    pub e_integral: f64,
    pub dissipation: f64,
    /// `∫ (ρ - ρ̄) ρ q dx`, the non-dissipative term of the entropy balance.
    pub q_production: f64,
    /// Filled in once neighboring snapshots are known.
    pub entropy_residual: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn compute(state: &FlockState, kernel: &KernelSpec) -> Result<Self> {
        let weights = KernelWeights::assemble(kernel, &state.rho)?;
        Self::with_weights(state, &weights)
    }

    pub fn with_weights(state: &FlockState, weights: &KernelWeights) -> Result<Self> {
        let rho = &state.rho;
        let mass = integrate(rho);
        let mean_density = mass / TWO_PI;
        let e = e_with_weights(state, weights);
        let q = q_from_e(&e, rho)?;
        let dx = rho.grid().dx();
        let (mut l1, mut l2, mut prod) = (0.0, 0.0, 0.0);
        for (&r, &qi) in rho.values().iter().zip(q.values()) {
            let dev = r - mean_density;
            l1 += dev.abs();
            l2 += dev * dev;
            prod += dev * r * qi;
        }
        Ok(Self {
            time: state.time,
            mass,
            momentum: state.momentum(),
            mean_density,
            entropy: entropy(rho)?,
            l1_dev: l1 * dx,
            l2_dev_sq: l2 * dx,
            sup_rho: rho.max(),
            sup_q: q.sup_abs(),
            inf_q: q.min(),
            e_integral: integrate(&e),
            dissipation: weights.dissipation(rho),
            q_production: prod * dx,
            entropy_residual: None,
        })
    }

    /// Checks `H ≥ 0` and the two-sided Csiszár–Kullback chain at tolerance `1e-10·scale`.
    pub fn check_invariants(&self) -> Result<()> {
        if self.entropy < 0.0 {
            return Err(Error::Invariant(format!(
                "negative entropy {} at t = {}",
                self.entropy, self.time
            )));
        }
        check_chain(
            self.l1_dev * self.l1_dev / (4.0 * PI),
            self.mean_density * self.entropy,
            self.l2_dev_sq,
        )
        .map(|_| ())
    }
}

fn e_with_weights(state: &FlockState, weights: &KernelWeights) -> Field {
    let du = periodic_derivative(&state.u);
    let l_rho = weights.apply(&state.rho);
    du.zip_map(&l_rho, |a, b| a + b)
}

fn q_from_e(e: &Field, rho: &Field) -> Result<Field> {
    if let Some(i) = rho.values().iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Singularity(format!(
            "q = e/ρ undefined at vacuum (ρ[{i}] = {})",
            rho[i]
        )));
    }
    Ok(e.zip_map(rho, |a, b| a / b))
}

/// `e = u' + L_ψ ρ`.
pub fn compute_e(state: &FlockState, kernel: &KernelSpec) -> Result<Field> {
    let weights = KernelWeights::assemble(kernel, &state.rho)?;
    Ok(e_with_weights(state, &weights))
}

/// `q = e / ρ`.
pub fn compute_q(state: &FlockState, kernel: &KernelSpec) -> Result<Field> {
    q_from_e(&compute_e(state, kernel)?, &state.rho)
}

/// `(1 + δ) ln(1 + δ) - δ`, accurate for small `δ`.
fn entropy_density(delta: f64) -> f64 {
    if delta.abs() < 1e-3 {
        // Σ_{n≥2} (-1)^n δ^n / (n (n - 1))
        let mut term = delta * delta;
        let mut acc = 0.0;
        for n in 2..=9 {
            let nf = n as f64;
            acc += term / (nf * (nf - 1.0));
            term *= -delta;
        }
        acc
    } else {
        (1.0 + delta) * delta.ln_1p() - delta
    }
}

/// Relative entropy `H = ∫ ρ log(ρ / ρ̄) dx` with `ρ̄ = ∫ρ / 2π`.
///
/// Evaluated as `Σ ρ̄ [(1+δ) ln(1+δ) - δ] dx`, `δ = ρ/ρ̄ - 1`; the added `-δ` term
/// integrates to zero and keeps the sum accurate near the uniform state.
pub fn entropy(rho: &Field) -> Result<f64> {
    if let Some(i) = rho.values().iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Singularity(format!("entropy undefined at ρ[{i}] = {}", rho[i])));
    }
    let mean = integrate(rho) / TWO_PI;
    let h: f64 = rho
        .values()
        .iter()
        .map(|&r| entropy_density(r / mean - 1.0))
        .sum::<f64>()
        * mean
        * rho.grid().dx();
    Ok(h)
}

/// The chain `‖ρ-ρ̄‖²_{L¹}/4π ≤ ρ̄ H ≤ ‖ρ-ρ̄‖²_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkBracket {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

fn check_chain(lower: f64, middle: f64, upper: f64) -> Result<CkBracket> {
    let slack = -1e-10 * upper.max(middle).max(lower).max(f64::MIN_POSITIVE);
    if middle - lower < slack || upper - middle < slack {
        return Err(Error::Invariant(format!(
            "Csiszár–Kullback chain fails: {lower:e} ≤ {middle:e} ≤ {upper:e}"
        )));
    }
    Ok(CkBracket { lower, middle, upper })
}

/// Evaluates and asserts the Csiszár–Kullback bracket.
pub fn ck_bracket(rho: &Field) -> Result<CkBracket> {
    let mean = integrate(rho) / TWO_PI;
    let h = entropy(rho)?;
    let dx = rho.grid().dx();
    let (l1, l2) = rho.values().iter().fold((0.0, 0.0), |(a, b), &r| {
        let d = r - mean;
        (a + d.abs(), b + d * d)
    });
    let l1 = l1 * dx;
    check_chain(l1 * l1 / (4.0 * PI), mean * h, l2 * dx)
}

/// `(1/2) ∫∫ ψ(x,y) |ρ(x) - ρ(y)|² dx dy`.
pub fn dissipation(rho: &Field, kernel: &KernelSpec) -> Result<f64> {
    Ok(KernelWeights::assemble(kernel, rho)?.dissipation(rho))
}

/// Fills `entropy_residual` for each record from a three-point time derivative
/// of the entropy (centered in the interior, one-sided at the ends).
///
/// The residual is `|dH/dt + ∫(ρ-ρ̄)ρq + D| / max(|dH/dt|, D, 1e-14)`.
pub fn fill_entropy_residuals(records: &mut [DiagnosticsRecord]) {
    let n = records.len();
    if n < 3 {
        return;
    }
    for m in 0..n {
        let c = m.clamp(1, n - 2);
        let (t0, t1, t2) = (records[c - 1].time, records[c].time, records[c + 1].time);
        let (h0, h1, h2) = (records[c - 1].entropy, records[c].entropy, records[c + 1].entropy);
        let (a, b) = (t1 - t0, t2 - t1);
        let dh = if m == c {
            -b / (a * (a + b)) * h0 + (b - a) / (a * b) * h1 + a / (b * (a + b)) * h2
        } else if m < c {
            -(2.0 * a + b) / (a * (a + b)) * h0 + (a + b) / (a * b) * h1 - a / (b * (a + b)) * h2
        } else {
            b / (a * (a + b)) * h0 - (a + b) / (a * b) * h1 + (2.0 * b + a) / (b * (a + b)) * h2
        };
        records[m].entropy_residual = Some(entropy_balance_residual(
            dh,
            records[m].q_production,
            records[m].dissipation,
        ));
    }
}

/// `|dH/dt + ∫(ρ-ρ̄)ρq + D| / max(|dH/dt|, D, 1e-14)`.
pub fn entropy_balance_residual(dh_dt: f64, q_production: f64, dissipation: f64) -> f64 {
    (dh_dt + q_production + dissipation).abs() / dh_dt.abs().max(dissipation).max(1e-14)
}

/// Constant of the near-diagonal Poincaré inequality
/// `(1/2) ∫∫_{|z|<R₀} |ρ(x) - ρ(x+z)|² ≥ c ‖ρ - ρ̄‖²_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareConstant {
    pub r0: f64,
    /// `1 - max_{k≠0} |χ̂(k)|`.
    pub epsilon: f64,
    /// Frequency attaining the maximum.
    pub argmax_k: usize,
    pub k_max: usize,
    pub c_paper: f64,
    pub c_rigorous: f64,
}

/// Fourier coefficient `∫ χ(z) e^{-ikz} dz` of the trapezoidal cutoff: height
/// `2/(3R₀)` on `|z| ≤ R₀/2`, linear to zero at `|z| = R₀`.
///
/// The trapezoid is the convolution of normalized boxes of half-widths `3R₀/4`
/// and `R₀/4`, so its transform is a product of sincs.
pub fn cutoff_transform(r0: f64, k: f64) -> f64 {
    sinc(0.75 * k * r0) * sinc(0.25 * k * r0)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Scans `1 ≤ k ≤ k_max` for `max |χ̂(k)|` and certifies it against the tail bound
/// `|χ̂(k)| ≤ 16 / (3 R₀² k²)`.
///
/// `c_rigorous = ε²/2 · min(1, 1/sup χ)`: the averaging step of the argument
/// bounds `∫ χ(y) ‖ρ - ρ(·-y)‖² dy` by `sup χ ∫_{|y|<R₀} ‖·‖² dy`, and
/// `sup χ = 2/(3R₀)` exceeds one only for `R₀ < 2/3`.
pub fn poincare_constant(r0: f64, k_max: usize) -> Result<PoincareConstant> {
    if !(r0 > 0.0 && r0 <= PI) {
        return Err(Error::Domain(format!("R₀ must lie in (0, π], got {r0}")));
    }
    if k_max < 64 {
        return Err(Error::Domain(format!("k_max must be >= 64, got {k_max}")));
    }
    let (argmax_k, max) = (1..=k_max)
        .map(|k| (k, cutoff_transform(r0, k as f64).abs()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let tail_bound = 16.0 / (3.0 * r0 * r0 * ((k_max + 1) as f64).powi(2));
    if tail_bound >= max {
        return Err(Error::Tail {
            k_max,
            tail_bound,
            scanned_max: max,
        });
    }
    let epsilon = 1.0 - max;
    let sup_chi = 2.0 / (3.0 * r0);
    Ok(PoincareConstant {
        r0,
        epsilon,
        argmax_k,
        k_max,
        c_paper: 2.0 * epsilon * epsilon,
        c_rigorous: 0.5 * epsilon * epsilon * (1.0 / sup_chi).min(1.0),
    })
}

/// [`poincare_constant`] with `k_max` doubled from 64 until the tail is certified.
pub fn poincare_constant_auto(r0: f64) -> Result<PoincareConstant> {
    let mut k_max = 64;
    loop {
        match poincare_constant(r0, k_max) {
            Err(Error::Tail { .. }) if k_max < 1 << 24 => k_max *= 2,
            other => return other,
        }
    }
}

/// `(1/2) ∫∫_{|z|<R₀} |ρ(x) - ρ(x+z)|² dz dx` on the grid (punctured at `z = 0`).
pub fn near_diagonal_energy(rho: &Field, r0: f64) -> f64 {
    let g = rho.grid();
    let n = g.n_cells();
    let h = g.dx();
    let v = rho.values();
    let mut acc = 0.0;
    for k in 1..=n / 2 {
        if k as f64 * h >= r0 {
            break;
        }
        for i in 0..n {
            if 2 * k == n && i >= n / 2 {
                continue;
            }
            let d = v[i] - v[(i + k) % n];
            acc += d * d;
        }
    }
    acc * h * h
}

/// `‖ρ - ρ̄‖²_{L²}`.
pub fn l2_deviation_sq(rho: &Field) -> f64 {
    let mean = integrate(rho) / TWO_PI;
    rho.values().iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>() * rho.grid().dx()
}

/// Both sides of the dissipation lower bound `D ≥ c(R₀) ψ̲ ‖ρ - ρ̄‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationCheck {
    pub dissipation: f64,
    pub lower_bound: f64,
    pub psi_lower: f64,
}

/// Asserts `D ≥ c_rigorous(R₀) ψ̲ ‖ρ - ρ̄‖²` with `ψ̲` at the current `sup ρ`.
pub fn dissipation_lower_check(rho: &Field, kernel: &KernelSpec) -> Result<DissipationCheck> {
    let pc = poincare_constant_auto(kernel.lower_bound_radius())?;
    let m0 = integrate(rho);
    let psi_lower = psi_lower_bound(kernel, rho.max(), m0, default_eta(kernel))?;
    let dissipation = dissipation(rho, kernel)?;
    let lower_bound = pc.c_rigorous * psi_lower * l2_deviation_sq(rho);
    if dissipation - lower_bound < -1e-10 * dissipation.max(lower_bound) {
        return Err(Error::Invariant(format!(
            "dissipation {dissipation:e} below lower bound {lower_bound:e}"
        )));
    }
    Ok(DissipationCheck {
        dissipation,
        lower_bound,
        psi_lower,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn e_and_q_constant_kernel() {
        let g = TorusGrid::new(256).unwrap();
        let rho = g.sample(|x| 1.0 + 0.5 * x.cos());
        let u = g.sample(f64::sin);
        let state = FlockState::new(rho.clone(), u, 0.0).unwrap();
        let k = KernelSpec::constant(1.0);
        let e = compute_e(&state, &k).unwrap();
        let q = compute_q(&state, &k).unwrap();
        for i in 0..256 {
            let x = g.center(i);
            let e_exact = (1.0 - PI) * x.cos();
            assert_abs_diff_eq!(e[i], e_exact, epsilon = 1e-7);
            assert_abs_diff_eq!(q[i], e_exact / (1.0 + 0.5 * x.cos()), epsilon = 2e-7);
        }
    }

    #[test]
    fn uniform_state_has_zero_e() {
        let g = TorusGrid::new(64).unwrap();
        let state = FlockState::new(g.constant(2.0), g.constant(0.3), 0.0).unwrap();
        let e = compute_e(&state, &KernelSpec::geometric(1.0, 1.0, 0.5)).unwrap();
        assert!(e.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_values() {
        let g = TorusGrid::new(256).unwrap();
        assert!(entropy(&g.constant(0.4)).unwrap().abs() < 1e-25);
        let rho = g.sample(|x| 1.0 + 0.5 * x.cos());
        // ∫ (1 + cos/2) log(1 + cos/2), independent high-precision quadrature.
        assert_abs_diff_eq!(entropy(&rho).unwrap(), 0.406_133_361_394_661_06, epsilon = 1e-6);
        let scaled = rho.map(|v| 3.0 * v);
        assert_abs_diff_eq!(entropy(&scaled).unwrap(), 3.0 * entropy(&rho).unwrap(), epsilon = 1e-13);
        assert!(entropy(&g.constant(0.0)).is_err());
    }

    #[test]
    fn entropy_series_branch_matches_direct() {
        // Reference values at 40 digits.
        let cases = [
            (-9e-4, 4.051_215_547_045_422_3e-7),
            (-1e-4, 5.000_166_675_000_500_0e-9),
            (1e-5, 4.999_983_333_416_666_2e-11),
            (5e-4, 1.249_791_718_734_380_2e-7),
            (9.99e-4, 4.988_344_157_842_822_8e-7),
            (2e-3, 1.998_667_998_402_130_3e-6),
        ];
        for (d, expected) in cases {
            let got = entropy_density(d);
            // The direct branch above the switch point keeps ~13 digits.
            let tol = if d.abs() < 1e-3 { 1e-14 } else { 1e-12 };
            assert!((got - expected).abs() <= tol * expected, "{d}: {got} vs {expected}");
        }
    }

    #[test]
    fn ck_examples() {
        let g = TorusGrid::new(128).unwrap();
        let b = ck_bracket(&g.constant(1.0)).unwrap();
        assert_eq!((b.lower, b.middle, b.upper), (0.0, 0.0, 0.0));
        let b = ck_bracket(&g.sample(|x| 1.0 + 0.9 * x.cos())).unwrap();
        assert!(b.lower < b.middle && b.middle < b.upper);
    }

    #[test]
    fn dissipation_constant_kernel() {
        let g = TorusGrid::new(128).unwrap();
        let rho = g.sample(|x| 1.0 + 0.5 * x.cos());
        let d = dissipation(&rho, &KernelSpec::constant(1.0)).unwrap();
        assert_abs_diff_eq!(d, PI * PI / 2.0, epsilon = 1e-11);
        assert_eq!(dissipation(&g.constant(1.0), &KernelSpec::constant(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn dissipation_shift_invariant() {
        let g = TorusGrid::new(64).unwrap();
        let rho = g.sample(|x| 1.0 + 0.3 * x.sin() + 0.2 * (3.0 * x).cos());
        let k = KernelSpec::geometric(1.0, 1.0, 0.8);
        let d0 = dissipation(&rho, &k).unwrap();
        let d1 = dissipation(&rho.shifted(7), &k).unwrap();
        assert_abs_diff_eq!(d0, d1, epsilon = 1e-12 * d0);
    }

    #[test]
    fn poincare_examples() {
        let pc = poincare_constant(PI, 64).unwrap();
        assert!(pc.epsilon > 0.0 && pc.epsilon < 1.0);
        // max_k |χ̂(k)| at R₀ = π and R₀ = 1, from an independent scan to k = 2000.
        assert_abs_diff_eq!(pc.epsilon, 0.729_810_176_953_765_9, epsilon = 1e-12);
        let pc1 = poincare_constant(1.0, 64).unwrap();
        assert_abs_diff_eq!(pc1.epsilon, 0.100_585_983_940_712, epsilon = 1e-12);
        assert_eq!(pc1.argmax_k, 1);
        assert!(pc1.c_rigorous <= pc1.c_paper);
        assert_abs_diff_eq!(pc1.c_rigorous, 0.5 * pc1.epsilon.powi(2), epsilon = 1e-15);
        // Small radius: the sup χ factor kicks in.
        let small = poincare_constant_auto(0.5).unwrap();
        assert_abs_diff_eq!(small.c_rigorous, 0.5 * small.epsilon.powi(2) * 0.75, epsilon = 1e-15);
        assert!(matches!(poincare_constant(0.02, 64), Err(Error::Tail { .. })));
        assert!(poincare_constant_auto(0.02).is_ok());
    }

    #[test]
    fn poincare_epsilon_monotone_in_radius() {
        let eps: Vec<f64> = (1..=30)
            .map(|i| poincare_constant_auto(PI * i as f64 / 30.0).unwrap().epsilon)
            .collect();
        for w in eps.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{eps:?}");
        }
    }

    #[test]
    fn residual_fill_uses_neighbors() {
        let mut recs: Vec<DiagnosticsRecord> = (0..5)
            .map(|i| {
                let t = i as f64 * 0.1;
                DiagnosticsRecord {
                    time: t,
                    mass: 1.0,
                    momentum: 0.0,
                    mean_density: 1.0,
                    entropy: (-t).exp(),
                    l1_dev: 0.0,
                    l2_dev_sq: 0.0,
                    sup_rho: 1.0,
                    sup_q: 0.0,
                    inf_q: 0.0,
                    e_integral: 0.0,
                    dissipation: (-t).exp(),
                    q_production: 0.0,
                    entropy_residual: None,
                }
            })
            .collect();
        fill_entropy_residuals(&mut recs);
        for r in &recs {
            assert!(r.entropy_residual.unwrap() < 1e-2);
        }
    }
}
