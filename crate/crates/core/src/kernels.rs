//! Communication kernels, the operator `L_ψ f = ∫ ψ(x,y)(f(y) - f(x)) dy`, and the
//! alignment force.
//!
//! All sums run over symmetric pairs `(i, i ± k)`, `1 ≤ k ≤ K`, where `K` is the
//! last cell offset that meets the kernel support. For the singular classes the
//! quadrature weight differs from the pointwise kernel value in two places:
//!
//! * the cell straddling `|z| = R₀` is weighted by the fraction of it lying inside
//!   the support;
//! * the nearest-neighbor weight is multiplied by `1 - ζ(α - 1)`, which removes
//!   the leading `O(dx^{2-α})` error of the punctured sum (the classical
//!   zeta-corrected trapezoidal rule for `|z|^{-1-α}` singularities).
//!
//! Both modifications are symmetric in `(i, j)`, so `L_ψ` of a constant vanishes
//! and `∫ L_ψ f = 0` to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid, TWO_PI};
use crate::special::zeta;

/// Shape of a Lipschitz convolution kernel, scaled by `λ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzProfile {
    /// `λ` on `|z| ≤ R₀/2`, linear decay to `0` at `|z| = R₀`, zero beyond.
    #[default]
    Plateau,
    /// `λ` on the whole torus.
    Constant,
}

/// Communication kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelSpec {
    Lipschitz {
        lambda: f64,
        r0: f64,
        #[serde(default)]
        profile: LipschitzProfile,
    },
    /// `λ χ_{R₀}(|z|) / |z|^{1+α}`.
    Geometric { lambda: f64, r0: f64, alpha: f64 },
    /// `λ χ_{R₀}(|z|) / (|z|^{1+α-τ} d(x,y)^τ)` with `d` the mass on the short arc.
    Topological { lambda: f64, r0: f64, alpha: f64, tau: f64 },
}

impl KernelSpec {
    pub fn plateau(lambda: f64, r0: f64) -> Self {
        KernelSpec::Lipschitz {
            lambda,
            r0,
            profile: LipschitzProfile::Plateau,
        }
    }

    pub fn constant(lambda: f64) -> Self {
        KernelSpec::Lipschitz {
            lambda,
            r0: std::f64::consts::PI,
            profile: LipschitzProfile::Constant,
        }
    }

    pub fn geometric(lambda: f64, r0: f64, alpha: f64) -> Self {
        KernelSpec::Geometric { lambda, r0, alpha }
    }

    pub fn topological(lambda: f64, r0: f64, alpha: f64, tau: f64) -> Self {
        KernelSpec::Topological { lambda, r0, alpha, tau }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            KernelSpec::Lipschitz { lambda, .. }
            | KernelSpec::Geometric { lambda, .. }
            | KernelSpec::Topological { lambda, .. } => lambda,
        }
    }

    pub fn r0(&self) -> f64 {
        match *self {
            KernelSpec::Lipschitz { r0, .. }
            | KernelSpec::Geometric { r0, .. }
            | KernelSpec::Topological { r0, .. } => r0,
        }
    }

    /// Singularity order `α`; `None` for Lipschitz kernels.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            KernelSpec::Lipschitz { .. } => None,
            KernelSpec::Geometric { alpha, .. } | KernelSpec::Topological { alpha, .. } => Some(alpha),
        }
    }

    /// Topological weight `τ`; zero for geometric kernels.
    pub fn tau(&self) -> f64 {
        match *self {
            KernelSpec::Topological { tau, .. } => tau,
            _ => 0.0,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            KernelSpec::Lipschitz { .. } => "lipschitz",
            KernelSpec::Geometric { .. } => "geometric",
            KernelSpec::Topological { .. } => "topological",
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        matches!(self, KernelSpec::Lipschitz { .. })
    }

    /// Whether kernel values depend on the density (only the topological class with `τ > 0`).
    pub fn depends_on_density(&self) -> bool {
        self.tau() > 0.0
    }

    /// Radius `r` on which `ψ ≥ λ` holds: `R₀/2` for the plateau profile, `R₀` otherwise.
    ///
    /// The near-diagonal lower bounds are evaluated on this radius.
    pub fn lower_bound_radius(&self) -> f64 {
        match *self {
            KernelSpec::Lipschitz {
                r0,
                profile: LipschitzProfile::Plateau,
                ..
            } => 0.5 * r0,
            _ => self.r0(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        let r0 = self.r0();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidKernel(format!("λ must be positive, got {lambda}")));
        }
        if !(r0 > 0.0 && r0 <= std::f64::consts::PI) {
            return Err(Error::InvalidKernel(format!("R₀ must lie in (0, π], got {r0}")));
        }
        if let Some(alpha) = self.alpha() {
            if !(alpha > 0.0 && alpha < 2.0) {
                return Err(Error::InvalidKernel(format!("α must lie in (0, 2), got {alpha}")));
            }
        }
        let tau = self.tau();
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidKernel(format!("τ must be >= 0, got {tau}")));
        }
        if self.is_lipschitz() {
            // Sampled check of ψ ≥ λ on the lower-bound radius and evenness.
            let radius = self.lower_bound_radius();
            for s in 0..=1000 {
                let z = radius * s as f64 / 1000.0;
                let v = self.profile(z);
                if v < lambda * (1.0 - 1e-12) || v != self.profile(-z) {
                    return Err(Error::InvalidKernel(format!(
                        "Lipschitz profile violates ψ ≥ λ at z = {z}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Lipschitz profile `ψ(z)` at signed displacement `z` (geodesic, `|z| ≤ π`).
    ///
    /// Returns 0 for the singular variants.
    pub fn profile(&self, z: f64) -> f64 {
        match *self {
            KernelSpec::Lipschitz { lambda, r0, profile } => {
                let a = z.abs();
                match profile {
                    LipschitzProfile::Constant => lambda,
                    LipschitzProfile::Plateau => {
                        if a <= 0.5 * r0 {
                            lambda
                        } else if a < r0 {
                            lambda * (r0 - a) / (0.5 * r0)
                        } else {
                            0.0
                        }
                    }
                }
            }
            _ => 0.0,
        }
    }

    /// Kernel value at geodesic distance `z > 0` and topological distance `d > 0`.
    ///
    /// `d` is ignored unless the kernel is topological with `τ > 0`.
    pub fn value_at(&self, z: f64, d: f64) -> f64 {
        let z = z.abs();
        match *self {
            KernelSpec::Lipschitz { .. } => self.profile(z),
            KernelSpec::Geometric { lambda, r0, alpha } => {
                if z > r0 {
                    0.0
                } else {
                    lambda * z.powf(-1.0 - alpha)
                }
            }
            KernelSpec::Topological { lambda, r0, alpha, tau } => {
                if z > r0 {
                    0.0
                } else {
                    lambda * z.powf(-1.0 - alpha + tau) * d.powf(-tau)
                }
            }
        }
    }
}

/// Cumulative mass at cell centers, used for topological distances.
///
/// Between neighboring centers the density is integrated with the four-point
/// rule `dx/24 (-ρ_{m-1} + 13ρ_m + 13ρ_{m+1} - ρ_{m+2})`, which is exact for
/// cubics; over a full period it sums to the midpoint mass.
#[derive(Debug, Clone)]
pub struct MassPrefix {
    prefix: Vec<f64>,
    total: f64,
}

impl MassPrefix {
    pub fn new(rho: &Field) -> Self {
        let g = rho.grid();
        let n = g.n_cells();
        let v = rho.values();
        let h = g.dx() / 24.0;
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in 0..n {
            let seg = h * (-v[(m + n - 1) % n] + 13.0 * v[m] + 13.0 * v[(m + 1) % n] - v[(m + 2) % n]);
            acc += seg;
            prefix.push(acc);
        }
        Self { total: acc, prefix }
    }

    /// Mass on the forward arc from center `i` to center `i + k`.
    #[inline]
    fn forward(&self, i: usize, k: usize) -> f64 {
        let n = self.prefix.len() - 1;
        let j = i + k;
        if j < n {
            self.prefix[j] - self.prefix[i]
        } else {
            self.total - self.prefix[i] + self.prefix[j - n]
        }
    }

    /// Mass on the short arc between centers `i` and `i + k` (`k ≤ n/2`).
    ///
    /// At the antipode both arcs are equally short; the smaller mass is used so
    /// the value stays symmetric.
    #[inline]
    pub fn short_arc(&self, i: usize, k: usize) -> f64 {
        let n = self.prefix.len() - 1;
        let d = self.forward(i, k);
        if 2 * k == n {
            d.min(self.total - d)
        } else {
            d
        }
    }
}

/// Topological distance `|∫_{x_i}^{x_j} ρ|` along the short arc.
pub fn topological_distance(rho: &Field, i: usize, j: usize) -> f64 {
    let g = rho.grid();
    if i == j {
        return 0.0;
    }
    let (lo, hi) = (i.min(j), i.max(j));
    let n = g.n_cells();
    let prefix = MassPrefix::new(rho);
    if hi - lo <= n / 2 {
        prefix.short_arc(lo, hi - lo)
    } else {
        prefix.short_arc(hi, n - (hi - lo))
    }
}

/// Pointwise kernel value `ψ(x_i, x_j)` on the grid; zero on the diagonal.
pub fn kernel_value(spec: &KernelSpec, rho: &Field, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let g = rho.grid();
    let z = g.geodesic(i, j);
    let d = if spec.depends_on_density() {
        topological_distance(rho, i, j)
    } else {
        0.0
    };
    spec.value_at(z, d)
}

/// Quadrature weights `w(i, k)` for the pair `(i, i + k)`, `1 ≤ k ≤ K`.
///
/// The pair `(i, i - k)` uses `w(i - k, k)`, so the weight matrix is symmetric by
/// construction.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    grid: TorusGrid,
    max_offset: usize,
    storage: WeightStorage,
}

#[derive(Debug, Clone)]
enum WeightStorage {
    /// Convolution kernels: one weight per offset.
    Circulant(Vec<f64>),
    /// Density-dependent kernels: `n × K`, row-major.
    Full(Vec<f64>),
}

impl KernelWeights {
    /// Assembles quadrature weights for `spec` at density `rho`.
    pub fn assemble(spec: &KernelSpec, rho: &Field) -> Result<Self> {
        let grid = rho.grid();
        let n = grid.n_cells();
        let h = grid.dx();
        let r0 = spec.r0();
        let half = n / 2;

        // Last offset whose cell [(k-1/2)h, (k+1/2)h] meets the support.
        let max_offset = match spec {
            KernelSpec::Lipschitz { .. } => (1..=half)
                .take_while(|&k| spec.profile(k as f64 * h) > 0.0)
                .last()
                .unwrap_or(0),
            _ => (1..=half)
                .take_while(|&k| (k as f64 - 0.5) * h < r0)
                .last()
                .unwrap_or(0),
        };

        // Offset-only factor: geometric part of the kernel times quadrature corrections.
        let offset_factor: Vec<f64> = (1..=max_offset)
            .map(|k| {
                let z = k as f64 * h;
                match *spec {
                    KernelSpec::Lipschitz { .. } => spec.profile(z),
                    KernelSpec::Geometric { lambda, alpha, .. } | KernelSpec::Topological { lambda, alpha, .. } => {
                        let tau = spec.tau();
                        let mut w = lambda * z.powf(-1.0 - alpha + tau);
                        w *= support_fraction(k, half, h, r0);
                        if k == 1 {
                            w *= 1.0 - zeta(alpha - 1.0);
                        }
                        w
                    }
                }
            })
            .collect();

        let storage = if spec.depends_on_density() {
            if let Some(i) = rho.values().iter().position(|&r| !(r > 0.0)) {
                return Err(Error::Singularity(format!(
                    "topological kernel needs ρ > 0, found ρ[{i}] = {}",
                    rho[i]
                )));
            }
            let tau = spec.tau();
            let prefix = MassPrefix::new(rho);
            let mut full = vec![0.0; n * max_offset];
            for i in 0..n {
                let row = &mut full[i * max_offset..(i + 1) * max_offset];
                for (k0, w) in row.iter_mut().enumerate() {
                    let d = prefix.short_arc(i, k0 + 1);
                    if !(d > 0.0) {
                        return Err(Error::Singularity(format!(
                            "non-positive topological distance {d} between cells {i} and {}",
                            (i + k0 + 1) % n
                        )));
                    }
                    *w = offset_factor[k0] * (-tau * d.ln()).exp();
                }
            }
            WeightStorage::Full(full)
        } else {
            WeightStorage::Circulant(offset_factor)
        };

        Ok(Self {
            grid,
            max_offset,
            storage,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn max_offset(&self) -> usize {
        self.max_offset
    }

    /// Weight of the pair `(i, i + k)`.
    #[inline]
    pub fn weight(&self, i: usize, k: usize) -> f64 {
        match &self.storage {
            WeightStorage::Circulant(w) => w[k - 1],
            WeightStorage::Full(w) => w[i * self.max_offset + k - 1],
        }
    }

    /// Weight between arbitrary cells `i ≠ j`; zero outside the support.
    pub fn weight_between(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n_cells();
        let k = self.grid.offset(i, j);
        if k == 0 || k > self.max_offset {
            return 0.0;
        }
        // Canonical representative: the cell from which `k` steps forward reach the other.
        let from = if (i + k) % n == j { i } else { j };
        self.weight(from, k)
    }

    /// Visits every symmetric pair sum at cell `i`:
    /// `Σ_k [w(i,k) g(i, i+k) + w(i-k,k) g(i, i-k)]`.
    #[inline]
    fn row_sum(&self, i: usize, mut g: impl FnMut(usize) -> f64) -> f64 {
        let n = self.grid.n_cells();
        let half = n / 2;
        let mut acc = 0.0;
        for k in 1..=self.max_offset {
            let jp = (i + k) % n;
            if 2 * k == n {
                acc += self.weight(i, k) * g(jp);
                continue;
            }
            let jm = (i + n - k) % n;
            debug_assert!(k < half);
            acc += self.weight(i, k) * g(jp) + self.weight(jm, k) * g(jm);
        }
        acc
    }

    /// `L_ψ f` with the assembled weights.
    pub fn apply(&self, f: &Field) -> Field {
        let v = f.values();
        let h = self.grid.dx();
        let out = (0..self.grid.n_cells())
            .map(|i| {
                let fi = v[i];
                self.row_sum(i, |j| v[j] - fi) * h
            })
            .collect();
        Field::from_vec(self.grid, out)
    }

    /// `∫ ψ(x,y)(u(y) - u(x)) ρ(y) dy`.
    pub fn alignment(&self, rho: &Field, u: &Field) -> Field {
        let r = rho.values();
        let w = u.values();
        let h = self.grid.dx();
        let out = (0..self.grid.n_cells())
            .map(|i| {
                let ui = w[i];
                self.row_sum(i, |j| (w[j] - ui) * r[j]) * h
            })
            .collect();
        Field::from_vec(self.grid, out)
    }

    /// Row sums `Σ_j w_ij ρ_j dx`, the local relaxation rate of the alignment force.
    pub fn relaxation_rates(&self, rho: &Field) -> Field {
        let r = rho.values();
        let h = self.grid.dx();
        let out = (0..self.grid.n_cells())
            .map(|i| self.row_sum(i, |j| r[j]) * h)
            .collect();
        Field::from_vec(self.grid, out)
    }

    /// `(1/2) ∫∫ ψ(x,y) |f(x) - f(y)|² dx dy`, each unordered pair counted once.
    pub fn dissipation(&self, f: &Field) -> f64 {
        let n = self.grid.n_cells();
        let h = self.grid.dx();
        let v = f.values();
        let mut acc = 0.0;
        for i in 0..n {
            for k in 1..=self.max_offset {
                if 2 * k == n && i >= n / 2 {
                    continue;
                }
                let d = v[i] - v[(i + k) % n];
                acc += self.weight(i, k) * d * d;
            }
        }
        acc * h * h
    }
}

/// Fraction of the cell at offset `k` lying within `|z| < r0`.
fn support_fraction(k: usize, half: usize, h: f64, r0: f64) -> f64 {
    let lo = (k as f64 - 0.5) * h;
    let width = if k == half { 0.5 * h } else { h };
    ((r0 - lo) / width).clamp(0.0, 1.0)
}

/// `L_ψ f(x_i) = Σ_j ψ(x_i, x_j)(f_j - f_i) dx`.
pub fn l_psi(spec: &KernelSpec, rho: &Field, f: &Field) -> Result<Field> {
    Ok(KernelWeights::assemble(spec, rho)?.apply(f))
}

/// Alignment force `∫ ψ(x,y)(u(y) - u(x)) ρ(y) dy`.
pub fn alignment_force(spec: &KernelSpec, rho: &Field, u: &Field) -> Result<Field> {
    Ok(KernelWeights::assemble(spec, rho)?.alignment(rho, u))
}

/// Exponent `η` used by default in the near-diagonal lower bound:
/// `τ` when `τ ≤ 1 + α`, otherwise `1 + α`.
pub fn default_eta(spec: &KernelSpec) -> f64 {
    match spec.alpha() {
        None => 0.0,
        Some(alpha) => spec.tau().min(1.0 + alpha),
    }
}

/// Lower bound on `inf{ψ(x,y,t) : |x - y| < R₀}`.
///
/// Lipschitz: `λ`. Singular: `λ / (R₀^{1+α-η} M₀^η ‖ρ‖_∞^{τ-η})` for
/// `η ∈ [0, min(τ, 1+α)]`.
pub fn psi_lower_bound(spec: &KernelSpec, rho_sup: f64, m0: f64, eta: f64) -> Result<f64> {
    match *spec {
        KernelSpec::Lipschitz { lambda, .. } => Ok(lambda),
        KernelSpec::Geometric { .. } | KernelSpec::Topological { .. } => {
            let alpha = spec.alpha().unwrap_or_default();
            let tau = spec.tau();
            let upper = tau.min(1.0 + alpha);
            if !(0.0..=upper).contains(&eta) {
                return Err(Error::Domain(format!("η must lie in [0, {upper}], got {eta}")));
            }
            let lambda = spec.lambda();
            let r0 = spec.r0();
            Ok(lambda / (r0.powf(1.0 + alpha - eta) * m0.powf(eta) * rho_sup.powf(tau - eta)))
        }
    }
}

/// `‖ψ‖_{L¹}` and `‖ψ‖_{L∞}` of a Lipschitz kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelNorms {
    pub l1_norm: f64,
    pub linf_norm: f64,
}

/// Closed-form norms of the Lipschitz profiles.
///
/// Plateau: `‖ψ‖_{L¹} = 3λR₀/2`. Constant: `‖ψ‖_{L¹} = 2πλ`. Both have `‖ψ‖_{L∞} = λ`.
pub fn lipschitz_norms(spec: &KernelSpec) -> Result<KernelNorms> {
    match *spec {
        KernelSpec::Lipschitz { lambda, r0, profile } => Ok(KernelNorms {
            l1_norm: match profile {
                LipschitzProfile::Plateau => 1.5 * lambda * r0,
                LipschitzProfile::Constant => TWO_PI * lambda,
            },
            linf_norm: lambda,
        }),
        _ => Err(Error::Variant {
            op: "lipschitz_norms",
            variant: spec.variant_name(),
        }),
    }
}
