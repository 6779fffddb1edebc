//! Explicit long-time bounds: exponential relaxation rate, limsup bounds on
//! `‖ρ - ρ̄‖_{L¹}`, density-amplitude envelopes and the smallness conditions
//! they require. Also compares these bounds against simulated trajectories.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{poincare_constant_auto, DiagnosticsRecord, PoincareConstant};
use crate::error::{Error, Result};
use crate::grid::TWO_PI;
use crate::kernels::{default_eta, lipschitz_norms, psi_lower_bound, KernelNorms, KernelSpec};
use crate::solver::Trajectory;

/// Which density-amplitude argument applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeCase {
    Lipschitz,
    /// `0 ≤ τ < α`
    TauBelowAlpha,
    /// `τ = α`
    TauEqualsAlpha,
    /// `α < τ < α + 1`
    TauBetween,
    /// `τ ≥ α + 1`
    TauAboveAlphaPlusOne,
}

impl AmplitudeCase {
    pub fn of(kernel: &KernelSpec) -> Self {
        match kernel.alpha() {
            None => Self::Lipschitz,
            Some(alpha) => {
                let tau = kernel.tau();
                if tau < alpha {
                    Self::TauBelowAlpha
                } else if tau == alpha {
                    Self::TauEqualsAlpha
                } else if tau < alpha + 1.0 {
                    Self::TauBetween
                } else {
                    Self::TauAboveAlphaPlusOne
                }
            }
        }
    }

    pub fn needs_smallness(self) -> bool {
        !matches!(self, Self::TauBelowAlpha | Self::TauEqualsAlpha)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Lipschitz => "lipschitz",
            Self::TauBelowAlpha => "tau_below_alpha",
            Self::TauEqualsAlpha => "tau_equals_alpha",
            Self::TauBetween => "tau_between",
            Self::TauAboveAlphaPlusOne => "tau_above_alpha_plus_one",
        }
    }
}

/// Status of one smallness condition `value < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessStatus {
    pub condition: String,
    pub value: f64,
    pub threshold: f64,
    /// `threshold - value`; positive when satisfied.
    pub margin: f64,
    pub satisfied: bool,
}

impl SmallnessStatus {
    fn new(condition: &str, value: f64, threshold: f64) -> Self {
        Self {
            condition: condition.to_string(),
            value,
            threshold,
            margin: threshold - value,
            satisfied: value < threshold,
        }
    }

    fn into_result(self) -> Result<()> {
        if self.satisfied {
            Ok(())
        } else {
            Err(Error::SmallnessViolation {
                condition: self.condition,
                value: self.value,
                threshold: self.threshold,
                margin: self.margin,
            })
        }
    }
}

/// Largest admissible `‖q₀‖_∞`, or `None` when no smallness is needed.
///
/// Lipschitz: `‖ψ‖_{L¹}`. Topological with `τ > α`: `λ M₀^{-τ} R₀^{τ-α} / (τ-α)`.
pub fn smallness_threshold(kernel: &KernelSpec, m0: f64) -> Result<Option<f64>> {
    kernel.validate()?;
    Ok(match AmplitudeCase::of(kernel) {
        AmplitudeCase::Lipschitz => Some(lipschitz_norms(kernel)?.l1_norm),
        AmplitudeCase::TauBelowAlpha | AmplitudeCase::TauEqualsAlpha => None,
        AmplitudeCase::TauBetween | AmplitudeCase::TauAboveAlphaPlusOne => {
            let (lambda, r0, tau) = (kernel.lambda(), kernel.r0(), kernel.tau());
            let gap = tau - kernel.alpha().unwrap_or_default();
            Some(lambda * m0.powf(-tau) * r0.powf(gap) / gap)
        }
    })
}

/// Strict smallness check in the `‖q₀‖_∞` form.
pub fn check_smallness(kernel: &KernelSpec, m0: f64, sup_q0: f64) -> Result<Option<SmallnessStatus>> {
    Ok(smallness_threshold(kernel, m0)?.map(|t| SmallnessStatus::new("sup_q0 < threshold", sup_q0, t)))
}

/// Relaxed form `-inf q₀ < threshold`; informational only.
pub fn relaxed_smallness(kernel: &KernelSpec, m0: f64, inf_q0: f64) -> Result<Option<SmallnessStatus>> {
    Ok(smallness_threshold(kernel, m0)?.map(|t| SmallnessStatus::new("-inf_q0 < threshold", -inf_q0, t)))
}

/// Long-time density-amplitude bound together with its logistic rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeBound {
    pub case: AmplitudeCase,
    /// `limsup ‖ρ‖_∞ ≤ bound`.
    pub bound: f64,
    /// Rate factor `A` in `Ẋ ≤ A X (B - X)`.
    pub rate: f64,
    pub optimal_r: Option<f64>,
}

/// Bound on `limsup ‖ρ(t)‖_∞` from the maximum-point inequality.
pub fn density_amplitude_bound(kernel: &KernelSpec, m0: f64, sup_q0: f64) -> Result<AmplitudeBound> {
    if let Some(status) = check_smallness(kernel, m0, sup_q0)? {
        status.into_result()?;
    }
    let case = AmplitudeCase::of(kernel);
    if case == AmplitudeCase::Lipschitz {
        let KernelNorms { l1_norm, linf_norm } = lipschitz_norms(kernel)?;
        let rate = l1_norm - sup_q0;
        return Ok(AmplitudeBound {
            case,
            bound: linf_norm * m0 / rate,
            rate,
            optimal_r: None,
        });
    }
    let (lambda, r0, tau) = (kernel.lambda(), kernel.r0(), kernel.tau());
    let alpha = kernel.alpha().unwrap_or_default();
    let s = m0.powf(tau) * sup_q0 / lambda;
    let p = 1.0 + alpha - tau;
    let (bound, rate, optimal_r) = match case {
        AmplitudeCase::TauEqualsAlpha => {
            let r = r0 * (-1.0 - s).exp();
            (m0 / r, lambda * m0.powf(-tau), Some(r))
        }
        AmplitudeCase::TauBelowAlpha | AmplitudeCase::TauBetween => {
            // r^{τ-α} = (1+α-τ) [R₀^{τ-α} - (τ-α) λ⁻¹ M₀^τ ‖q₀‖_∞]
            let r_pow = p * (r0.powf(tau - alpha) - (tau - alpha) * s);
            let r = r_pow.powf(1.0 / (tau - alpha));
            (p * m0 / r, lambda * m0.powf(-tau) * r_pow / p, Some(r))
        }
        AmplitudeCase::TauAboveAlphaPlusOne => {
            let gap = tau - alpha;
            let denom = r0.powf(gap) - gap * s;
            let bound = gap * r0.powf(tau - 1.0 - alpha) * m0 / denom;
            let rate = lambda * m0.powf(-tau) * r0.powf(gap) / gap - sup_q0;
            (bound, rate, None)
        }
        AmplitudeCase::Lipschitz => unreachable!(),
    };
    Ok(AmplitudeBound {
        case,
        bound,
        rate,
        optimal_r,
    })
}

/// Solution of the logistic comparison `Ẋ = A X (B - X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticEnvelope {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
}

impl LogisticEnvelope {
    pub fn new(a: f64, b: f64, x0: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && x0 > 0.0) {
            return Err(Error::Domain(format!(
                "logistic parameters must be positive, got A={a}, B={b}, x0={x0}"
            )));
        }
        Ok(Self { a, b, x0 })
    }

    pub fn at(&self, t: f64) -> f64 {
        logistic_envelope(self.a, self.b, self.x0, t)
    }
}

/// `B x₀ / (x₀ + (B - x₀) e^{-ABt})`.
pub fn logistic_envelope(a: f64, b: f64, x0: f64, t: f64) -> f64 {
    b * x0 / (x0 + (b - x0) * (-a * b * t).exp())
}

/// Exponential rate for `e₀ = 0`: `c(R₀) ρ̄ ψ̲`.
///
/// `ψ̲` uses `η = τ` when `τ ≤ 1+α`, otherwise `η = 1+α` with `‖ρ(t)‖_∞ ≤ rho0_sup`.
pub fn theorem1_rate(kernel: &KernelSpec, m0: f64, rho0_sup: f64) -> Result<f64> {
    kernel.validate()?;
    let c = poincare_constant_auto(kernel.lower_bound_radius())?.c_rigorous;
    let psi = psi_lower_bound(kernel, rho0_sup, m0, default_eta(kernel))?;
    Ok(c * (m0 / TWO_PI) * psi)
}

/// `M₀ ‖q₀‖_∞ ‖ψ‖_∞ / (λ c (‖ψ‖_{L¹} - ‖q₀‖_∞))` for Lipschitz kernels.
pub fn theorem2_bound(norms: KernelNorms, m0: f64, sup_q0: f64, lambda: f64, c_r0: f64) -> Result<f64> {
    SmallnessStatus::new("sup_q0 < psi_l1", sup_q0, norms.l1_norm).into_result()?;
    Ok(m0 * sup_q0 * norms.linf_norm / (lambda * c_r0 * (norms.l1_norm - sup_q0)))
}

/// `M₀^η R₀^{1+α-η} ‖q₀‖_∞ / (λ c) · B^{1+τ-η}` for an arbitrary admissible `η`.
pub fn theorem3_bound_eta(kernel: &KernelSpec, m0: f64, sup_q0: f64, eta: f64) -> Result<f64> {
    let Some(alpha) = kernel.alpha() else {
        return Err(Error::Variant {
            op: "theorem3_bound",
            variant: kernel.variant_name(),
        });
    };
    let tau = kernel.tau();
    let upper = tau.min(1.0 + alpha);
    if !(0.0..=upper).contains(&eta) {
        return Err(Error::Domain(format!("η must lie in [0, {upper}], got {eta}")));
    }
    let amp = density_amplitude_bound(kernel, m0, sup_q0)?;
    let c = poincare_constant_auto(kernel.lower_bound_radius())?.c_rigorous;
    let (lambda, r0) = (kernel.lambda(), kernel.r0());
    Ok(m0.powf(eta) * r0.powf(1.0 + alpha - eta) * sup_q0 / (lambda * c) * amp.bound.powf(1.0 + tau - eta))
}

/// Limsup bound for singular kernels with `η = min(τ, 1+α)`.
pub fn theorem3_bound(kernel: &KernelSpec, m0: f64, sup_q0: f64) -> Result<f64> {
    theorem3_bound_eta(kernel, m0, sup_q0, default_eta(kernel))
}

/// Initial data summary that the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSummary {
    pub m0: f64,
    pub sup_q0: f64,
    pub inf_q0: f64,
    pub rho0_sup: f64,
    /// `e₀ ≡ 0` up to round-off.
    pub e0_zero: bool,
}

/// Every evaluated bound for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kernel: KernelSpec,
    pub m0: f64,
    pub sup_q0: f64,
    pub inf_q0: f64,
    pub rho0_sup: f64,
    pub e0_zero: bool,
    pub case: AmplitudeCase,
    pub poincare: PoincareConstant,
    pub eta: f64,
    pub smallness_status: Option<SmallnessStatus>,
    pub relaxed_smallness: Option<SmallnessStatus>,
    pub theorem1_rate: f64,
    pub theorem2_l1_bound: Option<f64>,
    pub theorem3_l1_bound: Option<f64>,
    pub density_amp_bound: Option<f64>,
    pub logistic_a: Option<f64>,
    pub logistic_b: Option<f64>,
    pub optimal_r: Option<f64>,
    /// Rate with the factor 1/2 from `Y = √H` kept.
    pub theorem1_rate_tracked: f64,
    /// Limsup bound with the factors `2π/ρ̄·...` of the argument kept (`4π` times the stated one).
    pub l1_bound_tracked: Option<f64>,
}

impl BoundReport {
    /// Evaluates all applicable bounds. Violated smallness leaves the affected
    /// bounds empty and is recorded in `smallness_status`.
    pub fn evaluate(kernel: &KernelSpec, init: InitialSummary) -> Result<Self> {
        kernel.validate()?;
        let InitialSummary {
            m0,
            sup_q0,
            inf_q0,
            rho0_sup,
            e0_zero,
        } = init;
        let case = AmplitudeCase::of(kernel);
        let poincare = poincare_constant_auto(kernel.lower_bound_radius())?;
        let smallness_status = check_smallness(kernel, m0, sup_q0)?;
        let admissible = smallness_status.as_ref().is_none_or(|s| s.satisfied);
        let rate = theorem1_rate(kernel, m0, rho0_sup)?;

        let amp = if admissible {
            Some(density_amplitude_bound(kernel, m0, sup_q0)?)
        } else {
            None
        };
        let (theorem2, theorem3) = match (case, admissible) {
            (_, false) => (None, None),
            (AmplitudeCase::Lipschitz, true) => {
                let norms = lipschitz_norms(kernel)?;
                let b = theorem2_bound(norms, m0, sup_q0, kernel.lambda(), poincare.c_rigorous)?;
                (Some(b), None)
            }
            (_, true) => (None, Some(theorem3_bound(kernel, m0, sup_q0)?)),
        };
        let l1_bound_tracked = theorem2.or(theorem3).map(|b| 2.0 * TWO_PI * b);
        Ok(Self {
            kernel: kernel.clone(),
            m0,
            sup_q0,
            inf_q0,
            rho0_sup,
            e0_zero,
            case,
            poincare,
            eta: default_eta(kernel),
            smallness_status,
            relaxed_smallness: relaxed_smallness(kernel, m0, inf_q0)?,
            theorem1_rate: rate,
            theorem2_l1_bound: theorem2,
            theorem3_l1_bound: theorem3,
            density_amp_bound: amp.map(|a| a.bound),
            logistic_a: amp.map(|a| a.rate),
            logistic_b: amp.map(|a| a.bound),
            optimal_r: amp.and_then(|a| a.optimal_r),
            theorem1_rate_tracked: 0.5 * rate,
            l1_bound_tracked,
        })
    }

    /// The limsup L¹ bound of whichever theorem applies.
    pub fn l1_bound(&self) -> Option<f64> {
        self.theorem2_l1_bound.or(self.theorem3_l1_bound)
    }

    pub fn envelope(&self) -> Option<LogisticEnvelope> {
        LogisticEnvelope::new(self.logistic_a?, self.logistic_b?, self.rho0_sup).ok()
    }
}

/// Outcome of one comparison between simulation and bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    /// Positive when the check passes.
    pub margin: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn at_most(name: &str, observed: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            observed,
            bound,
            margin: bound - observed,
            passed: observed <= bound,
        }
    }

    fn at_least(name: &str, observed: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            observed,
            bound,
            margin: observed - bound,
            passed: observed >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub tail_start: f64,
    pub tail_snapshots: usize,
    pub checks: Vec<BoundCheck>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Minimum number of snapshots in the tail window.
pub const MIN_TAIL_SNAPSHOTS: usize = 20;

/// Slack on the long-time amplitude bound.
pub const AMPLITUDE_SLACK: f64 = 1.05;

/// Slack on the logistic envelope.
pub const ENVELOPE_SLACK: f64 = 1.05;

/// `l1_dev` window used to fit the exponential decay.
pub const DECAY_WINDOW: (f64, f64) = (1e-6, 1e-1);

/// Minimum coefficient of determination of the decay fit.
pub const MIN_DECAY_R2: f64 = 0.98;

/// Least-squares fit of `ln l1_dev = a - rate · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    pub t_first: f64,
    pub t_last: f64,
}

/// Fits the decay of `l1_dev` over the records with `l1_dev ∈ [lo, hi]`.
pub fn fit_decay(records: &[DiagnosticsRecord], lo: f64, hi: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.l1_dev >= lo && r.l1_dev <= hi)
        .map(|r| (r.time, r.l1_dev.ln()))
        .collect();
    let (slope, r_squared) = linear_fit(&pts)?;
    Some(DecayFit {
        rate: -slope,
        r_squared,
        points: pts.len(),
        t_first: pts[0].0,
        t_last: pts[pts.len() - 1].0,
    })
}

fn decay_checks(recs: &[DiagnosticsRecord], rate: f64) -> Vec<BoundCheck> {
    let (lo, hi) = DECAY_WINDOW;
    // Already relaxed below the window: nothing to fit.
    if recs.first().is_some_and(|r| r.l1_dev < lo) {
        return vec![BoundCheck::at_most("theorem1_decay", 0.0, 0.0)];
    }
    match fit_decay(recs, lo, hi) {
        Some(fit) if fit.points >= 3 => vec![
            BoundCheck::at_least("theorem1_decay", fit.rate, rate),
            BoundCheck::at_least("theorem1_fit_r2", fit.r_squared, MIN_DECAY_R2),
        ],
        _ => vec![BoundCheck::at_least("theorem1_decay", f64::NAN, rate)],
    }
}

/// Compares a trajectory with a report.
///
/// Limsups are approximated by the maximum over the last `tail_fraction` of
/// model time; amplitude bounds carry a 5% slack. For `e₀ = 0` the decay rate
/// is fitted over [`DECAY_WINDOW`].
pub fn check_trajectory(traj: &Trajectory, report: &BoundReport, tail_fraction: f64) -> Result<CheckSummary> {
    let recs = &traj.records;
    let (Some(first), Some(last)) = (recs.first(), recs.last()) else {
        return Err(Error::InsufficientTail {
            found: 0,
            needed: MIN_TAIL_SNAPSHOTS,
        });
    };
    let tail_start = last.time - tail_fraction * (last.time - first.time);
    let tail: Vec<_> = recs.iter().filter(|r| r.time >= tail_start).collect();
    if tail.len() < MIN_TAIL_SNAPSHOTS {
        return Err(Error::InsufficientTail {
            found: tail.len(),
            needed: MIN_TAIL_SNAPSHOTS,
        });
    }
    let tail_max = |f: fn(&DiagnosticsRecord) -> f64| tail.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max);

    let mut checks = Vec::new();
    if report.e0_zero {
        checks.extend(decay_checks(recs, report.theorem1_rate));
    }
    // With e₀ = 0 the limsup bounds vanish and the decay check takes their place.
    if !report.e0_zero {
        if let Some(b) = report.theorem2_l1_bound {
            checks.push(BoundCheck::at_most("theorem2_l1", tail_max(|r| r.l1_dev), b));
        }
        if let Some(b) = report.theorem3_l1_bound {
            checks.push(BoundCheck::at_most("theorem3_l1", tail_max(|r| r.l1_dev), b));
        }
    }
    if let Some(b) = report.density_amp_bound {
        checks.push(BoundCheck::at_most(
            "density_amplitude",
            tail_max(|r| r.sup_rho),
            AMPLITUDE_SLACK * b,
        ));
    }
    if let Some(env) = report.envelope() {
        // Worst ratio over the whole run, scaled so that the bound is the slack.
        let t0 = first.time;
        let ratio = recs.iter().map(|r| r.sup_rho / env.at(r.time - t0)).fold(0.0, f64::max);
        checks.push(BoundCheck::at_most("logistic_envelope", ratio, ENVELOPE_SLACK));
    }
    Ok(CheckSummary {
        tail_start,
        tail_snapshots: tail.len(),
        checks,
    })
}

/// Slope and `R²` of the least-squares line through `pts`; `None` for fewer than two points.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((sxy / sxx, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const M0: f64 = TWO_PI;

    #[test]
    fn case_partition() {
        let topo = |a, t| AmplitudeCase::of(&KernelSpec::topological(1.0, 1.0, a, t));
        assert_eq!(
            AmplitudeCase::of(&KernelSpec::plateau(1.0, 1.0)),
            AmplitudeCase::Lipschitz
        );
        assert_eq!(
            AmplitudeCase::of(&KernelSpec::geometric(1.0, 1.0, 0.5)),
            AmplitudeCase::TauBelowAlpha
        );
        assert_eq!(topo(0.5, 0.2), AmplitudeCase::TauBelowAlpha);
        assert_eq!(topo(0.5, 0.5), AmplitudeCase::TauEqualsAlpha);
        assert_eq!(topo(0.5, 1.0), AmplitudeCase::TauBetween);
        assert_eq!(topo(0.5, 1.5), AmplitudeCase::TauAboveAlphaPlusOne);
        assert_eq!(topo(0.5, 2.0), AmplitudeCase::TauAboveAlphaPlusOne);
    }

    #[test]
    fn theorem1_lipschitz_rate_is_poincare_constant() {
        let rate = theorem1_rate(&KernelSpec::constant(1.0), M0, 3.0).unwrap();
        let c = poincare_constant_auto(PI).unwrap().c_rigorous;
        assert_relative_eq!(rate, c, max_relative = 1e-14);
    }

    #[test]
    fn theorem1_rate_independent_of_sup_when_tau_small() {
        let k = KernelSpec::topological(1.0, 1.0, 0.5, 1.2);
        let a = theorem1_rate(&k, M0, 1.5).unwrap();
        for s in [1.0, 2.0, 10.0] {
            assert_eq!(theorem1_rate(&k, M0, s).unwrap(), a);
        }
    }

    #[test]
    fn theorem1_rate_scales_with_sup_when_tau_large() {
        let k = KernelSpec::topological(1.0, 1.0, 0.5, 2.0);
        let a = theorem1_rate(&k, M0, 1.5).unwrap();
        let b = theorem1_rate(&k, M0, 3.0).unwrap();
        assert_relative_eq!(b / a, 2f64.powf(-0.5), max_relative = 1e-14);
    }

    #[test]
    fn theorem2_examples() {
        let norms = KernelNorms {
            l1_norm: TWO_PI,
            linf_norm: 1.0,
        };
        assert_eq!(theorem2_bound(norms, M0, 0.0, 1.0, 0.1).unwrap(), 0.0);
        assert_relative_eq!(
            theorem2_bound(norms, M0, PI, 1.0, 0.1).unwrap(),
            20.0 * PI,
            max_relative = 1e-14
        );
        let mut prev = -1.0;
        for i in 0..100 {
            let b = theorem2_bound(norms, M0, i as f64 * 0.06, 1.0, 0.1).unwrap();
            assert!(b > prev);
            prev = b;
        }
        let err = theorem2_bound(norms, M0, 7.0, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::SmallnessViolation { margin, .. } if margin < 0.0));
    }

    #[test]
    fn amplitude_examples() {
        let b = density_amplitude_bound(&KernelSpec::plateau(1.0, 1.0), M0, 0.0).unwrap();
        assert_relative_eq!(b.bound, 4.0 * PI / 3.0, max_relative = 1e-9);
        assert_relative_eq!(b.rate, 1.5, max_relative = 1e-9);

        for (alpha, tau, r0) in [(0.5, 0.0, 1.0), (1.5, 0.3, 0.7), (0.8, 0.5, 2.0)] {
            let k = KernelSpec::topological(1.0, r0, alpha, tau);
            let p = 1.0 + alpha - tau;
            let expected = p.powf(1.0 + 1.0 / (alpha - tau)) * M0 / r0;
            let b = density_amplitude_bound(&k, M0, 0.0).unwrap();
            assert_relative_eq!(b.bound, expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn amplitude_closed_forms_with_q() {
        let (lambda, r0, q) = (1.3, 0.8, 0.02);
        // τ < α
        let (a, t) = (0.9, 0.4);
        let s = M0.powf(t) * q / lambda;
        let k = KernelSpec::topological(lambda, r0, a, t);
        let expected =
            (1.0 + a - t).powf(1.0 + 1.0 / (a - t)) * M0 * ((a - t) * s + r0.powf(t - a)).powf(1.0 / (a - t));
        assert_relative_eq!(
            density_amplitude_bound(&k, M0, q).unwrap().bound,
            expected,
            max_relative = 1e-12
        );
        // α < τ < α+1
        let (a, t) = (0.5, 1.2);
        let s = M0.powf(t) * q / lambda;
        let k = KernelSpec::topological(lambda, r0, a, t);
        let expected =
            (1.0 + a - t).powf(1.0 - 1.0 / (t - a)) * M0 * (r0.powf(t - a) - (t - a) * s).powf(1.0 / (a - t));
        assert_relative_eq!(
            density_amplitude_bound(&k, M0, q).unwrap().bound,
            expected,
            max_relative = 1e-12
        );
        // τ = α
        let k = KernelSpec::topological(lambda, r0, 0.5, 0.5);
        let s = M0.powf(0.5) * q / lambda;
        let b = density_amplitude_bound(&k, M0, q).unwrap();
        assert_relative_eq!(b.bound, M0 / r0 * (1.0 + s).exp(), max_relative = 1e-13);
        assert_relative_eq!(b.optimal_r.unwrap(), r0 * (-1.0 - s).exp(), max_relative = 1e-13);
    }

    #[test]
    fn amplitude_diverges_at_threshold() {
        let k = KernelSpec::topological(1.0, 1.0, 0.5, 2.0);
        let t = smallness_threshold(&k, M0).unwrap().unwrap();
        let mut prev = 0.0;
        for frac in [0.5, 0.9, 0.99, 0.999, 0.9999] {
            let b = density_amplitude_bound(&k, M0, frac * t).unwrap().bound;
            assert!(b > prev);
            prev = b;
        }
        assert!(prev > 1e3 * density_amplitude_bound(&k, M0, 0.0).unwrap().bound);
        assert!(density_amplitude_bound(&k, M0, 1.5 * t).is_err());
    }

    #[test]
    fn intermediate_case_continuous_at_alpha() {
        let q = 0.01;
        let at = density_amplitude_bound(&KernelSpec::topological(1.0, 1.0, 0.5, 0.5), M0, q)
            .unwrap()
            .bound;
        for tau in [0.5 - 1e-7, 0.5 + 1e-7] {
            let b = density_amplitude_bound(&KernelSpec::topological(1.0, 1.0, 0.5, tau), M0, q)
                .unwrap()
                .bound;
            assert_relative_eq!(b, at, max_relative = 1e-4);
        }
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(logistic_envelope(1.0, 2.0, 0.7, 0.0), 0.7);
        for t in [0.0, 1.0, 10.0] {
            assert_relative_eq!(logistic_envelope(0.3, 2.0, 2.0, t), 2.0);
        }
        assert_relative_eq!(
            logistic_envelope(1.0, 2.0, 1.0, 0.5 * 2f64.ln()),
            4.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(logistic_envelope(1.0, 2.0, 0.1, 100.0), 2.0, max_relative = 1e-12);
        assert!(LogisticEnvelope::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn theorem3_geometric_reference() {
        // Independent evaluation of the composed expression.
        let k = KernelSpec::geometric(1.0, 1.0, 0.5);
        let b = theorem3_bound(&k, M0, 0.1).unwrap();
        assert_relative_eq!(b, THEOREM3_GEOMETRIC_REFERENCE, max_relative = 1e-10);
        assert_eq!(theorem3_bound(&k, M0, 0.0).unwrap(), 0.0);
    }

    const THEOREM3_GEOMETRIC_REFERENCE: f64 = 462.154_623_493_731_1;

    #[test]
    fn theorem3_monotone_in_q_and_lambda() {
        for (alpha, tau) in [(0.5, 0.0), (0.5, 0.3), (0.5, 0.5), (0.5, 1.0), (0.5, 2.0)] {
            let k = KernelSpec::topological(1.0, 1.0, alpha, tau);
            let k2 = KernelSpec::topological(2.0, 1.0, alpha, tau);
            let limit = smallness_threshold(&k, M0).unwrap().unwrap_or(1.0).min(1.0);
            let mut prev = 0.0;
            for i in 0..50 {
                let q = limit * i as f64 / 50.0;
                let b = theorem3_bound(&k, M0, q).unwrap();
                assert!(b >= prev);
                prev = b;
                assert!(theorem3_bound(&k2, M0, q).unwrap() <= b);
                let amp = density_amplitude_bound(&k, M0, q).unwrap().bound;
                assert!(density_amplitude_bound(&k2, M0, q).unwrap().bound <= amp);
            }
        }
    }

    #[test]
    fn eta_family_continuous_at_alpha_plus_one() {
        let k = KernelSpec::topological(1.0, 1.0, 0.5, 1.5);
        let a = theorem3_bound_eta(&k, M0, 0.001, 1.5).unwrap();
        let b = theorem3_bound(&k, M0, 0.001).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        let k_below = KernelSpec::topological(1.0, 1.0, 0.5, 1.5 - 1e-9);
        let c = theorem3_bound_eta(&k_below, M0, 0.001, 1.5 - 1e-9).unwrap();
        assert_relative_eq!(a, c, max_relative = 1e-6);
        assert!(theorem3_bound_eta(&k, M0, 0.001, 1.6).is_err());
    }

    #[test]
    fn report_nonnegative_and_flags_violation() {
        let init = InitialSummary {
            m0: M0,
            sup_q0: 0.05,
            inf_q0: -0.05,
            rho0_sup: 1.5,
            e0_zero: false,
        };
        for k in [
            KernelSpec::plateau(1.0, 1.0),
            KernelSpec::constant(0.5),
            KernelSpec::geometric(1.0, 1.0, 0.5),
            KernelSpec::topological(1.0, 1.0, 0.5, 0.5),
            KernelSpec::topological(2.0, 1.0, 0.5, 1.0),
            KernelSpec::topological(4.0, 1.0, 0.5, 2.0),
        ] {
            let r = BoundReport::evaluate(&k, init).unwrap();
            assert!(r.theorem1_rate > 0.0);
            let l1 = r.l1_bound().unwrap();
            assert!(l1 >= 0.0 && r.density_amp_bound.unwrap() > 0.0);
            assert!(r.logistic_a.unwrap() > 0.0);
            assert_relative_eq!(r.l1_bound_tracked.unwrap(), 4.0 * PI * l1);
        }
        let k = KernelSpec::topological(1.0, 1.0, 0.5, 2.0);
        let t = smallness_threshold(&k, M0).unwrap().unwrap();
        let r = BoundReport::evaluate(
            &k,
            InitialSummary {
                sup_q0: 1.5 * t,
                inf_q0: -0.2 * t,
                ..init
            },
        )
        .unwrap();
        let s = r.smallness_status.unwrap();
        assert!(!s.satisfied && s.margin < 0.0);
        assert!(r.relaxed_smallness.unwrap().satisfied);
        assert!(r.theorem3_l1_bound.is_none() && r.density_amp_bound.is_none());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 3.0 - 0.25 * i as f64)).collect();
        let (slope, r2) = linear_fit(&pts).unwrap();
        assert_relative_eq!(slope, -0.25, max_relative = 1e-14);
        assert_relative_eq!(r2, 1.0, max_relative = 1e-14);
        assert!(linear_fit(&pts[..1]).is_none());
    }
}
