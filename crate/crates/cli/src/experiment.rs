//! One experiment: initial state, bound report, simulation and checks.

use euler_align::bounds::{check_smallness, check_trajectory, BoundReport, CheckSummary, InitialSummary};
use euler_align::diagnostics::compute_e;
use euler_align::grid::periodic_derivative;
use euler_align::kernels::l_psi;
use euler_align::{Error, FlockState, Solver, Trajectory};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Relative size of `e₀` below which it is treated as identically zero.
pub const E0_ZERO_TOLERANCE: f64 = 1e-10;

/// Initial data as measured on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialMeasures {
    pub mass: f64,
    pub momentum: f64,
    pub sup_rho: f64,
    pub sup_q0: f64,
    pub inf_q0: f64,
    pub e0_sup: f64,
    pub e0_l1: f64,
    /// `‖u₀'‖_{L¹} + ‖L_ψ ρ₀‖_{L¹}`, the size of the two terms making up `e₀`.
    pub e0_terms_l1: f64,
    pub e0_zero: bool,
}

impl InitialMeasures {
    /// Reference size for `∫ e`: `‖e₀‖_{L¹}`, or the size of its two terms when `e₀ = 0`.
    pub fn e_scale(&self) -> f64 {
        if self.e0_zero {
            self.e0_terms_l1
        } else {
            self.e0_l1
        }
    }
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub state: FlockState,
    pub initial: InitialMeasures,
    pub report: BoundReport,
}

pub fn measure(state: &FlockState, config: &ExperimentConfig) -> Result<InitialMeasures, CliError> {
    let err = |e: Error| CliError::Config(format!("initial: {e}"));
    let kernel = &config.kernel;
    let e = compute_e(state, kernel).map_err(err)?;
    let du = periodic_derivative(&state.u);
    let l_rho = l_psi(kernel, &state.rho, &state.rho).map_err(err)?;
    let terms_sup = du.sup_abs() + l_rho.sup_abs();
    let e0_sup = e.sup_abs();
    let e0_zero = e0_sup <= E0_ZERO_TOLERANCE * terms_sup;
    let q = e.zip_map(&state.rho, |a, b| a / b);
    Ok(InitialMeasures {
        mass: state.mass(),
        momentum: state.momentum(),
        sup_rho: state.rho.max(),
        sup_q0: q.sup_abs(),
        inf_q0: q.min(),
        e0_sup,
        e0_l1: e.l1_norm(),
        e0_terms_l1: du.l1_norm() + l_rho.l1_norm(),
        e0_zero,
    })
}

/// Builds the initial state and bound report, rejecting violated smallness conditions.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    let state = config.initial_state()?;
    let initial = measure(&state, config)?;
    let err = |e: Error| CliError::Config(format!("initial.velocity: {e}"));
    let (sup_q0, inf_q0) = if initial.e0_zero {
        (0.0, 0.0)
    } else {
        (initial.sup_q0, initial.inf_q0)
    };
    if let Some(status) = check_smallness(&config.kernel, initial.mass, sup_q0).map_err(err)? {
        if !status.satisfied {
            return Err(err(Error::SmallnessViolation {
                condition: status.condition,
                value: status.value,
                threshold: status.threshold,
                margin: status.margin,
            }));
        }
    }
    let summary = InitialSummary {
        m0: initial.mass,
        sup_q0,
        inf_q0,
        rho0_sup: initial.sup_rho,
        e0_zero: initial.e0_zero,
    };
    let report =
        BoundReport::evaluate(&config.kernel, summary).map_err(|e| CliError::Config(format!("kernel: {e}")))?;
    let mut config = config.clone();
    config.solver = config.effective_solver();
    Ok(Prepared {
        config,
        state,
        initial,
        report,
    })
}

/// Result of running a prepared experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub prepared: Prepared,
    pub trajectory: Trajectory,
    pub checks: Option<CheckSummary>,
    /// Why no checks were made, if so.
    pub check_error: Option<String>,
}

impl Outcome {
    /// Maps the run onto the exit-code classes.
    pub fn status(&self) -> Result<(), CliError> {
        if let Some(e) = &self.trajectory.error {
            return Err(CliError::Runtime(e.to_string()));
        }
        if let Some(summary) = &self.checks {
            let failed: Vec<_> = summary
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} (observed {:e}, bound {:e})", c.name, c.observed, c.bound))
                .collect();
            if !failed.is_empty() {
                return Err(CliError::BoundCheck(failed.join("; ")));
            }
        }
        Ok(())
    }

    /// Largest `|mass(t) - M₀| / M₀` over the records.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.prepared.initial.mass;
        self.trajectory
            .records
            .iter()
            .map(|r| (r.mass - m0).abs() / m0)
            .fold(0.0, f64::max)
    }

    /// Largest `|∫ e(t)|` over the records.
    pub fn max_e_integral(&self) -> f64 {
        self.trajectory
            .records
            .iter()
            .map(|r| r.e_integral.abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|sup|q(t)| - sup|q₀||` relative to `sup|q₀|`.
    pub fn sup_q_drift(&self) -> f64 {
        let q0 = self.prepared.initial.sup_q0;
        self.trajectory
            .records
            .iter()
            .map(|r| (r.sup_q - q0).abs())
            .fold(0.0, f64::max)
            / q0
    }

    /// Maximum of a record field over the last `tail_fraction` of the run.
    pub fn tail_max(&self, f: impl Fn(&euler_align::DiagnosticsRecord) -> Option<f64>) -> Option<f64> {
        let recs = &self.trajectory.records;
        let (first, last) = (recs.first()?, recs.last()?);
        let start = last.time - self.prepared.config.tail_fraction * (last.time - first.time);
        recs.iter()
            .filter(|r| r.time >= start)
            .filter_map(f)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }
}

/// Integrates a prepared experiment and compares it with its bounds.
pub fn run(prepared: Prepared) -> Outcome {
    let config = &prepared.config;
    let trajectory = match Solver::new(config.kernel.clone(), config.grid()) {
        Ok(solver) => solver.run(&prepared.state, &config.solver),
        Err(e) => Trajectory {
            records: Vec::new(),
            states: Vec::new(),
            final_state: prepared.state.clone(),
            config: config.solver.clone(),
            steps: 0,
            error: Some(e),
        },
    };
    let (checks, check_error) = if trajectory.error.is_some() {
        (None, Some("run aborted".to_string()))
    } else {
        match check_trajectory(&trajectory, &prepared.report, config.tail_fraction) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    Outcome {
        prepared,
        trajectory,
        checks,
        check_error,
    }
}

/// Loads, prepares and runs in one go.
pub fn run_config(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    Ok(run(prepare(config)?))
}
