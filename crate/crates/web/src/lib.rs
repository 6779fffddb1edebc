//! WebAssembly bindings for the browser demo.
//!
//! Three operations are exposed: stepping a simulation, evaluating the
//! long-time bounds for given initial data, and the Fourier spectrum of the
//! cutoff behind the near-diagonal Poincaré constant. Fallible operations
//! have plain-Rust counterparts returning `Result<_, String>`.

use euler_align::bounds::BoundReport;
use euler_align::diagnostics::{compute_q, cutoff_transform, poincare_constant_auto};
use euler_align::grid::{make_initial_density, make_sine_e, make_velocity_for_e, make_zero_e_velocity};
use euler_align::{
    DensitySpec, DiagnosticsRecord, FlockState, InitialSummary, KernelSpec, Solver, SolverConfig, TorusGrid,
};
use wasm_bindgen::prelude::*;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Largest number of solver steps one `advance` call may take.
const MAX_STEPS_PER_CALL: usize = 200_000;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Kernel from its variant name: `plateau`, `constant`, `geometric` or `topological`.
pub fn kernel_from(variant: &str, lambda: f64, r0: f64, alpha: f64, tau: f64) -> Result<KernelSpec, String> {
    let kernel = match variant {
        "plateau" => KernelSpec::plateau(lambda, r0),
        "constant" => KernelSpec::constant(lambda),
        "geometric" => KernelSpec::geometric(lambda, r0, alpha),
        "topological" => KernelSpec::topological(lambda, r0, alpha, tau),
        other => return Err(format!("unknown kernel {other:?}")),
    };
    kernel.validate().map_err(text)?;
    Ok(kernel)
}

/// A running simulation with density `∝ 1 + a cos(kx)` of mass `2π`.
#[wasm_bindgen]
pub struct Simulation {
    solver: Solver,
    state: FlockState,
    config: SolverConfig,
    report: BoundReport,
}

impl Simulation {
    /// `sup_q = 0` gives `e₀ = 0`; otherwise `e₀ = s ρ₀ (sin x - c)` with `sup |q₀| = sup_q`.
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        variant: &str,
        lambda: f64,
        r0: f64,
        alpha: f64,
        tau: f64,
        n_cells: usize,
        amplitude: f64,
        mode: u32,
        sup_q: f64,
    ) -> Result<Simulation, String> {
        let kernel = kernel_from(variant, lambda, r0, alpha, tau)?;
        let grid = TorusGrid::new(n_cells).map_err(text)?;
        let rho = make_initial_density(
            grid,
            &DensitySpec::CosineBump {
                mass: TWO_PI,
                amplitude,
                mode,
            },
        )
        .map_err(text)?;
        if !(sup_q >= 0.0 && sup_q.is_finite()) {
            return Err(format!("sup_q must be nonnegative, got {sup_q}"));
        }
        let u = if sup_q == 0.0 {
            make_zero_e_velocity(&rho, &kernel, 0.0)
        } else {
            make_velocity_for_e(&rho, &kernel, &make_sine_e(&rho, sup_q), 0.0)
        }
        .map_err(text)?;
        let state = FlockState::new(rho, u, 0.0).map_err(text)?;
        let (sup_q0, inf_q0) = if sup_q == 0.0 {
            (0.0, 0.0)
        } else {
            let q = compute_q(&state, &kernel).map_err(text)?;
            (q.sup_abs(), q.min())
        };
        let report = BoundReport::evaluate(
            &kernel,
            InitialSummary {
                m0: state.mass(),
                sup_q0,
                inf_q0,
                rho0_sup: state.rho.max(),
                e0_zero: sup_q == 0.0,
            },
        )
        .map_err(text)?;
        Ok(Simulation {
            solver: Solver::new(kernel, grid).map_err(text)?,
            state,
            config: SolverConfig::default(),
            report,
        })
    }

    /// Integrates for `duration`; returns the number of steps taken.
    pub fn advance_by(&mut self, duration: f64) -> Result<usize, String> {
        let target = self.state.time + duration;
        let mut steps = 0;
        while self.state.time < target {
            if steps == MAX_STEPS_PER_CALL {
                return Err(format!("more than {MAX_STEPS_PER_CALL} steps requested"));
            }
            self.state = self
                .solver
                .step(&self.state, &self.config, target - self.state.time)
                .map_err(text)?;
            steps += 1;
        }
        Ok(steps)
    }

    pub fn record(&self) -> Result<DiagnosticsRecord, String> {
        DiagnosticsRecord::compute(&self.state, self.solver.kernel()).map_err(text)
    }

    pub fn report(&self) -> &BoundReport {
        &self.report
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: &str,
        lambda: f64,
        r0: f64,
        alpha: f64,
        tau: f64,
        n_cells: usize,
        amplitude: f64,
        mode: u32,
        sup_q: f64,
    ) -> Result<Simulation, JsError> {
        Self::create(variant, lambda, r0, alpha, tau, n_cells, amplitude, mode, sup_q).map_err(|e| JsError::new(&e))
    }

    /// Integrates for `duration`; returns the number of steps taken.
    pub fn advance(&mut self, duration: f64) -> Result<usize, JsError> {
        self.advance_by(duration).map_err(|e| JsError::new(&e))
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Cell centers.
    pub fn x(&self) -> Vec<f64> {
        self.state.grid().centers()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.state.rho.values().to_vec()
    }

    pub fn u(&self) -> Vec<f64> {
        self.state.u.values().to_vec()
    }

    /// Current diagnostics as JSON.
    pub fn diagnostics(&self) -> Result<String, JsError> {
        let record = self.record().map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&record).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Bounds for the initial data as JSON.
    pub fn bounds(&self) -> Result<String, JsError> {
        serde_json::to_string(&self.report).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Logistic envelope for `sup ρ` at time `t`, or NaN when no envelope applies.
    pub fn envelope_at(&self, t: f64) -> f64 {
        self.report.envelope().map_or(f64::NAN, |env| env.at(t))
    }
}

/// Bound report for a kernel and summary of initial data.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    variant: &str,
    lambda: f64,
    r0: f64,
    alpha: f64,
    tau: f64,
    m0: f64,
    sup_q0: f64,
    rho0_sup: f64,
) -> Result<BoundReport, String> {
    let kernel = kernel_from(variant, lambda, r0, alpha, tau)?;
    BoundReport::evaluate(
        &kernel,
        InitialSummary {
            m0,
            sup_q0,
            inf_q0: -sup_q0,
            rho0_sup,
            e0_zero: sup_q0 == 0.0,
        },
    )
    .map_err(text)
}

/// [`bound_report`] as JSON.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn evaluate_bounds(
    variant: &str,
    lambda: f64,
    r0: f64,
    alpha: f64,
    tau: f64,
    m0: f64,
    sup_q0: f64,
    rho0_sup: f64,
) -> Result<String, JsError> {
    let report = bound_report(variant, lambda, r0, alpha, tau, m0, sup_q0, rho0_sup).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&report).map_err(|e| JsError::new(&e.to_string()))
}

/// `|χ̂(k)|` for `k = 0..=k_max`.
#[wasm_bindgen]
pub fn cutoff_spectrum(r0: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| cutoff_transform(r0, k as f64).abs()).collect()
}

/// Near-diagonal Poincaré constant for radius `r0` as JSON.
#[wasm_bindgen]
pub fn poincare(r0: f64) -> Result<String, JsError> {
    let pc = poincare_constant_auto(r0).map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&pc).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_steps_and_conserves_mass() {
        let mut sim = Simulation::create("plateau", 1.0, 1.0, 0.0, 0.0, 64, 0.5, 1, 0.0).unwrap();
        let m0 = sim.record().unwrap().mass;
        let steps = sim.advance_by(1.0).unwrap();
        assert!(steps > 0);
        assert!((sim.time() - 1.0).abs() < 1e-12);
        assert!((sim.record().unwrap().mass - m0).abs() < 1e-12 * m0);
        assert_eq!(sim.rho().len(), 64);
        assert_eq!(sim.x().len(), 64);
        assert!(sim.bounds().is_ok());
        assert!(sim.envelope_at(0.0) >= sim.rho().iter().cloned().fold(0.0, f64::max) * (1.0 - 1e-12));
    }

    #[test]
    fn target_q_matches_request() {
        let sim = Simulation::create("geometric", 1.0, 1.0, 0.5, 0.0, 128, 0.5, 1, 0.2).unwrap();
        assert!((sim.report().sup_q0 - 0.2).abs() < 1e-12);
        assert!(sim.report().theorem3_l1_bound.is_some());
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(kernel_from("cubic", 1.0, 1.0, 0.5, 0.0).is_err());
        assert!(kernel_from("geometric", 1.0, 1.0, 2.5, 0.0).is_err());
        assert!(Simulation::create("plateau", 1.0, 1.0, 0.0, 0.0, 64, 1.5, 1, 0.0).is_err());
        assert!(bound_report("topological", 1.0, 1.0, 0.5, 1.6, TWO_PI, 10.0, 1.5).is_ok());
    }

    #[test]
    fn spectrum_starts_at_one() {
        let s = cutoff_spectrum(1.0, 64);
        assert_eq!(s.len(), 65);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!(s[1..].iter().all(|&v| v < 1.0));
        assert!(poincare(1.0).is_ok());
    }
}
