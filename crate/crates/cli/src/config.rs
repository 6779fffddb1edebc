//! Experiment configuration files.

use std::path::{Path, PathBuf};

use euler_align::bounds::smallness_threshold;
use euler_align::grid::{
    density_from_csv, make_initial_density, make_sine_e, make_velocity_for_e, make_zero_e_velocity,
};
use euler_align::{DensitySpec, Field, FlockState, KernelSpec, SolverConfig, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub grid: GridConfig,
    pub kernel: KernelSpec,
    pub initial: InitialConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Record interval in cell widths; overrides `solver.record_every` so the
    /// sampling interval refines with the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every_cells: Option<f64>,
}

fn default_name() -> String {
    "experiment".to_string()
}

fn default_tail_fraction() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub density: DensityInput,
    pub velocity: VelocitySpec,
}

/// Density source: a built-in family, a CSV file, or seeded random Fourier modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityInput {
    /// Single-column CSV with header `rho`, rescaled to `mass`. Relative paths
    /// resolve against the config file.
    Csv { path: PathBuf, mass: f64 },
    /// `∝ 1 + Σ_{k ≤ modes} a_k cos(k x + φ_k)` with seeded coefficients and
    /// `Σ |a_k| = amplitude < 1`.
    RandomModes { mass: f64, modes: u32, amplitude: f64 },
    #[serde(untagged)]
    Builtin(DensitySpec),
}

/// Initial velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocitySpec {
    /// `e₀ = 0`.
    ZeroE {
        #[serde(default)]
        u_mean: f64,
    },
    /// `e₀ = s ρ₀ (sin x - c)` with `c` making `∫ e₀ = 0` and `s` chosen so that
    /// `sup |q₀|` equals either `sup_q` or `threshold_fraction` times the
    /// smallness threshold of the kernel.
    TargetQ {
        #[serde(default)]
        u_mean: f64,
        #[serde(default)]
        sup_q: Option<f64>,
        #[serde(default)]
        threshold_fraction: Option<f64>,
    },
    /// Cell values of `u₀`.
    Explicit { values: Vec<f64> },
    /// `u_mean + amplitude · sin(mode · x)`.
    Sine { u_mean: f64, amplitude: f64, mode: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Time-series CSV file name inside the output directory.
    pub csv: Option<String>,
    /// JSON report file name inside the output directory.
    pub report: Option<String>,
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let DensityInput::Csv { path: csv, .. } = &mut config.initial.density {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(config)
    }

    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, e: euler_align::Error| CliError::Config(format!("{name}: {e}"));
        TorusGrid::new(self.grid.n_cells).map_err(|e| field("grid.n_cells", e))?;
        self.kernel.validate().map_err(|e| field("kernel", e))?;
        self.solver.validate().map_err(|e| field("solver", e))?;
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(CliError::Config(format!(
                "tail_fraction: must lie in (0, 1], got {}",
                self.tail_fraction
            )));
        }
        if let Some(k) = self.record_every_cells {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Config(format!(
                    "record_every_cells: must be positive, got {k}"
                )));
            }
        }
        match &self.initial.velocity {
            VelocitySpec::TargetQ {
                sup_q,
                threshold_fraction,
                ..
            } => match (sup_q, threshold_fraction) {
                (Some(q), None) if *q >= 0.0 => {}
                (None, Some(f)) if *f >= 0.0 => {}
                _ => {
                    return Err(CliError::Config(
                        "initial.velocity: target_q needs exactly one nonnegative `sup_q` or `threshold_fraction`"
                            .into(),
                    ))
                }
            },
            VelocitySpec::Explicit { values } if values.len() != self.grid.n_cells => {
                return Err(CliError::Config(format!(
                    "initial.velocity.values: expected {} entries, got {}",
                    self.grid.n_cells,
                    values.len()
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Solver settings with `record_every_cells` applied.
    pub fn effective_solver(&self) -> SolverConfig {
        let mut solver = self.solver.clone();
        if let Some(k) = self.record_every_cells {
            solver.record_every = k * self.grid().dx();
        }
        solver
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.grid.n_cells).expect("validated grid")
    }

    /// Builds the initial state.
    pub fn initial_state(&self) -> Result<FlockState, CliError> {
        let grid = self.grid();
        let rho = self.initial_density(grid)?;
        let u = self.initial_velocity(&rho)?;
        FlockState::new(rho, u, 0.0).map_err(|e| CliError::Config(format!("initial: {e}")))
    }

    fn initial_density(&self, grid: TorusGrid) -> Result<Field, CliError> {
        let field = |e: euler_align::Error| CliError::Config(format!("initial.density: {e}"));
        match &self.initial.density {
            DensityInput::Builtin(spec) => make_initial_density(grid, spec).map_err(field),
            DensityInput::Csv { path, mass } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("initial.density.path: {}: {e}", path.display())))?;
                density_from_csv(&text, grid, *mass).map_err(field)
            }
            DensityInput::RandomModes { mass, modes, amplitude } => {
                if !(*mass > 0.0 && mass.is_finite()) {
                    return Err(CliError::Config("initial.density.mass: must be positive".into()));
                }
                if !(0.0..1.0).contains(amplitude) || *modes == 0 {
                    return Err(CliError::Config(
                        "initial.density: random_modes needs modes >= 1 and amplitude in [0, 1)".into(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let raw: Vec<(f64, f64)> = (0..*modes)
                    .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                    .collect();
                let total: f64 = raw.iter().map(|m| m.0).sum::<f64>().max(f64::MIN_POSITIVE);
                let shape = grid.sample(|x| {
                    1.0 + raw
                        .iter()
                        .enumerate()
                        .map(|(k, (a, p))| amplitude * a / total * ((k + 1) as f64 * x + p).cos())
                        .sum::<f64>()
                });
                let scale = *mass / euler_align::grid::integrate(&shape);
                Ok(shape.map(|v| v * scale))
            }
        }
    }

    fn initial_velocity(&self, rho: &Field) -> Result<Field, CliError> {
        let field = |e: euler_align::Error| CliError::Config(format!("initial.velocity: {e}"));
        let grid = rho.grid();
        match &self.initial.velocity {
            VelocitySpec::ZeroE { u_mean } => make_zero_e_velocity(rho, &self.kernel, *u_mean).map_err(field),
            VelocitySpec::TargetQ {
                u_mean,
                sup_q,
                threshold_fraction,
            } => {
                let target = match (sup_q, threshold_fraction) {
                    (Some(q), _) => *q,
                    (None, Some(f)) => {
                        let m0 = euler_align::grid::integrate(rho);
                        let threshold = smallness_threshold(&self.kernel, m0)
                            .map_err(field)?
                            .ok_or_else(|| {
                                CliError::Config(format!(
                                    "initial.velocity.threshold_fraction: the {} kernel with these exponents has no smallness threshold",
                                    self.kernel.variant_name()
                                ))
                            })?;
                        f * threshold
                    }
                    (None, None) => unreachable!("validated"),
                };
                let e = make_sine_e(rho, target);
                make_velocity_for_e(rho, &self.kernel, &e, *u_mean).map_err(field)
            }
            VelocitySpec::Explicit { values } => Field::new(grid, values.clone()).map_err(field),
            VelocitySpec::Sine {
                u_mean,
                amplitude,
                mode,
            } => {
                let k = *mode as f64;
                Ok(grid.sample(|x| u_mean + amplitude * (k * x).sin()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "name": "t",
        "grid": {"n_cells": 64},
        "kernel": {"variant": "lipschitz", "lambda": 1.0, "r0": 1.0},
        "initial": {
            "density": {"kind": "cosine_bump", "mass": 6.283185307179586, "amplitude": 0.5, "mode": 1},
            "velocity": {"kind": "zero_e"}
        },
        "solver": {"t_end": 1.0, "record_every": 0.1}
    }"#;

    #[test]
    fn parses_builtin_density() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert!(matches!(
            c.initial.density,
            DensityInput::Builtin(DensitySpec::CosineBump { .. })
        ));
        assert_eq!(c.solver.cfl, 0.4);
        assert_eq!(c.tail_fraction, 0.25);
        let s = c.initial_state().unwrap();
        assert!((s.mass() - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_fields_with_location() {
        let bad = BASE
            .replace("\"seed\"", "x")
            .replace("\"name\": \"t\"", "\"nmae\": \"t\"");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("nmae") && err.contains("line"), "{err}");
    }

    #[test]
    fn field_precise_validation() {
        let bad = BASE.replace("\"n_cells\": 64", "\"n_cells\": 7");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.starts_with("config error: grid.n_cells"), "{err}");
        let bad = BASE.replace("\"r0\": 1.0", "\"r0\": 5.0");
        assert!(ExperimentConfig::parse(&bad)
            .unwrap_err()
            .to_string()
            .contains("kernel"));
    }

    #[test]
    fn target_q_hits_requested_sup() {
        let text = BASE.replace(r#"{"kind": "zero_e"}"#, r#"{"kind": "target_q", "sup_q": 0.15}"#);
        let c = ExperimentConfig::parse(&text).unwrap();
        let s = c.initial_state().unwrap();
        let q = euler_align::diagnostics::compute_q(&s, &c.kernel).unwrap();
        assert!((q.sup_abs() - 0.15).abs() < 1e-9, "{}", q.sup_abs());
    }

    #[test]
    fn random_modes_are_seeded() {
        let text = BASE.replace(
            r#""kind": "cosine_bump", "mass": 6.283185307179586, "amplitude": 0.5, "mode": 1"#,
            r#""kind": "random_modes", "mass": 2.0, "modes": 4, "amplitude": 0.6"#,
        );
        let mut c = ExperimentConfig::parse(&text).unwrap();
        let a = c.initial_state().unwrap();
        let b = c.initial_state().unwrap();
        assert_eq!(a.rho, b.rho);
        c.seed = 9;
        let d = c.initial_state().unwrap();
        assert_ne!(a.rho, d.rho);
        assert!((d.mass() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_fraction_requires_threshold() {
        let text = BASE
            .replace(
                r#"{"variant": "lipschitz", "lambda": 1.0, "r0": 1.0}"#,
                r#"{"variant": "geometric", "lambda": 1.0, "r0": 1.0, "alpha": 0.5}"#,
            )
            .replace(
                r#"{"kind": "zero_e"}"#,
                r#"{"kind": "target_q", "threshold_fraction": 0.5}"#,
            );
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(c
            .initial_state()
            .unwrap_err()
            .to_string()
            .contains("no smallness threshold"));
    }
}
