//! One-parameter sweeps over a base config, run in parallel.

use std::io::Write;
use std::str::FromStr;

use euler_align::KernelSpec;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DensityInput, ExperimentConfig, VelocitySpec};
use crate::error::CliError;
use crate::experiment::{run_config, Outcome};
use crate::output::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// `sup |q₀|` as a fraction of the smallness threshold.
    SupQ0Fraction,
    /// `sup |q₀|` directly.
    SupQ0,
    Lambda,
    Mass,
    Alpha,
    Tau,
    NCells,
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "sup_q0_fraction" => Self::SupQ0Fraction,
            "sup_q0" => Self::SupQ0,
            "lambda" => Self::Lambda,
            "mass" | "m0" => Self::Mass,
            "alpha" => Self::Alpha,
            "tau" => Self::Tau,
            "n_cells" => Self::NCells,
            other => {
                return Err(CliError::Config(format!(
                    "--param: unknown parameter {other:?}; expected one of sup_q0_fraction, sup_q0, lambda, mass, alpha, tau, n_cells"
                )))
            }
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::SupQ0Fraction => "sup_q0_fraction",
            Self::SupQ0 => "sup_q0",
            Self::Lambda => "lambda",
            Self::Mass => "mass",
            Self::Alpha => "alpha",
            Self::Tau => "tau",
            Self::NCells => "n_cells",
        }
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::Config(format!("--values: cannot parse {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(CliError::Config("--values: empty list".into()))
            } else {
                Ok(v)
            }
        })
}

/// The base config with one parameter replaced.
pub fn apply(base: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig, CliError> {
    let mut c = base.clone();
    c.name = format!("{}_{}_{}", base.name, param.name(), value);
    let mismatch = |what: &str| CliError::Config(format!("--param {}: not applicable to {what}", param.name()));
    match param {
        SweepParam::SupQ0Fraction | SweepParam::SupQ0 => {
            let u_mean = match c.initial.velocity {
                VelocitySpec::ZeroE { u_mean } | VelocitySpec::TargetQ { u_mean, .. } => u_mean,
                _ => return Err(mismatch("an explicit velocity")),
            };
            c.initial.velocity = if param == SweepParam::SupQ0 {
                VelocitySpec::TargetQ {
                    u_mean,
                    sup_q: Some(value),
                    threshold_fraction: None,
                }
            } else {
                VelocitySpec::TargetQ {
                    u_mean,
                    sup_q: None,
                    threshold_fraction: Some(value),
                }
            };
        }
        SweepParam::Lambda => match &mut c.kernel {
            KernelSpec::Lipschitz { lambda, .. }
            | KernelSpec::Geometric { lambda, .. }
            | KernelSpec::Topological { lambda, .. } => *lambda = value,
        },
        SweepParam::Alpha => match &mut c.kernel {
            KernelSpec::Geometric { alpha, .. } | KernelSpec::Topological { alpha, .. } => *alpha = value,
            KernelSpec::Lipschitz { .. } => return Err(mismatch("a Lipschitz kernel")),
        },
        SweepParam::Tau => match &mut c.kernel {
            KernelSpec::Topological { tau, .. } => *tau = value,
            _ => return Err(mismatch("a non-topological kernel")),
        },
        SweepParam::Mass => match &mut c.initial.density {
            DensityInput::Csv { mass, .. } | DensityInput::RandomModes { mass, .. } => *mass = value,
            DensityInput::Builtin(spec) => {
                use euler_align::DensitySpec as D;
                match spec {
                    D::Uniform { mass } | D::CosineBump { mass, .. } | D::PeriodicBump { mass, .. } => *mass = value,
                }
            }
        },
        SweepParam::NCells => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(CliError::Config(format!(
                    "--values: n_cells must be an integer, got {value}"
                )));
            }
            c.grid.n_cells = value as usize;
            if let VelocitySpec::Explicit { .. } = c.initial.velocity {
                return Err(mismatch("an explicit velocity"));
            }
        }
    }
    c.validate()?;
    Ok(c)
}

/// One row of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: String,
    pub sup_q0: Option<f64>,
    pub l1_bound: Option<f64>,
    pub tail_l1_dev: Option<f64>,
    pub margin: Option<f64>,
    pub amplitude_bound: Option<f64>,
    pub tail_sup_rho: Option<f64>,
    pub entropy_residual_tail_max: Option<f64>,
    pub sup_q_drift: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(value: f64, status: &str, error: String) -> Self {
        Self {
            value,
            status: status.to_string(),
            sup_q0: None,
            l1_bound: None,
            tail_l1_dev: None,
            margin: None,
            amplitude_bound: None,
            tail_sup_rho: None,
            entropy_residual_tail_max: None,
            sup_q_drift: None,
            error: Some(error),
        }
    }

    fn from_outcome(value: f64, o: &Outcome) -> Self {
        let report = &o.prepared.report;
        let l1_bound = report.l1_bound();
        let tail_l1_dev = o.tail_max(|r| Some(r.l1_dev));
        let status = match o.status() {
            Ok(()) => "ok".to_string(),
            Err(e) => match e.exit_code() {
                3 => "aborted",
                4 => "check_failed",
                _ => "error",
            }
            .to_string(),
        };
        let initial = &o.prepared.initial;
        Self {
            value,
            status,
            sup_q0: Some(report.sup_q0),
            l1_bound,
            tail_l1_dev,
            margin: l1_bound.zip(tail_l1_dev).map(|(b, t)| b - t),
            amplitude_bound: report.density_amp_bound,
            tail_sup_rho: o.tail_max(|r| Some(r.sup_rho)),
            entropy_residual_tail_max: o.tail_max(|r| r.entropy_residual),
            sup_q_drift: (initial.sup_q0 > 0.0 && !initial.e0_zero).then(|| o.sup_q_drift()),
            error: o.status().err().map(|e| e.to_string()).or(o.check_error.clone()),
        }
    }
}

/// Runs every value of the sweep; failures are recorded per row.
pub fn run_sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&v| match apply(base, param, v).and_then(|c| run_config(&c)) {
            Ok(outcome) => SweepRow::from_outcome(v, &outcome),
            Err(e) => SweepRow::failed(v, "config_error", e.to_string()),
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 12] = [
    "param",
    "value",
    "status",
    "sup_q0",
    "l1_bound",
    "tail_l1_dev",
    "margin",
    "amplitude_bound",
    "tail_sup_rho",
    "entropy_residual_tail_max",
    "sup_q_drift",
    "error",
];

pub fn write_sweep_csv<W: Write>(out: W, param: SweepParam, rows: &[SweepRow]) -> Result<(), CliError> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            param.name().to_string(),
            fmt_f64(r.value),
            r.status.clone(),
            opt(r.sup_q0),
            opt(r.l1_bound),
            opt(r.tail_l1_dev),
            opt(r.margin),
            opt(r.amplitude_bound),
            opt(r.tail_sup_rho),
            opt(r.entropy_residual_tail_max),
            opt(r.sup_q_drift),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
