//! Pinned acceptance suites.
//!
//! Each check is tagged with the acceptance criterion it covers (1 to 9).
//! Simulations are shared between suites through a run cache, so `all` runs
//! every pinned experiment once.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use euler_align::bounds::smallness_threshold;
use euler_align::diagnostics::{
    ck_bracket, dissipation_lower_check, l2_deviation_sq, near_diagonal_energy, poincare_constant_auto,
};
use euler_align::kernels::{alignment_force, l_psi, lipschitz_norms};
use euler_align::oracle::{l_psi_reference_field, relative_sup_error, TrigPoly};
use euler_align::{KernelSpec, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, VelocitySpec};
use crate::error::CliError;
use crate::experiment::{prepare, run, Outcome};
use crate::output::SCHEMA_VERSION;

/// Pinned experiment configs shipped with the tool.
pub const PINNED: [(&str, &str); 11] = [
    ("equilibrium", include_str!("../configs/equilibrium.json")),
    ("theorem1_lipschitz", include_str!("../configs/theorem1_lipschitz.json")),
    (
        "theorem1_topological",
        include_str!("../configs/theorem1_topological.json"),
    ),
    ("theorem2_lipschitz", include_str!("../configs/theorem2_lipschitz.json")),
    ("theorem3_geometric", include_str!("../configs/theorem3_geometric.json")),
    (
        "theorem3_tau_equals_alpha",
        include_str!("../configs/theorem3_tau_equals_alpha.json"),
    ),
    (
        "theorem3_tau_between",
        include_str!("../configs/theorem3_tau_between.json"),
    ),
    ("theorem3_tau_above", include_str!("../configs/theorem3_tau_above.json")),
    ("entropy_balance", include_str!("../configs/entropy_balance.json")),
    (
        "smallness_violation",
        include_str!("../configs/smallness_violation.json"),
    ),
    (
        "smallness_violation_tau_between",
        include_str!("../configs/smallness_violation_tau_between.json"),
    ),
];

/// Parses a pinned config by name.
pub fn pinned(name: &str) -> Result<ExperimentConfig, CliError> {
    let text = PINNED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::Config(format!("no pinned config named {name:?}")))?;
    ExperimentConfig::parse(text)
}

const THEOREM1_RUNS: [&str; 2] = ["theorem1_lipschitz", "theorem1_topological"];
const THEOREM2_RUN: &str = "theorem2_lipschitz";
const THEOREM3_RUNS: [&str; 4] = [
    "theorem3_geometric",
    "theorem3_tau_equals_alpha",
    "theorem3_tau_between",
    "theorem3_tau_above",
];
const VIOLATION_RUNS: [&str; 2] = ["smallness_violation_tau_between", "smallness_violation"];
const CONSERVATION_RUNS: [&str; 9] = [
    "equilibrium",
    "theorem1_lipschitz",
    "theorem1_topological",
    "theorem2_lipschitz",
    "theorem3_geometric",
    "theorem3_tau_equals_alpha",
    "theorem3_tau_between",
    "theorem3_tau_above",
    "entropy_balance",
];
const REFINEMENT: [usize; 3] = [64, 128, 256];

const CONSERVATION_CELLS: usize = 256;
const CONSERVATION_T_END: f64 = 50.0;
const MASS_TOL: f64 = 1e-10;
const E_INTEGRAL_TOL: f64 = 1e-8;
const MOMENTUM_TOL: f64 = 1e-6;
/// Equilibrium drift allowed from floating-point rounding of the flux sums.
const EQUILIBRIUM_TOL: f64 = 1e-12;
const CONSERVATION_SECONDS: f64 = 300.0;
const THEOREM_SECONDS: f64 = 600.0;
const CORPUS_SIZE: usize = 500;
const CORPUS_CELLS: usize = 128;
const INEQUALITY_TOL: f64 = -1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const ENTROPY_RESIDUAL_TOL: f64 = 0.05;
const Q_DRIFT_TOL: f64 = 0.05;
const SIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Conservation,
    Inequalities,
    Oracles,
    Theorem1,
    Theorem2,
    Theorem3,
    Envelopes,
    EntropyBalance,
    QTransport,
    All,
}

impl Suite {
    /// The individual suites, in criterion order.
    pub const EACH: [Suite; 9] = [
        Suite::Conservation,
        Suite::Inequalities,
        Suite::Oracles,
        Suite::Theorem1,
        Suite::Theorem2,
        Suite::Theorem3,
        Suite::Envelopes,
        Suite::EntropyBalance,
        Suite::QTransport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conservation => "conservation",
            Suite::Inequalities => "inequalities",
            Suite::Oracles => "oracles",
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Theorem3 => "theorem3",
            Suite::Envelopes => "envelopes",
            Suite::EntropyBalance => "entropy_balance",
            Suite::QTransport => "q_transport",
            Suite::All => "all",
        }
    }

    /// Acceptance criterion covered by the suite.
    pub fn criterion(self) -> Option<u8> {
        Suite::EACH.iter().position(|&s| s == self).map(|i| i as u8 + 1)
    }

    /// Simulations the suite reads.
    fn runs(self) -> Vec<ExperimentConfig> {
        let named = |names: &[&str]| names.iter().filter_map(|n| pinned(n).ok()).collect::<Vec<_>>();
        match self {
            Suite::Conservation => named(&CONSERVATION_RUNS)
                .into_iter()
                .map(conservation_variant)
                .collect(),
            Suite::Inequalities | Suite::Oracles => Vec::new(),
            Suite::Theorem1 => named(&THEOREM1_RUNS),
            Suite::Theorem2 => named(&[THEOREM2_RUN]),
            Suite::Theorem3 => named(&THEOREM3_RUNS),
            Suite::Envelopes => [Suite::Theorem1, Suite::Theorem2, Suite::Theorem3]
                .into_iter()
                .flat_map(Suite::runs)
                .collect(),
            Suite::EntropyBalance => refinement_variants("entropy_balance"),
            Suite::QTransport => refinement_variants(THEOREM2_RUN),
            Suite::All => Suite::EACH.into_iter().flat_map(Suite::runs).collect(),
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::EACH.iter().map(|s| s.name()).collect();
                CliError::Config(format!(
                    "unknown suite {s:?}; expected one of {}, all",
                    names.join(", ")
                ))
            })
    }
}

fn conservation_variant(mut c: ExperimentConfig) -> ExperimentConfig {
    c.name = format!("{}_n{CONSERVATION_CELLS}_t{CONSERVATION_T_END}", c.name);
    c.grid.n_cells = CONSERVATION_CELLS;
    c.solver.t_end = CONSERVATION_T_END;
    c
}

fn refinement_variants(name: &str) -> Vec<ExperimentConfig> {
    let Ok(base) = pinned(name) else {
        return Vec::new();
    };
    REFINEMENT
        .iter()
        .map(|&n| {
            let mut c = base.clone();
            c.grid.n_cells = n;
            if n != base.grid.n_cells {
                c.name = format!("{}_n{n}", base.name);
            }
            c
        })
        .collect()
}

/// One acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteCheck {
    pub criterion: u8,
    pub suite: &'static str,
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

impl SuiteCheck {
    fn new(criterion: u8, suite: Suite, name: impl Into<String>, observed: f64, bound: f64, passed: bool) -> Self {
        Self {
            criterion,
            suite: suite.name(),
            name: name.into(),
            observed,
            bound,
            passed,
            detail: None,
        }
    }

    fn at_most(criterion: u8, suite: Suite, name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(criterion, suite, name, observed, bound, observed <= bound)
    }

    fn at_least(criterion: u8, suite: Suite, name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(criterion, suite, name, observed, bound, observed >= bound)
    }

    fn failed(criterion: u8, suite: Suite, name: impl Into<String>, detail: String) -> Self {
        Self::new(criterion, suite, name, f64::NAN, f64::NAN, false).with_detail(detail)
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let mut line = format!(
            "{} [criterion {}] {}: observed {:e}, bound {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.observed,
            self.bound
        );
        if let Some(d) = &self.detail {
            line.push_str(&format!(" ({d})"));
        }
        line
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionStatus {
    pub criterion: u8,
    pub checks: usize,
    pub failures: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub schema_version: u32,
    pub suite: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionStatus>,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteResult {
    fn new(suite: Suite, seed: u64, checks: Vec<SuiteCheck>) -> Self {
        let mut by_criterion: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
        for c in &checks {
            let entry = by_criterion.entry(c.criterion).or_default();
            entry.0 += 1;
            entry.1 += usize::from(!c.passed);
        }
        let criteria: Vec<_> = by_criterion
            .into_iter()
            .map(|(criterion, (checks, failures))| CriterionStatus {
                criterion,
                checks,
                failures,
                passed: checks > 0 && failures == 0,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            suite: suite.name(),
            seed,
            passed: !criteria.is_empty() && criteria.iter().all(|c| c.passed),
            criteria,
            checks,
        }
    }

    /// One line per check followed by one line per criterion.
    pub fn lines(&self) -> Vec<String> {
        let mut lines: Vec<_> = self.checks.iter().map(SuiteCheck::line).collect();
        lines.extend(self.criteria.iter().map(|c| {
            format!(
                "{} criterion {}: {} of {} checks passed",
                if c.passed { "PASS" } else { "FAIL" },
                c.criterion,
                c.checks - c.failures,
                c.checks
            )
        }));
        lines
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn criterion(&self, criterion: u8) -> Option<&CriterionStatus> {
        self.criteria.iter().find(|c| c.criterion == criterion)
    }
}

/// A finished simulation and its wall-clock time.
#[derive(Debug)]
struct Run {
    outcome: Result<Outcome, String>,
    seconds: f64,
}

/// Simulations keyed by their full config, computed once.
#[derive(Default)]
struct RunCache {
    runs: Mutex<HashMap<String, Arc<Run>>>,
}

impl RunCache {
    fn key(config: &ExperimentConfig) -> String {
        serde_json::to_string(config).unwrap_or_else(|_| config.name.clone())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Run>>> {
        self.runs.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs every config not yet cached, in parallel.
    fn prefetch(&self, configs: &[ExperimentConfig]) {
        let mut missing: Vec<&ExperimentConfig> = Vec::new();
        {
            let cache = self.lock();
            for c in configs {
                if !cache.contains_key(&Self::key(c)) && !missing.iter().any(|m| Self::key(m) == Self::key(c)) {
                    missing.push(c);
                }
            }
        }
        let done: Vec<(String, Run)> = missing
            .par_iter()
            .map(|c| {
                let start = Instant::now();
                let outcome = prepare(c).map(run).map_err(|e| e.to_string());
                (
                    Self::key(c),
                    Run {
                        outcome,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                )
            })
            .collect();
        let mut cache = self.lock();
        for (k, r) in done {
            cache.insert(k, Arc::new(r));
        }
    }

    fn get(&self, config: &ExperimentConfig) -> Arc<Run> {
        if let Some(r) = self.lock().get(&Self::key(config)) {
            return Arc::clone(r);
        }
        self.prefetch(std::slice::from_ref(config));
        Arc::clone(&self.lock()[&Self::key(config)])
    }
}

/// Runs one suite, or all of them.
pub fn run_suite(suite: Suite, seed: u64) -> SuiteResult {
    let cache = RunCache::default();
    cache.prefetch(&suite.runs());
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    let checks = suites.into_iter().flat_map(|s| evaluate(s, seed, &cache)).collect();
    SuiteResult::new(suite, seed, checks)
}

fn evaluate(suite: Suite, seed: u64, cache: &RunCache) -> Vec<SuiteCheck> {
    match suite {
        Suite::Conservation => conservation(cache),
        Suite::Inequalities => inequalities(seed),
        Suite::Oracles => oracles(seed),
        Suite::Theorem1 => theorem1(cache),
        Suite::Theorem2 => theorem2(cache),
        Suite::Theorem3 => theorem3(cache),
        Suite::Envelopes => envelopes(cache),
        Suite::EntropyBalance => entropy_balance(cache),
        Suite::QTransport => q_transport(cache),
        Suite::All => Vec::new(),
    }
}

/// The outcome of a pinned run, or a failed check explaining why it is missing.
fn outcome_or_fail<'a>(run: &'a Run, criterion: u8, suite: Suite, name: &str) -> Result<&'a Outcome, SuiteCheck> {
    match &run.outcome {
        Ok(o) if o.trajectory.error.is_none() => Ok(o),
        Ok(o) => Err(SuiteCheck::failed(
            criterion,
            suite,
            format!("{name}.completed"),
            o.trajectory.error.as_ref().map(|e| e.to_string()).unwrap_or_default(),
        )),
        Err(e) => Err(SuiteCheck::failed(
            criterion,
            suite,
            format!("{name}.prepared"),
            e.clone(),
        )),
    }
}

/// Copies the named bound checks of a run.
fn bound_checks(outcome: &Outcome, criterion: u8, suite: Suite, names: &[&str]) -> Vec<SuiteCheck> {
    let run = &outcome.prepared.config.name;
    let Some(summary) = &outcome.checks else {
        return vec![SuiteCheck::failed(
            criterion,
            suite,
            format!("{run}.checks"),
            outcome.check_error.clone().unwrap_or_default(),
        )];
    };
    names
        .iter()
        .map(|&name| match summary.checks.iter().find(|c| c.name == name) {
            Some(c) => SuiteCheck::new(criterion, suite, format!("{run}.{name}"), c.observed, c.bound, c.passed),
            None => SuiteCheck::failed(criterion, suite, format!("{run}.{name}"), "check not produced".into()),
        })
        .collect()
}

fn conservation(cache: &RunCache) -> Vec<SuiteCheck> {
    let s = Suite::Conservation;
    let mut checks = Vec::new();
    for config in s.runs() {
        let run = cache.get(&config);
        let name = config.name.clone();
        let o = match outcome_or_fail(&run, 1, s, &name) {
            Ok(o) => o,
            Err(c) => {
                checks.push(c);
                continue;
            }
        };
        let initial = &o.prepared.initial;
        checks.push(SuiteCheck::at_most(
            1,
            s,
            format!("{name}.mass_drift"),
            o.max_mass_drift(),
            MASS_TOL,
        ));
        let scale = initial.e_scale();
        checks.push(if scale > 0.0 {
            SuiteCheck::at_most(
                1,
                s,
                format!("{name}.e_integral"),
                o.max_e_integral() / scale,
                E_INTEGRAL_TOL,
            )
            .with_detail(format!("relative to {scale:e}"))
        } else {
            SuiteCheck::at_most(1, s, format!("{name}.e_integral"), o.max_e_integral(), 0.0)
                .with_detail("e vanishes identically, absolute")
        });
        let p0 = initial.momentum;
        let momentum_scale = initial.mass * o.prepared.state.u.sup_abs();
        let momentum_drift = o
            .trajectory
            .records
            .iter()
            .map(|r| (r.momentum - p0).abs())
            .fold(0.0, f64::max);
        checks.push(if momentum_scale > 0.0 {
            SuiteCheck::at_most(
                1,
                s,
                format!("{name}.momentum_drift"),
                momentum_drift / momentum_scale,
                MOMENTUM_TOL,
            )
            .with_detail(format!("relative to M0 sup|u0| = {momentum_scale:e}"))
        } else {
            SuiteCheck::at_most(1, s, format!("{name}.momentum_drift"), momentum_drift, 0.0)
        });
        let broken = o
            .trajectory
            .records
            .iter()
            .filter(|r| r.check_invariants().is_err())
            .count();
        checks.push(SuiteCheck::at_most(
            1,
            s,
            format!("{name}.record_invariants"),
            broken as f64,
            0.0,
        ));
        checks.push(SuiteCheck::at_most(
            1,
            s,
            format!("{name}.runtime_s"),
            run.seconds,
            CONSERVATION_SECONDS,
        ));
        if config.name.starts_with("equilibrium") {
            let (start, end) = (&o.prepared.state, &o.trajectory.final_state);
            let drift = |a: &euler_align::Field, b: &euler_align::Field| a.zip_map(b, |x, y| x - y).sup_abs();
            let moved = drift(&start.rho, &end.rho).max(drift(&start.u, &end.u));
            checks.push(SuiteCheck::at_most(
                1,
                s,
                format!("{name}.fixed_point"),
                moved,
                EQUILIBRIUM_TOL,
            ));
        }
    }
    checks
}

/// A random trigonometric polynomial with `1..=max_modes` modes and sup-norm at most `amplitude`.
fn random_trig(rng: &mut ChaCha8Rng, mean: f64, max_modes: u32, amplitude: f64) -> TrigPoly {
    let count = rng.gen_range(1..=max_modes);
    let mut modes: Vec<(u32, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(1..=max_modes),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let total: f64 = modes.iter().map(|&(_, a, b)| a.abs() + b.abs()).sum();
    for m in &mut modes {
        m.1 *= amplitude / total;
        m.2 *= amplitude / total;
    }
    TrigPoly { mean, modes }
}

/// Positive density with relative amplitude up to 0.95.
fn random_density(rng: &mut ChaCha8Rng, grid: TorusGrid) -> euler_align::Field {
    let mean = rng.gen_range(0.2..3.0);
    let amplitude = mean * rng.gen_range(0.0..0.95);
    random_trig(rng, mean, 12, amplitude).sample(grid)
}

/// Worst `(larger - smaller) / scale` over a corpus, as a check against the tolerance.
fn worst_margin(criterion: u8, suite: Suite, name: &str, margins: &[Result<f64, String>]) -> SuiteCheck {
    if let Some(Err(e)) = margins.iter().find(|m| m.is_err()) {
        return SuiteCheck::failed(criterion, suite, name, e.clone());
    }
    let worst = margins
        .iter()
        .filter_map(|m| m.as_ref().ok())
        .copied()
        .fold(f64::INFINITY, f64::min);
    SuiteCheck::at_least(criterion, suite, name, worst, INEQUALITY_TOL)
        .with_detail(format!("{} samples, normalized margin", margins.len()))
}

fn normalized(larger: f64, smaller: f64) -> f64 {
    let scale = larger.abs().max(smaller.abs());
    if scale > 0.0 {
        (larger - smaller) / scale
    } else {
        0.0
    }
}

fn inequalities(seed: u64) -> Vec<SuiteCheck> {
    let s = Suite::Inequalities;
    let grid = TorusGrid::new(CORPUS_CELLS).expect("corpus grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<_> = (0..CORPUS_SIZE).map(|_| random_density(&mut rng, grid)).collect();
    let radii = [0.3, 0.5, 1.0, 2.0, std::f64::consts::PI];
    let mut checks = Vec::new();

    let ck: Vec<_> = corpus
        .iter()
        .map(|rho| {
            ck_bracket(rho)
                .map(|b| normalized(b.middle, b.lower).min(normalized(b.upper, b.middle)))
                .map_err(|e| e.to_string())
        })
        .collect();
    checks.push(worst_margin(2, s, "csiszar_kullback_chain", &ck));

    for r0 in radii {
        let lemma: Vec<_> = corpus
            .iter()
            .map(|rho| {
                let pc = poincare_constant_auto(r0).map_err(|e| e.to_string())?;
                Ok(normalized(
                    near_diagonal_energy(rho, r0),
                    pc.c_rigorous * l2_deviation_sq(rho),
                ))
            })
            .collect();
        checks.push(worst_margin(2, s, &format!("poincare_lemma_r0_{r0:.4}"), &lemma));
    }

    for kernel in [
        KernelSpec::plateau(1.0, 1.0),
        KernelSpec::geometric(1.0, 1.0, 0.5),
        KernelSpec::topological(1.0, 1.0, 0.5, 0.5),
    ] {
        let diss: Vec<_> = corpus
            .par_iter()
            .map(|rho| {
                dissipation_lower_check(rho, &kernel)
                    .map(|d| normalized(d.dissipation, d.lower_bound))
                    .map_err(|e| e.to_string())
            })
            .collect();
        checks.push(worst_margin(
            2,
            s,
            &format!("dissipation_lower_{}", kernel.variant_name()),
            &diss,
        ));
    }
    checks
}

fn oracle_kernels() -> Vec<(KernelSpec, f64)> {
    let mut kernels = vec![(KernelSpec::plateau(1.0, 1.0), 1e-2), (KernelSpec::constant(1.0), 1e-2)];
    for alpha in [0.3, 0.5, 0.9, 1.0, 1.2, 1.5] {
        let tol = if alpha < 1.0 { 1e-2 } else { 5e-2 };
        kernels.push((KernelSpec::geometric(1.0, 1.0, alpha), tol));
    }
    for (alpha, tau) in [(0.5, 0.5), (0.5, 0.8), (0.5, 1.6), (1.2, 0.6), (1.5, 1.0)] {
        let tol = if alpha < 1.0 { 1e-2 } else { 5e-2 };
        kernels.push((KernelSpec::topological(1.0, 1.0, alpha, tau), tol));
    }
    kernels
}

fn oracles(seed: u64) -> Vec<SuiteCheck> {
    let s = Suite::Oracles;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f72_6163_6c65);
    let fields: Vec<(TrigPoly, TrigPoly)> = (0..3)
        .map(|_| {
            let mean = rng.gen_range(0.5..2.0);
            let amp = mean * rng.gen_range(0.1..0.6);
            (random_trig(&mut rng, mean, 3, amp), random_trig(&mut rng, 0.0, 4, 1.0))
        })
        .collect();
    let mut checks = Vec::new();
    for (kernel, tol) in oracle_kernels() {
        for n in [32usize, 64] {
            if kernel.is_lipschitz() && n < 64 {
                continue;
            }
            let grid = TorusGrid::new(n).expect("oracle grid");
            let worst = fields
                .iter()
                .map(|(rho, f)| {
                    let reference = l_psi_reference_field(&kernel, rho, f, grid)?;
                    let value = l_psi(&kernel, &rho.sample(grid), &f.sample(grid))?;
                    relative_sup_error(&value, &reference)
                })
                .collect::<Result<Vec<_>, _>>();
            let name = format!("l_psi_vs_quadrature.{}.n{n}", kernel_label(&kernel));
            checks.push(match worst {
                Ok(errs) => SuiteCheck::at_most(3, s, name, errs.into_iter().fold(0.0, f64::max), tol),
                Err(e) => SuiteCheck::failed(3, s, name, e.to_string()),
            });
        }
    }
    let grid = TorusGrid::new(64).expect("identity grid");
    for (kernel, _) in oracle_kernels() {
        let worst = fields
            .iter()
            .map(|(rho_p, u_p)| {
                let rho = rho_p.sample(grid);
                let u = u_p.sample(grid);
                let force = alignment_force(&kernel, &rho, &u)?;
                let rho_u = rho.zip_map(&u, |a, b| a * b);
                let l_rho_u = l_psi(&kernel, &rho, &rho_u)?;
                let l_rho = l_psi(&kernel, &rho, &rho)?;
                let identity = l_rho_u.zip_map(&u.zip_map(&l_rho, |a, b| a * b), |a, b| a - b);
                let scale = l_rho_u.sup_abs() + u.sup_abs() * l_rho.sup_abs();
                Ok::<f64, euler_align::Error>(force.zip_map(&identity, |a, b| a - b).sup_abs() / scale)
            })
            .collect::<Result<Vec<_>, _>>();
        let name = format!("alignment_identity.{}", kernel_label(&kernel));
        checks.push(match worst {
            Ok(errs) => SuiteCheck::at_most(3, s, name, errs.into_iter().fold(0.0, f64::max), IDENTITY_TOL),
            Err(e) => SuiteCheck::failed(3, s, name, e.to_string()),
        });
    }
    checks
}

fn kernel_label(kernel: &KernelSpec) -> String {
    match *kernel {
        KernelSpec::Lipschitz { profile, .. } => format!("lipschitz_{}", format!("{profile:?}").to_lowercase()),
        KernelSpec::Geometric { alpha, .. } => format!("geometric_a{alpha}"),
        KernelSpec::Topological { alpha, tau, .. } => format!("topological_a{alpha}_t{tau}"),
    }
}

fn theorem1(cache: &RunCache) -> Vec<SuiteCheck> {
    let s = Suite::Theorem1;
    let mut checks = Vec::new();
    for config in s.runs() {
        let run = cache.get(&config);
        match outcome_or_fail(&run, 4, s, &config.name) {
            Ok(o) => {
                checks.push(SuiteCheck::new(
                    4,
                    s,
                    format!("{}.e0_zero", config.name),
                    o.prepared.initial.e0_sup,
                    o.prepared.initial.e0_terms_l1,
                    o.prepared.initial.e0_zero,
                ));
                checks.extend(bound_checks(o, 4, s, &["theorem1_decay", "theorem1_fit_r2"]));
                checks.push(SuiteCheck::at_most(
                    4,
                    s,
                    format!("{}.runtime_s", config.name),
                    run.seconds,
                    THEOREM_SECONDS,
                ));
            }
            Err(c) => checks.push(c),
        }
    }
    checks
}

/// `sup|q₀|` relative to its target, for `target_q` configs.
fn target_size_check(o: &Outcome, criterion: u8, suite: Suite) -> Option<SuiteCheck> {
    let config = &o.prepared.config;
    let VelocitySpec::TargetQ {
        sup_q,
        threshold_fraction,
        ..
    } = config.initial.velocity
    else {
        return None;
    };
    let target = match (sup_q, threshold_fraction) {
        (Some(q), _) => q,
        (None, Some(f)) => f * smallness_threshold(&config.kernel, o.prepared.initial.mass).ok()??,
        _ => return None,
    };
    let rel = (o.prepared.initial.sup_q0 - target).abs() / target;
    Some(
        SuiteCheck::at_most(
            criterion,
            suite,
            format!("{}.sup_q0_target", config.name),
            rel,
            SIZE_TOL,
        )
        .with_detail(format!("sup_q0 = {:e}, target {target:e}", o.prepared.initial.sup_q0)),
    )
}

fn theorem2(cache: &RunCache) -> Vec<SuiteCheck> {
    let s = Suite::Theorem2;
    let mut checks = Vec::new();
    for config in s.runs() {
        let run = cache.get(&config);
        match outcome_or_fail(&run, 5, s, &config.name) {
            Ok(o) => {
                if let Ok(norms) = lipschitz_norms(&config.kernel) {
                    let ratio = o.prepared.initial.sup_q0 / norms.l1_norm;
                    checks.push(
                        SuiteCheck::at_most(
                            5,
                            s,
                            format!("{}.sup_q0_fraction", config.name),
                            (ratio - 0.1).abs(),
                            SIZE_TOL,
                        )
                        .with_detail(format!("sup_q0 / |psi|_1 = {ratio}")),
                    );
                }
                checks.extend(bound_checks(o, 5, s, &["theorem2_l1", "density_amplitude"]));
                checks.push(SuiteCheck::at_most(
                    5,
                    s,
                    format!("{}.runtime_s", config.name),
                    run.seconds,
                    THEOREM_SECONDS,
                ));
            }
            Err(c) => checks.push(c),
        }
    }
    checks
}

fn theorem3(cache: &RunCache) -> Vec<SuiteCheck> {
    let s = Suite::Theorem3;
    let mut checks = Vec::new();
    for config in s.runs() {
        let run = cache.get(&config);
        match outcome_or_fail(&run, 6, s, &config.name) {
            Ok(o) => {
                checks.extend(target_size_check(o, 6, s));
                checks.extend(bound_checks(o, 6, s, &["theorem3_l1", "density_amplitude"]));
                checks.push(SuiteCheck::at_most(
                    6,
                    s,
                    format!("{}.runtime_s", config.name),
                    run.seconds,
                    THEOREM_SECONDS,
                ));
            }
            Err(c) => checks.push(c),
        }
    }
    for name in VIOLATION_RUNS {
        checks.push(rejection_check(name));
    }
    checks
}

/// Closed-form smallness threshold `λ M₀^{-τ} R₀^{τ-α} / (τ - α)`.
fn expected_threshold(kernel: &KernelSpec, m0: f64) -> Option<f64> {
    let alpha = kernel.alpha()?;
    let tau = kernel.tau();
    (tau > alpha).then(|| kernel.lambda() * m0.powf(-tau) * kernel.r0().powf(tau - alpha) / (tau - alpha))
}

/// A config at 150% of its threshold must be refused with the threshold in the message.
fn rejection_check(name: &str) -> SuiteCheck {
    let s = Suite::Theorem3;
    let check = format!("{name}.rejected");
    let config = match pinned(name) {
        Ok(c) => c,
        Err(e) => return SuiteCheck::failed(6, s, check, e.to_string()),
    };
    let mass = match config.initial_state() {
        Ok(state) => state.mass(),
        Err(e) => return SuiteCheck::failed(6, s, check, e.to_string()),
    };
    let Some(expected) = expected_threshold(&config.kernel, mass) else {
        return SuiteCheck::failed(6, s, check, "kernel has no smallness condition".into());
    };
    match prepare(&config) {
        Ok(_) => SuiteCheck::failed(6, s, check, "config was accepted".into()),
        Err(CliError::Config(msg)) => {
            let printed = msg
                .split("must be < ")
                .nth(1)
                .and_then(|rest| rest.split_whitespace().next())
                .and_then(|t| t.parse::<f64>().ok());
            match printed {
                Some(t) => SuiteCheck::at_most(6, s, check, (t - expected).abs() / expected, SIZE_TOL)
                    .with_detail(format!("printed threshold {t}, expected {expected}")),
                None => SuiteCheck::failed(6, s, check, format!("no threshold in message: {msg}")),
            }
        }
        Err(e) => SuiteCheck::failed(6, s, check, format!("wrong error class: {e}")),
    }
}

fn envelopes(cache: &RunCache) -> Vec<SuiteCheck> {
    let s = Suite::Envelopes;
    let mut checks = Vec::new();
    for config in s.runs() {
        let run = cache.get(&config);
        match outcome_or_fail(&run, 7, s, &config.name) {
            Ok(o) => checks.extend(bound_checks(o, 7, s, &["logistic_envelope"])),
            Err(c) => checks.push(c),
        }
    }
    checks
}

/// Tail value at the finest grid plus strict decrease across the refinement.
fn refinement_checks(
    cache: &RunCache,
    criterion: u8,
    suite: Suite,
    label: &str,
    tol: f64,
    metric: impl Fn(&Outcome) -> Option<f64>,
) -> Vec<SuiteCheck> {
    let mut values = Vec::new();
    let mut checks = Vec::new();
    for config in suite.runs() {
        let run = cache.get(&config);
        match outcome_or_fail(&run, criterion, suite, &config.name) {
            Ok(o) => match metric(o) {
                Some(v) => values.push((config.grid.n_cells, v)),
                None => checks.push(SuiteCheck::failed(
                    criterion,
                    suite,
                    format!("{}.{label}", config.name),
                    "metric unavailable".into(),
                )),
            },
            Err(c) => checks.push(c),
        }
    }
    if values.len() != REFINEMENT.len() {
        return checks;
    }
    let detail = values
        .iter()
        .map(|(n, v)| format!("n={n}: {v:e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let (finest_n, finest) = values[values.len() - 1];
    checks.push(
        SuiteCheck::at_most(criterion, suite, format!("{label}.n{finest_n}"), finest, tol).with_detail(detail.clone()),
    );
    let worst_ratio = values.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
    checks.push(
        SuiteCheck::new(
            criterion,
            suite,
            format!("{label}.refinement_ratio"),
            worst_ratio,
            1.0,
            worst_ratio < 1.0,
        )
        .with_detail(detail),
    );
    checks
}

fn entropy_balance(cache: &RunCache) -> Vec<SuiteCheck> {
    refinement_checks(
        cache,
        8,
        Suite::EntropyBalance,
        "entropy_residual_tail_max",
        ENTROPY_RESIDUAL_TOL,
        |o| o.tail_max(|r| r.entropy_residual),
    )
}

fn q_transport(cache: &RunCache) -> Vec<SuiteCheck> {
    refinement_checks(cache, 9, Suite::QTransport, "sup_q_drift", Q_DRIFT_TOL, |o| {
        (o.prepared.initial.sup_q0 > 0.0).then(|| o.sup_q_drift())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_configs_parse() {
        for (name, _) in PINNED {
            let c = pinned(name).unwrap();
            assert_eq!(c.name, name);
        }
        assert!(pinned("nope").is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
        assert_eq!(Suite::Conservation.criterion(), Some(1));
        assert_eq!(Suite::QTransport.criterion(), Some(9));
        assert_eq!(Suite::All.criterion(), None);
    }

    #[test]
    fn rejections_print_threshold() {
        for name in VIOLATION_RUNS {
            let c = rejection_check(name);
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn random_density_positive() {
        let g = TorusGrid::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(random_density(&mut rng, g).min() > 0.0);
        }
    }

    #[test]
    fn result_summarizes_criteria() {
        let s = Suite::Oracles;
        let checks = vec![
            SuiteCheck::at_most(3, s, "a", 1.0, 2.0),
            SuiteCheck::at_most(3, s, "b", 3.0, 2.0),
            SuiteCheck::at_most(2, s, "c", 1.0, 2.0),
        ];
        let r = SuiteResult::new(s, 0, checks);
        assert!(!r.passed);
        assert_eq!(r.failures(), 1);
        assert!(r.criterion(2).unwrap().passed);
        assert!(!r.criterion(3).unwrap().passed);
        assert_eq!(r.lines().len(), 5);
    }
}
