//! Seeded experiment batches, probe tables and their on-disk formats.
//!
//! Every output embeds a hash of the parameters that produced it. Runs are
//! keyed by seed and written in seed order, so the bytes on disk do not
//! depend on how many worker threads were used.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{gen_instance, DictionaryInstance, DictionaryMode};
use crate::error::{Error, Result};
use crate::landscape::{
    enumerate_critical_points, fluctuation_probe, hessian_signature, projection_probe, volume_lower_bound,
    volume_profile,
};
use crate::objectives::{DictionaryLearning, Separable, SmoothingParam, SparsityParam, SphereObjective};
use crate::optimizer::{
    dictionary_default_eta, recovery_error, riemannian_gd, separable_default_eta, BallCenter, BallNorm, DescentConfig,
    SignedIndex, StopBall, TerminalStatus, TraceRecord,
};
use crate::phase_retrieval::{
    hermitian_dot, pr_failure_bound, pr_iteration_bound, pr_max_step, pr_run, pr_value, sample_uniform_s1,
    step_identity_check, PRSignal, C64,
};
use crate::sphere::{chart_to_sphere, point_on_zeta_boundary, sample_uniform_sphere, UnitVector};
use crate::stats::{proportion, McEstimate};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Separable,
    Dictionary,
    PhaseRetrieval,
}

/// How starting points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Uniform on the sphere, or uniform in `S₁` for phase retrieval.
    #[default]
    Uniform,
    /// On the boundary of `C_ζ₀` for the separable problem; uniform in `S₁`
    /// conditioned on `ζ ≥ ζ₀` for phase retrieval.
    Margin,
}

/// A batch description as written in a TOML file. Unset fields take
/// problem-specific defaults in [`ExperimentConfig::resolve`].
///
/// For phase retrieval `zeta0` is in units of `‖x‖` and `eta` in units of
/// `1/‖x‖²`, since every seed draws its own signal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Option<Problem>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub theta: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub zeta0: Option<f64>,
    /// Stopping radius: `r` for the separable problem, `s` for dictionary learning.
    pub radius: Option<f64>,
    pub max_iters: Option<usize>,
    pub num_seeds: Option<usize>,
    pub seed_base: Option<u64>,
    pub dictionary_mode: Option<DictionaryMode>,
    /// Region constant for phase retrieval.
    pub c: Option<f64>,
    pub init: Option<InitKind>,
    pub output_dir: Option<PathBuf>,
    pub save_traces: Option<bool>,
}

/// Fully specified batch parameters. This is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub problem: Problem,
    pub n: usize,
    pub p: Option<usize>,
    pub theta: Option<f64>,
    pub mu: Option<f64>,
    pub eta: f64,
    pub zeta0: f64,
    pub radius: Option<f64>,
    pub max_iters: usize,
    pub num_seeds: usize,
    pub seed_base: u64,
    pub dictionary_mode: Option<DictionaryMode>,
    pub c: Option<f64>,
    pub init: InitKind,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn reject(name: &str, present: bool, problem: Problem) -> Result<()> {
    if present {
        return Err(invalid(format!("{name} does not apply to problem {problem:?}")));
    }
    Ok(())
}

/// Default margin when none is given.
pub const DEFAULT_ZETA0: f64 = 0.1;
/// Default region constant for phase retrieval.
pub const DEFAULT_PR_C: f64 = 1.0 / 35.0;

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Validates every field and fills in defaults.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let problem = self.problem.ok_or_else(|| invalid("problem is required"))?;
        let n = self.n.ok_or_else(|| invalid("n is required"))?;
        if n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        let num_seeds = self.num_seeds.unwrap_or(1);
        if num_seeds == 0 {
            return Err(invalid("num_seeds must be at least 1"));
        }
        let zeta0 = positive("zeta0", self.zeta0.unwrap_or(DEFAULT_ZETA0))?;
        if let Some(m) = self.max_iters {
            if m == 0 {
                return Err(invalid("max_iters must be at least 1"));
            }
        }
        let eta = self.eta.map(|e| positive("eta", e)).transpose()?;
        let radius = self.radius.map(|r| positive("radius", r)).transpose()?;
        let init = self.init.unwrap_or_default();
        let mut resolved = ResolvedConfig {
            problem,
            n,
            p: None,
            theta: None,
            mu: None,
            eta: 0.0,
            zeta0,
            radius: None,
            max_iters: 0,
            num_seeds,
            seed_base: self.seed_base.unwrap_or(0),
            dictionary_mode: None,
            c: None,
            init,
        };
        let mu_of = |m: Option<f64>, default: SmoothingParam| -> Result<f64> {
            match m {
                Some(v) => SmoothingParam::new(v)
                    .map(f64::from)
                    .map_err(|e| invalid(e.to_string())),
                None => Ok(default.get()),
            }
        };
        match problem {
            Problem::Separable => {
                reject("p", self.p.is_some(), problem)?;
                reject("theta", self.theta.is_some(), problem)?;
                reject("dictionary_mode", self.dictionary_mode.is_some(), problem)?;
                reject("c", self.c.is_some(), problem)?;
                let mu = mu_of(self.mu, SmoothingParam::separable_default(n)?)?;
                let r = radius.unwrap_or(mu * (1.0 / mu).ln());
                let eta = eta.unwrap_or(separable_default_eta(n, mu));
                let budget = ((n as f64).sqrt() / (r * r) + (1.0 / zeta0).ln().max(0.0)) / eta;
                resolved.mu = Some(mu);
                resolved.radius = Some(r);
                resolved.eta = eta;
                resolved.max_iters = self.max_iters.unwrap_or(budget.ceil() as usize);
            }
            Problem::Dictionary => {
                reject("c", self.c.is_some(), problem)?;
                if init != InitKind::Uniform {
                    return Err(invalid("dictionary learning only supports uniform initialization"));
                }
                let p = self.p.ok_or_else(|| invalid("p is required for dictionary learning"))?;
                if p == 0 {
                    return Err(invalid("p must be at least 1"));
                }
                let theta = self
                    .theta
                    .ok_or_else(|| invalid("theta is required for dictionary learning"))?;
                let theta = SparsityParam::new(theta).map_err(|e| invalid(e.to_string()))?.get();
                let mu = mu_of(self.mu, SmoothingParam::dictionary_default())?;
                // max|aᵢ*q| ≥ 0.99 is the ball ‖q − aᵢ‖ ≤ √0.02.
                let s = radius.unwrap_or(0.02f64.sqrt());
                let eta = eta.unwrap_or(dictionary_default_eta(n, p, theta, s));
                let budget = (1.0 / s + n as f64 * (1.0 / zeta0).ln().max(0.0)) / (eta * theta);
                resolved.p = Some(p);
                resolved.theta = Some(theta);
                resolved.mu = Some(mu);
                resolved.radius = Some(s);
                resolved.eta = eta;
                resolved.dictionary_mode = Some(self.dictionary_mode.unwrap_or_default());
                resolved.max_iters = self.max_iters.unwrap_or(budget.ceil() as usize);
            }
            Problem::PhaseRetrieval => {
                for (name, present) in [
                    ("p", self.p.is_some()),
                    ("theta", self.theta.is_some()),
                    ("mu", self.mu.is_some()),
                    ("radius", self.radius.is_some()),
                    ("dictionary_mode", self.dictionary_mode.is_some()),
                ] {
                    reject(name, present, problem)?;
                }
                let c = self.c.unwrap_or(DEFAULT_PR_C);
                if !(c > 0.0 && c < 0.25) {
                    return Err(invalid(format!("c must lie in (0, 1/4), got {c}")));
                }
                if zeta0 >= std::f64::consts::FRAC_1_SQRT_2 {
                    return Err(invalid("zeta0 must be below 1/√2 (in units of ‖x‖)"));
                }
                let max_rel = c.sqrt() / 4.0;
                let eta = eta.unwrap_or(0.9 * max_rel);
                if eta >= max_rel {
                    return Err(invalid(format!(
                        "eta must be below √c/4 = {max_rel} (in units of 1/‖x‖²)"
                    )));
                }
                resolved.c = Some(c);
                resolved.eta = eta;
                resolved.max_iters = self
                    .max_iters
                    .unwrap_or(pr_iteration_bound(1.0, zeta0, eta, c).ceil() as usize);
            }
        }
        Ok(resolved)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the compact JSON encoding of any parameter record.
pub fn params_hash<T: Serialize>(params: &T) -> String {
    sha256_hex(&serde_json::to_vec(params).expect("parameters serialize"))
}

impl ResolvedConfig {
    pub fn hash(&self) -> String {
        params_hash(self)
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub success: bool,
    pub iterations: usize,
    pub final_f: f64,
    pub final_dist: f64,
    pub final_zeta: f64,
    pub status: String,
    pub initial_zeta: f64,
    /// First iteration with `ζ ≥ 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_exit_iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_column: Option<SignedIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_correlation: Option<f64>,
}

/// One run together with what it optionally leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Option<Vec<TraceRecord>>,
    pub instance: Option<DictionaryInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub runs: usize,
    pub successes: usize,
    pub success_fraction: McEstimate,
    pub numerical_aborts: usize,
    pub iterations_min: usize,
    pub iterations_median: usize,
    pub iterations_p90: usize,
    pub iterations_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_exit_median: Option<usize>,
}

/// Nearest-rank quantile of a sorted slice.
fn quantile(sorted: &[usize], q: f64) -> usize {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl Aggregates {
    pub fn from_runs(runs: &[RunSummary]) -> Self {
        let successes = runs.iter().filter(|r| r.success).count();
        let mut iters: Vec<usize> = runs.iter().map(|r| r.iterations).collect();
        iters.sort_unstable();
        let mut exits: Vec<usize> = runs.iter().filter_map(|r| r.zeta_exit_iteration).collect();
        exits.sort_unstable();
        Self {
            runs: runs.len(),
            successes,
            success_fraction: proportion(successes as u64, runs.len() as u64),
            numerical_aborts: runs.iter().filter(|r| r.status == "numerical_abort").count(),
            iterations_min: iters[0],
            iterations_median: quantile(&iters, 0.5),
            iterations_p90: quantile(&iters, 0.9),
            iterations_max: iters[iters.len() - 1],
            zeta_exit_median: (!exits.is_empty()).then(|| quantile(&exits, 0.5)),
        }
    }
}

/// The pass/fail rule applied by `--check`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub rule: String,
    pub threshold: f64,
    pub observed: f64,
    pub passed: bool,
}

pub fn evaluate_gate(cfg: &ResolvedConfig, agg: &Aggregates) -> Gate {
    let observed = agg.success_fraction.mean;
    let sigma = agg.success_fraction.std_error;
    let (rule, threshold) = match (cfg.problem, cfg.init) {
        (Problem::Separable, _) => (
            "success >= 1 - 2 ln(n) zeta0 - 3 sigma",
            1.0 - 2.0 * (cfg.n as f64).ln() * cfg.zeta0 - tolerances::BINOMIAL_GATE * sigma,
        ),
        (Problem::Dictionary, _) => ("success >= 0.9", 0.9),
        (Problem::PhaseRetrieval, InitKind::Uniform) => (
            "success >= 1 - failure_bound - 3 sigma",
            1.0 - pr_failure_bound(cfg.n, cfg.zeta0, 1.0) - tolerances::BINOMIAL_GATE * sigma,
        ),
        (Problem::PhaseRetrieval, InitKind::Margin) => ("success == 1", 1.0),
    };
    Gate {
        rule: rule.into(),
        threshold,
        observed,
        passed: observed >= threshold,
    }
}

/// Everything a batch produced, in seed order.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub config: ResolvedConfig,
    pub config_hash: String,
    pub runs: Vec<RunOutput>,
    pub aggregates: Aggregates,
    pub gate: Gate,
}

impl BatchResult {
    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }

    pub fn any_numerical_abort(&self) -> bool {
        self.aggregates.numerical_aborts > 0
    }
}

fn first_zeta_exit(records: &[TraceRecord]) -> Option<usize> {
    records.iter().find(|r| r.zeta >= 1.0).map(|r| r.iter)
}

fn descent_summary(seed: u64, trace: &crate::optimizer::DescentTrace) -> RunSummary {
    let first = trace.records.first().expect("nonempty trace");
    let last = trace.last();
    RunSummary {
        seed,
        success: trace.status == TerminalStatus::BallEntered,
        iterations: last.iter,
        final_f: last.f,
        final_dist: last.dist_target,
        final_zeta: last.zeta,
        status: trace.status.label().into(),
        initial_zeta: first.zeta,
        zeta_exit_iteration: None,
        best_column: None,
        max_correlation: None,
    }
}

fn run_separable(cfg: &ResolvedConfig, seed: u64, keep_trace: bool) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let mu = SmoothingParam::new(cfg.mu.expect("resolved"))?;
    let q0 = match cfg.init {
        InitKind::Uniform => sample_uniform_sphere(n, &mut rng),
        InitKind::Margin => {
            let d = DVector::from_fn(n - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            chart_to_sphere(&point_on_zeta_boundary(&d, cfg.zeta0)?)
        }
    };
    let descent = DescentConfig::new(cfg.eta, cfg.max_iters).with_ball(StopBall {
        norm: BallNorm::Linf,
        radius: cfg.radius.expect("resolved"),
        center: BallCenter::ChartOrigin,
    });
    let trace = riemannian_gd(&Separable::new(n, mu), &q0, &descent)?;
    let mut summary = descent_summary(seed, &trace);
    summary.zeta_exit_iteration = first_zeta_exit(&trace.records);
    Ok(RunOutput {
        summary,
        trace: keep_trace.then_some(trace.records),
        instance: None,
    })
}

fn run_dictionary(cfg: &ResolvedConfig, seed: u64, keep_trace: bool) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let inst = gen_instance(
        n,
        cfg.p.expect("resolved"),
        cfg.theta.expect("resolved"),
        cfg.dictionary_mode.expect("resolved"),
        &mut rng,
    )?;
    let q0 = sample_uniform_sphere(n, &mut rng);
    let obj = DictionaryLearning::new(inst.y.clone(), SmoothingParam::new(cfg.mu.expect("resolved"))?)?;
    let descent = DescentConfig::new(cfg.eta, cfg.max_iters)
        .with_record_trace(keep_trace)
        .with_ball(StopBall {
            norm: BallNorm::L2,
            radius: cfg.radius.expect("resolved"),
            center: BallCenter::BestSignedColumn(inst.a0.clone()),
        });
    let trace = riemannian_gd(&obj, &q0, &descent)?;
    let mut summary = descent_summary(seed, &trace);
    let (best, err) = recovery_error(&trace.final_point, &inst.a0);
    summary.best_column = Some(best);
    summary.max_correlation = Some(1.0 - err * err / 2.0);
    let a0q0 = UnitVector::normalize(inst.a0.tr_mul(q0.coords()))?;
    summary.initial_zeta = crate::sphere::zeta(&crate::optimizer::section_map(&a0q0).0);
    Ok(RunOutput {
        summary,
        trace: keep_trace.then_some(trace.records),
        instance: keep_trace.then_some(inst),
    })
}

fn run_phase_retrieval(cfg: &ResolvedConfig, seed: u64, keep_trace: bool) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = PRSignal::random(cfg.n, &mut rng)?;
    let zeta0 = cfg.zeta0 * x.norm();
    let z0 = loop {
        let z = sample_uniform_s1(&x, &mut rng);
        if cfg.init == InitKind::Uniform || hermitian_dot(x.x(), &z).norm() / x.norm() >= zeta0 {
            break z;
        }
    };
    let eta = cfg.eta / x.norm_sq();
    let c = cfg.c.expect("resolved");
    let mut records = Vec::new();
    let run = pr_run(&z0, &x, eta, c, cfg.max_iters, Some(&mut records))?;
    let last = *records.last().expect("pr_run records the start");
    let finite = records.iter().all(|r| r.f.is_finite() && r.grad_norm.is_finite());
    let summary = RunSummary {
        seed,
        success: run.success,
        iterations: run.iterations,
        final_f: last.f,
        final_dist: run.final_dist,
        final_zeta: run.final_zeta,
        status: if !finite {
            "numerical_abort"
        } else if run.success {
            "ball_entered"
        } else {
            "max_iters"
        }
        .into(),
        initial_zeta: run.initial_zeta,
        zeta_exit_iteration: None,
        best_column: None,
        max_correlation: None,
    };
    Ok(RunOutput {
        summary,
        trace: keep_trace.then_some(records),
        instance: None,
    })
}

/// Runs seeds `seed_base..seed_base + num_seeds` on a pool of `jobs` threads.
pub fn run_batch(cfg: &ResolvedConfig, jobs: usize, keep_traces: bool) -> Result<BatchResult> {
    let seeds: Vec<u64> = (0..cfg.num_seeds as u64).map(|k| cfg.seed_base + k).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    let runs: Vec<RunOutput> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match cfg.problem {
                Problem::Separable => run_separable(cfg, seed, keep_traces),
                Problem::Dictionary => run_dictionary(cfg, seed, keep_traces),
                Problem::PhaseRetrieval => run_phase_retrieval(cfg, seed, keep_traces),
            })
            .collect::<Result<_>>()
    })?;
    let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let aggregates = Aggregates::from_runs(&summaries);
    let gate = evaluate_gate(cfg, &aggregates);
    Ok(BatchResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        runs,
        aggregates,
        gate,
    })
}

/// Fixed 17-significant-digit float formatting for tables.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    config_hash: &'a str,
    seed_base: u64,
    config: &'a ResolvedConfig,
    aggregates: &'a Aggregates,
    gate: &'a Gate,
    runs: Vec<&'a RunSummary>,
}

pub fn trace_csv(records: &[TraceRecord], config_hash: &str, seed_base: u64, seed: u64) -> String {
    let mut out = format!("# config_hash={config_hash}\n# seed_base={seed_base}\n# seed={seed}\n");
    out.push_str("iter,f,grad_norm,zeta,w_inf,dist_target\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            fmt_f64(r.zeta),
            fmt_f64(r.w_inf),
            fmt_f64(r.dist_target)
        );
    }
    out
}

impl BatchResult {
    pub fn summary_json(&self) -> String {
        let doc = SummaryDoc {
            config_hash: &self.config_hash,
            seed_base: self.config.seed_base,
            config: &self.config,
            aggregates: &self.aggregates,
            gate: &self.gate,
            runs: self.runs.iter().map(|r| &r.summary).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes `summary.json`, and per-seed traces and instances when kept.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_json())?;
        for run in &self.runs {
            let seed = run.summary.seed;
            if let Some(trace) = &run.trace {
                let traces = dir.join("traces");
                fs::create_dir_all(&traces)?;
                let csv = trace_csv(trace, &self.config_hash, self.config.seed_base, seed);
                fs::write(traces.join(format!("seed_{seed}.csv")), csv)?;
            }
            if let Some(inst) = &run.instance {
                let instances = dir.join("instances");
                fs::create_dir_all(&instances)?;
                let mut buf = Vec::new();
                inst.write_binary(&mut buf)?;
                fs::write(instances.join(format!("seed_{seed}.bin")), buf)?;
            }
        }
        Ok(())
    }
}

/// A probe result: named columns, string cells and free-form notes, written
/// as CSV with `#` comment lines on top.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub params_hash: String,
    pub notes: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new<P: Serialize>(params: &P, columns: Vec<&'static str>) -> Self {
        Self {
            params_hash: params_hash(params),
            notes: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# params_hash={}\n", self.params_hash);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeParams {
    pub n: usize,
    pub zetas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

pub fn probe_volume(params: &VolumeParams) -> Result<Table> {
    let est = volume_profile(params.n, &params.zetas, params.samples, params.seed)?;
    let mut t = Table::new(params, vec!["n", "zeta", "fraction", "std_error", "lower_bound"]);
    for (z, e) in params.zetas.iter().zip(est) {
        t.rows.push(vec![
            params.n.to_string(),
            fmt_f64(*z),
            fmt_f64(e.mean),
            fmt_f64(e.std_error),
            fmt_f64(volume_lower_bound(params.n, *z)),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionParams {
    pub n: usize,
    pub mu: f64,
    pub zetas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

pub fn probe_projection(params: &ProjectionParams) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let probe = projection_probe(
        params.n,
        SmoothingParam::new(params.mu)?,
        &params.zetas,
        params.samples,
        &mut rng,
    )?;
    let mut t = Table::new(params, vec!["zeta", "w_inf", "projection", "ratio"]);
    t.note("fitted_c", fmt_f64(probe.fitted_c));
    t.note("explicit_c", fmt_f64(probe.explicit_c));
    t.note("explicit_bound_holds", probe.explicit_bound_holds);
    for r in &probe.rows {
        t.rows.push(vec![
            fmt_f64(r.zeta),
            fmt_f64(r.w_inf),
            fmt_f64(r.projection),
            fmt_f64(r.ratio),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct FluctuationParams {
    pub n: usize,
    pub mu: f64,
    pub theta: f64,
    pub zeta: f64,
    pub p_list: Vec<usize>,
    pub trials: usize,
    pub reference_samples: usize,
    pub seed: u64,
}

/// Draws one point on `∂C_ζ` and measures how the finite-sample projection
/// at its largest coordinate approaches the population value.
pub fn probe_fluctuation(params: &FluctuationParams) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let d = DVector::from_fn(params.n - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = point_on_zeta_boundary(&d, params.zeta)?;
    let i = w.argmax_abs().expect("n ≥ 2");
    let probe = fluctuation_probe(
        &w,
        i,
        SmoothingParam::new(params.mu)?,
        params.theta,
        &params.p_list,
        params.trials,
        params.reference_samples,
        &mut rng,
    )?;
    let mut t = Table::new(params, vec!["p", "mean_abs_deviation", "std_error"]);
    t.note("reference", fmt_f64(probe.reference.mean));
    t.note("reference_std_error", fmt_f64(probe.reference.std_error));
    t.note("slope", fmt_f64(probe.slope()));
    for r in &probe.rows {
        t.rows.push(vec![
            r.p.to_string(),
            fmt_f64(r.mean_abs_deviation),
            fmt_f64(r.std_error),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalParams {
    pub n: usize,
    pub mu: f64,
}

pub fn probe_critical(params: &CriticalParams) -> Result<Table> {
    let mu = SmoothingParam::new(params.mu)?;
    let obj = Separable::new(params.n, mu);
    let points = enumerate_critical_points(params.n)?;
    let mut t = Table::new(
        params,
        vec!["pattern", "support_size", "kind", "grad_norm", "neg_eigs", "pos_eigs"],
    );
    let mut counts = std::collections::BTreeMap::new();
    for cp in &points {
        *counts.entry(cp.kind.label()).or_insert(0usize) += 1;
        let grad = obj.riemannian_gradient(&cp.point).norm();
        let (neg, pos) = hessian_signature(cp, mu);
        let pattern: String = cp
            .pattern
            .iter()
            .map(|&s| match s {
                1 => '+',
                -1 => '-',
                _ => '0',
            })
            .collect();
        t.rows.push(vec![
            pattern,
            cp.support_size.to_string(),
            cp.kind.label().into(),
            fmt_f64(grad),
            neg.to_string(),
            pos.to_string(),
        ]);
    }
    t.note("count", points.len());
    for (k, v) in counts {
        t.note(k, v);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrIdentityParams {
    pub n: usize,
    pub steps: usize,
    /// Step size in units of `1/‖x‖²`.
    pub eta: f64,
    pub seed: u64,
}

/// Steps gradient descent from a uniform `S₁` start and records how far each
/// step deviates from the exact `ζ` and `‖w‖` recurrences.
pub fn probe_pr_identities(params: &PrIdentityParams) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let x = PRSignal::random(params.n, &mut rng)?;
    let eta = positive("eta", params.eta)? / x.norm_sq();
    let mut z: Vec<C64> = sample_uniform_s1(&x, &mut rng);
    let mut t = Table::new(params, vec!["step", "f", "zeta_rel", "w_rel", "phi_change"]);
    let mut max_rel = 0.0f64;
    for step in 0..params.steps {
        let (next, check) = step_identity_check(&z, &x, eta)?;
        max_rel = max_rel.max(check.zeta_rel).max(check.w_rel);
        t.rows.push(vec![
            step.to_string(),
            fmt_f64(pr_value(&z, &x)),
            fmt_f64(check.zeta_rel),
            fmt_f64(check.w_rel),
            fmt_f64(check.phi_change),
        ]);
        z = next.z;
    }
    t.note("max_relative_deviation", fmt_f64(max_rel));
    t.note("max_step", fmt_f64(pr_max_step(&x, DEFAULT_PR_C) * x.norm_sq()));
    Ok(t)
}
