//! Subcommands: each turns a [`RunConfig`] into records.

use clap::{Subcommand, ValueEnum};

use crate::clan_sim::{simulate_trace, write_trace_csv};
use crate::env_model::sample_path;
use crate::error::{Error, Result};
use crate::estimators::scaling::scaling_study;
use crate::estimators::{duality_check, estimate_event_prob, estimate_lambda, estimate_theta, strata_decomposition, McPlan, TransformReport, STRATA};
use crate::oracle::{suite, OracleSizes};
use crate::renewal::{harmonicity_residual, RenewalKind};
use crate::rng::{Purpose, StreamKey};

use super::config::RunConfig;
use super::record::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    U,
    V,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Task {
    /// Check the environment law against the model hypotheses.
    Validate,
    /// Event probability of the regime's clan over `n_grid`.
    Prob,
    /// Generating function of the end-window clan size, `theta_N` and `s_grid`.
    Pgf,
    /// Laplace transform of the rescaled clan size over `beta_grid`.
    Lst,
    /// Power-law fit and compensated sequence over `n_grid`.
    Scaling,
    /// Two independent estimates of the same transform, direct and reflected.
    Duality,
    /// Split of the reflected estimate by the first-minimum window, per `strata_N`.
    Strata,
    /// Small-n oracle suite; exits 3 if any check fails.
    Oracle,
    /// Renewal table and harmonicity residuals on `x_grid`.
    Renewal {
        #[arg(long, value_enum, default_value = "u")]
        kind: TableKind,
        /// Also write the table as CSV (x, estimate, stderr, horizon, samples).
        #[arg(long)]
        table: Option<std::path::PathBuf>,
    },
    /// Clan sizes of one simulated population as CSV.
    Trace {
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Prob => "prob",
            Task::Pgf => "pgf",
            Task::Lst => "lst",
            Task::Scaling => "scaling",
            Task::Duality => "duality",
            Task::Strata => "strata",
            Task::Oracle => "oracle",
            Task::Renewal { .. } => "renewal",
            Task::Trace { .. } => "trace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Records(Vec<Record>),
    /// Output with its own schema (the population trace).
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub body: Body,
    pub conformity: String,
    pub diagnostics: Vec<String>,
    pub exit_code: i32,
}

fn plan(cfg: &RunConfig) -> McPlan {
    McPlan { seed: cfg.seed, shards: cfg.shards, sampler: cfg.sampler.clone(), allow_violation: cfg.allow_violation }
}

fn transform_records(name: &str, r: &TransformReport) -> Vec<Record> {
    let mut out: Vec<Record> = r
        .points
        .iter()
        .map(|p| Record::new(name, p.value, p.stderr, p.denominator.count, r.tag).at(r.n, r.i).param(p.param))
        .collect();
    let count = r.points.first().map_or(0, |p| p.denominator.count);
    out.push(Record::new(format!("{name}_pathwise_violations"), r.pathwise_violations as f64, 0.0, count, r.tag).at(r.n, r.i));
    out
}

pub fn execute(task: &Task, cfg: &RunConfig) -> Result<RunOutput> {
    let report = cfg.env.validate()?;
    let conformity = report.tag().to_string();
    let plan = plan(cfg);
    let m = cfg.m_samples;
    let mut exit_code = 0;
    let mut records = Vec::new();
    match task {
        Task::Validate => {
            for (q, v) in [("a1", report.a1), ("a2", report.a2), ("a3", report.a3), ("nonlattice", report.nonlattice)] {
                records.push(Record::new(q, v as u8 as f64, 0.0, 1, report.tag()));
            }
        }
        Task::Prob => {
            for &n in &cfg.n_grid {
                let e = estimate_event_prob(&cfg.env, cfg.regime, n, m, &plan)?;
                records.push(Record::from_estimate("event_prob", &e.estimate, e.tag).at(n, e.i).param(cfg.regime.param()));
            }
        }
        Task::Pgf => {
            let r = estimate_theta(&cfg.env, cfg.theta_window, cfg.transform_n, &cfg.s_grid, m, &plan)?;
            records.extend(transform_records("theta", &r));
        }
        Task::Lst => {
            let r = estimate_lambda(&cfg.env, cfg.regime, cfg.transform_n, &cfg.beta_grid, m, &plan)?;
            records.extend(transform_records("lambda", &r));
        }
        Task::Scaling => {
            let s = scaling_study(&cfg.env, cfg.regime, &cfg.n_grid, m, &plan)?;
            for (k, p) in s.points.iter().enumerate() {
                records.push(Record::from_summary("event_prob", p.estimate, s.tag).at(p.n, p.i).param(cfg.regime.param()));
                records.push(Record::new("compensated", p.compensated, p.compensated_stderr, p.estimate.count, s.tag).at(p.n, p.i));
                if k > 0 {
                    records.push(Record::new("compensated_ratio", s.ratios[k - 1], 0.0, p.estimate.count, s.tag).at(p.n, p.i));
                }
            }
            let used = s.fit.points_used as u64;
            records.push(Record::new("slope", s.fit.slope, s.fit.slope_stderr, used, s.tag));
            records.push(Record::new("intercept", s.fit.intercept, 0.0, used, s.tag));
            records.push(Record::new("plateau", s.plateau, s.plateau_stderr, 3.min(s.points.len() as u64), s.tag));
        }
        Task::Duality => {
            for &beta in &cfg.beta_grid {
                let r = duality_check(&cfg.env, cfg.duality_i, cfg.duality_n, beta, m, &plan)?;
                let at = |rec: Record| rec.at(r.n, r.i).param(r.beta);
                records.push(at(Record::from_summary("duality_h", r.h_form, &conformity)));
                records.push(at(Record::from_summary("duality_v", r.v_form, &conformity)));
                let se = (r.h_form.stderr.powi(2) + r.v_form.stderr.powi(2)).sqrt();
                records.push(at(Record::new("duality_diff", r.h_form.mean - r.v_form.mean, se, m, &conformity)));
            }
        }
        Task::Strata => {
            for &big_n in &cfg.strata_windows {
                let r = strata_decomposition(&cfg.env, cfg.strata_i, cfg.strata_n, cfg.strata_beta, big_n, m, &plan)?;
                let at = |rec: Record| rec.at(r.n, r.i).param(big_n as f64);
                records.push(at(Record::from_estimate("strata_total", &r.total, &conformity)));
                for (name, w) in STRATA.iter().zip(&r.windows) {
                    records.push(at(Record::from_estimate(format!("strata_{name}"), w, &conformity)));
                }
                records.push(at(Record::new("strata_partition_residual", r.partition_residual(), 0.0, m, &conformity)));
            }
        }
        Task::Oracle => {
            let sizes = OracleSizes { clan_reps: cfg.oracle_reps, renewal_samples: cfg.oracle_reps, renewal_horizon: cfg.horizon, ..OracleSizes::default() };
            for o in suite(&cfg.env, &sizes, cfg.seed, cfg.shards)? {
                if !o.pass {
                    exit_code = 3;
                }
                records.push(Record::new(format!("oracle_{}", o.name), o.worst, 0.0, o.cases, if o.pass { "pass" } else { "fail" }).param(o.tolerance));
            }
        }
        Task::Renewal { kind, table } => {
            let (kind, name, xs) = match kind {
                TableKind::U => (RenewalKind::U, "u", cfg.x_grid.iter().map(|x| x.abs()).collect::<Vec<_>>()),
                TableKind::V => (RenewalKind::V, "v", cfg.x_grid.iter().filter(|x| **x != 0.0).map(|x| -x.abs()).collect()),
            };
            if xs.is_empty() {
                return Err(Error::Config("x_grid has no point in the harmonicity domain".into()));
            }
            let (t, points) = harmonicity_residual(&cfg.env, kind, &xs, cfg.horizon, m, cfg.seed, cfg.shards)?;
            if let Some(path) = table {
                t.write_csv(std::fs::File::create(path)?)?;
            }
            for p in points {
                records.push(Record::new(format!("renewal_{name}"), p.rhs, 0.0, m, &conformity).param(p.x));
                records.push(Record::new(format!("harmonicity_{name}_residual"), p.lhs - p.rhs, p.combined_stderr, m, &conformity).param(p.x));
                records.push(Record::new(format!("harmonicity_{name}_allowance"), p.allowance, 0.0, m, &conformity).param(p.x));
            }
        }
        Task::Trace { n } => {
            let path = sample_path(&cfg.env, *n, &mut StreamKey::new(cfg.seed, Purpose::Environment).rng(0))?;
            let rows = simulate_trace(&path, &mut StreamKey::new(cfg.seed, Purpose::Clan).rng(0))?;
            let mut buf = Vec::new();
            write_trace_csv(&rows, &mut buf)?;
            return Ok(RunOutput {
                body: Body::Text(String::from_utf8(buf).map_err(|e| Error::Numerical(e.to_string()))?),
                conformity,
                diagnostics: report.diagnostics,
                exit_code,
            });
        }
    }
    Ok(RunOutput { body: Body::Records(records), conformity, diagnostics: report.diagnostics, exit_code })
}
