//! Small-`n` oracle suite: closed forms against brute-force compositions, the
//! individual-based simulator and the renewal tables.

use rand::Rng;
use serde::Serialize;

use crate::clan_sim::{run_population, ClanOutcome};
use crate::env_model::{sample_path, EnvironmentPath, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::estimators::diagnostics::product_identity_check;
use crate::estimators::mc::{run_blocks, MCEstimate};
use crate::exact_fl::{compose_pgf_bruteforce, compose_survival_bruteforce, h_functional, h_functional_bruteforce, survival_closed, EvalPoint};
use crate::renewal::{harmonicity_residual, RenewalKind};
use crate::rng::{Purpose, StreamKey};
use crate::walk::WalkFunctionals;

/// Result of one oracle comparison. `worst` is a relative error for exact
/// checks and a largest `|z|` (or residual over its allowance) for Monte Carlo ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub cases: u64,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleOutcome {
    fn new(name: &'static str, cases: u64, worst: f64, tolerance: f64) -> Self {
        OracleOutcome { name, cases, worst, tolerance, pass: worst <= tolerance }
    }
}

/// Points where survival functions are compared.
pub const S_POINTS: [f64; 4] = [0.0, 0.25, 0.5, 0.9];

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

/// Random `(path, i, n <= n_max, s)` tuples: the closed survival function
/// against the literal `1 - F_{i,n}(s)` from the PGF fold, and against the
/// same fold carried on `1 - s`. `worst` is the larger relative error.
pub fn mobius_equivalence(spec: &EnvironmentSpec, tuples: u64, n_max: usize, seed: u64) -> Result<OracleOutcome> {
    let key = StreamKey::new(seed, Purpose::Oracle).sub(1);
    let mut worst = 0.0f64;
    for r in 0..tuples {
        let mut rng = key.rng(r);
        let n = rng.random_range(1..=n_max);
        let i = rng.random_range(0..n);
        let s = S_POINTS[rng.random_range(0..S_POINTS.len())];
        let path = sample_path(spec, n, &mut rng)?;
        let w = WalkFunctionals::build(&path);
        let closed = survival_closed(&w, i, n, EvalPoint::from_s(s)?)?.to_f64();
        worst = worst.max(rel_err(closed, compose_survival_bruteforce(&path, i, n, s)?));
        worst = worst.max(rel_err(closed, 1.0 - compose_pgf_bruteforce(&path, i, n, s)?));
    }
    Ok(OracleOutcome::new("mobius", tuples, worst, 1e-10))
}

fn lemma_paths(spec: &EnvironmentSpec, n_max: usize, random_paths: u64, seed: u64) -> Result<Vec<EnvironmentPath>> {
    let key = StreamKey::new(seed, Purpose::Oracle).sub(2);
    let mut paths = vec![EnvironmentPath::flat(n_max)];
    for r in 0..random_paths {
        paths.push(sample_path(spec, n_max, &mut key.rng(r))?);
    }
    Ok(paths)
}

/// `H_{i,n}(s)` against `(1 - F_{i,n}(s)) Π_{j≠i} F_{j,n}(0)` for every prefix
/// `n <= n_max`, every `i < n` and `s ∈ S_POINTS ∪ {1}`, on the flat path and
/// `random_paths` sampled ones.
pub fn lemma_definitional(spec: &EnvironmentSpec, n_max: usize, random_paths: u64, seed: u64) -> Result<OracleOutcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for path in lemma_paths(spec, n_max, random_paths, seed)? {
        let w = WalkFunctionals::build(&path);
        for n in 1..=n_max {
            for i in 0..n {
                for s in S_POINTS.iter().copied().chain([1.0]) {
                    let h = h_functional(&w, i, n, EvalPoint::from_s(s)?)?.to_f64();
                    worst = worst.max(rel_err(h, h_functional_bruteforce(&path, i, n, s)?));
                    cases += 1;
                }
            }
        }
    }
    Ok(OracleOutcome::new("lemma_definitional", cases, worst, 1e-9))
}

/// `Π_{j<n} F_{j,n}(0) = a_n/b_{n+1}` on the same paths.
pub fn telescoping(spec: &EnvironmentSpec, n_max: usize, random_paths: u64, seed: u64) -> Result<OracleOutcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for path in lemma_paths(spec, n_max, random_paths, seed)? {
        let w = WalkFunctionals::build(&path);
        for n in 1..=n_max {
            let mut prod = 1.0;
            for j in 0..n {
                prod *= compose_pgf_bruteforce(&path, j, n, 0.0)?;
            }
            let closed = (w.ln_a(n) - w.b(n + 1).ln()).exp();
            worst = worst.max(rel_err(closed, prod));
            cases += 1;
        }
    }
    Ok(OracleOutcome::new("telescoping", cases, worst, 1e-10))
}

/// Per-environment agreement of the simulated `(1 - s^{Z_{i,n}}) 1{A_i(n)}`
/// with `H_{i,n}(s)`, as the largest `|z|` over environments and `s`.
pub fn clan_agreement(paths: &[EnvironmentPath], i: usize, s_grid: &[f64], reps: u64, seed: u64, shards: usize) -> Result<OracleOutcome> {
    let mut worst = 0.0f64;
    for (e, path) in paths.iter().enumerate() {
        let n = path.len();
        let w = WalkFunctionals::build(path);
        let key = StreamKey::new(seed, Purpose::Clan).sub(e as u64);
        let acc = run_blocks(reps, shards, || vec![MCEstimate::new(); s_grid.len()], |r, acc: &mut Vec<MCEstimate>| {
            let out = ClanOutcome::from_state(&run_population(path, &mut key.rng(r))?, i);
            for (a, &s) in acc.iter_mut().zip(s_grid) {
                a.push(if out.event_a { 1.0 - s.powf(out.z_in as f64) } else { 0.0 });
            }
            Ok(())
        })?;
        for (a, &s) in acc.iter().zip(s_grid) {
            let exact = h_functional(&w, i, n, EvalPoint::from_s(s)?)?.to_f64();
            worst = worst.max(z_score(a, exact));
        }
    }
    Ok(OracleOutcome::new("clan_sim", (paths.len() * s_grid.len()) as u64, worst, 3.0))
}

/// One-generation event probability `m/(1+m)` against simulation, per `m`.
pub fn one_step_agreement(means: &[f64], reps: u64, seed: u64, shards: usize) -> Result<OracleOutcome> {
    let mut worst = 0.0f64;
    for (e, &m) in means.iter().enumerate() {
        let path = EnvironmentPath::new(vec![m.ln()])?;
        let key = StreamKey::new(seed, Purpose::Clan).sub(1 << 32 | e as u64);
        let acc = run_blocks(reps, shards, MCEstimate::new, |r, acc: &mut MCEstimate| {
            let out = ClanOutcome::from_state(&run_population(&path, &mut key.rng(r))?, 0);
            acc.push(out.event_a as u8 as f64);
            Ok(())
        })?;
        worst = worst.max(z_score(&acc, m / (1.0 + m)));
    }
    Ok(OracleOutcome::new("clan_sim_one_step", means.len() as u64, worst, 3.0))
}

fn z_score(est: &MCEstimate, exact: f64) -> f64 {
    let d = (est.mean() - exact).abs();
    if d == 0.0 {
        0.0
    } else {
        d / est.stderr()
    }
}

/// Harmonicity of `Û` on `x_grid`; `worst` is the largest
/// `residual / (3·stderr + allowance)`, so the check passes at `<= 1`.
pub fn u_harmonicity(spec: &EnvironmentSpec, x_grid: &[f64], horizon: usize, m_samples: u64, seed: u64, shards: usize) -> Result<OracleOutcome> {
    let (_, points) = harmonicity_residual(spec, RenewalKind::U, x_grid, horizon, m_samples, seed, shards)?;
    let worst = points.iter().map(|p| p.residual / (3.0 * p.combined_stderr + p.allowance)).fold(0.0, f64::max);
    Ok(OracleOutcome::new("u_harmonicity", points.len() as u64, worst, 1.0))
}

/// Pathwise product identity for `i <= 15`, `z ∈ {0, 0.3, 0.7}`.
pub fn product_identity(spec: &EnvironmentSpec, paths: u64, seed: u64) -> Result<OracleOutcome> {
    let z = [0.0, 0.3, 0.7];
    let worst = product_identity_check(spec, 15, &z, paths, seed)?;
    Ok(OracleOutcome::new("product_identity", paths * 15 * z.len() as u64, worst, 1e-10))
}

/// Sizes of the suite run by the command-line `oracle` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSizes {
    pub tuples: u64,
    pub lemma_paths: u64,
    pub clan_reps: u64,
    pub one_step_reps: u64,
    pub renewal_horizon: usize,
    pub renewal_samples: u64,
    pub product_paths: u64,
}

impl Default for OracleSizes {
    fn default() -> Self {
        OracleSizes {
            tuples: 1000,
            lemma_paths: 20,
            clan_reps: 20_000,
            one_step_reps: 100_000,
            renewal_horizon: 10_000,
            renewal_samples: 10_000,
            product_paths: 50,
        }
    }
}

/// Clan oracle environments: the flat path and two sampled ones, all of length 8.
pub fn clan_paths(spec: &EnvironmentSpec, seed: u64) -> Result<Vec<EnvironmentPath>> {
    let key = StreamKey::new(seed, Purpose::Oracle).sub(4);
    let mut paths = vec![EnvironmentPath::flat(8)];
    for r in 0..2 {
        paths.push(sample_path(spec, 8, &mut key.rng(r))?);
    }
    Ok(paths)
}

/// Runs every oracle on `spec`.
pub fn suite(spec: &EnvironmentSpec, sizes: &OracleSizes, seed: u64, shards: usize) -> Result<Vec<OracleOutcome>> {
    spec.check_params()?;
    if sizes.clan_reps < 2 || sizes.one_step_reps < 2 || sizes.renewal_samples < 2 {
        return Err(Error::Config("oracle sample sizes must be at least 2".into()));
    }
    let x_grid: Vec<f64> = (0..=6).map(|k| k as f64 * 0.5).collect();
    let m1 = sample_path(spec, 1, &mut StreamKey::new(seed, Purpose::Oracle).sub(5).rng(0))?.mean_offspring(1);
    Ok(vec![
        mobius_equivalence(spec, sizes.tuples, 20, seed)?,
        lemma_definitional(spec, 12, sizes.lemma_paths, seed)?,
        telescoping(spec, 12, sizes.lemma_paths, seed)?,
        clan_agreement(&clan_paths(spec, seed)?, 4, &[0.0, 0.5], sizes.clan_reps, seed, shards)?,
        one_step_agreement(&[1.0, m1], sizes.one_step_reps, seed, shards)?,
        u_harmonicity(spec, &x_grid, sizes.renewal_horizon, sizes.renewal_samples, seed, shards)?,
        product_identity(spec, sizes.product_paths, seed)?,
    ])
}
