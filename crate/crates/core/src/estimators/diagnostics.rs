//! Monitored (not fitted) sequences that should settle as `n` grows, and the
//! pathwise product identity used for the clan-survival bound.

use serde::Serialize;

use crate::env_model::{sample_path, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::exact_fl::{clan_product_bruteforce, clan_product_closed};
use crate::rng::{Purpose, StreamKey};
use crate::walk::WalkFunctionals;

use super::mc::{run_blocks, MCEstimate, Summary};

fn check_grid(n_grid: &[usize]) -> Result<usize> {
    if n_grid.is_empty() || n_grid.contains(&0) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("n grid must be nonempty, positive and increasing".into()));
    }
    Ok(*n_grid.last().unwrap_or(&1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuivarchPoint {
    pub n: usize,
    /// `√n · Ê[1/b_n]`, i.e. `√n · Ê[1/(1 + B_{1,n})]`.
    pub inv_b_n: Summary,
    /// `√n · Ê[1/b_{n+1}]`, i.e. `√n · Ê[h(a_n, B_{1,n})]` with `h(x, y) = 1/(1+x+y)`.
    pub inv_b_n1: Summary,
}

fn scaled(e: &MCEstimate, c: f64) -> Summary {
    Summary { mean: c * e.mean(), stderr: c * e.stderr(), count: e.count() }
}

/// Both sequences along one path per replicate, read off at every grid point.
pub fn guivarch_monitor(spec: &EnvironmentSpec, n_grid: &[usize], m_samples: u64, seed: u64, shards: usize) -> Result<Vec<GuivarchPoint>> {
    let n_max = check_grid(n_grid)?;
    let key = StreamKey::new(seed, Purpose::Diagnostics).sub(1);
    let acc = run_blocks(m_samples, shards, || vec![MCEstimate::new(); 2 * n_grid.len()], |r, acc: &mut Vec<MCEstimate>| {
        let w = WalkFunctionals::build(&sample_path(spec, n_max, &mut key.rng(r))?);
        for (g, &n) in n_grid.iter().enumerate() {
            acc[2 * g].push((-w.b(n).ln()).exp());
            acc[2 * g + 1].push((-w.b(n + 1).ln()).exp());
        }
        Ok(())
    })?;
    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let c = (n as f64).sqrt();
            GuivarchPoint { n, inv_b_n: scaled(&acc[2 * g], c), inv_b_n1: scaled(&acc[2 * g + 1], c) }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkAsymptoticsPoint {
    pub n: usize,
    /// `√n · P̂(L_n >= 0)`.
    pub stay_nonnegative: Summary,
    /// `√n · P̂(M_n < 0)`.
    pub stay_negative: Summary,
    /// `n^{3/2} · Ê[e^{-S_n}; L_n >= 0]`.
    pub conditional_exp: Summary,
}

/// One path per replicate, stopped once it has been both below and above zero.
pub fn walk_asymptotics(spec: &EnvironmentSpec, n_grid: &[usize], m_samples: u64, seed: u64, shards: usize) -> Result<Vec<WalkAsymptoticsPoint>> {
    let n_max = check_grid(n_grid)?;
    spec.check_params()?;
    let key = StreamKey::new(seed, Purpose::Diagnostics).sub(2);
    let g = n_grid.len();
    let acc = run_blocks(m_samples, shards, || vec![MCEstimate::new(); 3 * g], |r, acc: &mut Vec<MCEstimate>| {
        let mut rng = key.rng(r);
        let (mut s, mut nonneg, mut neg) = (0.0, true, true);
        let mut next = 0;
        let mut row = vec![0.0; 3 * g];
        for n in 1..=n_max {
            s += spec.draw(&mut rng);
            nonneg &= s >= 0.0;
            neg &= s < 0.0;
            if n == n_grid[next] {
                row[3 * next] = nonneg as u8 as f64;
                row[3 * next + 1] = neg as u8 as f64;
                row[3 * next + 2] = if nonneg { (-s).exp() } else { 0.0 };
                next += 1;
            }
            if !nonneg && !neg {
                break;
            }
        }
        for (a, v) in acc.iter_mut().zip(row) {
            a.push(v);
        }
        Ok(())
    })?;
    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let nf = n as f64;
            WalkAsymptoticsPoint {
                n,
                stay_nonnegative: scaled(&acc[3 * k], nf.sqrt()),
                stay_negative: scaled(&acc[3 * k + 1], nf.sqrt()),
                conditional_exp: scaled(&acc[3 * k + 2], nf.powf(1.5)),
            }
        })
        .collect())
}

/// Largest relative gap between `Π_{k=1}^{i-1} F_{k,i}(z)` by composition and
/// its closed form on the reversed-negated prefix, over sampled environments.
pub fn product_identity_check(spec: &EnvironmentSpec, i_max: usize, z_grid: &[f64], paths: u64, seed: u64) -> Result<f64> {
    let key = StreamKey::new(seed, Purpose::Oracle).sub(3);
    let mut worst = 0.0f64;
    for r in 0..paths {
        let path = sample_path(spec, i_max, &mut key.rng(r))?;
        for i in 1..=i_max {
            let wt = WalkFunctionals::build(&path.prefix(i)?.reversed_negated());
            for &z in z_grid {
                let brute = clan_product_bruteforce(&path, i, z)?;
                let closed = clan_product_closed(&wt, i, z)?;
                worst = worst.max((closed - brute).abs() / brute);
            }
        }
    }
    Ok(worst)
}
