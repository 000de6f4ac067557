//! Monte Carlo renewal functions of the associated walk.
//!
//! ```text
//! U(x) = 1{x >= 0} + Σ_n P(S_n >= -x, M_n < 0),   x >= 0
//! V(x) = 1{x < 0}  + Σ_n P(S_n < -x,  L_n >= 0),  x <= 0
//! ```
//!
//! Each path is followed while it stays strictly negative (for `U`) or
//! nonnegative (for `V`), up to a horizon; the series is truncated there.

use std::io::Write;

use rand::Rng;

use crate::env_model::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::estimators::mc::{run_blocks, MCEstimate};
use crate::rng::{Purpose, StreamKey};

/// Grid step of renewal tables.
pub const GRID_STEP: f64 = 0.05;

/// Slack when binning, so that lattice walks land on their own grid point.
const BIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalKind {
    U,
    V,
}

/// Per-path series contributions on the grid `|x| = k·step`, `k = 0..len`.
fn path_counts<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    kind: RenewalKind,
    step: f64,
    len: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut hist = vec![0u32; len];
    let mut s = 0.0;
    for _ in 0..horizon {
        s += spec.draw(rng);
        let bin = match kind {
            // -S_n <= x_k  <=>  k >= -S_n/step
            RenewalKind::U => {
                if s >= 0.0 {
                    break;
                }
                (-s / step - BIN_SLACK).ceil()
            }
            // S_n < y_k  <=>  k > S_n/step
            RenewalKind::V => {
                if s < 0.0 {
                    break;
                }
                (s / step + BIN_SLACK).floor() + 1.0
            }
        };
        if bin < len as f64 {
            hist[bin.max(0.0) as usize] += 1;
        }
    }
    let mut acc = 0.0;
    hist.iter()
        .map(|&h| {
            acc += h as f64;
            acc
        })
        .collect()
}

/// `Û` on `x = 0, step, ..., x_max` or `V̂` on `x = 0, -step, ..., -x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub kind: RenewalKind,
    pub step: f64,
    pub horizon: usize,
    /// Estimates at grid point `k` (`|x| = k·step`), including the indicator term.
    pub estimates: Vec<MCEstimate>,
}

impl RenewalTable {
    pub fn estimate(
        spec: &EnvironmentSpec,
        kind: RenewalKind,
        x_max: f64,
        horizon: usize,
        m_samples: u64,
        key: StreamKey,
        shards: usize,
    ) -> Result<Self> {
        Self::estimate_with_step(spec, kind, x_max, GRID_STEP, horizon, m_samples, key, shards)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn estimate_with_step(
        spec: &EnvironmentSpec,
        kind: RenewalKind,
        x_max: f64,
        step: f64,
        horizon: usize,
        m_samples: u64,
        key: StreamKey,
        shards: usize,
    ) -> Result<Self> {
        spec.check_params()?;
        if !(x_max >= 0.0 && x_max.is_finite()) || !(step > 0.0) || horizon == 0 || m_samples == 0 {
            return Err(Error::Config("renewal table needs x_max >= 0, step > 0, horizon >= 1, samples >= 1".into()));
        }
        let len = (x_max / step - BIN_SLACK).ceil() as usize + 1;
        let sums = run_blocks(
            m_samples,
            shards,
            || vec![MCEstimate::new(); len],
            |r, acc: &mut Vec<MCEstimate>| {
                let counts = path_counts(spec, kind, step, len, horizon, &mut key.rng(r));
                for (k, c) in counts.into_iter().enumerate() {
                    let indicator = match kind {
                        RenewalKind::U => 1.0,
                        RenewalKind::V => (k > 0) as u8 as f64,
                    };
                    acc[k].push(indicator + c);
                }
                Ok(())
            },
        )?;
        Ok(RenewalTable { kind, step, horizon, estimates: sums })
    }

    pub fn samples(&self) -> u64 {
        self.estimates.first().map_or(0, |e| e.count())
    }

    /// Signed `x` of grid point `k`.
    pub fn x_at(&self, k: usize) -> f64 {
        let a = k as f64 * self.step;
        match self.kind {
            _ if k == 0 => 0.0,
            RenewalKind::U => a,
            RenewalKind::V => -a,
        }
    }

    /// Largest `|x|` covered by the table.
    pub fn reach(&self) -> f64 {
        (self.estimates.len() - 1) as f64 * self.step
    }

    /// Piecewise-linear `(estimate, stderr)` at `x`. Outside the support
    /// (`x < 0` for `U`, `x >= 0` for `V`) the function is zero; beyond the
    /// table the last grid value is used.
    pub fn interpolate(&self, x: f64) -> (f64, f64) {
        let a = match self.kind {
            RenewalKind::U if x < 0.0 => return (0.0, 0.0),
            RenewalKind::U => x,
            RenewalKind::V if x >= 0.0 => return (0.0, 0.0),
            RenewalKind::V => -x,
        };
        let last = self.estimates.len() - 1;
        let pos = a / self.step;
        if pos >= last as f64 {
            let e = &self.estimates[last];
            return (e.mean(), e.stderr());
        }
        let k = pos.floor() as usize;
        let t = pos - k as f64;
        let (e0, e1) = (&self.estimates[k], &self.estimates[k + 1]);
        // V jumps at 0 to its left limit V(0-) = 1 (continuous laws); interpolate from there
        let (v0, s0) = if self.kind == RenewalKind::V && k == 0 { (1.0, 0.0) } else { (e0.mean(), e0.stderr()) };
        ((1.0 - t) * v0 + t * e1.mean(), (1.0 - t) * s0 + t * e1.stderr())
    }

    /// CSV with columns `x,estimate,stderr,horizon,samples`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,estimate,stderr,horizon,samples")?;
        for (k, e) in self.estimates.iter().enumerate() {
            writeln!(out, "{},{},{},{},{}", self.x_at(k), e.mean(), e.stderr(), self.horizon, e.count())?;
        }
        Ok(())
    }
}

fn single_point(
    spec: &EnvironmentSpec,
    kind: RenewalKind,
    a: f64,
    horizon: usize,
    m_samples: u64,
    key: StreamKey,
    shards: usize,
) -> Result<MCEstimate> {
    spec.check_params()?;
    if horizon == 0 || m_samples == 0 {
        return Err(Error::Config("renewal estimate needs horizon >= 1 and samples >= 1".into()));
    }
    run_blocks(m_samples, shards, MCEstimate::new, |r, acc: &mut MCEstimate| {
        let mut rng = key.rng(r);
        let mut s = 0.0;
        let mut count = match kind {
            RenewalKind::U => 1.0,
            RenewalKind::V => (a > 0.0) as u8 as f64,
        };
        for _ in 0..horizon {
            s += spec.draw(&mut rng);
            match kind {
                RenewalKind::U if s >= 0.0 => break,
                RenewalKind::U if -s <= a => count += 1.0,
                RenewalKind::V if s < 0.0 => break,
                RenewalKind::V if s < a => count += 1.0,
                _ => {}
            }
        }
        acc.push(count);
        Ok(())
    })
}

/// `Û(x)` for `x >= 0`, truncated at `horizon`. Negative `x` gives exactly zero.
pub fn estimate_u(spec: &EnvironmentSpec, x: f64, horizon: usize, m_samples: u64, key: StreamKey, shards: usize) -> Result<MCEstimate> {
    if x < 0.0 {
        return Ok(MCEstimate::from_values(std::iter::repeat_n(0.0, m_samples as usize)));
    }
    single_point(spec, RenewalKind::U, x, horizon, m_samples, key, shards)
}

/// `V̂(x)` for `x <= 0`, truncated at `horizon`.
pub fn estimate_v(spec: &EnvironmentSpec, x: f64, horizon: usize, m_samples: u64, key: StreamKey, shards: usize) -> Result<MCEstimate> {
    if x > 0.0 {
        return Err(crate::error::domain(format!("V is defined for x <= 0, got {x}")));
    }
    single_point(spec, RenewalKind::V, -x, horizon, m_samples, key, shards)
}

/// One point of a harmonicity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicityPoint {
    pub x: f64,
    /// `Ê[Û(x+X); x+X >= 0]` (or the `V` analogue).
    pub lhs: f64,
    /// `Û(x)` from the table.
    pub rhs: f64,
    pub residual: f64,
    pub combined_stderr: f64,
    /// Table increment over one grid step at `x`, covering interpolation error.
    pub allowance: f64,
}

impl HarmonicityPoint {
    pub fn within(&self, k: f64) -> bool {
        self.residual <= k * self.combined_stderr + self.allowance
    }
}

/// Harmonicity residuals of a given table against fresh draws of `X`.
pub fn harmonicity_residuals_with(table: &RenewalTable, x_grid: &[f64], draws: &[f64]) -> Result<Vec<HarmonicityPoint>> {
    x_grid
        .iter()
        .map(|&x| {
            let ok = match table.kind {
                RenewalKind::U => x >= 0.0,
                RenewalKind::V => x < 0.0,
            };
            if !ok {
                return Err(crate::error::domain(format!("x = {x} outside the harmonicity domain")));
            }
            let mut lhs = MCEstimate::new();
            let mut se_sq = 0.0;
            for &d in draws {
                let y = x + d;
                let inside = match table.kind {
                    RenewalKind::U => y >= 0.0,
                    RenewalKind::V => y < 0.0,
                };
                if inside {
                    let (v, se) = table.interpolate(y);
                    lhs.push(v);
                    se_sq += se * se;
                } else {
                    lhs.push(0.0);
                }
            }
            let (rhs, rhs_se) = table.interpolate(x);
            let h = match table.kind {
                RenewalKind::U => table.step,
                RenewalKind::V => -table.step,
            };
            let allowance = (table.interpolate(x + h).0 - rhs).abs();
            let combined = (lhs.stderr().powi(2) + rhs_se.powi(2) + se_sq / draws.len() as f64).sqrt();
            Ok(HarmonicityPoint { x, lhs: lhs.mean(), rhs, residual: (lhs.mean() - rhs).abs(), combined_stderr: combined, allowance })
        })
        .collect()
}

/// Builds a table from `m_samples` paths and checks harmonicity with `m_samples` fresh draws.
pub fn harmonicity_residual(
    spec: &EnvironmentSpec,
    kind: RenewalKind,
    x_grid: &[f64],
    horizon: usize,
    m_samples: u64,
    seed: u64,
    shards: usize,
) -> Result<(RenewalTable, Vec<HarmonicityPoint>)> {
    if x_grid.is_empty() {
        return Err(Error::Config("empty x grid".into()));
    }
    let reach = x_grid.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 8.0 * spec.std_dev().max(GRID_STEP);
    let table = RenewalTable::estimate(spec, kind, reach, horizon, m_samples, StreamKey::new(seed, Purpose::Renewal), shards)?;
    let mut rng = StreamKey::new(seed, Purpose::HarmonicDraws).rng(0);
    let draws: Vec<f64> = (0..m_samples).map(|_| spec.draw(&mut rng)).collect();
    let points = harmonicity_residuals_with(&table, x_grid, &draws)?;
    Ok((table, points))
}

/// Self-normalized expectation of `f(S_n)` under the walk conditioned to stay
/// nonnegative, by reweighting free paths with `Û(S_n) 1{L_n >= 0}`.
/// Returns the estimate and the raw normalizer `Ê[Û(S_n); L_n >= 0]`, whose
/// target is `U(0) = 1`.
pub fn plus_measure_mean<F: Fn(f64) -> f64 + Sync>(
    spec: &EnvironmentSpec,
    table: &RenewalTable,
    n: usize,
    m_samples: u64,
    key: StreamKey,
    shards: usize,
    f: F,
) -> Result<(f64, MCEstimate)> {
    if table.kind != RenewalKind::U {
        return Err(Error::Config("the plus measure needs a U table".into()));
    }
    let acc = run_blocks(
        m_samples,
        shards,
        || vec![MCEstimate::new(), MCEstimate::new()],
        |r, acc: &mut Vec<MCEstimate>| {
            let mut rng = key.rng(r);
            let mut s = 0.0;
            let mut alive = true;
            for _ in 0..n {
                s += spec.draw(&mut rng);
                if s < 0.0 {
                    alive = false;
                    break;
                }
            }
            let w = if alive { table.interpolate(s).0 } else { 0.0 };
            acc[0].push(w);
            acc[1].push(if alive { w * f(s) } else { 0.0 });
            Ok(())
        },
    )?;
    Ok((acc[1].mean() / acc[0].mean(), acc[0].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: EnvironmentSpec = EnvironmentSpec::Gaussian { sigma: 1.0 };

    fn key(seed: u64) -> StreamKey {
        StreamKey::new(seed, Purpose::Renewal)
    }

    #[test]
    fn boundary_values() {
        let u0 = estimate_u(&G, 0.0, 1000, 2000, key(1), 1).unwrap();
        assert_eq!((u0.mean(), u0.stderr()), (1.0, 0.0));
        assert_eq!(estimate_u(&G, -0.5, 1000, 100, key(1), 1).unwrap().mean(), 0.0);
        let v0 = estimate_v(&G, 0.0, 1000, 2000, key(2), 1).unwrap();
        assert_eq!((v0.mean(), v0.stderr()), (0.0, 0.0));
        assert!(estimate_v(&G, -1.0, 1000, 2000, key(3), 1).unwrap().mean() >= 1.0);
        assert!(estimate_v(&G, 0.5, 10, 10, key(3), 1).is_err());
    }

    #[test]
    fn table_agrees_with_single_point() {
        let t = RenewalTable::estimate(&G, RenewalKind::U, 3.0, 2000, 3000, key(4), 1).unwrap();
        let p = estimate_u(&G, 2.0, 2000, 3000, key(4), 1).unwrap();
        // same paths, same counts
        assert!((t.interpolate(2.0).0 - p.mean()).abs() < 1e-12);
        let tv = RenewalTable::estimate(&G, RenewalKind::V, 2.0, 2000, 3000, key(5), 1).unwrap();
        let pv = estimate_v(&G, -1.0, 2000, 3000, key(5), 1).unwrap();
        assert!((tv.interpolate(-1.0).0 - pv.mean()).abs() < 1e-12);
        assert_eq!(tv.interpolate(0.0).0, 0.0);
    }

    #[test]
    fn horizon_doubling_is_stable() {
        let a = estimate_u(&G, 2.0, 10_000, 20_000, key(6), 1).unwrap();
        let b = estimate_u(&G, 2.0, 20_000, 20_000, key(7), 1).unwrap();
        let z = (a.mean() - b.mean()).abs() / (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        assert!(z <= 3.0, "z = {z}");
        let a = estimate_v(&G, -2.0, 10_000, 20_000, key(8), 1).unwrap();
        let b = estimate_v(&G, -2.0, 20_000, 20_000, key(9), 1).unwrap();
        let z = (a.mean() - b.mean()).abs() / (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        assert!(z <= 3.0, "z = {z}");
    }

    /// `Σ_n P(S_n = -k, M_n < 0)` for the ±1 walk by dynamic programming.
    fn lattice_u_dp(levels: usize, horizon: usize) -> Vec<f64> {
        // state: depth d >= 1 below zero
        let mut p = vec![0.0; levels + horizon + 2];
        let mut visits = vec![0.0; levels + 1];
        p[1] = 0.5;
        for _ in 0..horizon {
            for (d, v) in visits.iter_mut().enumerate().skip(1) {
                *v += p[d];
            }
            let mut next = vec![0.0; p.len()];
            for d in 1..p.len() - 1 {
                if p[d] == 0.0 {
                    continue;
                }
                next[d + 1] += 0.5 * p[d];
                if d > 1 {
                    next[d - 1] += 0.5 * p[d];
                }
            }
            p = next;
        }
        // U(x) = 1 + Σ_{1 <= k <= x} visits[k]
        let mut u = vec![1.0; levels + 1];
        for k in 1..=levels {
            u[k] = u[k - 1] + visits[k];
        }
        u
    }

    #[test]
    fn lattice_oracle_is_harmonic() {
        let horizon = 20_000;
        let u = lattice_u_dp(6, horizon);
        for (k, v) in u.iter().enumerate() {
            // truncation removes O(k²/√horizon)
            let tol = (k * (k + 1)) as f64 / (horizon as f64).sqrt() + 1e-12;
            assert!(v <= &(k as f64 + 1.0) && (v - (k as f64 + 1.0)).abs() < tol, "U({k}) = {v}");
        }
        // E[U(x+X); x+X >= 0] = U(x) at integer x for the exact table
        for x in 1..5 {
            let lhs = 0.5 * u[x + 1] + 0.5 * u[x - 1];
            assert!((lhs - u[x]).abs() < 0.02);
        }
        assert!((0.5 * u[1] - u[0]).abs() < 0.02);
    }

    #[test]
    fn lattice_walk_matches_floor_plus_one() {
        let spec = EnvironmentSpec::TwoPoint { step: 1.0 };
        let t = RenewalTable::estimate(&spec, RenewalKind::U, 4.0, 10_000, 20_000, key(10), 1).unwrap();
        for x in [0.0, 0.5, 1.0, 1.5, 2.5, 3.0] {
            let (v, se) = t.interpolate(x);
            let exact = x.floor() + 1.0;
            // truncation at the horizon removes roughly c·x/√horizon
            assert!((v - exact).abs() <= 3.0 * se + 0.02 * (1.0 + x), "U({x}) = {v} ± {se}");
        }
    }

    #[test]
    fn lattice_table_matches_dp_at_same_horizon() {
        let spec = EnvironmentSpec::TwoPoint { step: 1.0 };
        let t = RenewalTable::estimate(&spec, RenewalKind::U, 4.0, 2_000, 40_000, key(17), 1).unwrap();
        let dp = lattice_u_dp(4, 2_000);
        for (k, exact) in dp.iter().enumerate() {
            let (v, se) = t.interpolate(k as f64);
            assert!((v - exact).abs() <= 3.0 * se + 1e-12, "U({k}) = {v} ± {se} vs {exact}");
        }
    }

    #[test]
    fn exact_table_gives_vanishing_residual() {
        // U(x) = floor(x) + 1 on a 0.05 grid, perfect statistics
        let estimates = (0..=200)
            .map(|k| MCEstimate::from_values([((k as f64 * 0.05) + 1e-9).floor() + 1.0; 2]))
            .collect();
        let table = RenewalTable { kind: RenewalKind::U, step: 0.05, horizon: 0, estimates };
        let spec = EnvironmentSpec::TwoPoint { step: 1.0 };
        let mut prev = f64::INFINITY;
        for m in [1_000u64, 100_000] {
            let mut rng = StreamKey::new(11, Purpose::HarmonicDraws).rng(0);
            let draws: Vec<f64> = (0..m).map(|_| spec.draw(&mut rng)).collect();
            let pts = harmonicity_residuals_with(&table, &[0.5, 1.5, 2.5], &draws).unwrap();
            let worst = pts.iter().map(|p| p.residual).fold(0.0, f64::max);
            assert!(pts.iter().all(|p| p.within(3.0)));
            assert!(worst < prev || worst < 1e-3);
            prev = worst;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn gaussian_u_is_harmonic_at_zero() {
        let (_, pts) = harmonicity_residual(&G, RenewalKind::U, &[0.0, 1.0], 10_000, 20_000, 12, 1).unwrap();
        for p in pts {
            assert!(p.within(3.0), "{p:?}");
        }
    }

    #[test]
    fn gaussian_v_is_harmonic_below_zero() {
        let (_, pts) = harmonicity_residual(&G, RenewalKind::V, &[-0.1, -1.0], 10_000, 20_000, 13, 1).unwrap();
        for p in pts {
            assert!(p.within(3.0), "{p:?}");
        }
    }

    #[test]
    fn plus_measure_normalizer_is_one() {
        let t = RenewalTable::estimate(&G, RenewalKind::U, 40.0, 10_000, 20_000, key(14), 1).unwrap();
        let (mean_s, norm) = plus_measure_mean(&G, &t, 20, 20_000, StreamKey::new(15, Purpose::Diagnostics), 1, |s| s).unwrap();
        assert!((norm.mean() - 1.0).abs() <= 3.0 * norm.stderr() + 0.02, "{} ± {}", norm.mean(), norm.stderr());
        assert!(mean_s > 0.0);
    }

    #[test]
    fn csv_layout() {
        let t = RenewalTable::estimate(&G, RenewalKind::V, 0.1, 100, 10, key(16), 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,estimate,stderr,horizon,samples");
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[1].starts_with("0,0,0,100,10"));
    }
}
