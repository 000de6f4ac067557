//! Browser bindings for three interactive views:
//! one environment with its clans, the Laplace-transform curve, and the
//! compensated event-probability sequence. Flat `Float64Array`s go out, the
//! page in `www/` draws them.

use bpire::clan_sim::run_population;
use bpire::estimators::scaling::scaling_study;
use bpire::estimators::{estimate_lambda, McPlan, RegimeRule};
use bpire::exact_fl::{cond_event_prob, Beta};
use bpire::{sample_path, EnvironmentPath, EnvironmentSpec, Purpose, StreamKey, WalkFunctionals};
use wasm_bindgen::prelude::*;

fn spec(sigma: f64) -> Result<EnvironmentSpec, String> {
    let s = EnvironmentSpec::Gaussian { sigma };
    s.check_params().map_err(|e| e.to_string())?;
    Ok(s)
}

fn environment(sigma: f64, n: usize, seed: u64) -> Result<EnvironmentPath, String> {
    if n == 0 || n > 4096 {
        return Err(format!("n = {n} outside 1..=4096"));
    }
    sample_path(&spec(sigma)?, n, &mut StreamKey::new(seed, Purpose::Environment).rng(0)).map_err(|e| e.to_string())
}

/// `3(n+1)` numbers: walk `S_0..S_n`, then `P(A_i(n) | S)` for `i = 0..n`
/// (zero at `i = n`), then simulated clan sizes `Z_{i,n}` before the last immigrant.
#[wasm_bindgen]
pub fn clan_profile(sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    let path = environment(sigma, n, seed)?;
    let w = WalkFunctionals::build(&path);
    let mut out: Vec<f64> = w.positions().to_vec();
    for i in 0..=n {
        out.push(if i < n { cond_event_prob(&w, i, n).map_err(|e| e.to_string())?.to_f64() } else { 0.0 });
    }
    let state = run_population(&path, &mut StreamKey::new(seed, Purpose::Clan).rng(0)).map_err(|e| e.to_string())?;
    out.extend((0..=n).map(|i| state.clans.get(i).copied().unwrap_or(0) as f64));
    Ok(out)
}

/// `Λ̂(β)` on `points` log-spaced values of `β` in `[10^lo, 10^hi]`, with `i = ⌊ρ n⌋`.
/// Returns `(β, value, stderr)` triples.
#[wasm_bindgen]
pub fn lambda_curve(sigma: f64, n: usize, rho: f64, lo: f64, hi: f64, points: usize, m: u32, seed: u64) -> Result<Vec<f64>, String> {
    if points < 2 || !(lo < hi) {
        return Err("need at least two points and lo < hi".into());
    }
    let betas: Vec<Beta> = (0..points)
        .map(|k| Beta::Finite(10f64.powf(lo + (hi - lo) * k as f64 / (points - 1) as f64)))
        .collect();
    let r = estimate_lambda(&spec(sigma)?, RegimeRule::Proportional(rho), n, &betas, m as u64, &McPlan::new(seed)).map_err(|e| e.to_string())?;
    Ok(r.points.iter().flat_map(|p| [p.param, p.value, p.stderr]).collect())
}

/// Scaling study on `n = 2^k_min .. 2^k_max` for regime `end | fixed | proportional`.
/// Returns `(n, Ê, stderr, compensated, compensated stderr)` rows followed by
/// the fitted slope and its stderr.
#[wasm_bindgen]
pub fn compensated_curve(sigma: f64, regime: &str, param: f64, k_min: u32, k_max: u32, m: u32, seed: u64) -> Result<Vec<f64>, String> {
    if k_max > 14 || k_min > k_max {
        return Err("need k_min <= k_max <= 14".into());
    }
    let rule = RegimeRule::parse(regime, param).map_err(|e| e.to_string())?;
    let grid: Vec<usize> = (k_min..=k_max).map(|k| 1usize << k).collect();
    let s = scaling_study(&spec(sigma)?, rule, &grid, m as u64, &McPlan::new(seed)).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = s
        .points
        .iter()
        .flat_map(|p| [p.n as f64, p.estimate.mean, p.estimate.stderr, p.compensated, p.compensated_stderr])
        .collect();
    out.extend([s.fit.slope, s.fit.slope_stderr]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_layout() {
        let v = clan_profile(1.0, 10, 3).unwrap();
        assert_eq!(v.len(), 33);
        assert_eq!(v[0], 0.0);
        let probs = &v[11..22];
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(probs.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert_eq!(v[32], 0.0, "no clan founded at n yet");
        assert!(clan_profile(1.0, 0, 3).is_err());
        assert!(clan_profile(-1.0, 4, 3).is_err());
    }

    #[test]
    fn lambda_curve_decreases() {
        let v = lambda_curve(1.0, 64, 0.5, -3.0, 2.0, 6, 2000, 1).unwrap();
        assert_eq!(v.len(), 18);
        let vals: Vec<f64> = v.chunks(3).map(|c| c[1]).collect();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]), "{vals:?}");
        assert!(lambda_curve(1.0, 64, 0.5, 1.0, 0.0, 6, 2000, 1).is_err());
    }

    #[test]
    fn compensated_rows_and_slope() {
        let v = compensated_curve(1.0, "end", 3.0, 5, 8, 2000, 2).unwrap();
        assert_eq!(v.len(), 4 * 5 + 2);
        let slope = v[20];
        assert!((-0.8..-0.2).contains(&slope), "{slope}");
        assert!(compensated_curve(1.0, "sideways", 3.0, 5, 8, 100, 2).is_err());
    }
}
