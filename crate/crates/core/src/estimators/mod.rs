//! Monte Carlo estimators over sampled environments.
//!
//! Every estimator averages an exact conditional formula from
//! [`crate::exact_fl`] over environments; the clan event itself is never
//! simulated. Ratios use the same environments for numerator and denominator.

pub mod diagnostics;
pub mod mc;
pub mod sampler;
pub mod scaling;

use serde::Serialize;

use crate::env_model::{sample_path, EnvironmentSpec};
use crate::error::{domain, Error, Result};
use crate::exact_fl::{cond_event_prob, dual_reflected_walk, h_functional, v_functional, yaglom_integrand, Beta, EvalPoint};
use crate::rng::{Purpose, StreamKey};
use crate::walk::WalkFunctionals;

use mc::{run_blocks, MCEstimate, Moments, Summary};
pub use sampler::{Sampler, TiltConfig};

/// How the clan index `i` follows the observation time `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegimeRule {
    FixedI(usize),
    EndWindow(usize),
    Proportional(f64),
}

impl RegimeRule {
    pub fn index(&self, n: usize) -> Result<usize> {
        let i = match *self {
            RegimeRule::FixedI(i) => i,
            RegimeRule::EndWindow(w) if w >= 1 && w <= n => n - w,
            RegimeRule::EndWindow(w) => return Err(domain(format!("end window {w} needs 1 <= N <= n = {n}"))),
            RegimeRule::Proportional(rho) if rho > 0.0 && rho < 1.0 => (rho * n as f64).floor() as usize,
            RegimeRule::Proportional(rho) => return Err(domain(format!("proportion {rho} outside (0, 1)"))),
        };
        if i >= n {
            return Err(domain(format!("regime {self:?} gives i = {i} outside [0, {n})")));
        }
        Ok(i)
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegimeRule::FixedI(_) => "fixed",
            RegimeRule::EndWindow(_) => "end",
            RegimeRule::Proportional(_) => "proportional",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            RegimeRule::FixedI(i) => i as f64,
            RegimeRule::EndWindow(w) => w as f64,
            RegimeRule::Proportional(r) => r,
        }
    }

    pub fn parse(kind: &str, param: f64) -> Result<Self> {
        let as_index = || {
            if param >= 0.0 && param.fract() == 0.0 {
                Ok(param as usize)
            } else {
                Err(Error::Config(format!("regime `{kind}` needs a nonnegative integer, got {param}")))
            }
        };
        match kind {
            "fixed" => Ok(RegimeRule::FixedI(as_index()?)),
            "end" => Ok(RegimeRule::EndWindow(as_index()?)),
            "proportional" => Ok(RegimeRule::Proportional(param)),
            other => Err(Error::Config(format!("unknown regime `{other}` (fixed|end|proportional)"))),
        }
    }
}

/// Seed, parallelism and sampling choices shared by all estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct McPlan {
    pub seed: u64,
    pub shards: usize,
    pub sampler: Sampler,
    /// Run the proportional regime even when the environment law is not continuous.
    pub allow_violation: bool,
}

impl McPlan {
    pub fn new(seed: u64) -> Self {
        McPlan { seed, shards: 1, sampler: Sampler::default(), allow_violation: false }
    }

    pub fn plain(seed: u64) -> Self {
        McPlan { sampler: Sampler::Plain, ..Self::new(seed) }
    }
}

fn conformity_tag(spec: &EnvironmentSpec, rule: Option<&RegimeRule>, plan: &McPlan) -> Result<&'static str> {
    let report = spec.validate()?;
    if matches!(rule, Some(RegimeRule::Proportional(_))) && !report.a3 && !plan.allow_violation {
        return Err(Error::AssumptionViolation(format!(
            "the proportional regime needs a continuous environment law; {} is not (set the override to run anyway)",
            spec.family_name()
        )));
    }
    Ok(report.tag())
}

fn check_samples(m: u64) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {m}")));
    }
    Ok(())
}

/// Running `ln Σ e^{v}` with a single exponential per term.
#[derive(Debug, Clone, Copy)]
struct ScaledSum {
    shift: f64,
    sum: f64,
}

impl ScaledSum {
    fn new() -> Self {
        ScaledSum { shift: f64::NEG_INFINITY, sum: 0.0 }
    }

    #[inline]
    fn add(&mut self, v: f64) {
        if v > self.shift {
            self.sum = self.sum * (self.shift - v).exp() + 1.0;
            self.shift = v;
        } else {
            self.sum += (v - self.shift).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.shift + self.sum.ln()
    }
}

/// `ln P(A_i(n) | S)` straight from the increments, without building the walk.
pub fn ln_event_prob_from_increments(x: &[f64], i: usize) -> f64 {
    let n = x.len();
    debug_assert!(i < n);
    let (mut total, mut after) = (ScaledSum::new(), ScaledSum::new());
    let mut s = 0.0;
    let mut s_i = 0.0;
    total.add(0.0);
    for (k, dx) in x.iter().enumerate() {
        s += dx;
        // s = S_{k+1}
        total.add(-s);
        if k + 1 > i {
            after.add(-s);
        }
        if k + 1 == i {
            s_i = s;
        }
    }
    -s_i - after.ln() - s - total.ln()
}

/// One point of an event-probability study.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbEstimate {
    pub n: usize,
    pub i: usize,
    pub estimate: MCEstimate,
    pub tag: &'static str,
}

/// `Ê[P(A_{i(n)}(n) | S)]` over `m_samples` environments.
pub fn estimate_event_prob(spec: &EnvironmentSpec, rule: RegimeRule, n: usize, m_samples: u64, plan: &McPlan) -> Result<EventProbEstimate> {
    let tag = conformity_tag(spec, Some(&rule), plan)?;
    check_samples(m_samples)?;
    let i = rule.index(n)?;
    let key = StreamKey::new(plan.seed, Purpose::Environment).sub(n as u64);
    let estimate = run_blocks(m_samples, plan.shards, MCEstimate::new, |r, acc: &mut MCEstimate| {
        let mut rng = key.rng(r);
        let mut x = Vec::with_capacity(n);
        let lw = plan.sampler.draw(spec, n, i, &mut x, &mut rng);
        acc.push((lw + ln_event_prob_from_increments(&x, i)).exp());
        Ok(())
    })?;
    Ok(EventProbEstimate { n, i, estimate, tag })
}

/// A ratio-derived transform value at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformPoint {
    /// `s` or `β` (`inf` encoded as infinity).
    pub param: f64,
    pub numerator: Summary,
    pub denominator: Summary,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformReport {
    pub n: usize,
    pub i: usize,
    pub points: Vec<TransformPoint>,
    /// Environments where the integrand was not monotone along the grid, or
    /// exceeded the event probability.
    pub pathwise_violations: u64,
    pub tag: &'static str,
}

#[allow(clippy::too_many_arguments)]
fn transform_report<F>(
    spec: &EnvironmentSpec,
    n: usize,
    i: usize,
    params: &[f64],
    m_samples: u64,
    plan: &McPlan,
    purpose_sub: u64,
    increasing: bool,
    integrand: F,
    tag: &'static str,
) -> Result<TransformReport>
where
    F: Fn(&WalkFunctionals, usize) -> Result<f64> + Sync,
{
    check_samples(m_samples)?;
    let width = params.len() + 2;
    let key = StreamKey::new(plan.seed, Purpose::Environment).sub((n as u64) << 8 | purpose_sub);
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| params[a].total_cmp(&params[b]));
    let acc = run_blocks(m_samples, plan.shards, || Moments::new(width), |r, acc: &mut Moments| {
        let mut rng = key.rng(r);
        let mut x = Vec::with_capacity(n);
        let lw = plan.sampler.draw(spec, n, i, &mut x, &mut rng);
        let w = WalkFunctionals::from_increments(&x);
        let p = cond_event_prob(&w, i, n)?;
        let weight = lw.exp();
        let mut row = vec![0.0; width];
        row[0] = weight * p.to_f64();
        let mut raw = vec![0.0; params.len()];
        for (k, v) in raw.iter_mut().enumerate() {
            *v = integrand(&w, k)?;
            row[k + 1] = weight * *v;
        }
        let mut bad = raw.iter().any(|&v| v > p.to_f64());
        for pair in order.windows(2) {
            let (a, b) = (raw[pair[0]], raw[pair[1]]);
            bad |= if increasing { b < a } else { b > a };
        }
        row[width - 1] = bad as u8 as f64;
        acc.push_row(&row);
        Ok(())
    })?;
    let den = acc.col(0).summary();
    let mut points = Vec::with_capacity(params.len());
    for (k, &param) in params.iter().enumerate() {
        let ratio = acc.ratio(k + 1)?;
        points.push(TransformPoint {
            param,
            numerator: acc.col(k + 1).summary(),
            denominator: den,
            value: 1.0 - ratio.value,
            stderr: ratio.stderr,
        });
    }
    Ok(TransformReport { n, i, points, pathwise_violations: acc.col(width - 1).sum() as u64, tag })
}

/// `Θ̂_N(s) = 1 - Ê[H_{n-N,n}(s)] / Ê[H_{n-N,n}(0)]` on a grid of `s`.
pub fn estimate_theta(spec: &EnvironmentSpec, big_n: usize, n: usize, s_grid: &[f64], m_samples: u64, plan: &McPlan) -> Result<TransformReport> {
    if s_grid.is_empty() {
        return Err(Error::Config("empty s grid".into()));
    }
    let rule = RegimeRule::EndWindow(big_n);
    let i = rule.index(n)?;
    let tag = conformity_tag(spec, Some(&rule), plan)?;
    let pts: Vec<EvalPoint> = s_grid.iter().map(|&s| EvalPoint::from_s(s)).collect::<Result<_>>()?;
    // H is nonincreasing in s
    transform_report(spec, n, i, s_grid, m_samples, plan, 1, false, |w, k| Ok(h_functional(w, i, n, pts[k])?.to_f64()), tag)
}

/// `Λ̂(β) = 1 - Ê[H_{i,n}(e^{-β a_{i,n}})] / Ê[P(A_i(n)|S)]` on a grid of `β`.
pub fn estimate_lambda(spec: &EnvironmentSpec, rule: RegimeRule, n: usize, beta_grid: &[Beta], m_samples: u64, plan: &McPlan) -> Result<TransformReport> {
    if beta_grid.is_empty() {
        return Err(Error::Config("empty beta grid".into()));
    }
    let i = rule.index(n)?;
    let tag = conformity_tag(spec, Some(&rule), plan)?;
    let params: Vec<f64> = beta_grid.iter().map(|b| b.as_f64()).collect();
    // the integrand is nondecreasing in β
    transform_report(spec, n, i, &params, m_samples, plan, 2, true, |w, k| Ok(yaglom_integrand(w, i, n, beta_grid[k])?.to_f64()), tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub i: usize,
    pub n: usize,
    pub beta: f64,
    pub h_form: Summary,
    pub v_form: Summary,
    pub z: f64,
}

/// Independent-sample estimates of `E[H_{i,n}(e^{-β a_{i,n}})]` and `E[V_{n-i,n}(β)]`.
pub fn duality_check(spec: &EnvironmentSpec, i: usize, n: usize, beta: Beta, m_samples: u64, plan: &McPlan) -> Result<DualityReport> {
    spec.check_params()?;
    check_samples(m_samples)?;
    if i >= n {
        return Err(domain(format!("duality needs j = n - i >= 1, got i={i}, n={n}")));
    }
    if beta == Beta::Finite(0.0) {
        return Err(domain("duality needs beta > 0"));
    }
    let kh = StreamKey::new(plan.seed, Purpose::DualityH).sub(n as u64);
    let kv = StreamKey::new(plan.seed, Purpose::DualityV).sub(n as u64);
    let h = run_blocks(m_samples, plan.shards, MCEstimate::new, |r, acc: &mut MCEstimate| {
        let path = sample_path(spec, n, &mut kh.rng(r))?;
        acc.push(yaglom_integrand(&WalkFunctionals::build(&path), i, n, beta)?.to_f64());
        Ok(())
    })?;
    let v = run_blocks(m_samples, plan.shards, MCEstimate::new, |r, acc: &mut MCEstimate| {
        let path = sample_path(spec, n, &mut kv.rng(r))?;
        acc.push(v_functional(&dual_reflected_walk(&path, n)?, n - i, n, beta)?.to_f64());
        Ok(())
    })?;
    let se = (h.stderr().powi(2) + v.stderr().powi(2)).sqrt();
    let diff = h.mean() - v.mean();
    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY * diff.signum() };
    Ok(DualityReport { i, n, beta: beta.as_f64(), h_form: h.summary(), v_form: v.summary(), z })
}

/// Windows of the first-minimum time `τ̄(n)` of the reflected walk.
pub const STRATA: [&str; 4] = ["below_n", "before_j", "after_j", "middle"];

#[derive(Debug, Clone, PartialEq)]
pub struct StrataReport {
    pub i: usize,
    pub n: usize,
    pub big_n: usize,
    pub beta: f64,
    pub total: MCEstimate,
    /// Masses of `τ̄ ∈ [0, N)`, `(j-N, j]`, `(j, j+N)` and `[N, j-N] ∪ [j+N, n]`, in [`STRATA`] order.
    pub windows: [MCEstimate; 4],
}

impl StrataReport {
    /// `|Σ masses - total| / total`.
    pub fn partition_residual(&self) -> f64 {
        let sum: f64 = self.windows.iter().map(|w| w.mean()).sum();
        (sum - self.total.mean()).abs() / self.total.mean().abs().max(f64::MIN_POSITIVE)
    }
}

fn stratum(tau: usize, j: usize, big_n: usize) -> usize {
    if tau < big_n {
        0
    } else if tau + big_n > j && tau <= j {
        1
    } else if tau > j && tau < j + big_n {
        2
    } else {
        3
    }
}

/// Splits `Ê[V_{j,n}(β)]`, `j = n - i`, by the window holding `τ̄(n)`.
pub fn strata_decomposition(spec: &EnvironmentSpec, i: usize, n: usize, beta: Beta, big_n: usize, m_samples: u64, plan: &McPlan) -> Result<StrataReport> {
    spec.check_params()?;
    check_samples(m_samples)?;
    if i >= n {
        return Err(domain(format!("strata need i < n, got i={i}, n={n}")));
    }
    let j = n - i;
    if big_n == 0 || 2 * big_n >= j {
        return Err(domain(format!("strata need 1 <= N < j/2, got N={big_n}, j={j}")));
    }
    let key = StreamKey::new(plan.seed, Purpose::Strata).sub((n as u64) << 32 | big_n as u64);
    let acc = run_blocks(m_samples, plan.shards, || vec![MCEstimate::new(); 5], |r, acc: &mut Vec<MCEstimate>| {
        let path = sample_path(spec, n, &mut key.rng(r))?;
        let wr = dual_reflected_walk(&path, n)?;
        let v = v_functional(&wr, j, n, beta)?.to_f64();
        let k = stratum(wr.tau(n), j, big_n);
        acc[0].push(v);
        for (w, slot) in acc[1..].iter_mut().enumerate() {
            slot.push(if w == k { v } else { 0.0 });
        }
        Ok(())
    })?;
    let mut it = acc.into_iter();
    let total = it.next().unwrap_or_default();
    let windows = [it.next().unwrap_or_default(), it.next().unwrap_or_default(), it.next().unwrap_or_default(), it.next().unwrap_or_default()];
    Ok(StrataReport { i, n, big_n, beta: beta.as_f64(), total, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::EnvironmentPath;

    const G: EnvironmentSpec = EnvironmentSpec::Gaussian { sigma: 1.0 };

    #[test]
    fn regime_indices() {
        assert_eq!(RegimeRule::FixedI(2).index(10).unwrap(), 2);
        assert!(RegimeRule::FixedI(10).index(10).is_err());
        assert_eq!(RegimeRule::EndWindow(3).index(10).unwrap(), 7);
        assert!(RegimeRule::EndWindow(0).index(10).is_err());
        assert_eq!(RegimeRule::Proportional(0.5).index(11).unwrap(), 5);
        assert!(RegimeRule::Proportional(1.0).index(11).is_err());
        assert_eq!(RegimeRule::parse("end", 3.0).unwrap(), RegimeRule::EndWindow(3));
        assert!(RegimeRule::parse("fixed", 1.5).is_err());
    }

    #[test]
    fn streaming_event_prob_matches_closed_form() {
        let key = StreamKey::new(1, Purpose::Oracle);
        for r in 0..50 {
            let path = sample_path(&G, 60, &mut key.rng(r)).unwrap();
            let w = WalkFunctionals::build(&path);
            for i in [0, 1, 30, 59] {
                let a = ln_event_prob_from_increments(path.increments(), i);
                let b = cond_event_prob(&w, i, 60).unwrap().ln();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn one_generation_probability_is_half() {
        let e = estimate_event_prob(&G, RegimeRule::FixedI(0), 1, 100_000, &McPlan::plain(2)).unwrap();
        assert!((e.estimate.mean() - 0.5).abs() <= 3.0 * e.estimate.stderr());
        assert_eq!(e.tag, "ok");
        let t = estimate_event_prob(&G, RegimeRule::FixedI(0), 1, 100_000, &McPlan::new(2)).unwrap();
        assert!((t.estimate.mean() - 0.5).abs() <= 3.0 * t.estimate.stderr());
    }

    #[test]
    fn disjoint_clans_sum_below_one() {
        let plan = McPlan::plain(3);
        let n = 12;
        let (mut total, mut var) = (0.0, 0.0);
        for i in 0..n {
            let e = estimate_event_prob(&G, RegimeRule::FixedI(i), n, 5_000, &plan).unwrap().estimate;
            total += e.mean();
            var += e.stderr().powi(2);
        }
        assert!(total <= 1.0 + 3.0 * var.sqrt());
    }

    #[test]
    fn constant_environment_is_deterministic() {
        let flat = EnvironmentSpec::TwoPoint { step: 0.0 };
        let plan = McPlan::new(4);
        let e = estimate_event_prob(&flat, RegimeRule::FixedI(2), 4, 100, &plan).unwrap();
        assert_eq!(e.estimate.stderr(), 0.0);
        let exact = cond_event_prob(&WalkFunctionals::build(&EnvironmentPath::flat(4)), 2, 4).unwrap().to_f64();
        assert!((e.estimate.mean() - exact).abs() < 1e-15);
        assert_eq!(e.tag, "assumptions-violated");
        let d = duality_check(&flat, 2, 4, Beta::Infinite, 50, &plan).unwrap();
        assert!((d.h_form.mean - 0.1).abs() < 1e-15 && (d.v_form.mean - 0.1).abs() < 1e-15);
        assert_eq!(d.z, 0.0);
    }

    #[test]
    fn proportional_refuses_lattice_law() {
        let lattice = EnvironmentSpec::TwoPoint { step: 0.7 };
        let mut plan = McPlan::new(5);
        let err = estimate_event_prob(&lattice, RegimeRule::Proportional(0.5), 16, 100, &plan).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        plan.allow_violation = true;
        let e = estimate_event_prob(&lattice, RegimeRule::Proportional(0.5), 16, 100, &plan).unwrap();
        assert_eq!(e.tag, "assumptions-violated");
        assert!(estimate_event_prob(&lattice, RegimeRule::FixedI(2), 16, 100, &McPlan::new(5)).is_ok());
    }

    #[test]
    fn theta_endpoints_are_exact() {
        let r = estimate_theta(&G, 3, 64, &[0.0, 0.5, 1.0], 5_000, &McPlan::new(6)).unwrap();
        assert_eq!(r.points[0].value, 0.0);
        assert_eq!(r.points[2].value, 1.0);
        assert!(r.points[1].value > 0.0 && r.points[1].value < 1.0);
        assert_eq!(r.pathwise_violations, 0);
    }

    #[test]
    fn lambda_endpoints_and_range() {
        let grid = [Beta::Finite(1e-4), Beta::Finite(1.0), Beta::Infinite];
        let r = estimate_lambda(&G, RegimeRule::Proportional(0.5), 128, &grid, 5_000, &McPlan::new(7)).unwrap();
        assert_eq!(r.points[2].value, 0.0);
        assert!(r.points.iter().all(|p| (0.0..=1.0).contains(&p.value)));
        assert!(r.points[0].value >= r.points[1].value);
        assert_eq!(r.pathwise_violations, 0);
    }

    #[test]
    fn theta_stable_in_n() {
        let plan = McPlan::new(8);
        let a = estimate_theta(&G, 3, 256, &[0.5], 20_000, &plan).unwrap().points[0];
        let b = estimate_theta(&G, 3, 512, &[0.5], 20_000, &plan).unwrap().points[0];
        assert!((a.value - b.value).abs() <= 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
    }

    #[test]
    fn duality_agrees() {
        let plan = McPlan::plain(9);
        for beta in [Beta::Finite(0.1), Beta::Finite(1.0), Beta::Finite(10.0), Beta::Infinite] {
            let d = duality_check(&G, 48, 64, beta, 20_000, &plan).unwrap();
            assert!(d.z.abs() <= 3.0, "{d:?}");
        }
        let d = duality_check(&G, 48, 64, Beta::Infinite, 20_000, &plan).unwrap();
        let p = estimate_event_prob(&G, RegimeRule::FixedI(48), 64, 20_000, &plan).unwrap().estimate;
        let z = (d.v_form.mean - p.mean()) / (d.v_form.stderr.powi(2) + p.stderr().powi(2)).sqrt();
        assert!(z.abs() <= 3.0);
    }

    #[test]
    fn strata_partition_exactly() {
        let r = strata_decomposition(&G, 32, 64, Beta::Finite(1.0), 5, 5_000, &McPlan::plain(10)).unwrap();
        assert!(r.partition_residual() <= 1e-10);
        let counts: u64 = r.windows.iter().map(|w| w.count()).sum();
        assert_eq!(counts, 4 * r.total.count());
        assert!(strata_decomposition(&G, 32, 64, Beta::Finite(1.0), 16, 10, &McPlan::plain(10)).is_err());
    }

    #[test]
    fn strata_windows() {
        // j = 10, N = 3: [0,2] | [3,7] middle | (7,10] | (10,13) | [13, n] middle
        let got: Vec<usize> = (0..16).map(|t| stratum(t, 10, 3)).collect();
        assert_eq!(got, vec![0, 0, 0, 3, 3, 3, 3, 3, 1, 1, 1, 2, 2, 3, 3, 3]);
    }
}
