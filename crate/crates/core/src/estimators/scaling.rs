//! Power-law fits of event probabilities against `n`.

use serde::Serialize;

use crate::env_model::EnvironmentSpec;
use crate::error::{Error, Result};

use super::mc::Summary;
use super::{estimate_event_prob, McPlan, RegimeRule};

/// Weighted least squares of `ln Ê` on `ln n`, weights `1/relvar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points_used: usize,
}

/// Fits `ln mean = intercept + slope · ln n` over points `(n, estimate)`.
/// Points whose mean is within three standard errors of zero are skipped.
pub fn fit_power_law(points: &[(f64, Summary)]) -> Result<ScalingFit> {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(_, e)| e.mean > 3.0 * e.stderr && e.mean > 0.0)
        .map(|(n, e)| {
            let rel = (e.stderr / e.mean).max(1e-300);
            (n.ln(), e.mean.ln(), 1.0 / (rel * rel))
        })
        .collect();
    if usable.len() < 4 {
        return Err(Error::Fit(format!("{} usable grid points, need at least 4", usable.len())));
    }
    let sw: f64 = usable.iter().map(|p| p.2).sum();
    let xbar = usable.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ybar = usable.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("grid has no spread in n".into()));
    }
    let slope = sxy / sxx;
    Ok(ScalingFit { slope, intercept: ybar - slope * xbar, slope_stderr: (1.0 / sxx).sqrt(), points_used: usable.len() })
}

/// The factor that should make `Ê[P(A_i(n))]` level off under each regime.
pub fn compensation(rule: &RegimeRule, n: usize, i: usize) -> f64 {
    let (n, i) = (n as f64, i as f64);
    match rule {
        RegimeRule::EndWindow(_) => n.sqrt(),
        RegimeRule::FixedI(_) => n.powf(1.5),
        RegimeRule::Proportional(_) => i.sqrt() * (n - i).powf(1.5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub i: usize,
    pub estimate: Summary,
    pub compensated: f64,
    pub compensated_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudy {
    pub rule: RegimeRule,
    pub points: Vec<ScalingPoint>,
    pub fit: ScalingFit,
    /// Compensated value at each grid point over the previous one.
    pub ratios: Vec<f64>,
    /// Inverse-variance mean of the compensated values at the top three grid points.
    pub plateau: f64,
    pub plateau_stderr: f64,
    /// Grid points left out of the fit as unreliable.
    pub dropped: Vec<usize>,
    pub tag: &'static str,
}

/// Estimates `P(A_{i(n)}(n))` on a geometric grid and fits the decay.
pub fn scaling_study(spec: &EnvironmentSpec, rule: RegimeRule, n_grid: &[usize], m_samples: u64, plan: &McPlan) -> Result<ScalingStudy> {
    if n_grid.len() < 4 {
        return Err(Error::Config(format!("scaling needs at least 4 grid points, got {}", n_grid.len())));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    let mut tag = "ok";
    for &n in n_grid {
        let e = estimate_event_prob(spec, rule, n, m_samples, plan)?;
        tag = e.tag;
        let s = e.estimate.summary();
        let c = compensation(&rule, n, e.i);
        points.push(ScalingPoint { n, i: e.i, estimate: s, compensated: c * s.mean, compensated_stderr: c * s.stderr });
    }
    let dropped: Vec<usize> = points.iter().filter(|p| !(p.estimate.mean > 3.0 * p.estimate.stderr)).map(|p| p.n).collect();
    let fit = fit_power_law(&points.iter().map(|p| (p.n as f64, p.estimate)).collect::<Vec<_>>())?;
    let ratios = points.windows(2).map(|w| w[1].compensated / w[0].compensated).collect();
    let top = &points[points.len().saturating_sub(3)..];
    let (mut sw, mut swx) = (0.0, 0.0);
    for p in top {
        let w = 1.0 / p.compensated_stderr.powi(2).max(1e-300);
        sw += w;
        swx += w * p.compensated;
    }
    Ok(ScalingStudy { rule, points, fit, ratios, plateau: swx / sw, plateau_stderr: (1.0 / sw).sqrt(), dropped, tag })
}
