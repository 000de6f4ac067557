//! Environment samplers for the event-probability estimators.
//!
//! `P(A_i(n) | S)` is of order one only when `S_i` sits near the minimum of the
//! walk on `[0, i]` and the walk after `i` stays above `S_i` and ends near its
//! own minimum; for large `n` almost no free paths do that. The tilted sampler
//! draws paths from a defensive mixture of sequentially tilted laws that favour
//! such shapes and returns the likelihood ratio with each path.
//!
//! * Pre-part (steps `1..=i`) is generated backwards from `i` as a walk kept
//!   below a ceiling `c` by a Brownian-meander drift; one component per ceiling.
//! * Post-part (steps `i+1..=n`) is kept above a floor and pulled toward an end
//!   level `ℓ`; one component per end level.
//! * With probability `defensive` the whole path is drawn from the plain law.
//!
//! All levels are in units of the step standard deviation. The mixture density
//! relative to the plain law is evaluated over every component, so the weights
//! are exact whatever the drift rules are.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env_model::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::log_value::{log_add_exp, log_sum_exp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltConfig {
    pub defensive: f64,
    /// Offset added to distances from a barrier.
    pub offset: f64,
    /// Added to the remaining horizon in the end-level pull.
    pub t0: f64,
    /// Largest drift per step.
    pub cap: f64,
    pub ceilings: Vec<f64>,
    pub end_levels: Vec<f64>,
}

impl Default for TiltConfig {
    fn default() -> Self {
        TiltConfig {
            defensive: 0.1,
            offset: 1.0,
            t0: 8.0,
            cap: 0.3,
            ceilings: vec![0.0, 3.0],
            end_levels: vec![-5.0, -2.0, 1.0],
        }
    }
}

impl TiltConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.defensive > 0.0
            && self.defensive <= 1.0
            && self.offset > 0.0
            && self.t0 >= 0.0
            && self.cap > 0.0
            && !self.ceilings.is_empty()
            && !self.end_levels.is_empty()
            && self.ceilings.iter().chain(&self.end_levels).all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid tilt configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    Plain,
    Tilted(TiltConfig),
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Tilted(TiltConfig::default())
    }
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Plain => "plain",
            Sampler::Tilted(_) => "tilted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "plain" => Ok(Sampler::Plain),
            "tilted" => Ok(Sampler::default()),
            other => Err(Error::Config(format!("unknown sampler `{other}` (plain|tilted)"))),
        }
    }

    /// Draws `X_1..X_n` for clan index `i` into `x` and returns `ln(dP/dQ)` of the path.
    pub fn draw<R: Rng + ?Sized>(&self, spec: &EnvironmentSpec, n: usize, i: usize, x: &mut Vec<f64>, rng: &mut R) -> f64 {
        x.clear();
        match self {
            Sampler::Tilted(cfg) if !spec.is_degenerate() => draw_tilted(cfg, spec, n, i, x, rng),
            _ => {
                x.extend((0..n).map(|_| spec.draw(rng)));
                0.0
            }
        }
    }
}

/// Downward drift (in σ units) keeping a walk at `pos` below `ceiling` for `tau` more steps.
fn meander_drift(cfg: &TiltConfig, ceiling: f64, pos: f64, tau: f64) -> f64 {
    let y = (ceiling - pos).max(0.0) + cfg.offset;
    let root = (2.0 * tau).sqrt();
    let z = y / root;
    let d = std::f64::consts::FRAC_2_SQRT_PI * (-z * z).exp() / (root * libm::erf(z).max(1e-300));
    -d.min(cfg.cap)
}

/// Drift (in σ units) keeping a walk at `pos` above `min(0, level)` and ending near `level`.
fn bridge_drift(cfg: &TiltConfig, level: f64, pos: f64, tau: f64) -> f64 {
    let h = (pos - level.min(0.0)).max(0.0);
    (1.0 / (h + cfg.offset) - (pos - level) / (tau + cfg.t0)).clamp(-cfg.cap, cfg.cap)
}

fn draw_tilted<R: Rng + ?Sized>(cfg: &TiltConfig, spec: &EnvironmentSpec, n: usize, i: usize, x: &mut Vec<f64>, rng: &mut R) -> f64 {
    let sigma = spec.std_dev();
    let plain = rng.random::<f64>() < cfg.defensive;
    let pick_c = rng.random_range(0..cfg.ceilings.len());
    let pick_l = rng.random_range(0..cfg.end_levels.len());

    // pre-part: Y_1..Y_i with X_k = Y_{i-k+1}
    x.resize(n, 0.0);
    let mut lq_pre = vec![0.0; cfg.ceilings.len()];
    let mut thetas = vec![0.0; cfg.ceilings.len().max(cfg.end_levels.len())];
    let mut pos = 0.0;
    for r in 0..i {
        let tau = (i - r) as f64;
        for (t, &c) in thetas.iter_mut().zip(&cfg.ceilings) {
            *t = meander_drift(cfg, c, pos / sigma, tau) / sigma;
        }
        let v = spec.draw_tilted(if plain { 0.0 } else { thetas[pick_c] }, rng);
        for (lq, &t) in lq_pre.iter_mut().zip(&thetas) {
            *lq += t * v - spec.log_mgf(t);
        }
        x[i - 1 - r] = v;
        pos += v;
    }

    let mut lq_post = vec![0.0; cfg.end_levels.len()];
    let j = n - i;
    let mut w = 0.0;
    for k in 0..j {
        let tau = (j - k) as f64;
        for (t, &l) in thetas.iter_mut().zip(&cfg.end_levels) {
            *t = bridge_drift(cfg, l, w / sigma, tau) / sigma;
        }
        let v = spec.draw_tilted(if plain { 0.0 } else { thetas[pick_l] }, rng);
        for (lq, &t) in lq_post.iter_mut().zip(&thetas) {
            *lq += t * v - spec.log_mgf(t);
        }
        x[i + k] = v;
        w += v;
    }

    let ln_c = (cfg.ceilings.len() as f64).ln();
    let ln_k = (cfg.end_levels.len() as f64).ln();
    let mix = log_sum_exp(lq_pre.iter().copied()) - ln_c + log_sum_exp(lq_post.iter().copied()) - ln_k;
    let lmix = log_add_exp(cfg.defensive.ln(), (-cfg.defensive).ln_1p() + mix);
    -lmix
}
