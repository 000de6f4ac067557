//! Laws of the log mean offspring `X = log m(F)` and the geometric offspring law.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Law of the environment increment `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    /// `X ~ N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// `X ~ Uniform[-halfwidth, halfwidth]`.
    UniformSymmetric { halfwidth: f64 },
    /// `X = ±step` with probability 1/2 each. Lattice; a negative control.
    /// `step = 0` is accepted as the degenerate constant environment `X ≡ 0`.
    TwoPoint { step: f64 },
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec::Gaussian { sigma: 1.0 }
    }
}

/// Per-hypothesis conformity, decided from analytic facts about the family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Geometric offspring law with a nonlattice `X`.
    pub a1: bool,
    /// `E[X] = 0` and `E[e^X + e^{-X}] < ∞`.
    pub a2: bool,
    /// `X` has a continuous law.
    pub a3: bool,
    pub nonlattice: bool,
    pub diagnostics: Vec<String>,
}

impl ValidationReport {
    pub fn conforms(&self) -> bool {
        self.a1 && self.a2 && self.a3
    }

    /// Output tag attached to every estimate computed under this law.
    pub fn tag(&self) -> &'static str {
        if self.conforms() {
            "ok"
        } else {
            "assumptions-violated"
        }
    }
}

impl EnvironmentSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            EnvironmentSpec::Gaussian { .. } => "gaussian",
            EnvironmentSpec::UniformSymmetric { .. } => "uniform",
            EnvironmentSpec::TwoPoint { .. } => "two_point",
        }
    }

    /// The family's single scale parameter.
    pub fn param(&self) -> f64 {
        match *self {
            EnvironmentSpec::Gaussian { sigma } => sigma,
            EnvironmentSpec::UniformSymmetric { halfwidth } => halfwidth,
            EnvironmentSpec::TwoPoint { step } => step,
        }
    }

    pub fn check_params(&self) -> Result<()> {
        let ok = match *self {
            EnvironmentSpec::Gaussian { sigma } => sigma.is_finite() && sigma > 0.0,
            EnvironmentSpec::UniformSymmetric { halfwidth } => halfwidth.is_finite() && halfwidth > 0.0,
            EnvironmentSpec::TwoPoint { step } => step.is_finite() && step >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid parameter for {self:?}")))
        }
    }

    /// Standard deviation of `X`.
    pub fn std_dev(&self) -> f64 {
        match *self {
            EnvironmentSpec::Gaussian { sigma } => sigma,
            EnvironmentSpec::UniformSymmetric { halfwidth } => halfwidth / 3f64.sqrt(),
            EnvironmentSpec::TwoPoint { step } => step,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(*self, EnvironmentSpec::TwoPoint { step } if step == 0.0)
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        self.check_params()?;
        let mut diagnostics = Vec::new();
        let (nonlattice, continuous) = match *self {
            EnvironmentSpec::Gaussian { sigma } => {
                diagnostics.push(format!("E[e^X] = e^{{sigma^2/2}} = {:.6}", (sigma * sigma / 2.0).exp()));
                (true, true)
            }
            EnvironmentSpec::UniformSymmetric { halfwidth: c } => {
                diagnostics.push(format!("bounded support [-{c}, {c}]"));
                (true, true)
            }
            EnvironmentSpec::TwoPoint { step } => {
                if step == 0.0 {
                    diagnostics.push("degenerate constant environment X = 0".into());
                } else {
                    diagnostics.push(format!("lattice support {{-{step}, {step}}} with span {}", 2.0 * step));
                }
                (false, false)
            }
        };
        // All three families are symmetric with exponential moments of every order.
        let critical = true;
        if !nonlattice {
            diagnostics.push("A1 fails: X is lattice".into());
        }
        if !continuous {
            diagnostics.push("A3 fails: X has atoms".into());
        }
        Ok(ValidationReport { a1: nonlattice, a2: critical, a3: continuous, nonlattice, diagnostics })
    }

    /// One draw of `X`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EnvironmentSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            EnvironmentSpec::UniformSymmetric { halfwidth } => halfwidth * (2.0 * rng.random::<f64>() - 1.0),
            EnvironmentSpec::TwoPoint { step } => {
                if rng.random::<bool>() {
                    step
                } else {
                    -step
                }
            }
        }
    }

    /// `ln E[e^{θX}]`.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match *self {
            EnvironmentSpec::Gaussian { sigma } => 0.5 * theta * theta * sigma * sigma,
            EnvironmentSpec::UniformSymmetric { halfwidth: c } => {
                let t = theta * c;
                if t.abs() < 1e-4 {
                    t * t / 6.0
                } else {
                    // ln(sinh t / t) = |t| + ln(1 - e^{-2|t|}) - ln 2 - ln |t|
                    let a = t.abs();
                    a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
                }
            }
            EnvironmentSpec::TwoPoint { step } => {
                let a = (theta * step).abs();
                // ln cosh a
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
        }
    }

    /// One draw from the exponentially tilted law `e^{θx - log_mgf(θ)} P(X ∈ dx)`.
    pub fn draw_tilted<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> f64 {
        if theta == 0.0 {
            return self.draw(rng);
        }
        match *self {
            EnvironmentSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z + theta * sigma * sigma
            }
            EnvironmentSpec::UniformSymmetric { halfwidth: c } => {
                // inverse CDF of the density ∝ e^{θx} on [-c, c]
                let u: f64 = rng.random();
                let t = theta * c;
                if t.abs() < 1e-9 {
                    return c * (2.0 * u - 1.0);
                }
                // x = c + ln(u + (1-u) e^{-2t}) / θ, stable for either sign of θ
                if t > 0.0 {
                    c + (u + (1.0 - u) * (-2.0 * t).exp()).ln() / theta
                } else {
                    -c + ((1.0 - u) + u * (2.0 * t).exp()).ln() / theta
                }
            }
            EnvironmentSpec::TwoPoint { step } => {
                let p_up = 1.0 / (1.0 + (-2.0 * theta * step).exp());
                if rng.random::<f64>() < p_up {
                    step
                } else {
                    -step
                }
            }
        }
    }
}

/// A realized environment: `x[k] = X_{k+1}`, natural-log units.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPath {
    x: Vec<f64>,
}

impl EnvironmentPath {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(domain("environment path must be nonempty"));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite environment value at index {k}")));
        }
        Ok(EnvironmentPath { x })
    }

    /// The constant environment `X ≡ 0` of length `n`.
    pub fn flat(n: usize) -> Self {
        EnvironmentPath { x: vec![0.0; n.max(1)] }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn increments(&self) -> &[f64] {
        &self.x
    }

    /// Mean offspring `m_k = e^{X_k}` of generation `k` (1-based).
    pub fn mean_offspring(&self, k: usize) -> f64 {
        self.x[k - 1].exp()
    }

    /// Environment of the first `n` generations.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(domain(format!("prefix length {n} outside 1..={}", self.len())));
        }
        Ok(EnvironmentPath { x: self.x[..n].to_vec() })
    }

    /// Increments in reverse order with flipped sign: the walk `S_n - S_{n-r}` reflected.
    pub fn reversed_negated(&self) -> Self {
        EnvironmentPath { x: self.x.iter().rev().map(|v| -v).collect() }
    }
}

/// `n` i.i.d. draws of `X`.
pub fn sample_path<R: Rng + ?Sized>(spec: &EnvironmentSpec, n: usize, rng: &mut R) -> Result<EnvironmentPath> {
    if n == 0 {
        return Err(domain("sample_path needs n >= 1"));
    }
    Ok(EnvironmentPath { x: (0..n).map(|_| spec.draw(rng)).collect() })
}

/// Geometric PGF with mean `m`: `F(s) = 1 / (1 + m (1 - s))`.
pub fn pgf_eval(m: f64, s: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(domain(format!("mean offspring must be positive, got {m}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(1.0 / (1.0 + m * (1.0 - s)))
}

/// `(p, q)` of the geometric law `P(ξ = j) = q p^j` with mean `m`.
pub fn offspring_params(m: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(domain(format!("mean offspring must be positive, got {m}")));
    }
    Ok((m / (1.0 + m), 1.0 / (1.0 + m)))
}
