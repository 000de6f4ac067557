//! Environment-conditional closed forms for geometric offspring.
//!
//! With `F_k(s) = 1/(1 + m_k(1-s))` and `F_{i,n} = F_{i+1} ∘ ... ∘ F_n`,
//!
//! * `1 - F_{i,n}(s) = a_i / (a_n (1-s)^{-1} + b_n - b_i)`
//! * `F_{i,n}(0) = (a_n + b_n - b_{i+1}) / (a_n + b_n - b_i)`
//! * `H_{i,n}(s) = (1 - F_{i,n}(s)) Π_{j≠i} F_{j,n}(0)`, whose environment average is
//!   `E[1 - s^{Z_{i,n}}; only clan i alive at n]`.
//!
//! Since `a_n + b_n = b_{n+1}`, every `a_n + b_n - b_k` is the window `Σ_{r=k}^{n} e^{-S_r}`,
//! which [`WalkFunctionals::window`] evaluates without cancellation.

use crate::env_model::{pgf_eval, EnvironmentPath};
use crate::error::{domain, Result};
use crate::log_value::{ln_one_minus_exp_neg, log_add_exp, LogValue};
use crate::walk::WalkFunctionals;

/// `s ↦ (αs + β)/(γs + δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap { alpha: 1.0, beta: 0.0, gamma: 0.0, delta: 1.0 };

    /// The geometric PGF with mean `m`: `1/((1+m) - m s)`.
    pub fn from_pgf(m: f64) -> Self {
        MobiusMap { alpha: 0.0, beta: 1.0, gamma: -m, delta: 1.0 + m }
    }

    /// `self ∘ inner`, rescaled so the largest coefficient has magnitude 1.
    pub fn compose(&self, inner: &MobiusMap) -> MobiusMap {
        let c = MobiusMap {
            alpha: self.alpha * inner.alpha + self.beta * inner.gamma,
            beta: self.alpha * inner.beta + self.beta * inner.delta,
            gamma: self.gamma * inner.alpha + self.delta * inner.gamma,
            delta: self.gamma * inner.beta + self.delta * inner.delta,
        };
        c.normalized()
    }

    pub fn normalized(&self) -> MobiusMap {
        let scale = [self.alpha, self.beta, self.gamma, self.delta].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return *self;
        }
        MobiusMap {
            alpha: self.alpha / scale,
            beta: self.beta / scale,
            gamma: self.gamma / scale,
            delta: self.delta / scale,
        }
    }

    pub fn det(&self) -> f64 {
        self.alpha * self.delta - self.beta * self.gamma
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.alpha * s + self.beta) / (self.gamma * s + self.delta)
    }
}

fn check_range(i: usize, n: usize, len: usize, strict: bool) -> Result<()> {
    let ok = if strict { i < n } else { i <= n };
    if !ok || n > len {
        let rel = if strict { "<" } else { "<=" };
        return Err(domain(format!("need 0 <= i {rel} n <= {len}, got i={i}, n={n}")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// `F_{i,n}` as a single Möbius map, composed left to right.
pub fn compose_mobius(path: &EnvironmentPath, i: usize, n: usize) -> Result<MobiusMap> {
    check_range(i, n, path.len(), false)?;
    let mut map = MobiusMap::IDENTITY;
    for k in i + 1..=n {
        map = map.compose(&MobiusMap::from_pgf(path.mean_offspring(k)));
        if map.det() == 0.0 {
            return Err(crate::Error::Numerical(format!("degenerate Möbius composition at k={k}")));
        }
    }
    Ok(map)
}

/// `F_{i,n}(s)` by folding the PGFs right to left; `F_{n,n}(s) = s`.
pub fn compose_pgf_bruteforce(path: &EnvironmentPath, i: usize, n: usize, s: f64) -> Result<f64> {
    check_range(i, n, path.len(), false)?;
    check_s(s)?;
    let mut v = s;
    for k in (i + 1..=n).rev() {
        v = pgf_eval(path.mean_offspring(k), v)?;
    }
    Ok(v)
}

/// `1 - F_{i,n}(s)` by the same fold carried on the complement, `u ↦ m u/(1 + m u)`,
/// which keeps full relative precision when the survival probability is tiny.
pub fn compose_survival_bruteforce(path: &EnvironmentPath, i: usize, n: usize, s: f64) -> Result<f64> {
    check_range(i, n, path.len(), false)?;
    check_s(s)?;
    let mut u = 1.0 - s;
    for k in (i + 1..=n).rev() {
        let mu = path.mean_offspring(k) * u;
        u = mu / (1.0 + mu);
    }
    Ok(u)
}

/// An evaluation point `s ∈ [0,1]` carried as `ln(1 - s)`, so points extremely
/// close to 1 keep their precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    ln_one_minus_s: f64,
}

impl EvalPoint {
    pub const ZERO: EvalPoint = EvalPoint { ln_one_minus_s: 0.0 };
    pub const ONE: EvalPoint = EvalPoint { ln_one_minus_s: f64::NEG_INFINITY };

    pub fn from_s(s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(EvalPoint { ln_one_minus_s: (-s).ln_1p() })
    }

    /// From `ln(1 - s) <= 0`.
    pub fn from_ln_one_minus_s(v: f64) -> Result<Self> {
        if v.is_nan() || v > 0.0 {
            return Err(domain(format!("ln(1 - s) = {v} must be <= 0")));
        }
        Ok(EvalPoint { ln_one_minus_s: v })
    }

    pub fn ln_one_minus_s(&self) -> f64 {
        self.ln_one_minus_s
    }

    pub fn is_one(&self) -> bool {
        self.ln_one_minus_s == f64::NEG_INFINITY
    }

    pub fn is_zero(&self) -> bool {
        self.ln_one_minus_s == 0.0
    }
}

/// `1 - F_{i,n}(s)` for `0 <= i <= n`.
pub fn survival_closed(w: &WalkFunctionals, i: usize, n: usize, s: EvalPoint) -> Result<LogValue> {
    check_range(i, n, w.len(), false)?;
    if s.is_one() {
        return Ok(LogValue::ZERO);
    }
    let den = log_add_exp(w.ln_a(n) - s.ln_one_minus_s, w.window(i, n).ln());
    Ok(LogValue::from_ln(w.ln_a(i) - den))
}

/// `F_{i,n}(0)` for `0 <= i < n`.
pub fn extinction_step(w: &WalkFunctionals, i: usize, n: usize) -> Result<LogValue> {
    check_range(i, n, w.len(), true)?;
    Ok(w.window(i + 1, n + 1) / w.window(i, n + 1))
}

/// `P(only clan i is alive at n | S) = a_i/(a_n + b_n - b_{i+1}) · a_n/b_{n+1}`.
pub fn cond_event_prob(w: &WalkFunctionals, i: usize, n: usize) -> Result<LogValue> {
    check_range(i, n, w.len(), true)?;
    let ln = w.ln_a(i) - w.window(i + 1, n + 1).ln() + w.ln_a(n) - w.b(n + 1).ln();
    Ok(LogValue::from_ln(ln))
}

/// `H_{i,n}(s)` in the prefix form, as `P(A_i(n)|S)` times
/// `(a_n + b_n - b_i)/(a_n (1-s)^{-1} + b_n - b_i) ∈ [0, 1]`.
///
/// Exactly equal to [`cond_event_prob`] at `s = 0` and exactly zero at `s = 1`.
pub fn h_functional(w: &WalkFunctionals, i: usize, n: usize, s: EvalPoint) -> Result<LogValue> {
    let p = cond_event_prob(w, i, n)?;
    if s.is_one() {
        return Ok(LogValue::ZERO);
    }
    if s.is_zero() {
        return Ok(p);
    }
    let num = w.window(i, n + 1).ln();
    let den = log_add_exp(w.ln_a(n) - s.ln_one_minus_s, w.window(i, n).ln());
    Ok(p * LogValue::from_ln((num - den).min(0.0)))
}

/// `H_{i,n}(s)` in the window form
/// `1/(a_{i,n}(1-s)^{-1} + b_{i,n}) · (a_{i,n} + b_{i,n})/(a_{i,n} + b_{i,n} - 1) · a_n/(a_n + b_n)`,
/// with the subtraction of 1 done literally. Kept as a cross-check of [`h_functional`].
pub fn h_functional_window_form(w: &WalkFunctionals, i: usize, n: usize, s: EvalPoint) -> Result<LogValue> {
    check_range(i, n, w.len(), true)?;
    if s.is_one() {
        return Ok(LogValue::ZERO);
    }
    let a_in = LogValue::from_ln(w.ln_a_range(i, n));
    let b_in = w.log_b_range(i, n)?;
    let first = LogValue::ONE / (a_in / LogValue::from_ln(s.ln_one_minus_s) + b_in);
    let second = (a_in + b_in) / (a_in + b_in).sub_saturating(LogValue::ONE);
    let a_n = LogValue::from_ln(w.ln_a(n));
    let third = a_n / (a_n + w.b(n));
    Ok(first * second * third)
}

/// `(1 - F_{i,n}(s)) Π_{j≠i} F_{j,n}(0)` from brute-force compositions.
pub fn h_functional_bruteforce(path: &EnvironmentPath, i: usize, n: usize, s: f64) -> Result<f64> {
    check_range(i, n, path.len(), true)?;
    let mut h = compose_survival_bruteforce(path, i, n, s)?;
    for j in (0..n).filter(|&j| j != i) {
        h *= compose_pgf_bruteforce(path, j, n, 0.0)?;
    }
    Ok(h)
}

/// A Laplace argument `β ∈ [0, ∞]`, with `∞` as its own case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "Inf" | "infinity" | "∞") {
            return Ok(Beta::Infinite);
        }
        let v: f64 = t.parse().map_err(|_| crate::Error::Config(format!("bad beta value `{t}`")))?;
        Beta::new(v)
    }

    pub fn new(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            Ok(Beta::Infinite)
        } else if v.is_nan() || v < 0.0 {
            Err(domain(format!("beta = {v} must be >= 0")))
        } else {
            Ok(Beta::Finite(v))
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Beta::Finite(v) => *v,
            Beta::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Beta::Finite(v) => write!(f, "{v}"),
            Beta::Infinite => write!(f, "inf"),
        }
    }
}

/// `H_{i,n}(e^{-β a_{i,n}})`. The point `1 - s = 1 - e^{-β a_{i,n}}` is formed in
/// the log domain from `ln β + S_i - S_n`.
pub fn yaglom_integrand(w: &WalkFunctionals, i: usize, n: usize, beta: Beta) -> Result<LogValue> {
    check_range(i, n, w.len(), true)?;
    match beta {
        Beta::Infinite => cond_event_prob(w, i, n),
        Beta::Finite(b) if b == 0.0 => Ok(LogValue::ZERO),
        Beta::Finite(b) => {
            let pt = EvalPoint { ln_one_minus_s: ln_one_minus_exp_neg(b.ln() + w.ln_a_range(i, n)) };
            h_functional(w, i, n, pt)
        }
    }
}

/// `V_{j,n}(β) = ā_j/((1 - e^{-β/ā_j})^{-1} + B̄_{1,j+1}) · b̄_{j+1}/b̄_j · 1/b̄_{n+1}`,
/// evaluated on the reflected walk `wr`. `β = ∞` gives `ā_j/(b̄_j b̄_{n+1})`.
pub fn v_functional(wr: &WalkFunctionals, j: usize, n: usize, beta: Beta) -> Result<LogValue> {
    if !(1 <= j && j <= n && n <= wr.len()) {
        return Err(domain(format!("V needs 1 <= j <= n <= {}, got j={j}, n={n}", wr.len())));
    }
    let tail = wr.ln_a(j) - wr.b(j).ln() - wr.b(n + 1).ln();
    match beta {
        Beta::Infinite => Ok(LogValue::from_ln(tail)),
        Beta::Finite(b) if b > 0.0 => {
            let ln_f = ln_one_minus_exp_neg(b.ln() - wr.ln_a(j));
            let den = log_add_exp(-ln_f, wr.window(1, j + 1).ln());
            // ā_j/den · b̄_{j+1}; the ratio cannot exceed 1
            let lead = (wr.b(j + 1).ln() - den).min(0.0);
            Ok(LogValue::from_ln(lead + tail))
        }
        Beta::Finite(b) => Err(domain(format!("V needs beta > 0, got {b}"))),
    }
}

/// The walk on which [`v_functional`] mirrors [`yaglom_integrand`] for the
/// first `n` generations: reversed and negated increments.
pub fn dual_reflected_walk(path: &EnvironmentPath, n: usize) -> Result<WalkFunctionals> {
    Ok(WalkFunctionals::build(&path.prefix(n)?.reversed_negated()))
}

/// `Π_{k=1}^{i-1} F_{k,i}(z)` by brute-force composition.
pub fn clan_product_bruteforce(path: &EnvironmentPath, i: usize, z: f64) -> Result<f64> {
    let mut p = 1.0;
    for k in 1..i {
        p *= compose_pgf_bruteforce(path, k, i, z)?;
    }
    Ok(p)
}

/// `(1-z)^{-1}/((1-z)^{-1} + a_{i-1} + B_{1,i-1})` on walk `wt`.
///
/// On the reversed and negated prefix `X_i, ..., X_1 ↦ -X_i, ..., -X_1` this equals
/// [`clan_product_bruteforce`] on the original environment.
pub fn clan_product_closed(wt: &WalkFunctionals, i: usize, z: f64) -> Result<f64> {
    check_s(z)?;
    if i == 0 || i > wt.len() {
        return Err(domain(format!("product needs 1 <= i <= {}, got {i}", wt.len())));
    }
    if i == 1 {
        return Ok(1.0);
    }
    let ln_u0 = -(-z).ln_1p();
    // a_{i-1} + B_{1,i-1} = b_i - 1
    let rest = wt.window(1, i).ln();
    Ok((ln_u0 - log_add_exp(ln_u0, rest)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{sample_path, EnvironmentSpec};
    use crate::rng::{Purpose, StreamKey};
    use proptest::prelude::*;
    use rand::Rng;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / b.abs()
        }
    }

    fn random_path(n: usize, seed: u64) -> EnvironmentPath {
        let spec = EnvironmentSpec::Gaussian { sigma: 1.0 };
        sample_path(&spec, n, &mut StreamKey::new(seed, Purpose::Oracle).rng(1)).unwrap()
    }

    fn pt(s: f64) -> EvalPoint {
        EvalPoint::from_s(s).unwrap()
    }

    #[test]
    fn mobius_matches_fold() {
        let path = random_path(12, 3);
        for (i, n) in [(0, 12), (3, 9), (5, 5)] {
            let map = compose_mobius(&path, i, n).unwrap();
            for s in [0.0, 0.4, 1.0] {
                let v = compose_pgf_bruteforce(&path, i, n, s).unwrap();
                assert!(rel(map.eval(s), v) < 1e-12);
            }
        }
        assert_eq!(compose_pgf_bruteforce(&path, 4, 4, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn flat_composition() {
        let path = EnvironmentPath::flat(5);
        assert!(rel(compose_pgf_bruteforce(&path, 0, 5, 0.0).unwrap(), 5.0 / 6.0) < 1e-15);
        let w = WalkFunctionals::build(&path);
        assert!(rel(survival_closed(&w, 0, 5, EvalPoint::ZERO).unwrap().to_f64(), 1.0 / 6.0) < 1e-15);
        assert!(survival_closed(&w, 0, 5, EvalPoint::ONE).unwrap().is_zero());
    }

    #[test]
    fn survival_matches_composition() {
        for seed in 0..50 {
            let path = random_path(20, seed);
            let w = WalkFunctionals::build(&path);
            for n in [1, 7, 20] {
                for i in 0..n {
                    for s in [0.0, 0.25, 0.5, 0.9] {
                        let closed = survival_closed(&w, i, n, pt(s)).unwrap().to_f64();
                        let brute = compose_survival_bruteforce(&path, i, n, s).unwrap();
                        assert!(rel(closed, brute) < 1e-10, "seed {seed} i {i} n {n} s {s}");
                        let plain = 1.0 - compose_pgf_bruteforce(&path, i, n, s).unwrap();
                        assert!((closed - plain).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn survival_decreases_to_zero_near_one() {
        let w = WalkFunctionals::build(&random_path(10, 1));
        let mut prev = f64::INFINITY;
        for s in [0.0, 0.5, 0.9, 0.99, 0.999999, 1.0] {
            let v = survival_closed(&w, 2, 10, pt(s)).unwrap().to_f64();
            assert!(v <= prev);
            prev = v;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn extinction_step_examples() {
        let w = WalkFunctionals::build(&EnvironmentPath::flat(1));
        assert!(rel(extinction_step(&w, 0, 1).unwrap().to_f64(), 0.5) < 1e-15);
        let w4 = WalkFunctionals::build(&EnvironmentPath::flat(4));
        let prod: f64 = (0..4).map(|j| extinction_step(&w4, j, 4).unwrap().to_f64()).product();
        assert!(rel(prod, 0.2) < 1e-15);
        for seed in 0..20 {
            let w = WalkFunctionals::build(&random_path(30, seed));
            for i in 0..30 {
                let ext = extinction_step(&w, i, 30).unwrap().to_f64();
                let surv = survival_closed(&w, i, 30, EvalPoint::ZERO).unwrap().to_f64();
                assert!((1.0 - ext - surv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn telescoping_product() {
        for seed in 0..20 {
            let w = WalkFunctionals::build(&random_path(40, seed));
            let ln_prod: f64 = (0..40).map(|j| extinction_step(&w, j, 40).unwrap().ln()).sum();
            let target = w.ln_a(40) - w.b(41).ln();
            assert!(rel(ln_prod.exp(), target.exp()) < 1e-10);
        }
    }

    #[test]
    fn h_flat_values() {
        let w1 = WalkFunctionals::build(&EnvironmentPath::flat(1));
        assert!(rel(h_functional(&w1, 0, 1, EvalPoint::ZERO).unwrap().to_f64(), 0.5) < 1e-15);
        let w4 = WalkFunctionals::build(&EnvironmentPath::flat(4));
        assert!(rel(h_functional(&w4, 2, 4, EvalPoint::ZERO).unwrap().to_f64(), 0.1) < 1e-15);
        assert!(rel(cond_event_prob(&w4, 2, 4).unwrap().to_f64(), 0.1) < 1e-15);
        assert!(h_functional(&w4, 2, 4, EvalPoint::ONE).unwrap().is_zero());
    }

    #[test]
    fn single_generation_event_prob() {
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let w = WalkFunctionals::from_increments(&[x]);
            let p = cond_event_prob(&w, 0, 1).unwrap().to_f64();
            assert!(rel(p, 1.0 / (1.0 + (-x).exp())) < 1e-14);
        }
    }

    #[test]
    fn h_matches_definition() {
        for seed in 0..40 {
            let path = random_path(12, seed);
            let w = WalkFunctionals::build(&path);
            for n in 1..=12 {
                for i in 0..n {
                    for s in [0.0, 0.3, 0.8] {
                        let h = h_functional(&w, i, n, pt(s)).unwrap().to_f64();
                        let brute = h_functional_bruteforce(&path, i, n, s).unwrap();
                        assert!(rel(h, brute) < 1e-9, "seed {seed} i {i} n {n} s {s}");
                        let alt = h_functional_window_form(&w, i, n, pt(s)).unwrap().to_f64();
                        assert!(rel(alt, h) < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn h_at_zero_is_event_prob_bitwise() {
        let w = WalkFunctionals::build(&random_path(50, 9));
        for i in 0..50 {
            assert_eq!(h_functional(&w, i, 50, EvalPoint::ZERO).unwrap(), cond_event_prob(&w, i, 50).unwrap());
            assert_eq!(yaglom_integrand(&w, i, 50, Beta::Infinite).unwrap(), cond_event_prob(&w, i, 50).unwrap());
            assert!(yaglom_integrand(&w, i, 50, Beta::Finite(0.0)).unwrap().is_zero());
        }
    }

    #[test]
    fn disjoint_events_sum_below_one() {
        for seed in 0..30 {
            let w = WalkFunctionals::build(&random_path(200, seed));
            let total: f64 = (0..200).map(|i| cond_event_prob(&w, i, 200).unwrap().to_f64()).sum();
            assert!(total <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn flat_v_value() {
        let wr = WalkFunctionals::build(&EnvironmentPath::flat(4));
        assert!(rel(v_functional(&wr, 2, 4, Beta::Infinite).unwrap().to_f64(), 0.1) < 1e-15);
        assert!(v_functional(&wr, 2, 4, Beta::Finite(0.0)).is_err());
        assert!(v_functional(&wr, 0, 4, Beta::Infinite).is_err());
    }

    #[test]
    fn duality_is_pathwise() {
        for seed in 0..30 {
            let path = random_path(40, seed);
            let w = WalkFunctionals::build(&path);
            for n in [5, 17, 40] {
                let wr = dual_reflected_walk(&path, n).unwrap();
                for i in 0..n {
                    for beta in [Beta::Finite(0.01), Beta::Finite(1.0), Beta::Finite(50.0), Beta::Infinite] {
                        let h = yaglom_integrand(&w, i, n, beta).unwrap().to_f64();
                        let v = v_functional(&wr, n - i, n, beta).unwrap().to_f64();
                        assert!(rel(v, h) < 1e-9, "seed {seed} i {i} n {n} beta {beta}");
                    }
                }
            }
        }
    }

    #[test]
    fn v_monotone_in_beta() {
        for seed in 0..20 {
            let wr = WalkFunctionals::build(&random_path(30, seed));
            for j in [1, 10, 30] {
                let mut prev = 0.0;
                for b in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3] {
                    let v = v_functional(&wr, j, 30, Beta::Finite(b)).unwrap().to_f64();
                    assert!(v >= prev * (1.0 - 1e-12));
                    prev = v;
                }
                assert!(v_functional(&wr, j, 30, Beta::Infinite).unwrap().to_f64() >= prev * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn yaglom_tiny_argument_matches_reference() {
        // X = (0.3, -0.7, 1.1, -0.2, 0.5), i = 1, n = 5, β a_{1,5} = 1e-12.
        // Reference from a 50-digit evaluation of the closed form.
        let w = WalkFunctionals::from_increments(&[0.3, -0.7, 1.1, -0.2, 0.5]);
        let beta = 1e-12 / w.ln_a_range(1, 5).exp();
        let v = yaglom_integrand(&w, 1, 5, Beta::Finite(beta)).unwrap().to_f64();
        let reference = REFERENCE_TINY_BETA;
        assert!(rel(v, reference) < 1e-6, "{v} vs {reference}");
    }

    const REFERENCE_TINY_BETA: f64 = 1.968_797_376_311_070_9e-13;

    #[test]
    fn clan_product_identity() {
        for seed in 0..20 {
            let path = random_path(15, seed);
            for i in 1..=15 {
                let wt = WalkFunctionals::build(&path.prefix(i).unwrap().reversed_negated());
                for z in [0.0, 0.3, 0.7] {
                    let brute = clan_product_bruteforce(&path, i, z).unwrap();
                    let closed = clan_product_closed(&wt, i, z).unwrap();
                    assert!(rel(closed, brute) < 1e-10, "seed {seed} i {i} z {z}");
                }
            }
        }
    }

    #[test]
    fn eval_point_bounds() {
        assert!(EvalPoint::from_s(1.5).is_err());
        assert!(EvalPoint::from_ln_one_minus_s(0.1).is_err());
        assert!(EvalPoint::from_s(1.0).unwrap().is_one());
        assert!(Beta::new(-1.0).is_err());
        assert_eq!(Beta::parse("inf").unwrap(), Beta::Infinite);
        assert_eq!(Beta::parse("0.5").unwrap(), Beta::Finite(0.5));
    }

    proptest! {
        #[test]
        fn random_tuples_closed_vs_fold(seed in 0u64..10_000, n in 1usize..=20, s_ix in 0usize..4) {
            let mut rng = StreamKey::new(seed, Purpose::Oracle).rng(7);
            let path = random_path(n, seed);
            let i = rng.random_range(0..n);
            let s = [0.0, 0.25, 0.5, 0.9][s_ix];
            let w = WalkFunctionals::build(&path);
            let closed = survival_closed(&w, i, n, pt(s)).unwrap().to_f64();
            let brute = compose_survival_bruteforce(&path, i, n, s).unwrap();
            prop_assert!(rel(closed, brute) < 1e-10);
        }

        #[test]
        fn h_nonincreasing_in_s(seed in 0u64..1000, n in 1usize..40) {
            let w = WalkFunctionals::build(&random_path(n, seed));
            let i = (seed as usize) % n;
            let mut prev = f64::INFINITY;
            for k in 0..=20 {
                let h = h_functional(&w, i, n, pt(k as f64 / 20.0)).unwrap().to_f64();
                prop_assert!(h <= prev);
                prev = h;
            }
            prop_assert_eq!(prev, 0.0);
        }

        #[test]
        fn yaglom_nondecreasing_in_beta(seed in 0u64..1000, n in 2usize..60) {
            let w = WalkFunctionals::build(&random_path(n, seed));
            let i = (seed as usize) % n;
            let mut prev = 0.0;
            for b in [1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4] {
                let v = yaglom_integrand(&w, i, n, Beta::Finite(b)).unwrap().to_f64();
                prop_assert!(v >= prev);
                prev = v;
            }
            prop_assert!(yaglom_integrand(&w, i, n, Beta::Infinite).unwrap().to_f64() >= prev);
        }
    }
}
