//! The associated random walk and its exponential prefix functionals.
//!
//! For a walk `S_0 = 0, S_k = X_1 + ... + X_k` the closed forms need
//!
//! * `a_k = e^{-S_k}` and `a_{i,n} = e^{S_i - S_n}`,
//! * `b_k = Σ_{r<k} e^{-S_r}` (with `b_0 = 0`) and `b_{i,n} = Σ_{k=i}^{n-1} e^{S_i - S_k}`,
//! * `B_{1,n} = b_n - 1`.
//!
//! Everything is kept as logarithms; `b_n` grows like `e^{O(√n)}`.

use crate::env_model::EnvironmentPath;
use crate::error::{domain, Result};
use crate::log_value::{log_add_exp, LogValue};

/// Relative size of `b_hi - b_lo` against `b_hi` below which the difference is
/// re-summed directly instead of subtracting prefixes.
pub const CANCELLATION_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkFunctionals {
    s: Vec<f64>,
    /// `log_b[k] = ln b_k` for `k = 0..=n+1`; `log_b[0] = -inf` encodes `b_0 = 0`.
    log_b: Vec<f64>,
    l_min: Vec<f64>,
    /// First index attaining `l_min[k]`.
    argmin: Vec<usize>,
    /// `m_max[k] = max(S_1..S_k)`, `-inf` at `k = 0`.
    m_max: Vec<f64>,
}

impl WalkFunctionals {
    /// All functionals of the walk with the given increments, in one pass.
    pub fn build(path: &EnvironmentPath) -> Self {
        Self::from_increments(path.increments())
    }

    pub fn from_increments(x: &[f64]) -> Self {
        let n = x.len();
        let mut s = Vec::with_capacity(n + 1);
        s.push(0.0);
        for (k, dx) in x.iter().enumerate() {
            s.push(s[k] + dx);
        }
        Self::from_positions(s)
    }

    fn from_positions(s: Vec<f64>) -> Self {
        let n = s.len() - 1;
        let mut log_b = Vec::with_capacity(n + 2);
        let mut l_min = Vec::with_capacity(n + 1);
        let mut argmin = Vec::with_capacity(n + 1);
        let mut m_max = Vec::with_capacity(n + 1);
        log_b.push(f64::NEG_INFINITY);
        let (mut lo, mut lo_at, mut hi) = (s[0], 0usize, f64::NEG_INFINITY);
        for (k, &sk) in s.iter().enumerate() {
            log_b.push(log_add_exp(log_b[k], -sk));
            if sk < lo {
                lo = sk;
                lo_at = k;
            }
            if k > 0 && sk > hi {
                hi = sk;
            }
            l_min.push(lo);
            argmin.push(lo_at);
            m_max.push(hi);
        }
        WalkFunctionals { s, log_b, l_min, argmin, m_max }
    }

    /// The reflected walk `-S` with every functional rebuilt.
    pub fn reflect(&self) -> Self {
        Self::from_positions(self.s.iter().map(|v| -v).collect())
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.s.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> &[f64] {
        &self.s
    }

    pub fn s(&self, k: usize) -> f64 {
        self.s[k]
    }

    /// `ln a_k = -S_k`.
    pub fn ln_a(&self, k: usize) -> f64 {
        -self.s[k]
    }

    /// `ln a_{i,n} = S_i - S_n`.
    pub fn ln_a_range(&self, i: usize, n: usize) -> f64 {
        self.s[i] - self.s[n]
    }

    /// `b_k` for `k = 0..=len+1`.
    pub fn b(&self, k: usize) -> LogValue {
        LogValue::from_ln(self.log_b[k])
    }

    pub fn log_b(&self) -> &[f64] {
        &self.log_b
    }

    /// `L_k = min(S_0..S_k)`.
    pub fn l_min(&self, k: usize) -> f64 {
        self.l_min[k]
    }

    /// `M_k = max(S_1..S_k)`; `-inf` for `k = 0`.
    pub fn m_max(&self, k: usize) -> f64 {
        self.m_max[k]
    }

    /// `τ(k)`: first index in `0..=k` attaining `L_k`.
    pub fn tau(&self, k: usize) -> usize {
        self.argmin[k]
    }

    /// `Σ_{k=lo}^{hi-1} e^{-S_k} = b_hi - b_lo` for `lo <= hi <= len+1`.
    ///
    /// Uses the prefix difference unless it cancels to below
    /// [`CANCELLATION_GUARD`] of `b_hi`, in which case the window is summed directly.
    pub fn window(&self, lo: usize, hi: usize) -> LogValue {
        debug_assert!(lo <= hi && hi <= self.len() + 1);
        if lo >= hi {
            return LogValue::ZERO;
        }
        if lo == 0 {
            return self.b(hi);
        }
        let d = self.log_b[lo] - self.log_b[hi];
        // relative difference 1 - e^{d}
        if -d.exp_m1() > CANCELLATION_GUARD {
            self.b(hi).sub_saturating(self.b(lo))
        } else {
            self.window_direct(lo, hi)
        }
    }

    /// `Σ_{k=lo}^{hi-1} e^{-S_k}` by max-shifted direct summation.
    pub fn window_direct(&self, lo: usize, hi: usize) -> LogValue {
        if lo >= hi {
            return LogValue::ZERO;
        }
        let terms = &self.s[lo..hi];
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, |m, s| m.max(-s));
        let sum: f64 = terms.iter().map(|s| (-s - top).exp()).sum();
        LogValue::from_ln(top + sum.ln())
    }

    /// `b_{i,n} = Σ_{k=i}^{n-1} e^{S_i - S_k}`.
    pub fn log_b_range(&self, i: usize, n: usize) -> Result<LogValue> {
        if i >= n || n > self.len() {
            return Err(domain(format!("b_{{i,n}} needs 0 <= i < n <= {}, got i={i}, n={n}", self.len())));
        }
        Ok(LogValue::from_ln(self.s[i]) * self.window(i, n))
    }

    /// `(G, H, T)` for split point `t` and pivot `j` on this walk (pass the reflected walk):
    /// `G = Σ_{r=0}^{t} e^{-S_r}`, `H = Σ_{r=t+1}^{j-1} e^{S_j - S_r}`, `T = Σ_{r=j}^{n} e^{S_j - S_r}`.
    pub fn truncated_functionals(&self, t: usize, j: usize, n: usize) -> Result<(LogValue, LogValue, LogValue)> {
        if !(t < j && j <= n && n <= self.len()) {
            return Err(domain(format!("truncated functionals need t < j <= n <= {}, got ({t}, {j}, {n})", self.len())));
        }
        let g = self.window_direct(0, t + 1);
        let shift = LogValue::from_ln(self.s[j]);
        let h = shift * self.window_direct(t + 1, j);
        let tt = shift * self.window_direct(j, n + 1);
        Ok((g, h, tt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{sample_path, EnvironmentSpec};
    use crate::rng::{Purpose, StreamKey};
    use proptest::prelude::*;

    fn random_walk(n: usize, seed: u64) -> WalkFunctionals {
        let spec = EnvironmentSpec::Gaussian { sigma: 1.0 };
        WalkFunctionals::build(&sample_path(&spec, n, &mut StreamKey::new(seed, Purpose::Oracle).rng(0)).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn flat_walk() {
        let w = WalkFunctionals::build(&EnvironmentPath::flat(5));
        assert!(w.positions().iter().all(|&s| s == 0.0));
        for k in 1..=6 {
            assert!(rel(w.b(k).to_f64(), k as f64) < 1e-15);
        }
        assert!(w.b(0).is_zero());
        assert_eq!(w.l_min(5), 0.0);
        assert_eq!(w.m_max(5), 0.0);
        assert_eq!(w.tau(5), 0);
        assert!(w.log_b_range(2, 6).is_err());
        assert!(rel(w.log_b_range(2, 5).unwrap().to_f64(), 3.0) < 1e-15);
        let w6 = WalkFunctionals::build(&EnvironmentPath::flat(6));
        assert!(rel(w6.log_b_range(2, 6).unwrap().to_f64(), 4.0) < 1e-15);
    }

    #[test]
    fn two_step_walk() {
        let w = WalkFunctionals::from_increments(&[-1.0, 1.0]);
        assert_eq!(w.positions(), &[0.0, -1.0, 0.0]);
        assert_eq!(w.l_min(2), -1.0);
        assert_eq!(w.tau(2), 1);
        assert!(rel(w.b(2).to_f64(), 1.0 + std::f64::consts::E) < 1e-15);
    }

    #[test]
    fn b_prefixes_match_naive_sum() {
        for seed in 0..20 {
            let w = random_walk(50, seed);
            for k in 1..=51 {
                let naive: f64 = (0..k).map(|r| (-w.s(r)).exp()).sum();
                assert!(rel(w.b(k).to_f64(), naive) < 1e-10);
            }
            for k in 0..=50 {
                let next = w.b(k).to_f64() + (-w.s(k)).exp();
                assert!(rel(next, w.b(k + 1).to_f64()) < 1e-10);
            }
        }
    }

    #[test]
    fn b_range_matches_direct_sum() {
        for seed in 0..10 {
            let w = random_walk(30, seed);
            for n in 1..=30 {
                for i in 0..n {
                    let direct: f64 = (i..n).map(|k| (w.s(i) - w.s(k)).exp()).sum();
                    assert!(rel(w.log_b_range(i, n).unwrap().to_f64(), direct) < 1e-10, "i={i} n={n}");
                }
            }
            assert_eq!(w.log_b_range(0, 30).unwrap(), w.b(30));
        }
        assert!(random_walk(5, 0).log_b_range(3, 3).is_err());
    }

    #[test]
    fn cancellation_guard_keeps_precision() {
        // The walk climbs by 40 after step 10, so b_20 - b_15 is ~e^{-40} of b_20.
        let mut x = vec![0.0; 20];
        x[10] = 40.0;
        let w = WalkFunctionals::from_increments(&x);
        let direct: f64 = (15..20).map(|k| (-w.s(k)).exp()).sum();
        assert!(rel(w.window(15, 20).to_f64(), direct) < 1e-13);
    }

    #[test]
    fn reflect_involution_and_extrema() {
        let flat = WalkFunctionals::build(&EnvironmentPath::flat(6));
        assert_eq!(flat.reflect(), flat);
        for seed in 0..10 {
            let w = random_walk(40, seed);
            assert_eq!(w.reflect().reflect(), w);
            let r = w.reflect();
            let max_incl_zero = w.positions().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(r.l_min(40), -max_incl_zero);
        }
    }

    #[test]
    fn tau_is_first_minimum() {
        let w = WalkFunctionals::from_increments(&[-1.0, 1.0, -1.0, 0.5]);
        // S = 0, -1, 0, -1, -0.5: tie at 1 and 3, first wins
        assert_eq!(w.tau(4), 1);
        for seed in 0..10 {
            let w = random_walk(60, seed);
            let t = w.tau(60);
            assert_eq!(w.s(t), w.l_min(60));
            assert!((0..t).all(|k| w.s(k) > w.s(t)));
        }
    }

    #[test]
    fn b_bounds() {
        for seed in 0..10 {
            let w = random_walk(25, seed);
            let n = 25;
            let b = w.b(n).to_f64();
            let max_s = w.positions()[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(b >= n as f64 * (-max_s).exp() * (1.0 - 1e-12));
            assert!(b <= n as f64 * (-w.l_min(n - 1)).exp() * (1.0 + 1e-12));
            assert!(w.l_min(n) <= 0.0);
        }
    }

    #[test]
    fn truncated_flat() {
        let w = WalkFunctionals::build(&EnvironmentPath::flat(8));
        let (g, h, t) = w.truncated_functionals(2, 5, 8).unwrap();
        assert!(rel(g.to_f64(), 3.0) < 1e-15);
        assert!(rel(h.to_f64(), 2.0) < 1e-15);
        assert!(rel(t.to_f64(), 4.0) < 1e-15);
        assert!(w.truncated_functionals(5, 5, 8).is_err());
    }

    #[test]
    fn truncated_identities() {
        for seed in 0..10 {
            let wb = random_walk(40, seed).reflect();
            let n = 40;
            for j in [6, 17, 30] {
                let t = j / 2;
                let (g, h, tt) = wb.truncated_functionals(t, j, n).unwrap();
                let e = (-wb.s(j)).exp();
                let lhs1 = g.to_f64() + e * (h.to_f64() + 1.0);
                assert!(rel(lhs1, wb.b(j + 1).to_f64()) < 1e-10);
                let lhs2 = g.to_f64() + e * h.to_f64() + e * tt.to_f64();
                assert!(rel(lhs2, wb.b(n + 1).to_f64()) < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn log_b_monotone(xs in proptest::collection::vec(-3.0f64..3.0, 1..64)) {
            let w = WalkFunctionals::from_increments(&xs);
            for k in 1..w.log_b().len() {
                prop_assert!(w.log_b()[k] >= w.log_b()[k - 1]);
            }
            let t = w.tau(xs.len());
            prop_assert!((0..t).all(|k| w.s(k) > w.s(t)));
        }
    }
}
