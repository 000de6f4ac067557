//! Mergeable Monte Carlo accumulators and the block-deterministic runner.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Replicates per block. Blocks are the unit of parallel work.
pub const BLOCK: u64 = 256;

/// An exactly rounded running sum (non-overlapping partials, as in Shewchuk's
/// algorithm), so the result does not depend on the order of additions or merges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite(), "non-finite summand {x}");
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The exact sum rounded to nearest.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction when the tail sits exactly on a tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// Sample mean with standard error, from mergeable sufficient statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MCEstimate {
    sum: ExactSum,
    sum_sq: ExactSum,
    count: u64,
}

impl MCEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut e = Self::new();
        for v in values {
            e.push(v);
        }
        e
    }

    pub fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MCEstimate) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn sum_sq(&self) -> f64 {
        self.sum_sq.value()
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum() / self.count as f64
    }

    /// `sqrt((sum_sq/count - mean²)/max(count-1, 1))`.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let c = self.count as f64;
        let m = self.mean();
        let var = (self.sum_sq() / c - m * m).max(0.0);
        (var / (c - 1.0).max(1.0)).sqrt()
    }

    /// Whether the mean is distinguishable from zero at three standard errors.
    pub fn is_reliable(&self) -> bool {
        self.mean() > 3.0 * self.stderr()
    }

    pub fn summary(&self) -> Summary {
        Summary { mean: self.mean(), stderr: self.stderr(), count: self.count }
    }
}

/// The reported part of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

/// A ratio of two sample means with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Per-replicate rows of several columns, with cross moments against column 0
/// so that any column can be divided by column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    cols: Vec<MCEstimate>,
    cross: Vec<ExactSum>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Moments { cols: vec![MCEstimate::new(); width], cross: vec![ExactSum::new(); width] }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols.len());
        for (k, &v) in row.iter().enumerate() {
            self.cols[k].push(v);
            self.cross[k].add(v * row[0]);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        for (a, b) in self.cols.iter_mut().zip(&other.cols) {
            a.merge(b);
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            a.merge(b);
        }
    }

    pub fn col(&self, k: usize) -> &MCEstimate {
        &self.cols[k]
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    /// `mean(col k) / mean(col 0)`. Fails if the denominator is within three
    /// standard errors of zero.
    pub fn ratio(&self, k: usize) -> Result<RatioEstimate> {
        let (num, den) = (&self.cols[k], &self.cols[0]);
        let (mn, md) = (num.mean(), den.mean());
        if !den.is_reliable() {
            return Err(Error::UnreliableRatio { mean: md, stderr: den.stderr() });
        }
        let c = den.count() as f64;
        let r = mn / md;
        let cov = (self.cross[k].value() / c - mn * md) / (c - 1.0).max(1.0);
        let var = (num.stderr().powi(2) - 2.0 * r * cov + r * r * den.stderr().powi(2)) / (md * md);
        Ok(RatioEstimate { value: r, stderr: var.max(0.0).sqrt() })
    }
}

/// Anything that can absorb another partial result of the same shape.
pub trait Merge {
    fn merge_from(&mut self, other: Self);
}

impl Merge for MCEstimate {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl Merge for Moments {
    fn merge_from(&mut self, other: Self) {
        self.merge(&other);
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge_from(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.merge_from(b);
        }
    }
}

/// Runs replicates `0..count` in blocks of [`BLOCK`], each block folded
/// sequentially into a fresh accumulator, and merges blocks in block order.
///
/// The result depends only on `count`, `init` and `body`, never on `shards`.
pub fn run_blocks<A, I, F>(count: u64, shards: usize, init: I, body: F) -> Result<A>
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<()> + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    let run_block = |b: u64| -> Result<A> {
        let mut acc = init();
        for r in b * BLOCK..((b + 1) * BLOCK).min(count) {
            body(r, &mut acc)?;
        }
        Ok(acc)
    };
    let parts: Vec<Result<A>> = if shards <= 1 {
        (0..blocks).map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(shards)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {shards} workers: {e}")))?;
        pool.install(|| (0..blocks).into_par_iter().map(run_block).collect())
    };
    let mut total = init();
    for p in parts {
        total.merge_from(p?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_sum_beats_naive() {
        let mut s = ExactSum::new();
        for v in [1e100, 1.0, -1e100, 1e-20] {
            s.add(v);
        }
        assert_eq!(s.value(), 1.0 + 1e-20);
        let mut t = ExactSum::new();
        for _ in 0..10 {
            t.add(0.1);
        }
        assert_eq!(t.value(), 1.0);
    }

    #[test]
    fn stderr_formula() {
        let e = MCEstimate::from_values([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean(), 2.5);
        let expected = ((7.5 - 6.25) / 3.0f64).sqrt();
        assert!((e.stderr() - expected).abs() < 1e-15);
        assert_eq!(MCEstimate::from_values([5.0]).stderr(), 0.0);
    }

    #[test]
    fn ratio_delta_method() {
        let mut m = Moments::new(2);
        for k in 0..1000 {
            let d = 1.0 + (k % 7) as f64;
            m.push_row(&[d, 0.5 * d]);
        }
        let r = m.ratio(1).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(r.stderr < 1e-7);
        let mut z = Moments::new(2);
        z.push_row(&[0.0, 0.0]);
        z.push_row(&[1e-3, 0.0]);
        assert!(matches!(z.ratio(1), Err(Error::UnreliableRatio { .. })));
    }

    #[test]
    fn runner_independent_of_shards() {
        let f = |r: u64, acc: &mut MCEstimate| {
            acc.push(((r * 2654435761) % 1000) as f64 / 7.0);
            Ok(())
        };
        let a = run_blocks(5000, 1, MCEstimate::new, f).unwrap();
        let b = run_blocks(5000, 3, MCEstimate::new, f).unwrap();
        assert_eq!(a.summary(), b.summary());
        assert_eq!(a.count(), 5000);
    }

    proptest! {
        #[test]
        fn merge_order_irrelevant(v in proptest::collection::vec(-1e6f64..1e6, 1..200), cut1 in 0usize..200, cut2 in 0usize..200) {
            let (c1, c2) = (cut1.min(v.len()), cut2.min(v.len()));
            let (lo, hi) = (c1.min(c2), c1.max(c2));
            let parts: Vec<MCEstimate> = [&v[..lo], &v[lo..hi], &v[hi..]].iter().map(|s| MCEstimate::from_values(s.iter().copied())).collect();
            let mut fwd = MCEstimate::new();
            for p in &parts { fwd.merge(p); }
            let mut rev = MCEstimate::new();
            for p in parts.iter().rev() { rev.merge(p); }
            let pooled = MCEstimate::from_values(v.iter().copied());
            prop_assert_eq!(fwd.summary(), pooled.summary());
            prop_assert_eq!(rev.summary(), pooled.summary());
        }
    }
}
