//! Individual-based forward simulation with one clan per immigrant generation.
//!
//! Only used as an oracle at small `n` and for demonstrations; the estimators
//! average the exact conditional formulas instead.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson};

use crate::env_model::EnvironmentPath;
use crate::error::{domain, Error, Result};

/// Clan sizes indexed by the generation of the founding immigrant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationState {
    pub clans: Vec<u64>,
    pub generation: usize,
}

impl Default for PopulationState {
    fn default() -> Self {
        Self::new()
    }
}

impl PopulationState {
    /// `Y_0 = 1`: the initial individual founds clan 0.
    pub fn new() -> Self {
        PopulationState { clans: vec![1], generation: 0 }
    }

    pub fn total(&self) -> u64 {
        self.clans.iter().sum()
    }

    /// Every clan reproduces with geometric offspring of mean `m`; no immigrant yet.
    pub fn reproduce<R: Rng + ?Sized>(&mut self, m: f64, rng: &mut R) -> Result<()> {
        for c in self.clans.iter_mut() {
            *c = offspring_total(*c, m, rng)?;
        }
        self.generation += 1;
        Ok(())
    }

    /// The immigrant of the current generation opens a new clan of size 1.
    pub fn add_immigrant(&mut self) {
        debug_assert_eq!(self.clans.len(), self.generation);
        self.clans.push(1);
    }

    /// One generation: reproduction first, then the immigrant.
    pub fn step<R: Rng + ?Sized>(&mut self, m: f64, rng: &mut R) -> Result<()> {
        self.reproduce(m, rng)?;
        self.add_immigrant();
        Ok(())
    }
}

/// Sum of `y` i.i.d. geometric variables `P(ξ = j) = q p^j` with mean `m`, as one
/// negative binomial draw `Poisson(Gamma(y, m))`.
pub fn offspring_total<R: Rng + ?Sized>(y: u64, m: f64, rng: &mut R) -> Result<u64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(domain(format!("mean offspring must be positive, got {m}")));
    }
    if y == 0 {
        return Ok(0);
    }
    let gamma = Gamma::new(y as f64, m).map_err(|e| Error::Numerical(format!("gamma({y}, {m}): {e}")))?;
    let lambda = gamma.sample(rng);
    if lambda == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(lambda).map_err(|e| Error::Numerical(format!("clan size overflow (rate {lambda:e}): {e}")))?;
    let v = poisson.sample(rng);
    if !(v < u64::MAX as f64) {
        return Err(Error::Numerical(format!("clan size overflow: {v:e}")));
    }
    Ok(v as u64)
}

/// Same law as [`offspring_total`], one geometric draw per individual.
pub fn offspring_total_per_individual<R: Rng + ?Sized>(y: u64, m: f64, rng: &mut R) -> Result<u64> {
    let q = 1.0 / (1.0 + m);
    let geo = Geometric::new(q).map_err(|e| domain(format!("geometric({q}): {e}")))?;
    let mut total: u64 = 0;
    for _ in 0..y {
        total = total.checked_add(geo.sample(rng)).ok_or_else(|| Error::Numerical("clan size overflow".into()))?;
    }
    Ok(total)
}

/// What happened to clan `i` by time `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClanOutcome {
    /// `Z_{i,n}`.
    pub z_in: u64,
    /// `Y_n^-`, the population at `n` before the generation-`n` immigrant.
    pub y_minus: u64,
    /// Everyone alive at `n` (before immigration) belongs to clan `i`, and someone is.
    pub event_a: bool,
}

impl ClanOutcome {
    pub fn from_state(state: &PopulationState, i: usize) -> Self {
        let y_minus = state.total();
        let z_in = state.clans.get(i).copied().unwrap_or(0);
        ClanOutcome { z_in, y_minus, event_a: y_minus > 0 && z_in == y_minus }
    }
}

/// Runs `n = path.len()` generations and returns the state at `n` before the final immigrant.
pub fn run_population<R: Rng + ?Sized>(path: &EnvironmentPath, rng: &mut R) -> Result<PopulationState> {
    let n = path.len();
    let mut state = PopulationState::new();
    for t in 1..=n {
        state.reproduce(path.mean_offspring(t), rng)?;
        if t < n {
            state.add_immigrant();
        }
    }
    Ok(state)
}

pub fn simulate<R: Rng + ?Sized>(path: &EnvironmentPath, i: usize, rng: &mut R) -> Result<ClanOutcome> {
    if i >= path.len() {
        return Err(domain(format!("designated clan {i} must be below n = {}", path.len())));
    }
    Ok(ClanOutcome::from_state(&run_population(path, rng)?, i))
}

/// Per-generation clan sizes after immigration (the last row is before it).
pub fn simulate_trace<R: Rng + ?Sized>(path: &EnvironmentPath, rng: &mut R) -> Result<Vec<PopulationState>> {
    let n = path.len();
    let mut state = PopulationState::new();
    let mut rows = vec![state.clone()];
    for t in 1..=n {
        state.reproduce(path.mean_offspring(t), rng)?;
        if t < n {
            state.add_immigrant();
        }
        rows.push(state.clone());
    }
    Ok(rows)
}

/// CSV with columns `generation,clan_index,clan_size`.
pub fn write_trace_csv<W: Write>(rows: &[PopulationState], mut out: W) -> Result<()> {
    writeln!(out, "generation,clan_index,clan_size")?;
    for row in rows {
        for (g, c) in row.clans.iter().enumerate() {
            writeln!(out, "{},{},{}", row.generation, g, c)?;
        }
    }
    Ok(())
}
