//! Simulated thermal annealing with single-bit Metropolis moves.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::qubo::{BitSolution, QuboModel};
use crate::seed;
use crate::subqubo::SolutionPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `T_s = t_start · (t_end / t_start)^{s / (sweeps − 1)}`.
    Geometric,
}

/// Annealer settings. `None` fields take model-scaled defaults at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    /// Defaults to `1000 · (1 + n/100)`.
    pub sweeps: Option<usize>,
    /// Defaults to `5 · max|coefficient|`.
    pub t_start: Option<f64>,
    pub t_end: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            sweeps: None,
            t_start: None,
            t_end: 0.01,
            schedule: Schedule::Geometric,
            seed: 0,
            restarts: 1,
        }
    }
}

impl SaConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Concrete `(sweeps, t_start, t_end)` for `model`.
    pub fn resolve(&self, model: &QuboModel) -> Result<(usize, f64, f64)> {
        let sweeps = self.sweeps.unwrap_or(1000 * (1 + model.n() / 100));
        let t_start = self
            .t_start
            .unwrap_or_else(|| 5.0 * model.max_abs_coeff())
            .max(self.t_end);
        if sweeps == 0 {
            return Err(invalid("annealing needs at least one sweep"));
        }
        if !(self.t_end > 0.0) || !(t_start > 0.0) || !t_start.is_finite() {
            return Err(invalid("annealing temperatures must be positive"));
        }
        if self.restarts == 0 {
            return Err(invalid("annealing needs at least one restart"));
        }
        Ok((sweeps, t_start, self.t_end))
    }
}

/// Bits plus the local field `a_i + Σ_j b_ij x_j` of every variable.
///
/// Flipping `i` changes the energy by `(1 − 2x_i) · field_i`, and updating the
/// fields costs `O(degree(i))`.
#[derive(Debug, Clone)]
pub struct FlipState<'m> {
    model: &'m QuboModel,
    bits: Vec<bool>,
    field: Vec<f64>,
    energy: f64,
}

impl<'m> FlipState<'m> {
    pub fn new(model: &'m QuboModel, bits: Vec<bool>) -> Result<Self> {
        let energy = model.energy(&bits)?;
        let field = (0..model.n())
            .map(|i| {
                model.linear_coeff(i)
                    + model
                        .neighbors(i)
                        .iter()
                        .filter(|(j, _)| bits[*j])
                        .map(|(_, b)| b)
                        .sum::<f64>()
            })
            .collect();
        Ok(Self {
            model,
            bits,
            field,
            energy,
        })
    }

    pub fn delta(&self, i: usize) -> f64 {
        if self.bits[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.energy += self.delta(i);
        let sign = if self.bits[i] { -1.0 } else { 1.0 };
        self.bits[i] = !self.bits[i];
        for &(j, b) in self.model.neighbors(i) {
            self.field[j] += sign * b;
        }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Best assignment seen over `config.restarts` annealing runs.
///
/// `start`, when given, seeds every restart; otherwise each restart begins at a
/// random assignment drawn from its own stream.
pub fn anneal(model: &QuboModel, config: &SaConfig, start: Option<&[bool]>) -> Result<BitSolution> {
    anneal_traced(model, config, start, |_, _| {})
}

/// [`anneal`] with a callback `(energy, accepted_delta)` after every accepted flip.
pub fn anneal_traced(
    model: &QuboModel,
    config: &SaConfig,
    start: Option<&[bool]>,
    mut on_flip: impl FnMut(f64, f64),
) -> Result<BitSolution> {
    let n = model.n();
    if let Some(s) = start {
        if s.len() != n {
            return Err(invalid("start assignment has the wrong length"));
        }
    }
    let (sweeps, t_start, t_end) = config.resolve(model)?;
    let mut best: Option<BitSolution> = None;
    let mut order: Vec<usize> = (0..n).collect();

    for r in 0..config.restarts {
        let mut rng = seed::derived(config.seed, r as u64);
        let init: Vec<bool> = match start {
            Some(s) => s.to_vec(),
            None => (0..n).map(|_| rng.random()).collect(),
        };
        let mut state = FlipState::new(model, init)?;
        let mut run_best = (state.energy(), state.bits().to_vec());
        let ratio = t_end / t_start;
        for s in 0..sweeps {
            let temp = match config.schedule {
                Schedule::Geometric if sweeps > 1 => {
                    t_start * libm::pow(ratio, s as f64 / (sweeps - 1) as f64)
                }
                Schedule::Geometric => t_end,
            };
            order.shuffle(&mut rng);
            for &i in &order {
                let delta = state.delta(i);
                let accept = delta <= 0.0 || rng.random::<f64>() < libm::exp(-delta / temp);
                if accept {
                    state.flip(i);
                    on_flip(state.energy(), delta);
                    if state.energy() < run_best.0 {
                        run_best = (state.energy(), state.bits().to_vec());
                    }
                }
            }
        }
        let candidate = BitSolution::evaluate(model, run_best.1)?;
        if best
            .as_ref()
            .is_none_or(|b| candidate.cmp_rank(b).is_lt())
        {
            best = Some(candidate);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// `pool_size` independent anneals with derived seeds, sorted by (energy, bits).
pub fn build_pool(model: &QuboModel, pool_size: usize, config: &SaConfig) -> Result<SolutionPool> {
    if pool_size < 2 {
        return Err(invalid("a solution pool needs at least two entries"));
    }
    let mut entries = Vec::with_capacity(pool_size);
    for run in 0..pool_size {
        let cfg = SaConfig {
            seed: seed::derive_seed(config.seed, run as u64),
            ..config.clone()
        };
        entries.push(anneal(model, &cfg, None)?);
    }
    Ok(SolutionPool::from_entries(entries))
}
