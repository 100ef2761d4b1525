//! Sub-QUBO decomposition driven by a pool of solution instances.
//!
//! A pool of `N_I` annealed solutions is kept sorted. Each round draws `N_E`
//! random subsets of `N_S` pool members, ranks variables by how much they
//! disagree across the subset (Bernoulli variance `p(1 − p)`), frees the `d`
//! most variable ones, clamps the rest to a pool solution and solves the small
//! problem. Improving candidates replace the worst pool entry.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::anneal::{self, SaConfig};
use crate::error::{invalid, Error, Result};
use crate::qaoa::{self, QaoaConfig};
use crate::qubo::{self, BitSolution, QuboModel};
use crate::seed;

/// Solutions sorted ascending by (energy, bits), at most `capacity` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPool {
    entries: Vec<BitSolution>,
    capacity: usize,
}

impl SolutionPool {
    /// Pool holding exactly `entries`; capacity is their count.
    pub fn from_entries(mut entries: Vec<BitSolution>) -> Self {
        entries.sort_by(BitSolution::cmp_rank);
        let capacity = entries.len();
        Self { entries, capacity }
    }

    pub fn entries(&self) -> &[BitSolution] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn best(&self) -> &BitSolution {
        &self.entries[0]
    }

    pub fn worst(&self) -> &BitSolution {
        &self.entries[self.entries.len() - 1]
    }

    /// Steady-state elitism: replace the worst entry iff `candidate` has strictly
    /// lower energy and is not already present.
    pub fn insert(&mut self, candidate: BitSolution) -> bool {
        if self.entries.iter().any(|e| e.bits == candidate.bits) {
            return false;
        }
        if self.entries.len() < self.capacity {
            self.entries.push(candidate);
        } else if candidate.energy < self.worst().energy {
            let last = self.entries.len() - 1;
            self.entries[last] = candidate;
        } else {
            return false;
        }
        self.entries.sort_by(BitSolution::cmp_rank);
        true
    }
}

/// Restriction of a model to `free` variables with the others held at `assignment`.
#[derive(Debug, Clone)]
pub struct Clamped {
    pub model: QuboModel,
    /// `free[p]` is the original index of sub-variable `p`.
    pub free: Vec<usize>,
}

impl Clamped {
    /// `assignment` with the free positions overwritten by `sub_bits`.
    pub fn lift(&self, assignment: &[bool], sub_bits: &[bool]) -> Vec<bool> {
        let mut full = assignment.to_vec();
        for (p, &i) in self.free.iter().enumerate() {
            full[i] = sub_bits[p];
        }
        full
    }
}

/// Folds fixed variables into the linear terms and offset of a model over `free`.
///
/// For any sub-assignment `y`, the sub-model energy of `y` equals the full energy of
/// `assignment` with `y` written onto the free positions.
pub fn clamp(model: &QuboModel, assignment: &[bool], free: &[usize]) -> Result<Clamped> {
    let n = model.n();
    if assignment.len() != n {
        return Err(invalid("assignment length does not match the model"));
    }
    let mut pos: Vec<Option<usize>> = vec![None; n];
    for (p, &i) in free.iter().enumerate() {
        if i >= n {
            return Err(invalid(format!("free index {i} out of range")));
        }
        if pos[i].replace(p).is_some() {
            return Err(invalid(format!("free index {i} listed twice")));
        }
    }
    let mut builder = qubo::QuboBuilder::new(free.len());
    builder.add_offset(model.offset());
    for (&i, &a) in model.linear() {
        match pos[i] {
            Some(p) => {
                builder.add_linear(p, a);
            }
            None if assignment[i] => {
                builder.add_offset(a);
            }
            None => {}
        }
    }
    for (&(i, j), &b) in model.quadratic() {
        match (pos[i], pos[j]) {
            (Some(p), Some(q)) => {
                builder.add_quadratic(p, q, b);
            }
            (Some(p), None) if assignment[j] => {
                builder.add_linear(p, b);
            }
            (None, Some(q)) if assignment[i] => {
                builder.add_linear(q, b);
            }
            (None, None) if assignment[i] && assignment[j] => {
                builder.add_offset(b);
            }
            _ => {}
        }
    }
    Ok(Clamped {
        model: builder.build()?,
        free: free.to_vec(),
    })
}

/// Per-variable `p_i (1 − p_i)` over the selected pool entries.
pub fn variability(pool: &SolutionPool, sample: &[usize]) -> Vec<f64> {
    let ones = ones_count(pool, sample);
    let k = sample.len() as f64;
    ones.iter()
        .map(|&c| {
            let p = c as f64 / k;
            p * (1.0 - p)
        })
        .collect()
}

fn ones_count(pool: &SolutionPool, sample: &[usize]) -> Vec<usize> {
    let n = pool.entries.first().map_or(0, |e| e.bits.len());
    let mut ones = vec![0usize; n];
    for &s in sample {
        for (c, &b) in ones.iter_mut().zip(&pool.entries[s].bits) {
            *c += usize::from(b);
        }
    }
    ones
}

/// Variables ordered by decreasing variability across `sample`.
///
/// Variables with equal variability appear in a seeded random order.
pub fn rank_variability<R: Rng + ?Sized>(
    pool: &SolutionPool,
    sample: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>> {
    if sample.len() < 2 {
        return Err(invalid("variability needs at least two solution instances"));
    }
    if let Some(&bad) = sample.iter().find(|&&s| s >= pool.len()) {
        return Err(invalid(format!("pool index {bad} out of range")));
    }
    let ones = ones_count(pool, sample);
    let k = sample.len();
    // c·(k − c) is an exact integer proxy for p(1 − p).
    let key: Vec<usize> = ones.iter().map(|&c| c * (k - c)).collect();
    let mut order: Vec<usize> = (0..ones.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| key[b].cmp(&key[a]));
    Ok(order)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subsolver {
    Qaoa(QaoaConfig),
    Anneal(SaConfig),
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampSource {
    /// Fixed bits come from the current pool-best.
    PoolBest,
    /// Fixed bits come from a random pool member.
    RandomMember,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubQuboParams {
    pub n_i: usize,
    pub n_e: usize,
    pub n_s: usize,
    pub sub_size: usize,
    pub outer_rounds: usize,
    pub subsolver: Subsolver,
    pub clamp_source: ClampSource,
    /// Annealer used to seed the pool; its seed is replaced by one derived from the solve seed.
    pub pool_anneal: SaConfig,
}

impl Default for SubQuboParams {
    fn default() -> Self {
        Self {
            n_i: 20,
            n_e: 10,
            n_s: 5,
            sub_size: 6,
            outer_rounds: 5,
            subsolver: Subsolver::Qaoa(QaoaConfig::default()),
            clamp_source: ClampSource::PoolBest,
            pool_anneal: SaConfig::default(),
        }
    }
}

impl SubQuboParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_i < 2 {
            return Err(invalid("N_I must be at least 2"));
        }
        if self.n_s < 2 || self.n_s > self.n_i {
            return Err(invalid("N_S must lie in [2, N_I]"));
        }
        if self.n_e == 0 {
            return Err(invalid("N_E must be at least 1"));
        }
        if self.sub_size == 0 {
            return Err(invalid("sub-QUBO size must be at least 1"));
        }
        if let Subsolver::Qaoa(cfg) = &self.subsolver {
            cfg.validate()?;
            if self.sub_size > qaoa::MAX_QUBITS {
                return Err(Error::Capacity {
                    what: "QAOA sub-QUBO",
                    size: self.sub_size,
                    max: qaoa::MAX_QUBITS,
                });
            }
        }
        if self.subsolver == Subsolver::Exact && self.sub_size > qubo::BRUTE_FORCE_MAX_VARS {
            return Err(Error::Capacity {
                what: "exact sub-QUBO",
                size: self.sub_size,
                max: qubo::BRUTE_FORCE_MAX_VARS,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubJobRecord {
    pub round: usize,
    pub job: usize,
    pub free: Vec<usize>,
    /// Sub-model energy of the subsolver's answer (includes the clamped offset).
    pub sub_energy: f64,
    /// Full-model re-evaluation of the lifted candidate.
    pub candidate_energy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub initial_best: f64,
    /// Pool-best energy after each round.
    pub round_best: Vec<f64>,
    pub jobs: Vec<SubJobRecord>,
    pub failed_jobs: usize,
    /// Largest |sub_energy − candidate_energy| seen.
    pub max_clamp_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubQuboOutcome {
    pub best: BitSolution,
    pub pool: SolutionPool,
    pub diagnostics: Diagnostics,
}

/// Solves the sub-model with the configured subsolver, returning sub-bits.
pub fn solve_subproblem(model: &QuboModel, subsolver: &Subsolver, seed: u64) -> Result<Vec<bool>> {
    match subsolver {
        Subsolver::Exact => Ok(qubo::brute_force_spectrum(model, 1)?.best.bits),
        Subsolver::Anneal(cfg) => {
            let cfg = SaConfig {
                seed,
                ..cfg.clone()
            };
            Ok(anneal::anneal(model, &cfg, None)?.bits)
        }
        Subsolver::Qaoa(cfg) => {
            let cfg = QaoaConfig {
                seed,
                ..cfg.clone()
            };
            Ok(qaoa::run_qaoa(&model.to_ising(), &cfg)?.modal_bits)
        }
    }
}

/// Runs the multiple-solution-instance decomposition on `model`.
///
/// The sub-QUBO size is capped at `model.n()`. Sub-jobs within a round read a
/// snapshot of the pool; their candidates are inserted afterwards in job order.
pub fn solve(
    model: &QuboModel,
    params: &SubQuboParams,
    master_seed: u64,
) -> Result<SubQuboOutcome> {
    params.validate()?;
    let n = model.n();
    if n == 0 {
        let best = BitSolution::evaluate(model, Vec::new())?;
        let pool = SolutionPool::from_entries(vec![best.clone(); 1]);
        return Ok(SubQuboOutcome {
            diagnostics: Diagnostics {
                initial_best: best.energy,
                ..Diagnostics::default()
            },
            best,
            pool,
        });
    }
    let d = params.sub_size.min(n);
    let pool_cfg = SaConfig {
        seed: seed::derive_seed(master_seed, 0),
        ..params.pool_anneal.clone()
    };
    let mut pool = anneal::build_pool(model, params.n_i, &pool_cfg)?;
    let mut diag = Diagnostics {
        initial_best: pool.best().energy,
        ..Diagnostics::default()
    };

    for round in 0..params.outer_rounds {
        let snapshot = pool.clone();
        let mut candidates: Vec<(usize, BitSolution, Vec<usize>, f64)> =
            Vec::with_capacity(params.n_e);
        for job in 0..params.n_e {
            let stream = 1 + (round * params.n_e + job) as u64;
            let mut rng = seed::derived(master_seed, stream);
            let sample = index::sample(&mut rng, snapshot.len(), params.n_s).into_vec();
            let ranked = rank_variability(&snapshot, &sample, &mut rng)?;
            let mut free: Vec<usize> = ranked[..d].to_vec();
            free.sort_unstable();
            let source = match params.clamp_source {
                ClampSource::PoolBest => snapshot.best(),
                ClampSource::RandomMember => {
                    &snapshot.entries()[rng.random_range(0..snapshot.len())]
                }
            };
            let clamped = clamp(model, &source.bits, &free)?;
            let sub_seed = seed::derive_seed(master_seed, stream | (1 << 63));
            let sub_bits = match solve_subproblem(&clamped.model, &params.subsolver, sub_seed) {
                Ok(bits) => bits,
                Err(_) => {
                    diag.failed_jobs += 1;
                    continue;
                }
            };
            let sub_energy = clamped.model.energy(&sub_bits)?;
            let candidate = BitSolution::evaluate(model, clamped.lift(&source.bits, &sub_bits))?;
            diag.max_clamp_error = diag
                .max_clamp_error
                .max((sub_energy - candidate.energy).abs());
            candidates.push((job, candidate, free, sub_energy));
        }
        for (job, candidate, free, sub_energy) in candidates {
            let candidate_energy = candidate.energy;
            let accepted = pool.insert(candidate);
            diag.jobs.push(SubJobRecord {
                round,
                job,
                free,
                sub_energy,
                candidate_energy,
                accepted,
            });
        }
        diag.round_best.push(pool.best().energy);
    }

    Ok(SubQuboOutcome {
        best: pool.best().clone(),
        pool,
        diagnostics: diag,
    })
}
