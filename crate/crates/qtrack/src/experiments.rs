//! Solver dispatch, the end-to-end pipeline and the batch sweeps.

use std::time::Instant;

use rayon::prelude::*;

use qtrack_core::anneal::anneal;
use qtrack_core::qaoa::run_qaoa;
use qtrack_core::qubo::{brute_force_spectrum, BitSolution, QuboModel};
use qtrack_core::seed::derive_seed;
use qtrack_core::subqubo::{self, Diagnostics};
use qtrack_core::synthetic::{generate_event, DetectorGeometry, GeneratorConfig};
use qtrack_core::tracking::{
    assemble_tracks, build_event, score, selected, EventQubo, Hit, QuboBuildConfig, TrackCandidate,
    TrackingMetrics,
};

use crate::config::{RunConfig, SolverKind};
use crate::error::CliError;
use crate::metrics::MetricsRecord;

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: BitSolution,
    /// Present for the sub-QUBO solver.
    pub diagnostics: Option<Diagnostics>,
}

/// Runs one solver on `model`. The QAOA solver reports its modal bit string.
pub fn solve_model(
    model: &QuboModel,
    solver: SolverKind,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Solved, CliError> {
    let plain = |solution| Solved {
        solution,
        diagnostics: None,
    };
    Ok(match solver {
        SolverKind::Exact => plain(brute_force_spectrum(model, 1)?.best),
        SolverKind::Sa => plain(anneal(model, &cfg.sa(seed), None)?),
        SolverKind::Qaoa => {
            let out = run_qaoa(&model.to_ising(), &cfg.qaoa(seed))?;
            plain(BitSolution::evaluate(model, out.modal_bits)?)
        }
        SolverKind::Subqubo => {
            let out = subqubo::solve(model, &cfg.subqubo_params(), seed)?;
            Solved {
                solution: out.best,
                diagnostics: Some(out.diagnostics),
            }
        }
    })
}

pub fn tracks_of(event: &EventQubo, bits: &[bool]) -> Result<Vec<TrackCandidate>, CliError> {
    Ok(assemble_tracks(&selected(&event.triplets, bits)?))
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub event: EventQubo,
    pub solved: Solved,
    pub tracks: Vec<TrackCandidate>,
    pub metrics: TrackingMetrics,
}

/// Build, solve and score one event.
pub fn run_pipeline(
    hits: &[Hit],
    qubo: &QuboBuildConfig,
    solver: SolverKind,
    cfg: &RunConfig,
    seed: u64,
) -> Result<PipelineResult, CliError> {
    let event = build_event(hits, qubo)?;
    let solved = solve_model(&event.model, solver, cfg, seed)?;
    let tracks = tracks_of(&event, &solved.solution.bits)?;
    let metrics = score(&tracks, hits);
    Ok(PipelineResult {
        event,
        solved,
        tracks,
        metrics,
    })
}

/// Seed of the fixed six-variable tracking instance used by the layer sweep.
///
/// It is the first generator seed for which two particles crossing the four
/// innermost layers, with 40% noise and single-layer steps, give exactly six
/// triplets with at least one conflict penalty.
pub const REFERENCE_SEED: u64 = 958;

pub fn reference_build_config() -> QuboBuildConfig {
    let mut cfg = QuboBuildConfig::default();
    cfg.cuts.max_layer_gap = 1;
    cfg
}

pub fn reference_event(seed: u64) -> Result<EventQubo, CliError> {
    let geometry = DetectorGeometry::default().truncated(4);
    let gen = GeneratorConfig {
        n_particles: 2,
        noise_fraction: 0.4,
        seed,
        ..GeneratorConfig::default()
    };
    let hits = generate_event(&geometry, &gen)?.hits;
    Ok(build_event(&hits, &reference_build_config())?)
}

/// The reference instance's QUBO.
pub fn reference_instance() -> Result<QuboModel, CliError> {
    Ok(reference_event(REFERENCE_SEED)?.model)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// `sqrt(a(1 − a)/J)`.
pub fn binomial_error(accuracy: f64, jobs: usize) -> f64 {
    if jobs == 0 {
        return 0.0;
    }
    (accuracy * (1.0 - accuracy) / jobs as f64).sqrt()
}

/// QAOA accuracy and optimum probability for `p = 1..=sweep.max_layers`.
///
/// Sweep point `k` (depth-major over `(p, job)`) uses the seed derived from
/// `(cfg.seed, k)`.
pub fn layer_sweep(model: &QuboModel, cfg: &RunConfig) -> Result<Vec<MetricsRecord>, CliError> {
    let optimum = brute_force_spectrum(model, 1)?.best;
    let ising = model.to_ising();
    let jobs = cfg.sweep.jobs_per_layer;
    let points: Vec<(usize, usize)> = (1..=cfg.sweep.max_layers)
        .flat_map(|p| (0..jobs).map(move |j| (p, j)))
        .collect();
    let outcomes: Vec<Result<(bool, f64, f64), CliError>> = pool(cfg.jobs)?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, &(p, _))| {
                let start = Instant::now();
                let mut q = cfg.qaoa(derive_seed(cfg.seed, k as u64));
                q.layers = p;
                let out = run_qaoa(&ising, &q)?;
                let prob = out.state.probability_of(&optimum.bits)?;
                Ok((
                    out.modal_bits == optimum.bits,
                    prob,
                    start.elapsed().as_secs_f64(),
                ))
            })
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    for (k, chunk) in outcomes
        .chunks(jobs.max(1))
        .enumerate()
        .take(cfg.sweep.max_layers)
    {
        let p = k + 1;
        let hits = chunk.iter().filter(|o| o.0).count();
        let accuracy = hits as f64 / jobs as f64;
        let mut r = MetricsRecord::new(format!("sweep-layers/p{p}"), "qaoa");
        r.seed = Some(cfg.seed);
        r.layers = Some(p);
        r.loss = Some(cfg.loss_tag().into());
        r.n_vars = Some(model.n());
        r.energy = Some(optimum.energy);
        r.accuracy = Some(accuracy);
        r.accuracy_err = Some(binomial_error(accuracy, jobs));
        r.mean_probability = Some(chunk.iter().map(|o| o.1).sum::<f64>() / jobs as f64);
        r.wall_time_s = chunk.iter().map(|o| o.2).sum();
        records.push(r);
    }
    Ok(records)
}

pub const SWEEP_SOLVERS: [SolverKind; 2] = [SolverKind::Subqubo, SolverKind::Sa];

/// Generates events at each multiplicity and seed, then builds, solves and
/// scores them with the sub-QUBO solver and the annealer.
///
/// Point `k` (multiplicity-major) uses the event seed derived from
/// `(cfg.seed, k)`; the solvers get seeds derived from that.
pub fn multiplicity_sweep(cfg: &RunConfig) -> Result<Vec<MetricsRecord>, CliError> {
    let seeds = cfg.sweep.seeds;
    let points: Vec<(usize, usize, SolverKind)> = cfg
        .sweep
        .multiplicities
        .iter()
        .flat_map(|&m| (0..seeds).flat_map(move |s| SWEEP_SOLVERS.map(|k| (m, s, k))))
        .collect();
    let sq = cfg.subqubo_params();
    let results: Vec<Result<MetricsRecord, CliError>> = pool(cfg.jobs)?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(idx, &(m, s, solver))| {
                let point = (idx / SWEEP_SOLVERS.len()) as u64;
                let event_seed = derive_seed(cfg.seed, point);
                let gen = GeneratorConfig {
                    n_particles: m,
                    seed: event_seed,
                    ..cfg.generator.clone()
                };
                let hits = generate_event(&cfg.geometry, &gen)?.hits;
                let start = Instant::now();
                let res = run_pipeline(&hits, &cfg.qubo, solver, cfg, derive_seed(event_seed, 1))?;
                let mut r =
                    MetricsRecord::new(format!("sweep-multiplicity/m{m}/s{s}"), solver.tag())
                        .with_tracking(&res.metrics);
                r.seed = Some(event_seed);
                r.multiplicity = Some(m);
                r.n_vars = Some(res.event.model.n());
                r.energy = Some(res.solved.solution.energy);
                if let Some(d) = &res.solved.diagnostics {
                    r.n_i = Some(sq.n_i);
                    r.n_e = Some(sq.n_e);
                    r.n_s = Some(sq.n_s);
                    if cfg.subqubo.subsolver == SolverKind::Qaoa {
                        r.layers = Some(cfg.qaoa.layers);
                        r.loss = Some(cfg.loss_tag().into());
                    }
                    r.round_best = d.round_best.clone();
                }
                r.wall_time_s = start.elapsed().as_secs_f64();
                Ok(r)
            })
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qtrack_core::qubo::QuboBuilder;

    #[test]
    fn reference_seed_is_the_first_match() {
        let matches = |seed| {
            let ev = reference_event(seed).unwrap();
            ev.model.n() == 6 && ev.model.quadratic().values().any(|&b| b > 0.0)
        };
        assert!(matches(REFERENCE_SEED));
        assert!((0..REFERENCE_SEED).all(|s| !matches(s)));
    }

    #[test]
    fn binomial_error_bounds() {
        assert_eq!(binomial_error(1.0, 20), 0.0);
        assert_eq!(binomial_error(0.0, 20), 0.0);
        assert!((binomial_error(0.5, 25) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_layer_single_job_sweep() {
        let mut cfg = RunConfig::default();
        cfg.sweep.max_layers = 1;
        cfg.sweep.jobs_per_layer = 1;
        cfg.qaoa.restarts = 1;
        let recs = layer_sweep(&reference_instance().unwrap(), &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].layers, Some(1));
    }

    #[test]
    fn solver_dispatch_agrees_on_a_tiny_model() {
        let mut b = QuboBuilder::new(3);
        b.add_linear(0, -1.0)
            .add_linear(1, 0.5)
            .add_linear(2, -0.25);
        b.add_quadratic(2, 0, 2.0);
        let m = b.build().unwrap();
        let mut cfg = RunConfig::default();
        cfg.qaoa.restarts = 2;
        let exact = solve_model(&m, SolverKind::Exact, &cfg, 0)
            .unwrap()
            .solution;
        assert_eq!(exact.bits, vec![true, false, false]);
        for k in [SolverKind::Sa, SolverKind::Qaoa, SolverKind::Subqubo] {
            let s = solve_model(&m, k, &cfg, 3).unwrap();
            assert_eq!(s.solution, exact, "{k:?}");
            assert_eq!(s.diagnostics.is_some(), k == SolverKind::Subqubo);
        }
    }
}
