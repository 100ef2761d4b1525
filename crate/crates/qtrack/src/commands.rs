//! The `qtrack` subcommands.
//!
//! Each command reads its inputs, writes its outputs atomically next to a
//! resolved `<stem>.cfg`, and returns the text to print on stdout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qtrack_core::synthetic::generate_event;
use qtrack_core::tracking::{
    assemble_tracks, build_event, make_triplet, score, Hit, TrackCandidate, Triplet,
};
use qtrack_core::QuboModel;

use crate::config::RunConfig;
use crate::error::{CliError, ParseError};
use crate::experiments::{self, solve_model};
use crate::hits_csv::{read_hits, write_hits};
use crate::metrics::{diagnostic_records, to_json_lines, MetricsRecord};
use crate::output::{read_input, write_atomic, OutTarget};
use crate::qubo_file::{mapping_of, parse_qubo, write_qubo, QuboFile};
use crate::solution::{parse_solution, write_solution, SolutionFile};
use crate::svg::{render_event, Projection};

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    /// Dotted `key value` pairs from the command line, in order.
    pub overrides: Vec<(String, String)>,
}

impl Common {
    /// Defaults, then the config file, then overrides, then `--seed`/`--jobs`.
    pub fn resolve(&self, flags: &[(&str, Option<String>)]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = read_input(path)?;
            cfg.apply_text(&text)
                .map_err(|e| CliError::parse(path, e))?;
        }
        let seed = self.seed.map(|s| ("seed", s.to_string()));
        let jobs = self.jobs.map(|j| ("jobs", j.to_string()));
        let flags = flags
            .iter()
            .filter_map(|(k, v)| v.clone().map(|v| (*k, v)))
            .chain(seed)
            .chain(jobs);
        for (k, v) in self
            .overrides
            .iter()
            .map(|(k, v)| (k.as_str(), v.clone()))
            .chain(flags)
        {
            cfg.set(k, &v)
                .map_err(|m| CliError::Usage(format!("--{k}: {m}")))?;
        }
        Ok(cfg)
    }
}

fn write_outputs(target: &OutTarget, cfg: &RunConfig, primary: &str) -> Result<(), CliError> {
    write_atomic(&target.primary, primary.as_bytes())?;
    write_atomic(&target.config_path(), cfg.to_text().as_bytes())
}

fn load_hits(path: &Path) -> Result<Vec<Hit>, CliError> {
    read_hits(read_input(path)?.as_bytes()).map_err(|e| CliError::parse(path, e))
}

fn load_qubo(path: &Path) -> Result<QuboFile, CliError> {
    parse_qubo(&read_input(path)?).map_err(|e| CliError::parse(path, e))
}

fn load_solution(path: &Path) -> Result<SolutionFile, CliError> {
    parse_solution(&read_input(path)?).map_err(|e| CliError::parse(path, e))
}

pub fn gen(common: &Common, flags: &[(&str, Option<String>)]) -> Result<String, CliError> {
    let cfg = common.resolve(flags)?;
    let event = generate_event(&cfg.geometry, &cfg.generator())?;
    let target = OutTarget::resolve(common.out.as_deref(), "hits.csv");
    write_outputs(&target, &cfg, &write_hits(&event.hits))?;
    let d = event.diagnostics;
    Ok(format!(
        "wrote {} ({} hits: {} true, {} noise; {} particles skipped)\n",
        target.primary.display(),
        event.hits.len(),
        d.true_hits,
        d.noise_hits,
        d.skipped_particles
    ))
}

/// Fraction of the `n(n−1)/2` variable pairs with a nonzero coupling.
pub fn nonzero_pair_fraction(model: &QuboModel) -> f64 {
    let n = model.n();
    if n < 2 {
        return 0.0;
    }
    let nonzero = model.quadratic().values().filter(|v| **v != 0.0).count();
    nonzero as f64 / (n * (n - 1) / 2) as f64
}

pub fn build(common: &Common, hits_path: &Path) -> Result<String, CliError> {
    let cfg = common.resolve(&[])?;
    let hits = load_hits(hits_path)?;
    let event = build_event(&hits, &cfg.qubo)?;
    let target = OutTarget::resolve(common.out.as_deref(), "event.qubo");
    let text = write_qubo(&event.model, &mapping_of(&event.triplets));
    write_outputs(&target, &cfg, &text)?;
    Ok(format!(
        "wrote {}\nhits {}\ndoublets {}\ntriplets {}\nquadratic_terms {}\nnonzero_pair_fraction {:.6}\n",
        target.primary.display(),
        hits.len(),
        event.doublets.len(),
        event.triplets.len(),
        event.model.quadratic().len(),
        nonzero_pair_fraction(&event.model)
    ))
}

pub fn solve(
    common: &Common,
    qubo_path: &Path,
    flags: &[(&str, Option<String>)],
) -> Result<String, CliError> {
    let cfg = common.resolve(flags)?;
    let file = load_qubo(qubo_path)?;
    let solved = solve_model(&file.model, cfg.solver, &cfg, cfg.seed)?;
    let target = OutTarget::resolve(common.out.as_deref(), "solution.txt");
    let sol = SolutionFile {
        solver: cfg.solver.tag().into(),
        energy: solved.solution.energy,
        bits: solved.solution.bits.clone(),
    };
    write_outputs(&target, &cfg, &write_solution(&sol))?;
    let mut out = format!(
        "wrote {}\nsolver {}\nn {}\nenergy {:.12}\n",
        target.primary.display(),
        sol.solver,
        sol.bits.len(),
        sol.energy
    );
    if let Some(d) = &solved.diagnostics {
        let path = target.sibling(".diag.jsonl");
        write_atomic(&path, to_json_lines(&diagnostic_records(d)).as_bytes())?;
        let _ = writeln!(out, "diagnostics {}", path.display());
    }
    Ok(out)
}

/// Rebuilds the selected triplets from the mapping and the hit table.
fn selected_triplets(
    hits: &[Hit],
    mapping: &[[u64; 3]],
    bits: &[bool],
    mapping_path: &Path,
) -> Result<Vec<Triplet>, CliError> {
    let by_id: BTreeMap<u64, &Hit> = hits.iter().map(|h| (h.id, h)).collect();
    let mut out = Vec::new();
    for (k, ids) in mapping.iter().enumerate().filter(|(k, _)| bits[*k]) {
        let get = |id: &u64| {
            by_id.get(id).copied().ok_or_else(|| {
                CliError::Usage(format!(
                    "{}: triplet {k} refers to hit {id}, which is not in the hit table",
                    mapping_path.display()
                ))
            })
        };
        out.push(make_triplet(get(&ids[0])?, get(&ids[1])?, get(&ids[2])?));
    }
    Ok(out)
}

pub fn reconstruct(
    hits: &[Hit],
    qubo: &QuboFile,
    sol: &SolutionFile,
    qubo_path: &Path,
    solution_path: &Path,
) -> Result<Vec<TrackCandidate>, CliError> {
    let n = qubo.model.n();
    if sol.bits.len() != n {
        return Err(CliError::parse(
            solution_path,
            ParseError::new(
                0,
                format!(
                    "solution has {} bits but the QUBO has {n} variables",
                    sol.bits.len()
                ),
            ),
        ));
    }
    if qubo.mapping.len() != n {
        return Err(CliError::Usage(format!(
            "{}: no triplet mapping, cannot turn bits into tracks",
            qubo_path.display()
        )));
    }
    Ok(assemble_tracks(&selected_triplets(
        hits,
        &qubo.mapping,
        &sol.bits,
        qubo_path,
    )?))
}

pub struct EvalInputs<'a> {
    pub hits: &'a Path,
    pub solution: &'a Path,
    pub qubo: &'a Path,
    pub svg: bool,
}

pub fn eval(common: &Common, inputs: &EvalInputs) -> Result<String, CliError> {
    let start = Instant::now();
    let cfg = common.resolve(&[])?;
    let hits = load_hits(inputs.hits)?;
    let qubo = load_qubo(inputs.qubo)?;
    let sol = load_solution(inputs.solution)?;
    let tracks = reconstruct(&hits, &qubo, &sol, inputs.qubo, inputs.solution)?;
    let m = score(&tracks, &hits);
    let particles: std::collections::BTreeSet<u64> = hits
        .iter()
        .filter(|h| !h.is_noise())
        .map(|h| h.truth_particle)
        .collect();

    let mut rec = MetricsRecord::new("eval", sol.solver.clone()).with_tracking(&m);
    rec.multiplicity = Some(particles.len());
    rec.n_vars = Some(qubo.model.n());
    rec.energy = Some(qubo.model.energy(&sol.bits)?);
    rec.wall_time_s = start.elapsed().as_secs_f64();

    let target = OutTarget::resolve(common.out.as_deref(), "metrics.jsonl");
    write_outputs(&target, &cfg, &to_json_lines(&[rec]))?;
    let mut out = format!(
        "wrote {}\ntracks {}\ntrue_positive {}\nfalse_positive {}\nfalse_negative {}\n",
        target.primary.display(),
        tracks.len(),
        m.tp,
        m.fp,
        m.fn_
    );
    let ratio = |v: f64, defined: bool| {
        if defined {
            format!("{v:.6}")
        } else {
            "undefined".into()
        }
    };
    let _ = writeln!(
        out,
        "efficiency {}",
        ratio(m.efficiency, m.efficiency_defined)
    );
    let _ = writeln!(out, "purity {}", ratio(m.purity, m.purity_defined));
    if inputs.svg {
        for p in [Projection::TransverseXY, Projection::LongitudinalRZ] {
            let path = target.sibling(&format!(".{}.svg", p.tag()));
            write_atomic(
                &path,
                render_event(&cfg.geometry, &hits, &tracks, p).as_bytes(),
            )?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    Ok(out)
}

pub struct DisplayInputs<'a> {
    pub hits: &'a Path,
    /// Solution and QUBO together add reconstructed tracks.
    pub solution: Option<&'a Path>,
    pub qubo: Option<&'a Path>,
    pub projection: Projection,
}

pub fn display(common: &Common, inputs: &DisplayInputs) -> Result<String, CliError> {
    let cfg = common.resolve(&[])?;
    let hits = load_hits(inputs.hits)?;
    let tracks = match (inputs.solution, inputs.qubo) {
        (Some(s), Some(q)) => reconstruct(&hits, &load_qubo(q)?, &load_solution(s)?, q, s)?,
        (None, None) => Vec::new(),
        _ => return Err(CliError::Usage("--solution and --qubo go together".into())),
    };
    let default = format!("event.{}.svg", inputs.projection.tag());
    let target = OutTarget::resolve(common.out.as_deref(), &default);
    let svg = render_event(&cfg.geometry, &hits, &tracks, inputs.projection);
    write_outputs(&target, &cfg, &svg)?;
    Ok(format!(
        "wrote {} ({} tracks)\n",
        target.primary.display(),
        tracks.len()
    ))
}

pub fn sweep_layers(
    common: &Common,
    qubo_path: Option<&Path>,
    flags: &[(&str, Option<String>)],
) -> Result<String, CliError> {
    let cfg = common.resolve(flags)?;
    let model = match qubo_path {
        Some(p) => load_qubo(p)?.model,
        None => experiments::reference_instance()?,
    };
    let records = experiments::layer_sweep(&model, &cfg)?;
    let target = OutTarget::resolve(common.out.as_deref(), "layers.jsonl");
    write_outputs(&target, &cfg, &to_json_lines(&records))?;
    let mut out = format!("wrote {}\n", target.primary.display());
    for r in &records {
        let _ = writeln!(
            out,
            "p {} accuracy {:.3} ± {:.3} mean_probability {:.4}",
            r.layers.unwrap_or(0),
            r.accuracy.unwrap_or(0.0),
            r.accuracy_err.unwrap_or(0.0),
            r.mean_probability.unwrap_or(0.0)
        );
    }
    Ok(out)
}

pub fn sweep_multiplicity(
    common: &Common,
    flags: &[(&str, Option<String>)],
) -> Result<String, CliError> {
    let cfg = common.resolve(flags)?;
    let records = experiments::multiplicity_sweep(&cfg)?;
    let target = OutTarget::resolve(common.out.as_deref(), "multiplicity.jsonl");
    write_outputs(&target, &cfg, &to_json_lines(&records))?;
    let mut out = format!("wrote {}\n", target.primary.display());
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    for r in &records {
        let _ = writeln!(
            out,
            "{} {} n {} energy {} efficiency {} purity {}",
            r.run_id,
            r.solver,
            r.n_vars.unwrap_or(0),
            opt(r.energy),
            opt(r.efficiency),
            opt(r.purity)
        );
    }
    Ok(out)
}
