//! Run configuration: flat `key = value` lines with dotted section prefixes.
//!
//! ```text
//! seed = 7
//! generator.particles = 50
//! qubo.exponent_sign = damped
//! ```
//!
//! Every key has a default, unknown keys are rejected, and
//! [`RunConfig::to_text`] writes the fully resolved set back out in a form
//! that [`RunConfig::from_text`] reads unchanged.

use std::fmt::Display;
use std::str::FromStr;

use qtrack_core::anneal::SaConfig;
use qtrack_core::optim::Method;
use qtrack_core::qaoa::{Loss, QaoaConfig, Shots};
use qtrack_core::subqubo::{ClampSource, SubQuboParams, Subsolver};
use qtrack_core::synthetic::{DetectorGeometry, GeneratorConfig};
use qtrack_core::tracking::{ConflictRule, ExponentSign, QuboBuildConfig};

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Sa,
    Qaoa,
    Subqubo,
}

impl SolverKind {
    pub fn tag(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Sa => "sa",
            SolverKind::Qaoa => "qaoa",
            SolverKind::Subqubo => "subqubo",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "sa" => Ok(SolverKind::Sa),
            "qaoa" => Ok(SolverKind::Qaoa),
            "subqubo" => Ok(SolverKind::Subqubo),
            _ => Err("expected exact, sa, qaoa or subqubo".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubQuboSettings {
    pub n_i: usize,
    pub n_e: usize,
    pub n_s: usize,
    pub sub_size: usize,
    pub outer_rounds: usize,
    /// `qaoa`, `sa` or `exact`.
    pub subsolver: SolverKind,
    pub clamp_source: ClampSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub max_layers: usize,
    pub jobs_per_layer: usize,
    pub multiplicities: Vec<usize>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for sweeps; 0 uses every core.
    pub jobs: usize,
    pub geometry: DetectorGeometry,
    /// Its `seed` is ignored in favour of [`RunConfig::seed`].
    pub generator: GeneratorConfig,
    pub qubo: QuboBuildConfig,
    pub solver: SolverKind,
    /// Its `seed` is ignored in favour of [`RunConfig::seed`].
    pub sa: SaConfig,
    /// Its `seed` is ignored in favour of [`RunConfig::seed`].
    pub qaoa: QaoaConfig,
    pub cvar_alpha: f64,
    pub gibbs_eta: f64,
    pub subqubo: SubQuboSettings,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sq = SubQuboParams::default();
        let qaoa = QaoaConfig::default();
        Self {
            seed: 0,
            jobs: 0,
            geometry: DetectorGeometry::default(),
            generator: GeneratorConfig::default(),
            qubo: QuboBuildConfig::default(),
            solver: SolverKind::Subqubo,
            sa: SaConfig::default(),
            cvar_alpha: Loss::DEFAULT_CVAR_ALPHA,
            gibbs_eta: Loss::DEFAULT_GIBBS_ETA,
            qaoa,
            subqubo: SubQuboSettings {
                n_i: sq.n_i,
                n_e: sq.n_e,
                n_s: sq.n_s,
                sub_size: sq.sub_size,
                outer_rounds: sq.outer_rounds,
                subsolver: SolverKind::Qaoa,
                clamp_source: sq.clamp_source,
            },
            sweep: SweepSettings {
                max_layers: 8,
                jobs_per_layer: 20,
                multiplicities: vec![20, 50, 100],
                seeds: 5,
            },
        }
    }
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn opt_num<T: FromStr>(v: &str, none: &str) -> Result<Option<T>, String> {
    if v == none {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(s.trim())).collect()
}

fn show_opt<T: Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or(none.to_string(), T::to_string)
}

fn show_list<T: Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let g = &mut self.generator;
        let c = &mut self.qubo.cuts;
        match key {
            "seed" => self.seed = num(v)?,
            "jobs" => self.jobs = num(v)?,

            "geometry.layer_radii" => self.geometry.layer_radii = list(v)?,
            "geometry.z_half_length" => self.geometry.z_half_length = num(v)?,
            "geometry.hit_sigma" => self.geometry.hit_sigma = num(v)?,

            "generator.particles" => g.n_particles = num(v)?,
            "generator.noise" => g.noise_fraction = num(v)?,
            "generator.inefficiency" => g.inefficiency = num(v)?,
            "generator.curvature_min" => g.curvature_range.0 = num(v)?,
            "generator.curvature_max" => g.curvature_range.1 = num(v)?,
            "generator.theta_min" => g.theta_range.0 = num(v)?,
            "generator.theta_max" => g.theta_range.1 = num(v)?,
            "generator.phi_min" => g.phi_range.0 = num(v)?,
            "generator.phi_max" => g.phi_range.1 = num(v)?,

            "qubo.alpha" => self.qubo.alpha = num(v)?,
            "qubo.beta" => self.qubo.beta = num(v)?,
            "qubo.gamma" => self.qubo.gamma = num(v)?,
            "qubo.lambda" => self.qubo.lambda = num(v)?,
            "qubo.conflict_penalty" => self.qubo.conflict_penalty = num(v)?,
            "qubo.exponent_sign" => {
                self.qubo.exponent_sign = match v {
                    "as_written" => ExponentSign::AsWritten,
                    "damped" => ExponentSign::Damped,
                    _ => return Err("expected as_written or damped".into()),
                }
            }
            "qubo.conflict_rule" => {
                self.qubo.conflict_rule = match v {
                    "inconsistent" => ConflictRule::Inconsistent,
                    "any_shared_hit" => ConflictRule::AnySharedHit,
                    _ => return Err("expected inconsistent or any_shared_hit".into()),
                }
            }

            "cuts.max_layer_gap" => c.max_layer_gap = num(v)?,
            "cuts.phi_window" => c.phi_window = num(v)?,
            "cuts.slope_window" => c.slope_window = num(v)?,
            "cuts.doublet_z0_window" => c.doublet_z0_window = opt_num(v, "none")?,
            "cuts.theta_window" => c.theta_window = num(v)?,
            "cuts.max_curvature" => c.max_curvature = num(v)?,
            "cuts.max_d0" => c.max_d0 = opt_num(v, "none")?,
            "cuts.max_z0" => c.max_z0 = opt_num(v, "none")?,

            "solve.solver" => self.solver = v.parse()?,

            "sa.sweeps" => self.sa.sweeps = opt_num(v, "auto")?,
            "sa.t_start" => self.sa.t_start = opt_num(v, "auto")?,
            "sa.t_end" => self.sa.t_end = num(v)?,
            "sa.restarts" => self.sa.restarts = num(v)?,

            "qaoa.layers" => self.qaoa.layers = num(v)?,
            "qaoa.shots" => {
                self.qaoa.shots = match opt_num(v, "exact")? {
                    None => Shots::Exact,
                    Some(k) => Shots::Sampled(k),
                }
            }
            "qaoa.readout_shots" => self.qaoa.readout_shots = num(v)?,
            "qaoa.loss" => {
                self.qaoa.loss = match v {
                    "cvar" => Loss::Cvar {
                        alpha: self.cvar_alpha,
                    },
                    "gibbs" => Loss::Gibbs {
                        eta: self.gibbs_eta,
                    },
                    _ => return Err("expected cvar or gibbs".into()),
                }
            }
            "qaoa.cvar_alpha" => {
                self.cvar_alpha = num(v)?;
                if let Loss::Cvar { alpha } = &mut self.qaoa.loss {
                    *alpha = self.cvar_alpha;
                }
            }
            "qaoa.gibbs_eta" => {
                self.gibbs_eta = num(v)?;
                if let Loss::Gibbs { eta } = &mut self.qaoa.loss {
                    *eta = self.gibbs_eta;
                }
            }
            "qaoa.optimizer" => {
                self.qaoa.optimizer = match v {
                    "quasi_newton" => Method::QuasiNewtonBounded,
                    "simplex" => Method::SimplexFallback,
                    _ => return Err("expected quasi_newton or simplex".into()),
                }
            }
            "qaoa.restarts" => self.qaoa.restarts = num(v)?,
            "qaoa.f_tol" => self.qaoa.tolerances.f_tol = num(v)?,
            "qaoa.g_tol" => self.qaoa.tolerances.g_tol = num(v)?,
            "qaoa.max_evals" => self.qaoa.tolerances.max_evals = opt_num(v, "auto")?,

            "subqubo.n_i" => self.subqubo.n_i = num(v)?,
            "subqubo.n_e" => self.subqubo.n_e = num(v)?,
            "subqubo.n_s" => self.subqubo.n_s = num(v)?,
            "subqubo.sub_size" => self.subqubo.sub_size = num(v)?,
            "subqubo.outer_rounds" => self.subqubo.outer_rounds = num(v)?,
            "subqubo.subsolver" => {
                self.subqubo.subsolver = match v.parse()? {
                    SolverKind::Subqubo => return Err("expected qaoa, sa or exact".into()),
                    k => k,
                }
            }
            "subqubo.clamp_source" => {
                self.subqubo.clamp_source = match v {
                    "pool_best" => ClampSource::PoolBest,
                    "random_member" => ClampSource::RandomMember,
                    _ => return Err("expected pool_best or random_member".into()),
                }
            }

            "sweep.max_layers" => self.sweep.max_layers = num(v)?,
            "sweep.jobs_per_layer" => self.sweep.jobs_per_layer = num(v)?,
            "sweep.multiplicities" => self.sweep.multiplicities = list(v)?,
            "sweep.seeds" => self.sweep.seeds = num(v)?,

            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.generator;
        let c = &self.qubo.cuts;
        let q = &self.qaoa;
        let s = &self.subqubo;
        vec![
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
            (
                "geometry.layer_radii",
                show_list(&self.geometry.layer_radii),
            ),
            (
                "geometry.z_half_length",
                self.geometry.z_half_length.to_string(),
            ),
            ("geometry.hit_sigma", self.geometry.hit_sigma.to_string()),
            ("generator.particles", g.n_particles.to_string()),
            ("generator.noise", g.noise_fraction.to_string()),
            ("generator.inefficiency", g.inefficiency.to_string()),
            ("generator.curvature_min", g.curvature_range.0.to_string()),
            ("generator.curvature_max", g.curvature_range.1.to_string()),
            ("generator.theta_min", g.theta_range.0.to_string()),
            ("generator.theta_max", g.theta_range.1.to_string()),
            ("generator.phi_min", g.phi_range.0.to_string()),
            ("generator.phi_max", g.phi_range.1.to_string()),
            ("qubo.alpha", self.qubo.alpha.to_string()),
            ("qubo.beta", self.qubo.beta.to_string()),
            ("qubo.gamma", self.qubo.gamma.to_string()),
            ("qubo.lambda", self.qubo.lambda.to_string()),
            (
                "qubo.conflict_penalty",
                self.qubo.conflict_penalty.to_string(),
            ),
            (
                "qubo.exponent_sign",
                match self.qubo.exponent_sign {
                    ExponentSign::AsWritten => "as_written",
                    ExponentSign::Damped => "damped",
                }
                .into(),
            ),
            (
                "qubo.conflict_rule",
                match self.qubo.conflict_rule {
                    ConflictRule::Inconsistent => "inconsistent",
                    ConflictRule::AnySharedHit => "any_shared_hit",
                }
                .into(),
            ),
            ("cuts.max_layer_gap", c.max_layer_gap.to_string()),
            ("cuts.phi_window", c.phi_window.to_string()),
            ("cuts.slope_window", c.slope_window.to_string()),
            (
                "cuts.doublet_z0_window",
                show_opt(&c.doublet_z0_window, "none"),
            ),
            ("cuts.theta_window", c.theta_window.to_string()),
            ("cuts.max_curvature", c.max_curvature.to_string()),
            ("cuts.max_d0", show_opt(&c.max_d0, "none")),
            ("cuts.max_z0", show_opt(&c.max_z0, "none")),
            ("solve.solver", self.solver.tag().into()),
            ("sa.sweeps", show_opt(&self.sa.sweeps, "auto")),
            ("sa.t_start", show_opt(&self.sa.t_start, "auto")),
            ("sa.t_end", self.sa.t_end.to_string()),
            ("sa.restarts", self.sa.restarts.to_string()),
            ("qaoa.layers", q.layers.to_string()),
            (
                "qaoa.shots",
                match q.shots {
                    Shots::Exact => "exact".into(),
                    Shots::Sampled(k) => k.to_string(),
                },
            ),
            ("qaoa.readout_shots", q.readout_shots.to_string()),
            ("qaoa.cvar_alpha", self.cvar_alpha.to_string()),
            ("qaoa.gibbs_eta", self.gibbs_eta.to_string()),
            ("qaoa.loss", self.loss_tag().into()),
            (
                "qaoa.optimizer",
                match q.optimizer {
                    Method::QuasiNewtonBounded => "quasi_newton",
                    Method::SimplexFallback => "simplex",
                }
                .into(),
            ),
            ("qaoa.restarts", q.restarts.to_string()),
            ("qaoa.f_tol", q.tolerances.f_tol.to_string()),
            ("qaoa.g_tol", q.tolerances.g_tol.to_string()),
            ("qaoa.max_evals", show_opt(&q.tolerances.max_evals, "auto")),
            ("subqubo.n_i", s.n_i.to_string()),
            ("subqubo.n_e", s.n_e.to_string()),
            ("subqubo.n_s", s.n_s.to_string()),
            ("subqubo.sub_size", s.sub_size.to_string()),
            ("subqubo.outer_rounds", s.outer_rounds.to_string()),
            ("subqubo.subsolver", s.subsolver.tag().into()),
            (
                "subqubo.clamp_source",
                match s.clamp_source {
                    ClampSource::PoolBest => "pool_best",
                    ClampSource::RandomMember => "random_member",
                }
                .into(),
            ),
            ("sweep.max_layers", self.sweep.max_layers.to_string()),
            (
                "sweep.jobs_per_layer",
                self.sweep.jobs_per_layer.to_string(),
            ),
            (
                "sweep.multiplicities",
                show_list(&self.sweep.multiplicities),
            ),
            ("sweep.seeds", self.sweep.seeds.to_string()),
        ]
    }

    pub fn loss_tag(&self) -> &'static str {
        match self.qaoa.loss {
            Loss::Cvar { .. } => "cvar",
            Loss::Gibbs { .. } => "gibbs",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved qtrack configuration\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Applies a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ParseError> {
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ParseError::new(line, "expected `key = value`"))?;
            let key = key.trim();
            self.set(key, value)
                .map_err(|m| ParseError::new(line, format!("{key}: {m}")))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ParseError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed,
            ..self.generator.clone()
        }
    }

    pub fn sa(&self, seed: u64) -> SaConfig {
        SaConfig {
            seed,
            ..self.sa.clone()
        }
    }

    pub fn qaoa(&self, seed: u64) -> QaoaConfig {
        QaoaConfig {
            seed,
            ..self.qaoa.clone()
        }
    }

    pub fn subqubo_params(&self) -> SubQuboParams {
        let s = &self.subqubo;
        let subsolver = match s.subsolver {
            SolverKind::Exact => Subsolver::Exact,
            SolverKind::Sa => Subsolver::Anneal(self.sa.clone()),
            _ => Subsolver::Qaoa(self.qaoa.clone()),
        };
        SubQuboParams {
            n_i: s.n_i,
            n_e: s.n_e,
            n_s: s.n_s,
            sub_size: s.sub_size,
            outer_rounds: s.outer_rounds,
            subsolver,
            clamp_source: s.clamp_source,
            pool_anneal: self.sa.clone(),
        }
    }
}
