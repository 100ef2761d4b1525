//! Box-bounded minimisers for the QAOA angle search.
//!
//! [`Method::QuasiNewtonBounded`] is a limited-memory BFGS with gradient
//! projection: variables pinned at a bound by the gradient are frozen for the
//! step, the two-loop recursion acts on the rest, and a backtracking Armijo
//! search runs along the projected path `P(x + t·d)`. Gradients come from
//! [`finite_diff_gradient`]. [`Method::SimplexFallback`] is Nelder–Mead with
//! vertices clamped into the box.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// History length of the limited-memory update.
pub const HISTORY: usize = 10;
/// Default finite-difference step.
pub const GRAD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("bounds have different lengths"));
        }
        for (k, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(invalid(format!("bound {k} is not finite")));
            }
            if l > u {
                return Err(invalid(format!("lower bound {k} exceeds upper bound")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval in every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l && v <= u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (&l, &u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(l, u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    QuasiNewtonBounded,
    SimplexFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub f_tol: f64,
    pub g_tol: f64,
    /// Objective evaluation budget; `None` means `200·d`.
    pub max_evals: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            f_tol: 1e-9,
            g_tol: 1e-6,
            max_evals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// `(iteration, f)` of every accepted iterate, starting with `(0, f(x0))`.
    pub trace: Vec<(usize, f64)>,
}

enum Stop {
    Budget,
    NonFinite,
}

/// Objective wrapper that counts calls, enforces the budget and tracks the best finite point.
struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
    max_evals: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> core::result::Result<f64, Stop> {
        if self.evals >= self.max_evals {
            return Err(Stop::Budget);
        }
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(Stop::NonFinite);
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        Ok(v)
    }

    fn gradient(
        &mut self,
        x: &[f64],
        bounds: &BoxBounds,
        out: &mut [f64],
    ) -> core::result::Result<(), Stop> {
        let mut probe = x.to_vec();
        for k in 0..x.len() {
            let (l, u) = (bounds.lower[k], bounds.upper[k]);
            let h = GRAD_STEP;
            let fwd = x[k] + h <= u;
            let bwd = x[k] - h >= l;
            let (a, b) = match (bwd, fwd) {
                (true, true) => (x[k] - h, x[k] + h),
                (false, true) => (x[k], x[k] + h),
                (true, false) => (x[k] - h, x[k]),
                (false, false) => {
                    out[k] = 0.0;
                    continue;
                }
            };
            probe[k] = b;
            let fb = self.eval(&probe)?;
            probe[k] = a;
            let fa = self.eval(&probe)?;
            probe[k] = x[k];
            out[k] = (fb - fa) / (b - a);
        }
        Ok(())
    }
}

/// Central-difference gradient, one-sided where a bound is closer than `step`.
pub fn finite_diff_gradient<F>(
    mut objective: F,
    x: &[f64],
    step: f64,
    bounds: Option<&BoxBounds>,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut call = |p: &[f64]| {
        let v = objective(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                last_x: x.to_vec(),
                last_f: f64::NAN,
            })
        }
    };
    for k in 0..x.len() {
        let (l, u) = bounds.map_or((f64::NEG_INFINITY, f64::INFINITY), |b| {
            (b.lower[k], b.upper[k])
        });
        let (a, b) = match (x[k] - step >= l, x[k] + step <= u) {
            (true, true) => (x[k] - step, x[k] + step),
            (false, true) => (x[k], x[k] + step),
            (true, false) => (x[k] - step, x[k]),
            (false, false) => continue,
        };
        probe[k] = b;
        let fb = call(&probe)?;
        probe[k] = a;
        let fa = call(&probe)?;
        probe[k] = x[k];
        grad[k] = (fb - fa) / (b - a);
    }
    Ok(grad)
}

/// Minimises `objective` over `bounds` starting from `x0`.
///
/// Every point handed to the objective lies inside the box. On a non-finite
/// objective value the search aborts with [`Error::NonFinite`] carrying the
/// best finite iterate seen so far.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &BoxBounds,
    method: Method,
    tol: Tolerances,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    if d == 0 {
        return Err(invalid("cannot minimise over zero dimensions"));
    }
    if bounds.dim() != d {
        return Err(invalid("bounds dimension does not match x0"));
    }
    if !bounds.contains(x0) {
        return Err(invalid("x0 lies outside the bounds"));
    }
    let mut counted = Counted {
        f: &mut objective,
        evals: 0,
        max_evals: tol.max_evals.unwrap_or(200 * d).max(1),
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
    };
    let f0 = match counted.eval(x0) {
        Ok(v) => v,
        Err(_) => {
            return Err(Error::NonFinite {
                last_x: x0.to_vec(),
                last_f: f64::NAN,
            })
        }
    };
    let mut trace = vec![(0usize, f0)];
    let outcome = match method {
        Method::QuasiNewtonBounded => {
            lbfgs_projected(&mut counted, x0, f0, bounds, &tol, &mut trace)
        }
        Method::SimplexFallback => nelder_mead(&mut counted, x0, f0, bounds, &tol, &mut trace),
    };
    let (x, f, converged) = match outcome {
        Ok(done) => done,
        Err(Stop::Budget) => {
            let (x, f) = last_accepted(&counted, &trace);
            (x, f, false)
        }
        Err(Stop::NonFinite) => {
            let (last_x, last_f) = last_accepted(&counted, &trace);
            return Err(Error::NonFinite { last_x, last_f });
        }
    };
    Ok(OptimResult {
        x,
        f,
        evaluations: counted.evals,
        converged,
        trace,
    })
}

/// Best finite point seen, appended to the trace if it improves on the last accepted value.
fn last_accepted<F>(counted: &Counted<'_, F>, trace: &[(usize, f64)]) -> (Vec<f64>, f64) {
    let last = trace.last().map_or(f64::INFINITY, |t| t.1);
    debug_assert!(counted.best_f <= last);
    (counted.best_x.clone(), counted.best_f.min(last))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs_projected<F: FnMut(&[f64]) -> f64>(
    c: &mut Counted<'_, F>,
    x0: &[f64],
    f0: f64,
    bounds: &BoxBounds,
    tol: &Tolerances,
    trace: &mut Vec<(usize, f64)>,
) -> core::result::Result<(Vec<f64>, f64, bool), Stop> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut f = f0;
    let mut g = vec![0.0; d];
    c.gradient(&x, bounds, &mut g)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut iteration = 0usize;

    loop {
        // Coordinates held at a bound by the gradient are frozen this step.
        let span = |k: usize| (bounds.upper[k] - bounds.lower[k]).abs().max(1.0);
        let frozen: Vec<bool> = (0..d)
            .map(|k| {
                let eps = 1e-12 * span(k);
                (x[k] <= bounds.lower[k] + eps && g[k] > 0.0)
                    || (x[k] >= bounds.upper[k] - eps && g[k] < 0.0)
            })
            .collect();
        let pg: Vec<f64> = (0..d).map(|k| if frozen[k] { 0.0 } else { g[k] }).collect();
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= tol.g_tol {
            return Ok((x, f, true));
        }

        let mut dir = two_loop(&history, &pg, &frozen);
        if !(dot(&dir, &pg) < 0.0) {
            history.clear();
        }
        if history.is_empty() {
            let norm = libm::sqrt(dot(&pg, &pg));
            dir = pg.iter().map(|v| -v / norm.max(1.0)).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            bounds.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let ft = c.eval(&trial)?;
            let decrease = dot(&g, &step);
            if ft <= f + 1e-4 * decrease.min(0.0) && ft < f {
                accepted = Some((trial, ft, step));
                break;
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, step)) = accepted else {
            if history.is_empty() {
                // No descent even along the projected steepest direction.
                return Ok((x, f, true));
            }
            history.clear();
            continue;
        };

        let mut g_new = vec![0.0; d];
        c.gradient(&x_new, bounds, &mut g_new)?;
        iteration += 1;
        trace.push((iteration, f_new));

        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((step, y, 1.0 / sy));
        }

        let f_old = f;
        x = x_new;
        f = f_new;
        g = g_new;
        if f_old - f <= tol.f_tol * f_old.abs().max(f.abs()) {
            return Ok((x, f, true));
        }
    }
}

/// `−H·g` from the stored pairs, with frozen coordinates masked out.
fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64], frozen: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(frozen)
            .map(|(&x, &fz)| if fz { 0.0 } else { x })
            .collect()
    };
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, _) in history.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(&s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let (s, y) = (mask(s), mask(y));
        let yy = dot(&y, &y);
        if yy > 0.0 {
            let scale = dot(&s, &y) / yy;
            if scale > 0.0 {
                q.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    for ((s, y, _), a) in history.iter().zip(alphas.iter().rev()) {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(&y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += (a - b) * si;
        }
    }
    q.iter()
        .zip(frozen)
        .map(|(&v, &fz)| if fz { 0.0 } else { -v })
        .collect()
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    c: &mut Counted<'_, F>,
    x0: &[f64],
    f0: f64,
    bounds: &BoxBounds,
    tol: &Tolerances,
    trace: &mut Vec<(usize, f64)>,
) -> core::result::Result<(Vec<f64>, f64, bool), Stop> {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    for k in 0..d {
        let mut v = x0.to_vec();
        let width = bounds.upper[k] - bounds.lower[k];
        let step = if width > 0.0 { 0.1 * width } else { 0.0 };
        v[k] = if v[k] + step <= bounds.upper[k] {
            v[k] + step
        } else {
            v[k] - step
        };
        bounds.project(&mut v);
        let fv = c.eval(&v)?;
        simplex.push((v, fv));
    }
    let mut iteration = 0usize;
    let mut best = f0;
    let point = |base: &[f64], toward: &[f64], coef: f64| -> Vec<f64> {
        let mut p: Vec<f64> = base
            .iter()
            .zip(toward)
            .map(|(b, t)| b + coef * (t - b))
            .collect();
        bounds.project(&mut p);
        p
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best {
            best = simplex[0].1;
            iteration += 1;
            trace.push((iteration, best));
        }
        let spread = simplex[d].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread <= tol.f_tol * simplex[0].1.abs().max(1.0) && size <= 1e-8 {
            return Ok((simplex[0].0.clone(), simplex[0].1, true));
        }
        if size == 0.0 {
            return Ok((simplex[0].0.clone(), simplex[0].1, true));
        }
        let mut centroid = vec![0.0; d];
        for (v, _) in &simplex[..d] {
            for (cnt, vi) in centroid.iter_mut().zip(v) {
                *cnt += vi / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let reflected = point(&centroid, &worst.0, -1.0);
        let fr = c.eval(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = point(&centroid, &worst.0, -2.0);
            let fe = c.eval(&expanded)?;
            simplex[d] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let (toward, ft) = if fr < worst.1 {
                (&reflected, fr)
            } else {
                (&worst.0, worst.1)
            };
            let contracted = point(&centroid, toward, 0.5);
            let fc = c.eval(&contracted)?;
            if fc < ft {
                simplex[d] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk = point(&anchor, &entry.0, 0.5);
                    let fs = c.eval(&shrunk)?;
                    *entry = (shrunk, fs);
                }
            }
        }
    }
}
