//! Sparse QUBO models, their Ising form, and an exhaustive ground-state oracle.
//!
//! A model is `E(x) = Σ a_i x_i + Σ_{j<i} b_ij x_i x_j + offset` over `x ∈ {0,1}^n`.
//! Quadratic keys are stored as `(i, j)` with `j < i`. Spins follow `s = 1 − 2x`,
//! so `x = 0` maps to `s = +1`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Error, Result};

/// Largest model [`brute_force`] will enumerate.
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Relative tolerance used when revalidating cached energies.
pub const ENERGY_RTOL: f64 = 1e-9;

/// Accumulates coefficients before freezing them into a [`QuboModel`].
///
/// Mirrored quadratic entries (`(i, j)` and `(j, i)`) are summed into one key.
#[derive(Debug, Clone)]
pub struct QuboBuilder {
    n: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl QuboBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            offset: 0.0,
        }
    }

    pub fn add_linear(&mut self, i: usize, value: f64) -> &mut Self {
        *self.linear.entry(i).or_insert(0.0) += value;
        self
    }

    /// Adds `value · x_i · x_j`. A diagonal entry (`i == j`) is a linear term since `x² = x`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) -> &mut Self {
        match i.cmp(&j) {
            Ordering::Equal => return self.add_linear(i, value),
            Ordering::Greater => *self.quadratic.entry((i, j)).or_insert(0.0) += value,
            Ordering::Less => *self.quadratic.entry((j, i)).or_insert(0.0) += value,
        }
        self
    }

    pub fn add_offset(&mut self, value: f64) -> &mut Self {
        self.offset += value;
        self
    }

    pub fn build(self) -> Result<QuboModel> {
        QuboModel::from_parts(self.n, self.linear, self.quadratic, self.offset)
    }
}

/// An immutable sparse QUBO instance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    n: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    /// Per-variable neighbour list `(other, b)`, both directions.
    adjacency: Vec<Vec<(usize, f64)>>,
    linear_dense: Vec<f64>,
}

impl QuboModel {
    /// Validates and freezes a model. Quadratic keys must already satisfy `j < i`.
    pub fn from_parts(
        n: usize,
        linear: BTreeMap<usize, f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
    ) -> Result<Self> {
        if !offset.is_finite() {
            return Err(invalid("offset is not finite"));
        }
        for (&i, &v) in &linear {
            if i >= n {
                return Err(invalid(format!("linear index {i} out of range for n={n}")));
            }
            if !v.is_finite() {
                return Err(invalid(format!("linear coefficient {i} is not finite")));
            }
        }
        let mut linear_dense = vec![0.0; n];
        for (&i, &v) in &linear {
            linear_dense[i] = v;
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &v) in &quadratic {
            if i >= n {
                return Err(invalid(format!(
                    "quadratic index {i} out of range for n={n}"
                )));
            }
            if j >= i {
                return Err(invalid(format!(
                    "quadratic key ({i}, {j}) must satisfy j < i"
                )));
            }
            if !v.is_finite() {
                return Err(invalid(format!(
                    "quadratic coefficient ({i}, {j}) is not finite"
                )));
            }
            adjacency[i].push((j, v));
            adjacency[j].push((i, v));
        }
        Ok(Self {
            n,
            linear,
            quadratic,
            offset,
            adjacency,
            linear_dense,
        })
    }

    /// The empty model over `n` variables.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            offset: 0.0,
            adjacency: vec![Vec::new(); n],
            linear_dense: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn linear_coeff(&self, i: usize) -> f64 {
        self.linear_dense[i]
    }

    /// Coefficient of `x_i x_j` regardless of argument order.
    pub fn quadratic_coeff(&self, i: usize, j: usize) -> f64 {
        let key = if i > j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Largest absolute coefficient, ignoring the offset.
    pub fn max_abs_coeff(&self) -> f64 {
        self.linear
            .values()
            .chain(self.quadratic.values())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `Σ a_i x_i + Σ_{j<i} b_ij x_i x_j + offset`.
    pub fn energy(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(invalid(format!(
                "bit vector has length {} but model has {} variables",
                bits.len(),
                self.n
            )));
        }
        Ok(self.energy_unchecked(bits))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[bool]) -> f64 {
        let mut e = self.offset;
        for (&i, &a) in &self.linear {
            if bits[i] {
                e += a;
            }
        }
        for (&(i, j), &b) in &self.quadratic {
            if bits[i] && bits[j] {
                e += b;
            }
        }
        e
    }

    /// Energy change from flipping bit `i` of `bits`.
    pub fn flip_delta(&self, bits: &[bool], i: usize) -> f64 {
        let mut field = self.linear_coeff(i);
        for &(j, b) in &self.adjacency[i] {
            if bits[j] {
                field += b;
            }
        }
        if bits[i] {
            -field
        } else {
            field
        }
    }

    /// Spin form under `s = 1 − 2x`.
    pub fn to_ising(&self) -> IsingModel {
        let mut h: BTreeMap<usize, f64> = BTreeMap::new();
        let mut couplings = BTreeMap::new();
        let mut offset = self.offset;
        for (&i, &a) in &self.linear {
            // a·x = a/2 − (a/2)·s
            *h.entry(i).or_insert(0.0) -= a / 2.0;
            offset += a / 2.0;
        }
        for (&(i, j), &b) in &self.quadratic {
            // b·x_i·x_j = (b/4)(1 − s_i − s_j + s_i·s_j)
            let q = b / 4.0;
            couplings.insert((i, j), q);
            *h.entry(i).or_insert(0.0) -= q;
            *h.entry(j).or_insert(0.0) -= q;
            offset += q;
        }
        IsingModel {
            n: self.n,
            h,
            couplings,
            offset,
        }
    }
}

/// Spin image of a bit vector, `s_i = 1 − 2·x_i`.
pub fn spins_of(bits: &[bool]) -> Vec<i8> {
    bits.iter().map(|&b| if b { -1 } else { 1 }).collect()
}

/// Bits of basis index `k`, qubit `i` taken from bit `i` of `k`.
pub fn bits_of_index(k: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (k >> i) & 1 == 1).collect()
}

pub fn index_of_bits(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0usize, |k, (i, &b)| if b { k | (1 << i) } else { k })
}

/// Formats bits as a `0`/`1` string, `x_0` first.
pub fn bit_string(bits: &[bool]) -> alloc::string::String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bit_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(invalid(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

/// An assignment with its cached energy.
#[derive(Debug, Clone, PartialEq)]
pub struct BitSolution {
    pub bits: Vec<bool>,
    pub energy: f64,
}

impl BitSolution {
    pub fn evaluate(model: &QuboModel, bits: Vec<bool>) -> Result<Self> {
        let energy = model.energy(&bits)?;
        Ok(Self { bits, energy })
    }

    /// True when the cached energy matches a fresh evaluation within [`ENERGY_RTOL`].
    pub fn is_consistent(&self, model: &QuboModel) -> bool {
        match model.energy(&self.bits) {
            Ok(e) => (e - self.energy).abs() <= ENERGY_RTOL * e.abs().max(1.0),
            Err(_) => false,
        }
    }

    /// Ascending by energy, then lexicographically by bits.
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

/// Spin-form model `Σ h_i s_i + Σ_{j<i} J_ij s_i s_j + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    h: BTreeMap<usize, f64>,
    couplings: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl IsingModel {
    pub fn new(
        n: usize,
        h: BTreeMap<usize, f64>,
        couplings: BTreeMap<(usize, usize), f64>,
        offset: f64,
    ) -> Result<Self> {
        if !offset.is_finite() {
            return Err(invalid("offset is not finite"));
        }
        for (&i, &v) in &h {
            if i >= n || !v.is_finite() {
                return Err(invalid(format!("bad local field at index {i}")));
            }
        }
        for (&(i, j), &v) in &couplings {
            if i >= n || j >= i || !v.is_finite() {
                return Err(invalid(format!("bad coupling key ({i}, {j})")));
            }
        }
        Ok(Self {
            n,
            h,
            couplings,
            offset,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn fields(&self) -> &BTreeMap<usize, f64> {
        &self.h
    }

    pub fn couplings(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.couplings
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n {
            return Err(invalid(format!(
                "spin vector has length {} but model has {} spins",
                spins.len(),
                self.n
            )));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(invalid(format!("spin value {bad} is not ±1")));
        }
        let mut e = self.offset;
        for (&i, &h) in &self.h {
            e += h * f64::from(spins[i]);
        }
        for (&(i, j), &c) in &self.couplings {
            e += c * f64::from(spins[i] * spins[j]);
        }
        Ok(e)
    }

    /// Energy of every computational basis state, indexed as in [`bits_of_index`].
    ///
    /// Includes the offset.
    pub fn diagonal(&self) -> Vec<f64> {
        let dim = 1usize << self.n;
        let mut diag = vec![self.offset; dim];
        for (k, e) in diag.iter_mut().enumerate() {
            let spin = |i: usize| if (k >> i) & 1 == 1 { -1.0 } else { 1.0 };
            for (&i, &h) in &self.h {
                *e += h * spin(i);
            }
            for (&(i, j), &c) in &self.couplings {
                *e += c * spin(i) * spin(j);
            }
        }
        diag
    }
}

/// Output of [`brute_force`].
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub best: BitSolution,
    /// Lowest-lying states sorted by (energy, bits).
    pub states: Vec<BitSolution>,
}

/// Exhaustive minimisation keeping the 256 lowest states.
pub fn brute_force(model: &QuboModel) -> Result<Spectrum> {
    brute_force_spectrum(model, 256)
}

/// Exhaustive minimisation over all `2^n` assignments.
///
/// Ties on the minimum are broken towards the lexicographically smallest bit string.
/// Only the `keep` lowest states are retained in the returned spectrum (at least one).
pub fn brute_force_spectrum(model: &QuboModel, keep: usize) -> Result<Spectrum> {
    let n = model.n();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::Capacity {
            what: "brute-force model",
            size: n,
            max: BRUTE_FORCE_MAX_VARS,
        });
    }
    let keep = keep.max(1);
    let tol = |e: f64| 1e-9 * e.abs().max(1.0);
    // Walk the Gray code so each step is a single flip.
    let mut bits = vec![false; n];
    let mut energy = model.energy_unchecked(&bits);
    let mut best = (energy, 0usize);
    let mut kept: Vec<(f64, usize)> = Vec::with_capacity(2 * keep);
    let mut worst_kept = f64::INFINITY;
    for step in 0..(1usize << n) {
        if step > 0 {
            let flip = step.trailing_zeros() as usize;
            energy += model.flip_delta(&bits, flip);
            bits[flip] = !bits[flip];
        }
        let k = step ^ (step >> 1);
        if energy < best.0 - tol(best.0) || (energy <= best.0 + tol(best.0) && lex_less(k, best.1))
        {
            best = (energy, k);
        }
        if kept.len() < keep || energy < worst_kept {
            kept.push((energy, k));
            if kept.len() >= 2 * keep {
                kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                kept.truncate(keep);
                worst_kept = kept[keep - 1].0;
            }
        }
    }
    // Re-evaluate directly so accumulated rounding does not leak into reported energies.
    let eval = |k: usize| {
        let bits = bits_of_index(k, n);
        let energy = model.energy_unchecked(&bits);
        BitSolution { bits, energy }
    };
    let mut states: Vec<BitSolution> = kept.into_iter().map(|(_, k)| eval(k)).collect();
    states.sort_by(BitSolution::cmp_rank);
    states.truncate(keep);
    Ok(Spectrum {
        best: eval(best.1),
        states,
    })
}

/// Lexicographic order of basis indices read as `x_0 x_1 ...`.
fn lex_less(a: usize, b: usize) -> bool {
    a.reverse_bits() < b.reverse_bits()
}
