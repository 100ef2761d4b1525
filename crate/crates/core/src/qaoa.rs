//! Dense statevector QAOA.
//!
//! The circuit prepares `|+⟩^n`, then applies `p` blocks of a diagonal cost
//! phase `e^{−iγ_k E(x)}` followed by a transverse mixer `Π_q R_X(2β_k)`.
//! Basis index `k` holds qubit `q` in bit `q`, matching
//! [`crate::qubo::bits_of_index`]. Parameter vectors are laid out as
//! `(γ_1..γ_p, β_1..β_p)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::optim::{self, BoxBounds, Method, Tolerances};
use crate::qubo::{bits_of_index, index_of_bits, IsingModel};
use crate::seed;

/// Simulator capacity.
pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Uniform superposition `|+⟩^n`.
    pub fn plus(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let dim = 1usize << n;
        let a = 1.0 / libm::sqrt(dim as f64);
        Ok(Self {
            n_qubits: n,
            amplitudes: vec![Complex64::new(a, 0.0); dim],
        })
    }

    /// Computational basis state `|bits⟩`.
    pub fn basis(bits: &[bool]) -> Result<Self> {
        check_capacity(bits.len())?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << bits.len()];
        amplitudes[index_of_bits(bits)] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits: bits.len(),
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1 within 1e-9.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(invalid("amplitude count must be a power of two"));
        }
        let n = dim.trailing_zeros() as usize;
        check_capacity(n)?;
        let s = Self {
            n_qubits: n,
            amplitudes,
        };
        if (s.norm_sqr() - 1.0).abs() > 1e-9 {
            return Err(invalid("state is not normalised"));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨bits|ψ⟩|²`.
    pub fn probability_of(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.n_qubits {
            return Err(invalid(format!(
                "bit string of length {} for a {}-qubit state",
                bits.len(),
                self.n_qubits
            )));
        }
        Ok(self.amplitudes[index_of_bits(bits)].norm_sqr())
    }

    /// Multiplies each amplitude by `e^{−iγ·energies[k]}`.
    pub fn apply_phase(&mut self, energies: &[f64], gamma: f64) -> Result<()> {
        if energies.len() != self.amplitudes.len() {
            return Err(invalid("energy table does not match the state dimension"));
        }
        if gamma == 0.0 {
            return Ok(());
        }
        for (a, &e) in self.amplitudes.iter_mut().zip(energies) {
            let t = gamma * e;
            *a *= Complex64::new(libm::cos(t), -libm::sin(t));
        }
        Ok(())
    }

    /// `e^{−iγ H_C}` with `H_C` the Ising energy (offset contributes a global phase).
    pub fn apply_cost_layer(&mut self, ising: &IsingModel, gamma: f64) -> Result<()> {
        if ising.n() != self.n_qubits {
            return Err(invalid(format!(
                "{}-spin Hamiltonian applied to a {}-qubit state",
                ising.n(),
                self.n_qubits
            )));
        }
        self.apply_phase(&ising.diagonal(), gamma)
    }

    /// `R_X(2β) = cos β·I − i sin β·X` on every qubit.
    pub fn apply_mixer_layer(&mut self, beta: f64) {
        if beta == 0.0 {
            return;
        }
        let (c, s) = (libm::cos(beta), libm::sin(beta));
        let dim = self.amplitudes.len();
        for q in 0..self.n_qubits {
            let stride = 1usize << q;
            for block in (0..dim).step_by(stride << 1) {
                for k in block..block + stride {
                    let a0 = self.amplitudes[k];
                    let a1 = self.amplitudes[k + stride];
                    self.amplitudes[k] =
                        Complex64::new(c * a0.re + s * a1.im, c * a0.im - s * a1.re);
                    self.amplitudes[k + stride] =
                        Complex64::new(s * a0.im + c * a1.re, -s * a0.re + c * a1.im);
                }
            }
        }
    }

    /// Multinomial draw of `shots` measurement outcomes.
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Result<SampleDistribution> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        let mut cumulative = Vec::with_capacity(self.amplitudes.len());
        let mut acc = 0.0;
        for a in &self.amplitudes {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let mut per_index: BTreeMap<usize, u64> = BTreeMap::new();
        for _ in 0..shots {
            let u = rng.random::<f64>() * acc;
            let k = cumulative
                .partition_point(|&c| c <= u)
                .min(cumulative.len() - 1);
            *per_index.entry(k).or_insert(0) += 1;
        }
        let counts = per_index
            .into_iter()
            .map(|(k, c)| (bits_of_index(k, self.n_qubits), c))
            .collect();
        Ok(SampleDistribution {
            n: self.n_qubits,
            counts,
            total: shots as u64,
        })
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("a state needs at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "statevector",
            size: n,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

pub fn prepare_plus_state(n: usize) -> Result<Statevector> {
    Statevector::plus(n)
}

/// Plus state followed by `p = params.len() / 2` cost/mixer blocks.
pub fn simulate(ising: &IsingModel, params: &[f64]) -> Result<Statevector> {
    let circuit = Circuit::new(ising)?;
    circuit.simulate(params)
}

/// A QAOA circuit with the cost diagonal precomputed.
#[derive(Debug, Clone)]
pub struct Circuit {
    n: usize,
    energies: Vec<f64>,
    /// Basis indices sorted by ascending energy, ties by index.
    order: Vec<usize>,
}

impl Circuit {
    pub fn new(ising: &IsingModel) -> Result<Self> {
        check_capacity(ising.n())?;
        Ok(Self::from_energies(ising.n(), ising.diagonal()))
    }

    fn from_energies(n: usize, energies: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
        Self { n, energies, order }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Energy of every basis state.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn simulate(&self, params: &[f64]) -> Result<Statevector> {
        if !params.len().is_multiple_of(2) {
            return Err(invalid("parameter vector must hold (γ, β) pairs"));
        }
        let p = params.len() / 2;
        let mut state = Statevector::plus(self.n)?;
        for k in 0..p {
            state.apply_phase(&self.energies, params[k])?;
            state.apply_mixer_layer(params[p + k]);
        }
        Ok(state)
    }

    /// Loss of the exact output distribution.
    pub fn exact_loss(&self, probs: &[f64], loss: Loss) -> f64 {
        match loss {
            Loss::Cvar { alpha } => {
                // Continuous tail: the lowest-energy α of probability mass.
                let mut mass = 0.0;
                let mut acc = 0.0;
                for &k in &self.order {
                    let w = probs[k].min(alpha - mass);
                    if w <= 0.0 {
                        break;
                    }
                    acc += w * self.energies[k];
                    mass += w;
                }
                acc / mass
            }
            Loss::Gibbs { eta } => {
                let emin = self.energies[self.order[0]];
                let z: f64 = probs
                    .iter()
                    .zip(&self.energies)
                    .map(|(p, e)| p * libm::exp(-eta * (e - emin)))
                    .sum();
                eta * emin - libm::log(z)
            }
        }
    }
}

/// Measured bitstrings with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDistribution {
    n: usize,
    counts: BTreeMap<Vec<bool>, u64>,
    total: u64,
}

impl SampleDistribution {
    pub fn counts(&self) -> &BTreeMap<Vec<bool>, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Highest-count bitstring, ties to the lexicographically smallest.
    pub fn modal(&self) -> Option<(&[bool], u64)> {
        // BTreeMap iterates in ascending key order, so the first maximum wins.
        let mut best: Option<(&[bool], u64)> = None;
        for (bits, &c) in &self.counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((bits.as_slice(), c));
            }
        }
        best
    }

    /// `(energy, count)` pairs under `energy_of`.
    pub fn energies(&self, mut energy_of: impl FnMut(&[bool]) -> f64) -> Vec<(f64, u64)> {
        self.counts
            .iter()
            .map(|(b, &c)| (energy_of(b), c))
            .collect()
    }
}

/// Double-double accumulator: `hi + lo` carries about 106 significant bits.
#[derive(Clone, Copy, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let s = self.hi + v;
        let bv = s - self.hi;
        let err = (self.hi - (s - bv)) + (v - bv);
        let lo = self.lo + err;
        self.hi = s + lo;
        self.lo = lo - (self.hi - s);
    }

    /// Adds `x · k` without rounding the product.
    fn add_product(&mut self, x: f64, k: f64) {
        let p = x * k;
        self.add(p);
        self.add(libm::fma(x, k, -p));
    }

    fn div(self, d: f64) -> f64 {
        let q = self.hi / d;
        let p = q * d;
        let r = ((self.hi - p) - libm::fma(q, d, -p)) + self.lo;
        q + r / d
    }
}

/// Mean of the `⌈αK⌉` lowest energies among `K` samples, counting multiplicity.
///
/// The tail sum is carried in double-double precision so the result is the
/// correctly rounded mean in all but near-tie cases. Rounding is monotone, so
/// the loss then never increases as `α` shrinks, even at the last bit.
pub fn loss_cvar(samples: &[(f64, u64)], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("CVaR alpha must lie in (0, 1]"));
    }
    let total: u64 = samples.iter().map(|s| s.1).sum();
    if total == 0 {
        return Err(invalid("CVaR of an empty sample"));
    }
    let tail = libm::ceil(alpha * total as f64).max(1.0) as u64;
    let mut sorted: Vec<(f64, u64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut taken = 0u64;
    let mut acc = Compensated::default();
    for (e, c) in sorted {
        let take = c.min(tail - taken);
        acc.add_product(e, take as f64);
        taken += take;
        if taken == tail {
            break;
        }
    }
    Ok(acc.div(tail as f64))
}

/// `−ln((1/K) Σ e^{−η E_k})`, evaluated with a max-shift.
pub fn loss_gibbs(samples: &[(f64, u64)], eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(invalid("Gibbs eta must be positive"));
    }
    let total: u64 = samples.iter().map(|s| s.1).sum();
    if total == 0 {
        return Err(invalid("Gibbs loss of an empty sample"));
    }
    let emin = samples
        .iter()
        .filter(|s| s.1 > 0)
        .map(|s| s.0)
        .fold(f64::INFINITY, f64::min);
    let z: f64 = samples
        .iter()
        .map(|&(e, c)| c as f64 * libm::exp(-eta * (e - emin)))
        .sum::<f64>()
        / total as f64;
    Ok(eta * emin - libm::log(z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Cvar { alpha: f64 },
    Gibbs { eta: f64 },
}

impl Loss {
    pub const DEFAULT_CVAR_ALPHA: f64 = 0.25;
    pub const DEFAULT_GIBBS_ETA: f64 = 1.0;

    pub fn cvar() -> Self {
        Loss::Cvar {
            alpha: Self::DEFAULT_CVAR_ALPHA,
        }
    }

    pub fn gibbs() -> Self {
        Loss::Gibbs {
            eta: Self::DEFAULT_GIBBS_ETA,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Loss::Cvar { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(invalid("CVaR alpha must lie in (0, 1]"))
            }
            Loss::Gibbs { eta } if !(eta > 0.0) => Err(invalid("Gibbs eta must be positive")),
            _ => Ok(()),
        }
    }

    pub fn of_samples(&self, samples: &[(f64, u64)]) -> Result<f64> {
        match *self {
            Loss::Cvar { alpha } => loss_cvar(samples, alpha),
            Loss::Gibbs { eta } => loss_gibbs(samples, eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    /// Losses use the exact output distribution.
    Exact,
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaConfig {
    pub layers: usize,
    pub shots: Shots,
    /// Shots drawn from the final state to build the reported distribution.
    pub readout_shots: usize,
    pub loss: Loss,
    pub optimizer: Method,
    pub tolerances: Tolerances,
    /// Box over `(γ_1..γ_p, β_1..β_p)`; `None` means `γ ∈ [0, 2π)`, `β ∈ [0, π)`.
    pub angle_bounds: Option<BoxBounds>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            layers: 7,
            shots: Shots::Exact,
            readout_shots: 1024,
            loss: Loss::cvar(),
            optimizer: Method::QuasiNewtonBounded,
            tolerances: Tolerances::default(),
            angle_bounds: None,
            restarts: 5,
            seed: 0,
        }
    }
}

impl QaoaConfig {
    pub fn with_layers(layers: usize) -> Self {
        Self {
            layers,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(invalid("QAOA needs at least one layer"));
        }
        if self.restarts == 0 {
            return Err(invalid("QAOA needs at least one restart"));
        }
        if self.readout_shots == 0 || self.shots == Shots::Sampled(0) {
            return Err(invalid("shot counts must be positive"));
        }
        self.loss.validate()?;
        if let Some(b) = &self.angle_bounds {
            if b.dim() != 2 * self.layers {
                return Err(invalid("angle bounds must have dimension 2p"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> BoxBounds {
        self.angle_bounds.clone().unwrap_or_else(|| {
            // Half-open boxes: stay a hair below the period.
            let p = self.layers;
            let mut upper = vec![2.0 * PI * (1.0 - 1e-12); p];
            upper.extend(core::iter::repeat_n(PI * (1.0 - 1e-12), p));
            BoxBounds::new(vec![0.0; 2 * p], upper).expect("default bounds are valid")
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaOutcome {
    pub modal_bits: Vec<bool>,
    /// Exact probability (exact mode) or empirical frequency (sampled mode) of `modal_bits`.
    pub modal_probability: f64,
    pub best_params: Vec<f64>,
    pub final_loss: f64,
    pub distribution: SampleDistribution,
    pub loss_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub evaluations: usize,
    /// Output state at `best_params`.
    pub state: Statevector,
}

/// Optimises the QAOA angles and returns the best of `config.restarts` runs.
pub fn run_qaoa(ising: &IsingModel, config: &QaoaConfig) -> Result<QaoaOutcome> {
    config.validate()?;
    let circuit = Circuit::new(ising)?;
    run_circuit(&circuit, config)
}

pub fn run_circuit(circuit: &Circuit, config: &QaoaConfig) -> Result<QaoaOutcome> {
    config.validate()?;
    let bounds = config.bounds();
    let dim = 2 * config.layers;

    struct Restart {
        x: Vec<f64>,
        f: f64,
        trace: Vec<(usize, f64)>,
        converged: bool,
    }
    let mut best: Option<Restart> = None;
    let mut evaluations = 0usize;

    for r in 0..config.restarts {
        let mut rng = seed::derived(config.seed, 2 * r as u64);
        let x0: Vec<f64> = (0..dim)
            .map(|k| {
                let (l, u) = (bounds.lower()[k], bounds.upper()[k]);
                if u > l {
                    rng.random_range(l..u)
                } else {
                    l
                }
            })
            .collect();
        // Sampled losses reuse one seed per restart so the objective is deterministic.
        let sampling_seed = seed::derive_seed(config.seed, 2 * r as u64 + 1);
        let mut evals = 0usize;
        let objective = |params: &[f64]| -> f64 {
            evals += 1;
            let Ok(state) = circuit.simulate(params) else {
                return f64::NAN;
            };
            match config.shots {
                Shots::Exact => circuit.exact_loss(&state.probabilities(), config.loss),
                Shots::Sampled(shots) => {
                    let mut srng = seed::rng(sampling_seed);
                    let Ok(dist) = state.sample(shots, &mut srng) else {
                        return f64::NAN;
                    };
                    let samples: Vec<(f64, u64)> = dist
                        .counts()
                        .iter()
                        .map(|(b, &c)| (circuit.energies[index_of_bits(b)], c))
                        .collect();
                    config.loss.of_samples(&samples).unwrap_or(f64::NAN)
                }
            }
        };
        let run =
            match optim::minimize(objective, &x0, &bounds, config.optimizer, config.tolerances) {
                Ok(res) => Restart {
                    x: res.x,
                    f: res.f,
                    trace: res.trace,
                    converged: res.converged,
                },
                Err(Error::NonFinite { last_x, last_f }) => Restart {
                    x: last_x,
                    f: last_f,
                    trace: Vec::new(),
                    converged: false,
                },
                Err(e) => return Err(e),
            };
        evaluations += evals;
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart ran");
    let state = circuit.simulate(&best.x)?;
    let mut readout_rng = seed::derived(config.seed, u64::MAX - 1);
    let distribution = state.sample(config.readout_shots, &mut readout_rng)?;

    let (modal_bits, modal_probability) = match config.shots {
        Shots::Exact => {
            let probs = state.probabilities();
            let pmax = probs.iter().copied().fold(0.0, f64::max);
            let k = (0..probs.len())
                .filter(|&k| probs[k] >= pmax - 1e-12)
                .min_by_key(|&k| k.reverse_bits())
                .expect("non-empty state");
            (bits_of_index(k, circuit.n), probs[k])
        }
        Shots::Sampled(_) => {
            let (bits, count) = distribution.modal().expect("at least one shot");
            (bits.to_vec(), count as f64 / distribution.total() as f64)
        }
    };

    Ok(QaoaOutcome {
        modal_bits,
        modal_probability,
        best_params: best.x,
        final_loss: best.f,
        distribution,
        loss_trace: best.trace,
        converged: best.converged,
        evaluations,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::QuboBuilder;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(n: usize, seed: u64) -> Statevector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = libm::sqrt(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
        amps.iter_mut().for_each(|a| *a /= norm);
        Statevector::from_amplitudes(amps).unwrap()
    }

    fn ising_from(n: usize, h: &[(usize, f64)], j: &[((usize, usize), f64)]) -> IsingModel {
        IsingModel::new(
            n,
            h.iter().copied().collect(),
            j.iter().copied().collect(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn plus_state() {
        let s = prepare_plus_state(1).unwrap();
        let r = 1.0 / libm::sqrt(2.0);
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a.re - r).abs() < 1e-15 && a.im == 0.0));
        let s = prepare_plus_state(2).unwrap();
        assert!(s.amplitudes().iter().all(|a| (a.re - 0.5).abs() < 1e-15));
        let s = prepare_plus_state(6).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(s
            .probabilities()
            .iter()
            .all(|p| (p - 1.0 / 64.0).abs() < 1e-15));
        assert!(matches!(
            prepare_plus_state(21),
            Err(Error::Capacity { .. })
        ));
        assert!(prepare_plus_state(0).is_err());
    }

    #[test]
    fn cost_layer_identities() {
        let ising = ising_from(2, &[(0, 0.3)], &[((1, 0), -0.8)]);
        let mut s = random_state(2, 1);
        let before = s.clone();
        s.apply_cost_layer(&ising, 0.0).unwrap();
        assert_eq!(s, before);

        let empty = IsingModel::new(2, BTreeMap::new(), BTreeMap::new(), 1.7).unwrap();
        s.apply_cost_layer(&empty, 0.9).unwrap();
        let phase = s.amplitudes()[0] / before.amplitudes()[0];
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
        assert!(s.apply_cost_layer(&ising_from(3, &[], &[]), 0.1).is_err());
    }

    // Oracle: per-basis-state phase e^{−iγE(x)} computed from ising_energy directly.
    #[test]
    fn cost_layer_matches_per_state_phase() {
        let ising = ising_from(2, &[(0, 0.4), (1, -1.1)], &[((1, 0), 0.7)]);
        let before = random_state(2, 9);
        let mut s = before.clone();
        s.apply_cost_layer(&ising, 0.7).unwrap();
        for k in 0..4 {
            let spins = crate::qubo::spins_of(&bits_of_index(k, 2));
            let e = ising.energy(&spins).unwrap();
            let expected = before.amplitudes()[k] * c(libm::cos(0.7 * e), -libm::sin(0.7 * e));
            assert!((s.amplitudes()[k] - expected).norm() < 1e-12);
            assert!((s.amplitudes()[k].norm() - before.amplitudes()[k].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn mixer_identities() {
        let mut s = random_state(3, 2);
        let before = s.clone();
        s.apply_mixer_layer(0.0);
        assert_eq!(s, before);

        let mut one = Statevector::basis(&[false]).unwrap();
        one.apply_mixer_layer(PI / 2.0);
        assert!((one.probability_of(&[true]).unwrap() - 1.0).abs() < 1e-12);
    }

    // Oracle: build the dense 8×8 unitary R_X(2β)^{⊗3} by Kronecker products and multiply.
    #[test]
    fn mixer_matches_dense_unitary() {
        let beta = 0.4;
        let rx = [
            [c(libm::cos(beta), 0.0), c(0.0, -libm::sin(beta))],
            [c(0.0, -libm::sin(beta)), c(libm::cos(beta), 0.0)],
        ];
        let mut u = vec![vec![c(0.0, 0.0); 8]; 8];
        for row in 0..8usize {
            for col in 0..8usize {
                let mut v = c(1.0, 0.0);
                for q in 0..3 {
                    v *= rx[(row >> q) & 1][(col >> q) & 1];
                }
                u[row][col] = v;
            }
        }
        let before = random_state(3, 4);
        let mut s = before.clone();
        s.apply_mixer_layer(beta);
        for row in 0..8 {
            let expected: Complex64 = (0..8)
                .map(|col| u[row][col] * before.amplitudes()[col])
                .sum();
            assert!((s.amplitudes()[row] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_angles_leave_uniform_state() {
        let ising = ising_from(3, &[(0, 1.0)], &[((2, 1), 0.5)]);
        let s = simulate(&ising, &[0.0; 8]).unwrap();
        assert!(s.probabilities().iter().all(|p| (p - 0.125).abs() < 1e-15));
        assert!(simulate(&ising, &[0.1, 0.2, 0.3]).is_err());
    }

    // Oracle: hand-evaluated 2×2 product R_X(2β)·diag(e^{−iγ}, e^{iγ})·|+⟩ for h = 1.
    #[test]
    fn single_qubit_closed_form() {
        let ising = ising_from(1, &[(0, 1.0)], &[]);
        let (g, b) = (PI / 4.0, PI / 8.0);
        let s = simulate(&ising, &[g, b]).unwrap();
        let r = 1.0 / libm::sqrt(2.0);
        let p0 = c(libm::cos(g), -libm::sin(g)) * r; // E(|0⟩) = h·(+1)
        let p1 = c(libm::cos(g), libm::sin(g)) * r; // E(|1⟩) = h·(−1)
        let (cb, sb) = (libm::cos(b), libm::sin(b));
        let a0 = p0 * cb + p1 * c(0.0, -sb);
        let a1 = p0 * c(0.0, -sb) + p1 * cb;
        assert!((s.amplitudes()[0] - a0).norm() < 1e-14);
        assert!((s.amplitudes()[1] - a1).norm() < 1e-14);
    }

    #[test]
    fn sampling_basics() {
        let s = Statevector::basis(&[true, false, true]).unwrap();
        let d = s.sample(500, &mut seed::rng(3)).unwrap();
        assert_eq!(d.counts().len(), 1);
        assert_eq!(d.counts()[&vec![true, false, true]], 500);
        assert!(s.sample(0, &mut seed::rng(3)).is_err());

        let plus = prepare_plus_state(4).unwrap();
        let a = plus.sample(1000, &mut seed::rng(42)).unwrap();
        let b = plus.sample(1000, &mut seed::rng(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts().values().sum::<u64>(), 1000);
    }

    // Binomial(1e5, 0.5): σ = √(1e5·0.25) ≈ 158; 5σ ≈ 791 counts.
    #[test]
    fn sampling_concentration() {
        let plus = prepare_plus_state(1).unwrap();
        let d = plus.sample(100_000, &mut seed::rng(17)).unwrap();
        let ones = d.counts().get(&vec![true]).copied().unwrap_or(0) as f64;
        let sigma = libm::sqrt(100_000.0 * 0.25);
        assert!((ones - 50_000.0).abs() <= 5.0 * sigma, "{ones}");
    }

    #[test]
    fn cvar_examples() {
        let e = [(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)];
        assert_eq!(loss_cvar(&e, 0.5).unwrap(), 1.5);
        assert_eq!(loss_cvar(&e, 1.0).unwrap(), 2.5);
        assert_eq!(loss_cvar(&e, 0.3).unwrap(), 1.5);
        assert!(loss_cvar(&[], 0.5).is_err());
        assert!(loss_cvar(&e, 0.0).is_err());
        assert!(loss_cvar(&e, 1.5).is_err());
        // Multiplicity counts toward the tail.
        assert_eq!(loss_cvar(&[(5.0, 1), (1.0, 3)], 0.5).unwrap(), 1.0);
        // A plain sum rounds this to 0.30000000000000004 / 3.
        let third = loss_cvar(&[(0.1, 1), (0.2, 1), (0.3, 1)], 1.0).unwrap();
        assert_eq!(third, 0.2);
    }

    #[test]
    fn gibbs_examples() {
        assert_eq!(loss_gibbs(&[(0.0, 5)], 1.0).unwrap(), 0.0);
        assert!((loss_gibbs(&[(1.0, 1)], 1.0).unwrap() - 1.0).abs() < 1e-15);
        let expected = -libm::log((1.0 + libm::exp(-2.0)) / 2.0);
        let got = loss_gibbs(&[(0.0, 1), (2.0, 1)], 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.566219).abs() < 1e-6);
        assert!(loss_gibbs(&[], 1.0).is_err());
        assert!(loss_gibbs(&[(0.0, 1)], 0.0).is_err());
        // Max-shift keeps large energies finite.
        assert!((loss_gibbs(&[(1000.0, 2)], 1.0).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn exact_losses_agree_with_sample_losses_on_point_masses() {
        let ising = ising_from(2, &[(0, 0.5), (1, -0.25)], &[((1, 0), 1.0)]);
        let circuit = Circuit::new(&ising).unwrap();
        let energies = circuit.energies().to_vec();
        let probs = [0.25; 4];
        let samples: Vec<(f64, u64)> = energies.iter().map(|&e| (e, 1)).collect();
        for loss in [
            Loss::Cvar { alpha: 0.5 },
            Loss::Cvar { alpha: 1.0 },
            Loss::Gibbs { eta: 0.7 },
        ] {
            let exact = circuit.exact_loss(&probs, loss);
            let sampled = loss.of_samples(&samples).unwrap();
            assert!(
                (exact - sampled).abs() < 1e-12,
                "{loss:?}: {exact} vs {sampled}"
            );
        }
    }

    #[test]
    fn zero_hamiltonian_modal_is_all_zero() {
        let ising = ising_from(3, &[], &[]);
        let cfg = QaoaConfig {
            layers: 1,
            restarts: 2,
            ..QaoaConfig::default()
        };
        let out = run_qaoa(&ising, &cfg).unwrap();
        assert_eq!(out.modal_bits, vec![false; 3]);
        assert!(out
            .state
            .probabilities()
            .iter()
            .all(|p| (p - 0.125).abs() < 1e-12));
    }

    // Oracle: a brute-force (γ, β) grid shows P(|1⟩) > 0.5 is attainable at p = 1.
    #[test]
    fn single_spin_ground_state_found() {
        let ising = ising_from(1, &[(0, 1.0)], &[]);
        let mut best = 0.0f64;
        for i in 0..64 {
            for j in 0..32 {
                let g = 2.0 * PI * f64::from(i) / 64.0;
                let b = PI * f64::from(j) / 32.0;
                best = best.max(
                    simulate(&ising, &[g, b])
                        .unwrap()
                        .probability_of(&[true])
                        .unwrap(),
                );
            }
        }
        assert!(best > 0.5);

        let cfg = QaoaConfig {
            layers: 1,
            seed: 5,
            ..QaoaConfig::default()
        };
        let out = run_qaoa(&ising, &cfg).unwrap();
        assert_eq!(out.modal_bits, vec![true]);
        assert!(out.modal_probability > 0.5);
        assert!(out.loss_trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn sampled_mode_and_determinism() {
        let mut b = QuboBuilder::new(3);
        b.add_linear(0, -1.0)
            .add_linear(1, 0.5)
            .add_quadratic(2, 0, -1.0)
            .add_linear(2, 0.2);
        let ising = b.build().unwrap().to_ising();
        let cfg = QaoaConfig {
            layers: 2,
            shots: Shots::Sampled(1024),
            // A sampled loss is piecewise constant, so finite differences see no slope.
            optimizer: Method::SimplexFallback,
            restarts: 2,
            seed: 11,
            ..QaoaConfig::default()
        };
        let a = run_qaoa(&ising, &cfg).unwrap();
        let b = run_qaoa(&ising, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.distribution.total(), 1024);
        assert_eq!(a.modal_bits, vec![true, false, true]);
    }

    #[test]
    fn config_validation() {
        let ising = ising_from(1, &[(0, 1.0)], &[]);
        let bad = [
            QaoaConfig {
                layers: 0,
                ..QaoaConfig::default()
            },
            QaoaConfig {
                restarts: 0,
                ..QaoaConfig::default()
            },
            QaoaConfig {
                loss: Loss::Cvar { alpha: 0.0 },
                ..QaoaConfig::default()
            },
            QaoaConfig {
                loss: Loss::Gibbs { eta: -1.0 },
                ..QaoaConfig::default()
            },
            QaoaConfig {
                angle_bounds: Some(BoxBounds::uniform(3, 0.0, 1.0).unwrap()),
                ..QaoaConfig::default()
            },
        ];
        for cfg in bad {
            assert!(run_qaoa(&ising, &cfg).is_err(), "{cfg:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn layers_are_unitary(n in 1usize..6, seed in any::<u64>(), gamma in -7.0..7.0f64, beta in -4.0..4.0f64) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut h = BTreeMap::new();
                let mut j = BTreeMap::new();
                for i in 0..n {
                    h.insert(i, rng.random_range(-2.0..2.0));
                    for k in 0..i {
                        if rng.random_bool(0.5) {
                            j.insert((i, k), rng.random_range(-2.0..2.0));
                        }
                    }
                }
                let ising = IsingModel::new(n, h, j, rng.random_range(-1.0..1.0)).unwrap();
                let mut s = random_state(n, seed);
                let mags: Vec<f64> = s.amplitudes().iter().map(|a| a.norm()).collect();
                s.apply_cost_layer(&ising, gamma).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
                for (a, m) in s.amplitudes().iter().zip(&mags) {
                    prop_assert!((a.norm() - m).abs() < 1e-12);
                }
                s.apply_mixer_layer(beta);
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn cvar_monotone_in_alpha(values in proptest::collection::vec((-100.0..100.0f64, 1u64..50), 1..40)) {
                let mut prev = f64::NEG_INFINITY;
                for step in 1..=100 {
                    let alpha = f64::from(step) / 100.0;
                    let v = loss_cvar(&values, alpha).unwrap();
                    prop_assert!(v >= prev, "alpha {alpha}: {v} < {prev}");
                    prev = v;
                }
            }
        }
    }
}
