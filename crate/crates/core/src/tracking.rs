//! Doublets, triplets and the track-finding QUBO.
//!
//! Hits are joined into doublets on nearby layers and doublets sharing a middle
//! hit become triplets. Every triplet is one binary variable: its linear weight
//! rewards (or penalises) displacement from the origin, chained triplets attract
//! each other in proportion to how well their kinematics agree, and triplets
//! that cannot live on the same track repel. Selected triplets are merged into
//! tracks and scored on doublets against the truth labels.
//!
//! Units are millimetres and radians; curvature is in 1/mm.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::qubo::{QuboBuilder, QuboModel};

/// Largest exponent fed to `exp` in the bias weight.
pub const EXP_CLIP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// 0 is the innermost barrel layer.
    pub layer: u32,
    /// 0 marks noise.
    pub truth_particle: u64,
}

impl Hit {
    pub fn r(&self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn phi(&self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    pub fn is_noise(&self) -> bool {
        self.truth_particle == 0
    }
}

/// Candidate windows for doublets and triplets.
///
/// The defaults keep at least 99% of true segments of the default synthetic
/// generator while rejecting most random combinations. The doublet z window
/// is wide because z is linear in arc length, not in radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuts {
    /// Largest layer difference inside a doublet; 2 allows one hole.
    pub max_layer_gap: u32,
    pub phi_window: f64,
    /// Bound on `|Δz| / Δr`.
    pub slope_window: f64,
    /// Bound on the doublet line's z intercept at r = 0.
    pub doublet_z0_window: Option<f64>,
    /// Bound on the internal bend `|θ_outer − θ_inner|`.
    pub theta_window: f64,
    pub max_curvature: f64,
    pub max_d0: Option<f64>,
    pub max_z0: Option<f64>,
}

impl Default for Cuts {
    fn default() -> Self {
        Self {
            max_layer_gap: 2,
            phi_window: 0.2,
            slope_window: 2.0,
            doublet_z0_window: Some(50.0),
            theta_window: 0.03,
            max_curvature: 0.0015,
            max_d0: Some(8.0),
            max_z0: Some(2.0),
        }
    }
}

/// Sign of the exponent in the bias weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentSign {
    /// `e^{+|d0|/γ}`: displaced triplets get more negative weights.
    AsWritten,
    /// `e^{−|d0|/γ}`: displaced triplets approach `α + β`.
    Damped,
}

/// Which hit-sharing pairs receive the conflict penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictRule {
    /// Pairs that share hits but cannot lie on one track: two hits on the same
    /// layer, or a hit of one triplet falling between hits of the other.
    Inconsistent,
    /// Every shared-hit pair except a 4-hit chain.
    AnySharedHit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboBuildConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub conflict_penalty: f64,
    pub exponent_sign: ExponentSign,
    pub conflict_rule: ConflictRule,
    pub cuts: Cuts,
}

impl Default for QuboBuildConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.2,
            gamma: 1.0,
            lambda: 0.5,
            conflict_penalty: 1.0,
            exponent_sign: ExponentSign::AsWritten,
            conflict_rule: ConflictRule::Inconsistent,
            cuts: Cuts::default(),
        }
    }
}

impl QuboBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.lambda > 0.0) {
            return Err(invalid("gamma and lambda must be positive"));
        }
        let finite = [
            self.alpha,
            self.beta,
            self.gamma,
            self.lambda,
            self.conflict_penalty,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("bias and penalty parameters must be finite"));
        }
        let c = &self.cuts;
        let windows = [
            c.phi_window,
            c.slope_window,
            c.theta_window,
            c.max_curvature,
        ];
        if windows.iter().any(|w| !(*w >= 0.0)) || c.max_layer_gap == 0 {
            return Err(invalid(
                "cut windows must be non-negative and the layer gap at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    pub inner: u64,
    pub outer: u64,
    /// Polar angle of the segment from `(Δr, Δz)`, in `(0, π)`.
    pub theta: f64,
    pub phi: f64,
    pub layer_gap: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    /// Hit ids in ascending layer order.
    pub hits: [u64; 3],
    pub layers: [u32; 3],
    /// Signed 1/R, positive for a counter-clockwise turn.
    pub curvature: f64,
    pub theta_inner: f64,
    pub theta_outer: f64,
    pub delta_theta: f64,
    /// Layers strictly between the first and last hit with no hit of the triplet.
    pub holes: u32,
    pub d0: f64,
    pub z0: f64,
}

/// Circle-fit output for three hits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub curvature: f64,
    pub d0: f64,
    pub z0: f64,
    pub theta_inner: f64,
    pub theta_outer: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = libm::fmod(a, 2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn segment_theta(a: &Hit, b: &Hit) -> f64 {
    libm::atan2(b.r() - a.r(), b.z - a.z)
}

/// Intercept of the least-squares line `z = z0 + m s`.
fn line_intercept(s: [f64; 3], z: [f64; 3]) -> f64 {
    let ms = (s[0] + s[1] + s[2]) / 3.0;
    let mz = (z[0] + z[1] + z[2]) / 3.0;
    let sxx: f64 = s.iter().map(|v| (v - ms) * (v - ms)).sum();
    if sxx <= 0.0 {
        return mz;
    }
    let sxz: f64 = s.iter().zip(&z).map(|(a, b)| (a - ms) * (b - mz)).sum();
    mz - sxz / sxx * ms
}

/// Circumcircle kinematics of three hits, with a straight-line fallback when
/// the transverse points are collinear.
pub fn fit_circle_kinematics(a: &Hit, b: &Hit, c: &Hit) -> Kinematics {
    let theta_inner = segment_theta(a, b);
    let theta_outer = segment_theta(b, c);
    let (x1, y1, x2, y2, x3, y3) = (a.x, a.y, b.x, b.y, c.x, c.y);
    let z = [a.z, b.z, c.z];
    let (ux, uy) = (x2 - x1, y2 - y1);
    let (vx, vy) = (x3 - x2, y3 - y2);
    let cross = ux * vy - uy * vx;
    let scale = libm::hypot(ux, uy) * libm::hypot(vx, vy);

    if !(cross.abs() > 1e-12 * scale) {
        let (dx, dy) = (x3 - x1, y3 - y1);
        let len = libm::hypot(dx, dy);
        let (tx, ty) = if len > 0.0 {
            (dx / len, dy / len)
        } else {
            (1.0, 0.0)
        };
        let along = x1 * tx + y1 * ty;
        let (px, py) = (x1 - along * tx, y1 - along * ty);
        let s = [
            (x1 - px) * tx + (y1 - py) * ty,
            (x2 - px) * tx + (y2 - py) * ty,
            (x3 - px) * tx + (y3 - py) * ty,
        ];
        return Kinematics {
            curvature: 0.0,
            d0: (x1 * ty - y1 * tx).abs(),
            z0: line_intercept(s, z),
            theta_inner,
            theta_outer,
        };
    }

    let d = 2.0 * (x1 * (y2 - y3) + x2 * (y3 - y1) + x3 * (y1 - y2));
    let q1 = x1 * x1 + y1 * y1;
    let q2 = x2 * x2 + y2 * y2;
    let q3 = x3 * x3 + y3 * y3;
    let cx = (q1 * (y2 - y3) + q2 * (y3 - y1) + q3 * (y1 - y2)) / d;
    let cy = (q1 * (x3 - x2) + q2 * (x1 - x3) + q3 * (x2 - x1)) / d;
    let radius = libm::hypot(x1 - cx, y1 - cy);
    let dist = libm::hypot(cx, cy);

    // Closest approach to the beamline lies on the ray from the centre
    // towards the origin.
    let (ex, ey) = if dist > 0.0 {
        (-cx / dist, -cy / dist)
    } else {
        ((x1 - cx) / radius, (y1 - cy) / radius)
    };
    let phi_ca = libm::atan2(ey, ex);
    let angle = |x: f64, y: f64| libm::atan2(y - cy, x - cx);
    let p1 = wrap_angle(angle(x1, y1) - phi_ca);
    let p2 = p1 + wrap_angle(angle(x2, y2) - angle(x1, y1));
    let p3 = p2 + wrap_angle(angle(x3, y3) - angle(x2, y2));
    let mut s = [radius * p1, radius * p2, radius * p3];
    if s[2] < s[0] {
        s.iter_mut().for_each(|v| *v = -*v);
    }

    Kinematics {
        curvature: cross.signum() / radius,
        d0: (dist - radius).abs(),
        z0: line_intercept(s, z),
        theta_inner,
        theta_outer,
    }
}

fn index_hits(hits: &[Hit]) -> BTreeMap<u64, &Hit> {
    hits.iter().map(|h| (h.id, h)).collect()
}

/// Hit pairs on nearby layers passing the doublet windows, sorted by (inner, outer).
pub fn build_doublets(hits: &[Hit], cuts: &Cuts) -> Vec<Doublet> {
    let mut by_layer: BTreeMap<u32, Vec<&Hit>> = BTreeMap::new();
    for h in hits {
        by_layer.entry(h.layer).or_default().push(h);
    }
    let mut out = Vec::new();
    for (&layer, inners) in &by_layer {
        for gap in 1..=cuts.max_layer_gap {
            let Some(outers) = by_layer.get(&(layer + gap)) else {
                continue;
            };
            for a in inners {
                let (ra, pa) = (a.r(), a.phi());
                for b in outers {
                    let dr = b.r() - ra;
                    if !(dr > 0.0) {
                        continue;
                    }
                    if wrap_angle(b.phi() - pa).abs() > cuts.phi_window {
                        continue;
                    }
                    let dz = b.z - a.z;
                    if dz.abs() > cuts.slope_window * dr {
                        continue;
                    }
                    if let Some(w) = cuts.doublet_z0_window {
                        if (a.z - ra * dz / dr).abs() > w {
                            continue;
                        }
                    }
                    out.push(Doublet {
                        inner: a.id,
                        outer: b.id,
                        theta: libm::atan2(dr, dz),
                        phi: libm::atan2(b.y - a.y, b.x - a.x),
                        layer_gap: gap,
                    });
                }
            }
        }
    }
    out.sort_by_key(|d| (d.inner, d.outer));
    out
}

/// Triplet from three hits, without applying any cut.
pub fn make_triplet(a: &Hit, b: &Hit, c: &Hit) -> Triplet {
    let k = fit_circle_kinematics(a, b, c);
    Triplet {
        hits: [a.id, b.id, c.id],
        layers: [a.layer, b.layer, c.layer],
        curvature: k.curvature,
        theta_inner: k.theta_inner,
        theta_outer: k.theta_outer,
        delta_theta: (k.theta_outer - k.theta_inner).abs(),
        holes: c.layer - a.layer - 2,
        d0: k.d0,
        z0: k.z0,
    }
}

/// Doublet pairs sharing their middle hit and passing the triplet windows,
/// sorted by hit ids. Doublets referring to unknown hits are ignored.
pub fn build_triplets(hits: &[Hit], doublets: &[Doublet], cuts: &Cuts) -> Vec<Triplet> {
    let index = index_hits(hits);
    let mut starting: BTreeMap<u64, Vec<&Doublet>> = BTreeMap::new();
    for d in doublets {
        starting.entry(d.inner).or_default().push(d);
    }
    let mut out = Vec::new();
    for d1 in doublets {
        let Some(next) = starting.get(&d1.outer) else {
            continue;
        };
        for d2 in next {
            if (d2.theta - d1.theta).abs() > cuts.theta_window {
                continue;
            }
            let (Some(a), Some(b), Some(c)) = (
                index.get(&d1.inner),
                index.get(&d1.outer),
                index.get(&d2.outer),
            ) else {
                continue;
            };
            let t = make_triplet(a, b, c);
            if t.curvature.abs() > cuts.max_curvature {
                continue;
            }
            if cuts.max_d0.is_some_and(|m| t.d0 > m) || cuts.max_z0.is_some_and(|m| t.z0.abs() > m)
            {
                continue;
            }
            out.push(t);
        }
    }
    out.sort_by_key(|t| t.hits);
    out
}

/// Agreement of two chained triplets: 1 for identical kinematics without holes.
pub fn compatibility_s(ti: &Triplet, tj: &Triplet) -> f64 {
    let dk = (ti.curvature - tj.curvature).abs();
    let dt = ti.delta_theta.max(tj.delta_theta);
    let holes = 1.0 + f64::from(ti.holes) + f64::from(tj.holes);
    (1.0 - 0.5 * (dk + dt)) / (holes * holes)
}

/// Linear weight of a triplet from its displacement from the origin.
pub fn bias_weight(t: &Triplet, config: &QuboBuildConfig) -> f64 {
    let sign = match config.exponent_sign {
        ExponentSign::AsWritten => 1.0,
        ExponentSign::Damped => -1.0,
    };
    let term = |x: f64, scale: f64| 1.0 - libm::exp((sign * x.abs() / scale).min(EXP_CLIP));
    config.alpha * term(t.d0, config.gamma) + config.beta * term(t.z0, config.lambda)
}

/// How two triplets relate when both are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Disjoint,
    /// Consecutive pieces of one track overlapping in one hit.
    Continuation,
    /// A 4-hit chain: the outer pair of one is the inner pair of the other.
    Chain,
    Conflict,
}

fn is_chain(a: &Triplet, b: &Triplet) -> bool {
    let follows = |p: &Triplet, q: &Triplet| p.hits[1] == q.hits[0] && p.hits[2] == q.hits[1];
    follows(a, b) || follows(b, a)
}

/// True when the union of both hit sets is one hit per layer and each triplet
/// is a run of consecutive hits of that union.
fn on_one_track(a: &Triplet, b: &Triplet) -> bool {
    let mut union: Vec<(u32, u64)> = a
        .layers
        .iter()
        .zip(&a.hits)
        .chain(b.layers.iter().zip(&b.hits))
        .map(|(&l, &h)| (l, h))
        .collect();
    union.sort_unstable();
    union.dedup();
    if union.windows(2).any(|w| w[0].0 == w[1].0) {
        return false;
    }
    let contiguous = |t: &Triplet| {
        let start = union.iter().position(|&(_, h)| h == t.hits[0]);
        start.is_some_and(|s| s + 3 <= union.len() && (0..3).all(|k| union[s + k].1 == t.hits[k]))
    };
    contiguous(a) && contiguous(b)
}

pub fn relation(a: &Triplet, b: &Triplet, rule: ConflictRule) -> Relation {
    let shared = a.hits.iter().filter(|h| b.hits.contains(h)).count();
    if shared == 0 {
        return Relation::Disjoint;
    }
    if shared == 2 && is_chain(a, b) {
        return Relation::Chain;
    }
    match rule {
        ConflictRule::AnySharedHit => Relation::Conflict,
        ConflictRule::Inconsistent if shared == 1 && on_one_track(a, b) => Relation::Continuation,
        ConflictRule::Inconsistent => Relation::Conflict,
    }
}

/// QUBO whose variable `i` is `triplets[i]`.
pub fn build_qubo(triplets: &[Triplet], config: &QuboBuildConfig) -> Result<QuboModel> {
    config.validate()?;
    let mut builder = QuboBuilder::new(triplets.len());
    for (i, t) in triplets.iter().enumerate() {
        builder.add_linear(i, bias_weight(t, config));
    }
    let mut by_hit: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, t) in triplets.iter().enumerate() {
        for &h in &t.hits {
            by_hit.entry(h).or_default().push(i);
        }
    }
    let mut pairs = BTreeSet::new();
    for list in by_hit.values() {
        for (k, &i) in list.iter().enumerate() {
            for &j in &list[k + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    for (i, j) in pairs {
        let (a, b) = (&triplets[i], &triplets[j]);
        match relation(a, b, config.conflict_rule) {
            Relation::Chain => {
                builder.add_quadratic(i, j, -compatibility_s(a, b));
            }
            Relation::Conflict => {
                builder.add_quadratic(i, j, config.conflict_penalty);
            }
            Relation::Disjoint | Relation::Continuation => {}
        }
    }
    builder.build()
}

/// Doublets, triplets and the QUBO over those triplets for one event.
#[derive(Debug, Clone)]
pub struct EventQubo {
    pub doublets: Vec<Doublet>,
    pub triplets: Vec<Triplet>,
    pub model: QuboModel,
}

pub fn build_event(hits: &[Hit], config: &QuboBuildConfig) -> Result<EventQubo> {
    config.validate()?;
    let doublets = build_doublets(hits, &config.cuts);
    let triplets = build_triplets(hits, &doublets, &config.cuts);
    let model = build_qubo(&triplets, config)?;
    Ok(EventQubo {
        doublets,
        triplets,
        model,
    })
}

/// Triplets whose bit is set.
pub fn selected(triplets: &[Triplet], bits: &[bool]) -> Result<Vec<Triplet>> {
    if bits.len() != triplets.len() {
        return Err(invalid("solution length does not match the triplet count"));
    }
    Ok(triplets
        .iter()
        .zip(bits)
        .filter(|(_, &b)| b)
        .map(|(t, _)| *t)
        .collect())
}

/// Hit ids ordered by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackCandidate {
    pub hits: Vec<u64>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the chain graph, each flattened to a layer-ordered
/// hit list. Output is ordered by first hit.
pub fn assemble_tracks(selected: &[Triplet]) -> Vec<TrackCandidate> {
    let n = selected.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut by_pair: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, t) in selected.iter().enumerate() {
        by_pair.entry((t.hits[0], t.hits[1])).or_default().push(i);
    }
    for (i, t) in selected.iter().enumerate() {
        if let Some(next) = by_pair.get(&(t.hits[1], t.hits[2])) {
            for &j in next {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<(u32, u64)>> = BTreeMap::new();
    for (i, t) in selected.iter().enumerate() {
        let root = find(&mut parent, i);
        let set = groups.entry(root).or_default();
        for k in 0..3 {
            set.insert((t.layers[k], t.hits[k]));
        }
    }
    let mut tracks: Vec<TrackCandidate> = groups
        .into_values()
        .map(|set| TrackCandidate {
            hits: set.into_iter().map(|(_, h)| h).collect(),
        })
        .collect();
    tracks.sort_by(|a, b| a.hits.cmp(&b.hits));
    tracks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub efficiency: f64,
    pub purity: f64,
    pub efficiency_defined: bool,
    pub purity_defined: bool,
}

impl TrackingMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, false)
            } else {
                (num as f64 / den as f64, true)
            }
        };
        let (efficiency, efficiency_defined) = ratio(tp, tp + fn_);
        let (purity, purity_defined) = ratio(tp, tp + fp);
        Self {
            tp,
            fp,
            fn_,
            efficiency,
            purity,
            efficiency_defined,
            purity_defined,
        }
    }
}

/// Consecutive hit pairs of every truth particle, ordered by layer.
pub fn true_doublets(hits: &[Hit]) -> BTreeSet<(u64, u64)> {
    let mut tracks: BTreeMap<u64, Vec<(u32, u64)>> = BTreeMap::new();
    for h in hits.iter().filter(|h| !h.is_noise()) {
        tracks
            .entry(h.truth_particle)
            .or_default()
            .push((h.layer, h.id));
    }
    let mut out = BTreeSet::new();
    for mut seq in tracks.into_values() {
        seq.sort_unstable();
        for w in seq.windows(2) {
            out.insert((w[0].1, w[1].1));
        }
    }
    out
}

/// Doublet-level efficiency and purity of `tracks` against the truth labels.
pub fn score(tracks: &[TrackCandidate], hits: &[Hit]) -> TrackingMetrics {
    let truth = true_doublets(hits);
    let reco: BTreeSet<(u64, u64)> = tracks
        .iter()
        .flat_map(|t| t.hits.windows(2).map(|w| (w[0], w[1])))
        .collect();
    let tp = reco.intersection(&truth).count();
    TrackingMetrics::from_counts(tp, reco.len() - tp, truth.len() - tp)
}

/// Bits selecting exactly the triplets made of consecutive hits of one particle.
pub fn truth_selection(triplets: &[Triplet], hits: &[Hit]) -> Vec<bool> {
    let truth = true_doublets(hits);
    triplets
        .iter()
        .map(|t| truth.contains(&(t.hits[0], t.hits[1])) && truth.contains(&(t.hits[1], t.hits[2])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::brute_force;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hit(id: u64, x: f64, y: f64, z: f64, layer: u32, particle: u64) -> Hit {
        Hit {
            id,
            x,
            y,
            z,
            layer,
            truth_particle: particle,
        }
    }

    fn bare(hits: [u64; 3], curvature: f64, delta_theta: f64, holes: u32) -> Triplet {
        Triplet {
            hits,
            layers: [hits[0] as u32, hits[1] as u32, hits[2] as u32],
            curvature,
            theta_inner: 1.0,
            theta_outer: 1.0 + delta_theta,
            delta_theta,
            holes,
            d0: 0.0,
            z0: 0.0,
        }
    }

    #[test]
    fn same_layer_hits_make_no_doublet() {
        let hits = [hit(1, 30.0, 0.0, 0.0, 0, 1), hit(2, 30.0, 1.0, 0.0, 0, 1)];
        assert!(build_doublets(&hits, &Cuts::default()).is_empty());
    }

    #[test]
    fn radial_pair_makes_one_doublet() {
        let hits = [hit(1, 30.0, 0.0, 0.0, 0, 1), hit(2, 70.0, 0.0, 5.0, 1, 1)];
        let d = build_doublets(&hits, &Cuts::default());
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].inner, d[0].outer, d[0].layer_gap), (1, 2, 1));
        assert!(d[0].theta > 0.0 && d[0].theta < PI);
    }

    #[test]
    fn doublet_windows() {
        let cuts = Cuts::default();
        let a = hit(1, 30.0, 0.0, 0.0, 0, 1);
        let wide_phi = hit(2, 70.0 * libm::cos(0.3), 70.0 * libm::sin(0.3), 0.0, 1, 1);
        let steep = hit(3, 70.0, 0.0, 100.0, 1, 1);
        let far = hit(4, 200.0, 0.0, 0.0, 3, 1);
        assert!(build_doublets(&[a, wide_phi], &cuts).is_empty());
        assert!(build_doublets(&[a, steep], &cuts).is_empty());
        assert!(build_doublets(&[a, far], &cuts).is_empty());
    }

    #[test]
    fn doublets_without_a_shared_hit_make_no_triplet() {
        let hits = [
            hit(1, 30.0, 0.0, 0.0, 0, 1),
            hit(2, 70.0, 0.0, 0.0, 1, 1),
            hit(3, 110.0, 0.0, 0.0, 2, 1),
            hit(4, 170.0, 0.0, 0.0, 3, 1),
        ];
        let d = [
            Doublet {
                inner: 1,
                outer: 2,
                theta: PI / 2.0,
                phi: 0.0,
                layer_gap: 1,
            },
            Doublet {
                inner: 3,
                outer: 4,
                theta: PI / 2.0,
                phi: 0.0,
                layer_gap: 1,
            },
        ];
        assert!(build_triplets(&hits, &d, &Cuts::default()).is_empty());
    }

    #[test]
    fn collinear_radial_triplet() {
        let hits = [
            hit(1, 30.0, 0.0, 0.0, 0, 1),
            hit(2, 70.0, 0.0, 0.0, 1, 1),
            hit(3, 110.0, 0.0, 0.0, 2, 1),
        ];
        let cuts = Cuts::default();
        let t = build_triplets(&hits, &build_doublets(&hits, &cuts), &cuts);
        assert_eq!(t.len(), 1);
        let t = t[0];
        assert_eq!(t.hits, [1, 2, 3]);
        assert_eq!(t.curvature, 0.0);
        assert!(t.d0.abs() < 1e-12);
        assert!(t.z0.abs() < 1e-12);
        assert_eq!(t.delta_theta, 0.0);
        assert!((t.theta_inner - PI / 2.0).abs() < 1e-15);
        assert_eq!(t.holes, 0);
    }

    #[test]
    fn circle_through_origin() {
        let on = |phi: f64, z: f64, id: u64| {
            hit(
                id,
                100.0 + 100.0 * libm::cos(phi),
                100.0 * libm::sin(phi),
                z,
                id as u32,
                1,
            )
        };
        // Points at angles 2.5, 2.0, 1.5 around the centre, moving away from the origin.
        let (a, b, c) = (on(2.5, 1.0, 0), on(2.0, 2.0, 1), on(1.5, 3.0, 2));
        let k = fit_circle_kinematics(&a, &b, &c);
        assert!((k.curvature.abs() - 0.01).abs() < 1e-12);
        assert!(k.d0 < 1e-9);
        // z rises by 1 per 50 mm of arc measured from the closest approach.
        let s0 = 100.0 * (PI - 2.5);
        let expect = 1.0 - s0 / 50.0;
        assert!((k.z0 - expect).abs() < 1e-9, "{} vs {expect}", k.z0);
    }

    #[test]
    fn curvature_sign_follows_turn() {
        let a = hit(0, 30.0, 0.0, 0.0, 0, 1);
        let b = hit(1, 70.0, 1.0, 0.0, 1, 1);
        let c = hit(2, 110.0, 4.0, 0.0, 2, 1);
        assert!(fit_circle_kinematics(&a, &b, &c).curvature > 0.0);
        let flip = |h: Hit| Hit { y: -h.y, ..h };
        assert!(fit_circle_kinematics(&flip(a), &flip(b), &flip(c)).curvature < 0.0);
    }

    #[test]
    fn displaced_line_d0() {
        let a = hit(0, 30.0, 5.0, 0.0, 0, 1);
        let b = hit(1, 70.0, 5.0, 0.0, 1, 1);
        let c = hit(2, 110.0, 5.0, 0.0, 2, 1);
        let k = fit_circle_kinematics(&a, &b, &c);
        assert_eq!(k.curvature, 0.0);
        assert!((k.d0 - 5.0).abs() < 1e-12);
    }

    // Oracle: intersect the perpendicular bisectors of (p1,p2) and (p2,p3).
    fn bisector_centre(p: [(f64, f64); 3]) -> (f64, f64) {
        let m1 = ((p[0].0 + p[1].0) / 2.0, (p[0].1 + p[1].1) / 2.0);
        let m2 = ((p[1].0 + p[2].0) / 2.0, (p[1].1 + p[2].1) / 2.0);
        let d1 = (p[1].0 - p[0].0, p[1].1 - p[0].1);
        let d2 = (p[2].0 - p[1].0, p[2].1 - p[1].1);
        // d1·(c − m1) = 0 and d2·(c − m2) = 0, solved by Cramer's rule.
        let r1 = d1.0 * m1.0 + d1.1 * m1.1;
        let r2 = d2.0 * m2.0 + d2.1 * m2.1;
        let det = d1.0 * d2.1 - d1.1 * d2.0;
        ((r1 * d2.1 - d1.1 * r2) / det, (d1.0 * r2 - r1 * d2.0) / det)
    }

    #[test]
    fn circumcentre_matches_bisector_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p: [(f64, f64); 3] = core::array::from_fn(|_| {
                (
                    rng.random_range(-500.0..500.0),
                    rng.random_range(-500.0..500.0),
                )
            });
            let h: Vec<Hit> = p
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| hit(i as u64, x, y, 0.0, i as u32, 1))
                .collect();
            let k = fit_circle_kinematics(&h[0], &h[1], &h[2]);
            if k.curvature == 0.0 {
                continue;
            }
            let (cx, cy) = bisector_centre(p);
            let r = 1.0 / k.curvature.abs();
            for &(x, y) in &p {
                let dist = libm::hypot(x - cx, y - cy);
                assert!((dist - r).abs() < 1e-9 * r.max(1.0), "{dist} vs {r}");
            }
            let d0 = (libm::hypot(cx, cy) - r).abs();
            assert!((k.d0 - d0).abs() < 1e-9 * r.max(1.0));
        }
    }

    #[test]
    fn compatibility_values() {
        let t = bare([0, 1, 2], 0.001, 0.0, 0);
        let u = bare([1, 2, 3], 0.001, 0.0, 0);
        assert_eq!(compatibility_s(&t, &u), 1.0);
        let th = bare([0, 1, 2], 0.001, 0.0, 1);
        let uh = bare([1, 2, 3], 0.001, 0.0, 1);
        assert_eq!(compatibility_s(&th, &uh), 1.0 / 9.0);
        let a = bare([0, 1, 2], 0.4, 0.1, 0);
        let b = bare([1, 2, 3], 0.0, 0.3, 0);
        let expect = 1.0 - 0.5 * (0.4 + 0.3);
        assert!((compatibility_s(&a, &b) - expect).abs() < 1e-15);
    }

    #[test]
    fn bias_values() {
        let mut cfg = QuboBuildConfig::default();
        let mut t = bare([0, 1, 2], 0.0, 0.0, 0);
        assert_eq!(bias_weight(&t, &cfg), 0.0);
        cfg.exponent_sign = ExponentSign::Damped;
        assert_eq!(bias_weight(&t, &cfg), 0.0);

        cfg.exponent_sign = ExponentSign::AsWritten;
        t.d0 = 1.0;
        let expect = 0.5 * (1.0 - core::f64::consts::E);
        assert!((bias_weight(&t, &cfg) - expect).abs() < 1e-12);
        assert!((bias_weight(&t, &cfg) + 0.859141).abs() < 1e-6);

        cfg.exponent_sign = ExponentSign::Damped;
        t.d0 = f64::INFINITY;
        t.z0 = 1e6;
        assert!((bias_weight(&t, &cfg) - 0.7).abs() < 1e-12);

        cfg.exponent_sign = ExponentSign::AsWritten;
        t.d0 = 1e9;
        assert!(bias_weight(&t, &cfg).is_finite());
    }

    #[test]
    fn config_validation() {
        let bad = [
            QuboBuildConfig {
                gamma: 0.0,
                ..QuboBuildConfig::default()
            },
            QuboBuildConfig {
                lambda: -1.0,
                ..QuboBuildConfig::default()
            },
            QuboBuildConfig {
                alpha: f64::NAN,
                ..QuboBuildConfig::default()
            },
        ];
        for cfg in bad {
            assert!(build_qubo(&[], &cfg).is_err());
        }
    }

    #[test]
    fn qubo_coefficients() {
        let cfg = QuboBuildConfig::default();
        let disjoint = [bare([0, 1, 2], 0.0, 0.0, 0), bare([3, 4, 5], 0.0, 0.0, 0)];
        assert!(build_qubo(&disjoint, &cfg).unwrap().quadratic().is_empty());

        let chain = [bare([0, 1, 2], 0.0, 0.0, 0), bare([1, 2, 3], 0.0, 0.0, 0)];
        assert_eq!(
            build_qubo(&chain, &cfg).unwrap().quadratic_coeff(0, 1),
            -1.0
        );

        // Two triplets leaving the same hit towards different second hits.
        let mut fork = bare([0, 1, 2], 0.0, 0.0, 0);
        let mut other = bare([0, 7, 8], 0.0, 0.0, 0);
        fork.layers = [0, 1, 2];
        other.layers = [0, 1, 2];
        assert_eq!(
            build_qubo(&[fork, other], &cfg)
                .unwrap()
                .quadratic_coeff(0, 1),
            1.0
        );

        let strict = QuboBuildConfig {
            conflict_rule: ConflictRule::AnySharedHit,
            ..cfg.clone()
        };
        let cont = [bare([0, 1, 2], 0.0, 0.0, 0), bare([2, 3, 4], 0.0, 0.0, 0)];
        assert_eq!(
            build_qubo(&cont, &strict).unwrap().quadratic_coeff(0, 1),
            1.0
        );
        assert_eq!(build_qubo(&cont, &cfg).unwrap().quadratic_coeff(0, 1), 0.0);
        assert!(build_qubo(&cont, &cfg).unwrap().quadratic().is_empty());
    }

    #[test]
    fn relations() {
        let r = ConflictRule::Inconsistent;
        let t = |h: [u64; 3]| bare(h, 0.0, 0.0, 0);
        assert_eq!(relation(&t([0, 1, 2]), &t([1, 2, 3]), r), Relation::Chain);
        assert_eq!(relation(&t([1, 2, 3]), &t([0, 1, 2]), r), Relation::Chain);
        assert_eq!(
            relation(&t([0, 1, 2]), &t([2, 3, 4]), r),
            Relation::Continuation
        );
        assert_eq!(
            relation(&t([0, 1, 2]), &t([3, 4, 5]), r),
            Relation::Disjoint
        );
        // A hole triplet skipping a hit the other one uses.
        assert_eq!(
            relation(&t([0, 1, 2]), &t([0, 1, 3]), r),
            Relation::Conflict
        );
        assert_eq!(
            relation(&t([0, 1, 2]), &t([0, 2, 3]), r),
            Relation::Conflict
        );
        assert_eq!(relation(&t([0, 1, 3]), &t([1, 3, 4]), r), Relation::Chain);
        assert_eq!(
            relation(&t([0, 1, 2]), &t([2, 3, 4]), ConflictRule::AnySharedHit),
            Relation::Conflict
        );
    }

    #[test]
    fn assembly() {
        let one = [bare([0, 1, 2], 0.0, 0.0, 0)];
        assert_eq!(
            assemble_tracks(&one),
            vec![TrackCandidate {
                hits: vec![0, 1, 2]
            }]
        );
        let two = [bare([1, 2, 3], 0.0, 0.0, 0), bare([0, 1, 2], 0.0, 0.0, 0)];
        assert_eq!(
            assemble_tracks(&two),
            vec![TrackCandidate {
                hits: vec![0, 1, 2, 3]
            }]
        );
        let apart = [bare([0, 1, 2], 0.0, 0.0, 0), bare([5, 6, 7], 0.0, 0.0, 0)];
        assert_eq!(assemble_tracks(&apart).len(), 2);
        assert!(assemble_tracks(&[]).is_empty());
    }

    fn straight_event(particles: u64, layers: u32) -> Vec<Hit> {
        let radii = [32.0, 72.0, 116.0, 172.0, 260.0, 360.0];
        let mut hits = Vec::new();
        let mut id = 1;
        for p in 1..=particles {
            let phi = p as f64 * 1.1;
            for l in 0..layers {
                let r = radii[l as usize];
                hits.push(hit(
                    id,
                    r * libm::cos(phi),
                    r * libm::sin(phi),
                    0.3 * r,
                    l,
                    p,
                ));
                id += 1;
            }
        }
        hits
    }

    #[test]
    fn scoring() {
        let hits = straight_event(2, 4);
        let perfect: Vec<TrackCandidate> = [vec![1, 2, 3, 4], vec![5, 6, 7, 8]]
            .into_iter()
            .map(|hits| TrackCandidate { hits })
            .collect();
        let m = score(&perfect, &hits);
        assert_eq!((m.tp, m.fp, m.fn_), (6, 0, 0));
        assert_eq!((m.efficiency, m.purity), (1.0, 1.0));

        let empty = score(&[], &hits);
        assert_eq!(empty.efficiency, 0.0);
        assert!(empty.efficiency_defined);
        assert!(!empty.purity_defined);

        let m = TrackingMetrics::from_counts(7, 2, 1);
        assert_eq!(m.efficiency, 0.875);
        assert!((m.purity - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn clean_event_ground_state_is_truth() {
        let hits = straight_event(2, 5);
        let cfg = QuboBuildConfig::default();
        let ev = build_event(&hits, &cfg).unwrap();
        assert!(ev.triplets.len() <= 20, "{}", ev.triplets.len());
        let best = brute_force(&ev.model).unwrap().best;
        assert_eq!(best.bits, truth_selection(&ev.triplets, &hits));
        let tracks = assemble_tracks(&selected(&ev.triplets, &best.bits).unwrap());
        let m = score(&tracks, &hits);
        assert_eq!((m.efficiency, m.purity), (1.0, 1.0));
        assert!(selected(&ev.triplets, &[true]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn triplet() -> impl Strategy<Value = Triplet> {
            (-0.01f64..0.01, 0.0f64..0.1, 0u32..3).prop_map(|(k, dt, h)| bare([0, 1, 2], k, dt, h))
        }

        proptest! {
            #[test]
            fn compatibility_symmetric_and_bounded(a in triplet(), b in triplet()) {
                let s = compatibility_s(&a, &b);
                prop_assert_eq!(s, compatibility_s(&b, &a));
                prop_assert!(s <= 1.0);
            }

            #[test]
            fn centred_bias_is_zero(alpha in -5.0f64..5.0, beta in -5.0f64..5.0, g in 0.01f64..10.0, l in 0.01f64..10.0) {
                let cfg = QuboBuildConfig { alpha, beta, gamma: g, lambda: l, ..QuboBuildConfig::default() };
                prop_assert_eq!(bias_weight(&bare([0, 1, 2], 0.0, 0.0, 0), &cfg), 0.0);
            }

            #[test]
            fn quadratic_terms_are_trichotomous(
                raw in proptest::collection::vec((0u64..8, 0u64..8, 0u64..8), 1..15),
                rule in prop_oneof![Just(ConflictRule::Inconsistent), Just(ConflictRule::AnySharedHit)],
            ) {
                // Hit id doubles as its layer so every triplet is layer-ordered.
                let mut ts: Vec<Triplet> = raw
                    .into_iter()
                    .filter_map(|(a, b, c)| {
                        let mut h = [a, b, c];
                        h.sort_unstable();
                        (h[0] < h[1] && h[1] < h[2]).then(|| bare(h, 0.0, 0.02, h[2] as u32 - h[0] as u32 - 2))
                    })
                    .collect();
                ts.sort_by_key(|t| t.hits);
                ts.dedup_by_key(|t| t.hits);
                let cfg = QuboBuildConfig { conflict_rule: rule, ..QuboBuildConfig::default() };
                let m = build_qubo(&ts, &cfg).unwrap();
                for (&(i, j), &b) in m.quadratic() {
                    let s = compatibility_s(&ts[i], &ts[j]);
                    prop_assert!(b == cfg.conflict_penalty || b == -s);
                }
            }

            #[test]
            fn metric_bounds(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
                let m = TrackingMetrics::from_counts(tp, fp, fn_);
                prop_assert!((0.0..=1.0).contains(&m.efficiency));
                prop_assert!((0.0..=1.0).contains(&m.purity));
                if fp == 0 && tp > 0 {
                    prop_assert_eq!(m.purity, 1.0);
                }
            }
        }
    }
}
