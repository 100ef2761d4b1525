//! Synthetic barrel events: helices from the origin plus uniform noise.
//!
//! Each particle draws a signed curvature, an azimuth and a polar angle. Its
//! transverse path is a circle through the origin and z grows linearly with arc
//! length. A hit is placed wherever the path crosses a layer cylinder inside
//! the barrel, then smeared along the cylinder surface.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::seed;
use crate::tracking::Hit;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorGeometry {
    /// Ascending, in mm.
    pub layer_radii: Vec<f64>,
    pub z_half_length: f64,
    /// Gaussian smearing along rφ and z.
    pub hit_sigma: f64,
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        Self {
            layer_radii: alloc::vec![
                32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0
            ],
            z_half_length: 1000.0,
            hit_sigma: 0.1,
        }
    }
}

impl DetectorGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.layer_radii.is_empty() {
            return Err(invalid("geometry needs at least one layer"));
        }
        if !(self.layer_radii[0] > 0.0) || self.layer_radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "layer radii must be positive and strictly ascending",
            ));
        }
        if !(self.z_half_length > 0.0) || !(self.hit_sigma >= 0.0) {
            return Err(invalid(
                "z half length must be positive and smearing non-negative",
            ));
        }
        Ok(())
    }

    /// Keeps only the innermost `n` layers.
    pub fn truncated(&self, n: usize) -> Self {
        let mut g = self.clone();
        g.layer_radii.truncate(n);
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_particles: usize,
    /// Fraction of noise among all hits, in `[0, 1)`.
    pub noise_fraction: f64,
    /// Signed curvature interval in 1/mm.
    pub curvature_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub phi_range: (f64, f64),
    /// Probability of dropping each crossed-layer hit.
    pub inefficiency: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            noise_fraction: 0.0,
            curvature_range: (-0.001, 0.001),
            theta_range: (PI / 2.0 - 0.7, PI / 2.0 + 0.7),
            phi_range: (-PI, PI),
            inefficiency: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.curvature_range) || !ordered(self.theta_range) || !ordered(self.phi_range)
        {
            return Err(invalid("generator ranges must be finite and ordered"));
        }
        let (t0, t1) = self.theta_range;
        if t0 < 0.2 || t1 > PI - 0.2 {
            return Err(invalid(format!(
                "theta range must lie inside (0.2, π − 0.2), got ({t0}, {t1})"
            )));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(invalid("noise fraction must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.inefficiency) {
            return Err(invalid("inefficiency must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneratorDiagnostics {
    /// Particles that left no hit at all.
    pub skipped_particles: usize,
    pub true_hits: usize,
    pub noise_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedEvent {
    pub hits: Vec<Hit>,
    pub diagnostics: GeneratorDiagnostics,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Transverse point and arc length where a circle through the origin with
/// initial direction `phi0` and curvature `kappa` reaches radius `r`.
fn crossing(phi0: f64, kappa: f64, r: f64) -> Option<(f64, f64, f64)> {
    if kappa == 0.0 {
        return Some((r * libm::cos(phi0), r * libm::sin(phi0), r));
    }
    let half = 0.5 * r * kappa.abs();
    if half > 1.0 {
        return None;
    }
    let s = 2.0 * libm::asin(half) / kappa.abs();
    let turn = phi0 + kappa * s;
    let x = (libm::sin(turn) - libm::sin(phi0)) / kappa;
    let y = (libm::cos(phi0) - libm::cos(turn)) / kappa;
    Some((x, y, s))
}

/// One event with ids assigned in generation order, particles first.
pub fn generate_event(
    geometry: &DetectorGeometry,
    config: &GeneratorConfig,
) -> Result<GeneratedEvent> {
    geometry.validate()?;
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let smear = Normal::new(0.0, geometry.hit_sigma).map_err(|_| invalid("bad smearing width"))?;
    let mut hits = Vec::new();
    let mut diagnostics = GeneratorDiagnostics::default();
    let mut next_id = 1u64;

    for particle in 1..=config.n_particles as u64 {
        let kappa = uniform(&mut rng, config.curvature_range);
        let phi0 = uniform(&mut rng, config.phi_range);
        let theta = uniform(&mut rng, config.theta_range);
        let cot = libm::cos(theta) / libm::sin(theta);
        let before = hits.len();
        for (layer, &r) in geometry.layer_radii.iter().enumerate() {
            let Some((x, y, s)) = crossing(phi0, kappa, r) else {
                break;
            };
            let z = s * cot;
            if z.abs() > geometry.z_half_length {
                break;
            }
            // Draw every random number even for dropped hits so the other
            // particles do not shift when the inefficiency changes.
            let (dphi, dz) = (smear.sample(&mut rng) / r, smear.sample(&mut rng));
            let dropped = rng.random::<f64>() < config.inefficiency;
            if dropped {
                continue;
            }
            let phi = libm::atan2(y, x) + dphi;
            hits.push(Hit {
                id: next_id,
                x: r * libm::cos(phi),
                y: r * libm::sin(phi),
                z: z + dz,
                layer: layer as u32,
                truth_particle: particle,
            });
            next_id += 1;
        }
        if hits.len() == before {
            diagnostics.skipped_particles += 1;
        }
    }
    diagnostics.true_hits = hits.len();

    let noise =
        libm::round(config.noise_fraction / (1.0 - config.noise_fraction) * hits.len() as f64)
            as usize;
    let layers = geometry.layer_radii.len();
    for _ in 0..noise {
        let layer = rng.random_range(0..layers);
        let r = geometry.layer_radii[layer];
        let phi = rng.random_range(-PI..PI);
        let z = rng.random_range(-geometry.z_half_length..=geometry.z_half_length);
        hits.push(Hit {
            id: next_id,
            x: r * libm::cos(phi),
            y: r * libm::sin(phi),
            z,
            layer: layer as u32,
            truth_particle: 0,
        });
        next_id += 1;
    }
    diagnostics.noise_hits = noise;
    Ok(GeneratedEvent { hits, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::{build_doublets, build_triplets, true_doublets, Cuts};
    use alloc::collections::{BTreeMap, BTreeSet};

    fn clean(n: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_particles: n,
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn straight_track_is_radial() {
        let geo = DetectorGeometry {
            hit_sigma: 0.0,
            ..DetectorGeometry::default()
        };
        let cfg = GeneratorConfig {
            n_particles: 1,
            curvature_range: (0.0, 0.0),
            ..GeneratorConfig::default()
        };
        let ev = generate_event(&geo, &cfg).unwrap();
        assert_eq!(ev.hits.len(), 10);
        let phi = ev.hits[0].phi();
        for (l, h) in ev.hits.iter().enumerate() {
            assert_eq!(h.layer, l as u32);
            assert!((h.phi() - phi).abs() < 1e-12);
            // Collinear with the origin in 3D as well.
            assert!((h.z / h.r() - ev.hits[0].z / ev.hits[0].r()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_noise_means_all_truth() {
        let ev = generate_event(&DetectorGeometry::default(), &clean(50, 3)).unwrap();
        assert!(ev.hits.iter().all(|h| h.truth_particle != 0));
        assert_eq!(ev.diagnostics.noise_hits, 0);
        assert_eq!(ev.diagnostics.skipped_particles, 0);
    }

    #[test]
    fn hits_sit_on_their_layer() {
        let geo = DetectorGeometry::default();
        let cfg = GeneratorConfig {
            noise_fraction: 0.2,
            inefficiency: 0.1,
            ..clean(100, 9)
        };
        let ev = generate_event(&geo, &cfg).unwrap();
        for h in &ev.hits {
            let nominal = geo.layer_radii[h.layer as usize];
            assert!((h.r() - nominal).abs() <= 3.0 * geo.hit_sigma + 1e-9);
            assert!(h.z.abs() <= geo.z_half_length + 3.0 * geo.hit_sigma);
        }
        let ids: BTreeSet<u64> = ev.hits.iter().map(|h| h.id).collect();
        assert_eq!(ids.len(), ev.hits.len());
    }

    #[test]
    fn noise_count_follows_fraction() {
        let cfg = GeneratorConfig {
            noise_fraction: 0.1,
            ..clean(20, 1)
        };
        let ev = generate_event(&DetectorGeometry::default(), &cfg).unwrap();
        let d = &ev.diagnostics;
        assert_eq!(d.noise_hits, libm::round(d.true_hits as f64 / 9.0) as usize);
        let noise = ev.hits.iter().filter(|h| h.is_noise()).count();
        assert_eq!(noise, d.noise_hits);
    }

    #[test]
    fn deterministic() {
        let cfg = GeneratorConfig {
            noise_fraction: 0.1,
            inefficiency: 0.05,
            ..clean(100, 77)
        };
        let geo = DetectorGeometry::default();
        assert_eq!(
            generate_event(&geo, &cfg).unwrap(),
            generate_event(&geo, &cfg).unwrap()
        );
    }

    #[test]
    fn tight_curls_are_skipped() {
        let cfg = GeneratorConfig {
            n_particles: 3,
            curvature_range: (0.1, 0.1),
            ..GeneratorConfig::default()
        };
        let ev = generate_event(&DetectorGeometry::default(), &cfg).unwrap();
        assert!(ev.hits.is_empty());
        assert_eq!(ev.diagnostics.skipped_particles, 3);
    }

    #[test]
    fn invalid_configs() {
        let geo = DetectorGeometry::default();
        let bad = [
            GeneratorConfig {
                noise_fraction: 1.0,
                ..GeneratorConfig::default()
            },
            GeneratorConfig {
                theta_range: (0.1, 1.0),
                ..GeneratorConfig::default()
            },
            GeneratorConfig {
                curvature_range: (1.0, -1.0),
                ..GeneratorConfig::default()
            },
        ];
        for cfg in bad {
            assert!(generate_event(&geo, &cfg).is_err());
        }
        let flat = DetectorGeometry {
            layer_radii: alloc::vec![30.0, 30.0],
            ..DetectorGeometry::default()
        };
        assert!(generate_event(&flat, &GeneratorConfig::default()).is_err());
    }

    // Oracle: truth labels. Every consecutive same-particle pair must survive
    // the doublet windows, and every consecutive hit triple the triplet windows.
    #[test]
    fn default_cuts_keep_truth_segments() {
        let cuts = Cuts::default();
        let geo = DetectorGeometry::default();
        let mut total = (0usize, 0usize);
        let mut triplets_found = (0usize, 0usize);
        for seed in 0..10 {
            let cfg = GeneratorConfig {
                noise_fraction: 0.1,
                inefficiency: 0.05,
                ..clean(100, seed)
            };
            let hits = generate_event(&geo, &cfg).unwrap().hits;
            let truth = true_doublets(&hits);
            let doublets = build_doublets(&hits, &cuts);
            let found: BTreeSet<(u64, u64)> = doublets.iter().map(|d| (d.inner, d.outer)).collect();
            let layer: BTreeMap<u64, u32> = hits.iter().map(|h| (h.id, h.layer)).collect();
            let reachable: Vec<_> = truth
                .iter()
                .filter(|(a, b)| layer[b] - layer[a] <= cuts.max_layer_gap)
                .collect();
            total.0 += reachable.len();
            total.1 += reachable.iter().filter(|d| found.contains(d)).count();

            let triplets: BTreeSet<[u64; 3]> = build_triplets(&hits, &doublets, &cuts)
                .iter()
                .map(|t| t.hits)
                .collect();
            let mut by_particle: BTreeMap<u64, Vec<(u32, u64)>> = BTreeMap::new();
            for h in hits.iter().filter(|h| !h.is_noise()) {
                by_particle
                    .entry(h.truth_particle)
                    .or_default()
                    .push((h.layer, h.id));
            }
            for seq in by_particle.values_mut() {
                seq.sort_unstable();
                for w in seq.windows(3) {
                    if w[1].0 - w[0].0 <= cuts.max_layer_gap
                        && w[2].0 - w[1].0 <= cuts.max_layer_gap
                    {
                        triplets_found.0 += 1;
                        triplets_found.1 +=
                            usize::from(triplets.contains(&[w[0].1, w[1].1, w[2].1]));
                    }
                }
            }
        }
        assert!(total.1 as f64 >= 0.99 * total.0 as f64, "{total:?}");
        assert!(
            triplets_found.1 as f64 >= 0.99 * triplets_found.0 as f64,
            "{triplets_found:?}"
        );
    }
}
