//! SVG 1.1 event displays.
//!
//! Noise hits are gray, truth hits take a colour derived from their particle
//! id, and reconstructed tracks are drawn as black polylines through their
//! hits in layer order. Output depends only on the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qtrack_core::synthetic::DetectorGeometry;
use qtrack_core::tracking::{Hit, TrackCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Transverse plane, layers as circles.
    TransverseXY,
    /// `z` horizontal, transverse radius vertical, layers as lines.
    LongitudinalRZ,
}

impl Projection {
    pub fn tag(self) -> &'static str {
        match self {
            Projection::TransverseXY => "xy",
            Projection::LongitudinalRZ => "rz",
        }
    }
}

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Golden-angle hue walk so neighbouring particle ids get distinct colours.
pub fn particle_colour(particle: u64) -> String {
    let hue = (particle as f64 * 137.507_764_050_037_85).rem_euclid(360.0);
    let (s, v) = (0.75, 0.85);
    let c = v * s;
    let x = c * (1.0 - ((hue / 60.0).rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let byte = |u: f64| ((u + m) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

struct Frame {
    width: f64,
    height: f64,
    scale: f64,
    projection: Projection,
    z_half: f64,
}

impl Frame {
    fn new(geometry: &DetectorGeometry, hits: &[Hit], projection: Projection) -> Self {
        let r_max = geometry
            .layer_radii
            .iter()
            .copied()
            .chain(hits.iter().map(Hit::r))
            .fold(1.0, f64::max);
        let z_half = hits
            .iter()
            .map(|h| h.z.abs())
            .fold(geometry.z_half_length, f64::max)
            .max(1.0);
        match projection {
            Projection::TransverseXY => Self {
                width: CANVAS,
                height: CANVAS,
                scale: (CANVAS / 2.0 - MARGIN) / r_max,
                projection,
                z_half,
            },
            Projection::LongitudinalRZ => {
                let scale = (CANVAS - 2.0 * MARGIN) / (2.0 * z_half);
                Self {
                    width: CANVAS,
                    height: r_max * scale + 2.0 * MARGIN,
                    scale,
                    projection,
                    z_half,
                }
            }
        }
    }

    fn project(&self, h: &Hit) -> (f64, f64) {
        match self.projection {
            Projection::TransverseXY => (
                self.width / 2.0 + h.x * self.scale,
                self.height / 2.0 - h.y * self.scale,
            ),
            Projection::LongitudinalRZ => (
                MARGIN + (h.z + self.z_half) * self.scale,
                self.height - MARGIN - h.r() * self.scale,
            ),
        }
    }
}

/// Renders one projection of an event.
///
/// Track hits missing from `hits` are skipped, so a polyline has one vertex
/// per known hit.
pub fn render_event(
    geometry: &DetectorGeometry,
    hits: &[Hit],
    tracks: &[TrackCandidate],
    projection: Projection,
) -> String {
    let frame = Frame::new(geometry, hits, projection);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = frame.width,
        h = frame.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(
        s,
        r##"<g id="layers" fill="none" stroke="#c8c8c8" stroke-width="1">"##
    );
    for &radius in &geometry.layer_radii {
        match projection {
            Projection::TransverseXY => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#,
                    frame.width / 2.0,
                    frame.height / 2.0,
                    radius * frame.scale
                );
            }
            Projection::LongitudinalRZ => {
                let y = frame.height - MARGIN - radius * frame.scale;
                let half = geometry.z_half_length * frame.scale;
                let mid = frame.width / 2.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}"/>"#,
                    mid - half,
                    mid + half
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="hits">"#);
    for h in hits {
        let (x, y) = frame.project(h);
        let fill = if h.is_noise() {
            "#999999".to_string()
        } else {
            particle_colour(h.truth_particle)
        };
        let _ = writeln!(
            s,
            r#"<circle class="hit" cx="{x:.3}" cy="{y:.3}" r="2" fill="{fill}"/>"#,
        );
    }
    let _ = writeln!(s, "</g>");

    let by_id: BTreeMap<u64, &Hit> = hits.iter().map(|h| (h.id, h)).collect();
    let _ = writeln!(
        s,
        r#"<g id="tracks" fill="none" stroke="black" stroke-width="1" stroke-opacity="0.8">"#
    );
    for track in tracks {
        let points: Vec<String> = track
            .hits
            .iter()
            .filter_map(|id| by_id.get(id))
            .map(|h| {
                let (x, y) = frame.project(h);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="track" points="{}"/>"#,
            points.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
