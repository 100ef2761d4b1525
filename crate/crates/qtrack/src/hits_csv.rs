//! Hit tables as CSV: `hit_id,x,y,z,layer,particle_id`.
//!
//! Coordinates are written with 17 significant digits, so a write/read round
//! trip is exact. `particle_id` 0 marks noise.

use std::collections::BTreeSet;
use std::io::Read;

use qtrack_core::tracking::Hit;

use crate::error::ParseError;

pub const HEADER: [&str; 6] = ["hit_id", "x", "y", "z", "layer", "particle_id"];

pub fn write_hits(hits: &[Hit]) -> String {
    let mut out = String::with_capacity(64 * (hits.len() + 1));
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for h in hits {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{}\n",
            h.id, h.x, h.y, h.z, h.layer, h.truth_particle
        ));
    }
    out
}

fn cell<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    line: usize,
) -> Result<T, ParseError> {
    let raw = record.get(col).unwrap_or("");
    raw.trim().parse().map_err(|_| {
        ParseError::new(
            line,
            format!("column {}: cannot parse {raw:?}", HEADER[col]),
        )
    })
}

pub fn read_hits<R: Read>(input: R) -> Result<Vec<Hit>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| ParseError::new(1, e.to_string()))?
        .clone();
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    if columns.is_empty() || columns == [""] {
        return Err(ParseError::new(1, "missing header"));
    }
    for name in HEADER {
        if !columns.contains(&name) {
            return Err(ParseError::new(1, format!("missing column {name:?}")));
        }
    }
    if columns != HEADER {
        return Err(ParseError::new(
            1,
            format!("expected header {:?}, found {columns:?}", HEADER.join(",")),
        ));
    }

    let mut hits = Vec::new();
    let mut seen = BTreeSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ParseError::new(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != HEADER.len() {
            return Err(ParseError::new(
                line,
                format!("expected {} columns, found {}", HEADER.len(), record.len()),
            ));
        }
        let hit = Hit {
            id: cell(&record, 0, line)?,
            x: cell(&record, 1, line)?,
            y: cell(&record, 2, line)?,
            z: cell(&record, 3, line)?,
            layer: cell(&record, 4, line)?,
            truth_particle: cell(&record, 5, line)?,
        };
        if ![hit.x, hit.y, hit.z].iter().all(|v| v.is_finite()) {
            return Err(ParseError::new(line, "non-finite coordinate"));
        }
        if !seen.insert(hit.id) {
            return Err(ParseError::new(
                line,
                format!("duplicate hit_id {}", hit.id),
            ));
        }
        hits.push(hit);
    }
    Ok(hits)
}
