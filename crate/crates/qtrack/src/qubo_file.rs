//! Text format for QUBO models with an optional triplet mapping.
//!
//! ```text
//! # comment
//! n 3 offset 0.0
//! lin 0 -5.0e-1
//! quad 1 0 2.5e-1
//! triplet 0 17 42 88
//! ```
//!
//! `quad` lines need `j < i`. Values are printed in `{:.16e}` form so a
//! write/read round trip reproduces every bit of every double.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use qtrack_core::tracking::Triplet;
use qtrack_core::QuboModel;

use crate::error::ParseError;

/// Hit ids of the triplet behind each variable, by variable index.
pub type TripletMap = Vec<[u64; 3]>;

#[derive(Debug, Clone, PartialEq)]
pub struct QuboFile {
    pub model: QuboModel,
    /// Empty, or one entry per variable.
    pub mapping: TripletMap,
}

pub fn mapping_of(triplets: &[Triplet]) -> TripletMap {
    triplets.iter().map(|t| t.hits).collect()
}

pub fn write_qubo(model: &QuboModel, mapping: &[[u64; 3]]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n {} offset {:.16e}", model.n(), model.offset());
    for (i, v) in model.linear() {
        let _ = writeln!(out, "lin {i} {v:.16e}");
    }
    for ((i, j), v) in model.quadratic() {
        let _ = writeln!(out, "quad {i} {j} {v:.16e}");
    }
    for (k, [a, b, c]) in mapping.iter().enumerate() {
        let _ = writeln!(out, "triplet {k} {a} {b} {c}");
    }
    out
}

fn field<'a>(parts: &[&'a str], k: usize, line: usize, what: &str) -> Result<&'a str, ParseError> {
    parts
        .get(k)
        .copied()
        .ok_or_else(|| ParseError::new(line, format!("missing {what}")))
}

fn parse_real(s: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = s
        .parse()
        .map_err(|_| ParseError::new(line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("non-finite value: {s:?}")));
    }
    Ok(v)
}

fn parse_index(s: &str, n: usize, line: usize) -> Result<usize, ParseError> {
    let i: usize = s
        .parse()
        .map_err(|_| ParseError::new(line, format!("not an index: {s:?}")))?;
    if i >= n {
        return Err(ParseError::new(
            line,
            format!("index {i} out of range for n = {n}"),
        ));
    }
    Ok(i)
}

pub fn parse_qubo(text: &str) -> Result<QuboFile, ParseError> {
    let mut header: Option<(usize, f64)> = None;
    let mut linear = BTreeMap::new();
    let mut quadratic = BTreeMap::new();
    let mut mapping: BTreeMap<usize, [u64; 3]> = BTreeMap::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parts: Vec<&str> = content.split_whitespace().collect();
        let Some((n, _)) = header else {
            if parts.len() != 4 || parts[0] != "n" || parts[2] != "offset" {
                return Err(ParseError::new(
                    line,
                    "expected header `n <count> offset <value>`",
                ));
            }
            let n = parts[1]
                .parse()
                .map_err(|_| ParseError::new(line, format!("bad variable count {:?}", parts[1])))?;
            header = Some((n, parse_real(parts[3], line)?));
            continue;
        };
        let arity = match parts[0] {
            "lin" => 3,
            "quad" => 4,
            "triplet" => 5,
            "n" => return Err(ParseError::new(line, "duplicate header")),
            other => return Err(ParseError::new(line, format!("unknown record {other:?}"))),
        };
        if parts.len() != arity {
            return Err(ParseError::new(
                line,
                format!(
                    "`{}` takes {} fields, found {}",
                    parts[0],
                    arity - 1,
                    parts.len() - 1
                ),
            ));
        }
        match parts[0] {
            "lin" => {
                let i = parse_index(field(&parts, 1, line, "index")?, n, line)?;
                let v = parse_real(parts[2], line)?;
                if linear.insert(i, v).is_some() {
                    return Err(ParseError::new(line, format!("duplicate linear term {i}")));
                }
            }
            "quad" => {
                let i = parse_index(parts[1], n, line)?;
                let j = parse_index(parts[2], n, line)?;
                if j >= i {
                    return Err(ParseError::new(
                        line,
                        format!("quad needs j < i, got {i} {j}"),
                    ));
                }
                let v = parse_real(parts[3], line)?;
                if quadratic.insert((i, j), v).is_some() {
                    return Err(ParseError::new(
                        line,
                        format!("duplicate quadratic term {i} {j}"),
                    ));
                }
            }
            _ => {
                let idx = parse_index(parts[1], n, line)?;
                let mut ids = [0u64; 3];
                for (slot, s) in ids.iter_mut().zip(&parts[2..]) {
                    *slot = s
                        .parse()
                        .map_err(|_| ParseError::new(line, format!("bad hit id {s:?}")))?;
                }
                if mapping.insert(idx, ids).is_some() {
                    return Err(ParseError::new(line, format!("duplicate triplet {idx}")));
                }
            }
        }
    }

    let (n, offset) = header.ok_or_else(|| ParseError::new(0, "missing header line"))?;
    if !mapping.is_empty() && mapping.len() != n {
        return Err(ParseError::new(
            0,
            format!("triplet mapping covers {} of {n} variables", mapping.len()),
        ));
    }
    let model = QuboModel::from_parts(n, linear, quadratic, offset)
        .map_err(|e| ParseError::new(0, e.to_string()))?;
    let mapping = mapping.into_values().collect();
    Ok(QuboFile { model, mapping })
}

/// Indices `(i, j)` with `j < i` whose triplets share at least one hit.
pub fn hit_sharing_pairs(mapping: &[[u64; 3]]) -> BTreeSet<(usize, usize)> {
    let mut by_hit: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, ids) in mapping.iter().enumerate() {
        for id in ids {
            by_hit.entry(*id).or_default().push(k);
        }
    }
    let mut pairs = BTreeSet::new();
    for vars in by_hit.values() {
        for (a, &i) in vars.iter().enumerate() {
            for &j in &vars[..a] {
                pairs.insert((i.max(j), i.min(j)));
            }
        }
    }
    pairs
}
