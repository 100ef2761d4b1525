//! Solver answers on disk.
//!
//! ```text
//! solver subqubo
//! n 5
//! energy -1.2500000000000000e0
//! bits 01101
//! ```

use qtrack_core::qubo::{bit_string, parse_bit_string};

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub solver: String,
    pub energy: f64,
    pub bits: Vec<bool>,
}

pub fn write_solution(s: &SolutionFile) -> String {
    format!(
        "solver {}\nn {}\nenergy {:.16e}\nbits {}\n",
        s.solver,
        s.bits.len(),
        s.energy,
        bit_string(&s.bits)
    )
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, ParseError> {
    let mut solver = None;
    let mut n: Option<(usize, usize)> = None;
    let mut energy = None;
    let mut bits: Option<(Vec<bool>, usize)> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(char::is_whitespace)
            .unwrap_or((content, ""));
        let value = value.trim();
        let dup = || ParseError::new(line, format!("duplicate {key:?} line"));
        match key {
            "solver" => {
                if solver.replace(value.to_string()).is_some() {
                    return Err(dup());
                }
            }
            "n" => {
                let v = value
                    .parse()
                    .map_err(|_| ParseError::new(line, format!("bad length {value:?}")))?;
                if n.replace((v, line)).is_some() {
                    return Err(dup());
                }
            }
            "energy" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| ParseError::new(line, format!("bad energy {value:?}")))?;
                if energy.replace(v).is_some() {
                    return Err(dup());
                }
            }
            "bits" => {
                let v = parse_bit_string(value)
                    .map_err(|_| ParseError::new(line, format!("bad bit string {value:?}")))?;
                if bits.replace((v, line)).is_some() {
                    return Err(dup());
                }
            }
            other => return Err(ParseError::new(line, format!("unknown key {other:?}"))),
        }
    }
    let (bits, bits_line) = bits.ok_or_else(|| ParseError::new(0, "missing `bits` line"))?;
    if let Some((n, line)) = n {
        if n != bits.len() {
            return Err(ParseError::new(
                line.max(bits_line),
                format!("declared length {n} but {} bits", bits.len()),
            ));
        }
    }
    Ok(SolutionFile {
        solver: solver.unwrap_or_default(),
        energy: energy.unwrap_or(f64::NAN),
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = SolutionFile {
            solver: "sa".into(),
            energy: -0.1 - 0.2,
            bits: vec![true, false, true],
        };
        let text = write_solution(&s);
        assert_eq!(parse_solution(&text).unwrap(), s);
    }

    #[test]
    fn empty_solution() {
        let s = SolutionFile {
            solver: "exact".into(),
            energy: 0.0,
            bits: vec![],
        };
        assert_eq!(parse_solution(&write_solution(&s)).unwrap(), s);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_solution("n 3\nbits 01\n").unwrap_err().line, 2);
        assert_eq!(parse_solution("bits 0x1\n").unwrap_err().line, 1);
        assert_eq!(parse_solution("solver sa\n").unwrap_err().line, 0);
        assert_eq!(parse_solution("bits 1\nbits 0\n").unwrap_err().line, 2);
        assert_eq!(parse_solution("color red\n").unwrap_err().line, 1);
    }
}
