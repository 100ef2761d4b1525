//! Line-delimited JSON records for metrics and solver diagnostics.

use serde::{Deserialize, Serialize};

use qtrack_core::subqubo::Diagnostics;
use qtrack_core::tracking::TrackingMetrics;

pub const SCHEMA: u32 = 1;

/// One measurement. Unused fields are omitted from the JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema: u32,
    pub run_id: String,
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_e: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// `None` when there are no true doublets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    /// `None` when nothing was reconstructed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub round_best: Vec<f64>,
    pub wall_time_s: f64,
}

impl MetricsRecord {
    pub fn new(run_id: impl Into<String>, solver: impl Into<String>) -> Self {
        Self {
            schema: SCHEMA,
            run_id: run_id.into(),
            solver: solver.into(),
            seed: None,
            multiplicity: None,
            layers: None,
            loss: None,
            n_i: None,
            n_e: None,
            n_s: None,
            n_vars: None,
            energy: None,
            efficiency: None,
            purity: None,
            accuracy: None,
            accuracy_err: None,
            mean_probability: None,
            round_best: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn with_tracking(mut self, m: &TrackingMetrics) -> Self {
        self.efficiency = m.efficiency_defined.then_some(m.efficiency);
        self.purity = m.purity_defined.then_some(m.purity);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticRecord {
    Initial {
        schema: u32,
        best: f64,
    },
    Round {
        schema: u32,
        round: usize,
        best: f64,
    },
    Job {
        schema: u32,
        round: usize,
        job: usize,
        free: Vec<usize>,
        sub_energy: f64,
        candidate_energy: f64,
        accepted: bool,
    },
}

/// Flattens sub-QUBO diagnostics: the initial pool best, then per round its
/// jobs followed by the round's pool best.
pub fn diagnostic_records(d: &Diagnostics) -> Vec<DiagnosticRecord> {
    let mut out = vec![DiagnosticRecord::Initial {
        schema: SCHEMA,
        best: d.initial_best,
    }];
    for (round, &best) in d.round_best.iter().enumerate() {
        out.extend(
            d.jobs
                .iter()
                .filter(|j| j.round == round)
                .map(|j| DiagnosticRecord::Job {
                    schema: SCHEMA,
                    round: j.round,
                    job: j.job,
                    free: j.free.clone(),
                    sub_energy: j.sub_energy,
                    candidate_energy: j.candidate_energy,
                    accepted: j.accepted,
                }),
        );
        out.push(DiagnosticRecord::Round {
            schema: SCHEMA,
            round,
            best,
        });
    }
    out
}

pub fn to_json_lines<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialise"));
        out.push('\n');
    }
    out
}

pub fn from_json_lines<T: for<'de> Deserialize<'de>>(
    text: &str,
) -> Result<Vec<T>, crate::ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| crate::ParseError::new(k + 1, e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qtrack_core::subqubo::SubJobRecord;

    #[test]
    fn record_round_trip() {
        let mut r = MetricsRecord::new("run-1", "subqubo");
        r.multiplicity = Some(50);
        r.energy = Some(-12.25);
        r.round_best = vec![-10.0, -12.25];
        r = r.with_tracking(&TrackingMetrics::from_counts(9, 1, 1));
        let text = to_json_lines(&[r.clone()]);
        assert!(text.starts_with(r#"{"schema":1,"run_id":"run-1","solver":"subqubo""#));
        assert!(!text.contains("accuracy"));
        assert_eq!(from_json_lines::<MetricsRecord>(&text).unwrap(), vec![r]);
    }

    #[test]
    fn undefined_ratios_are_omitted() {
        let r = MetricsRecord::new("x", "sa").with_tracking(&TrackingMetrics::from_counts(0, 0, 0));
        assert_eq!(r.efficiency, None);
        assert_eq!(r.purity, None);
    }

    #[test]
    fn diagnostics_layout() {
        let job = |round, job| SubJobRecord {
            round,
            job,
            free: vec![1, 2],
            sub_energy: -1.0,
            candidate_energy: -1.0,
            accepted: job == 0,
        };
        let d = Diagnostics {
            initial_best: 0.0,
            round_best: vec![-1.0, -2.0],
            jobs: vec![job(0, 0), job(0, 1), job(1, 0)],
            failed_jobs: 0,
            max_clamp_error: 0.0,
        };
        let recs = diagnostic_records(&d);
        let kinds: Vec<&str> = recs
            .iter()
            .map(|r| match r {
                DiagnosticRecord::Initial { .. } => "i",
                DiagnosticRecord::Round { .. } => "r",
                DiagnosticRecord::Job { .. } => "j",
            })
            .collect();
        assert_eq!(kinds, ["i", "j", "j", "r", "j", "r"]);
        let text = to_json_lines(&recs);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with(r#"{"kind":"job","schema":1"#));
        assert_eq!(from_json_lines::<DiagnosticRecord>(&text).unwrap(), recs);
        assert_eq!(
            from_json_lines::<DiagnosticRecord>("{}\n")
                .unwrap_err()
                .line,
            1
        );
    }
}
