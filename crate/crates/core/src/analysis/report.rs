use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ConcentrationReport, SlopeFit};
use crate::error::Result;
use crate::smoothness::{Params, ScaleProfile, SeminormReport};

/// One row per study point; the first column names the point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl StudyTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len() + 1, self.columns.len());
        self.rows.push((id.into(), values));
    }

    /// The named column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        if i == 0 {
            return None;
        }
        Some(self.rows.iter().map(|r| r.1[i - 1]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for (id, vals) in &self.rows {
            let mut rec = vec![id.clone()];
            rec.extend(vals.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Norms at one study point, with the truncation attestation of its seminorm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: String,
    /// Grid resolution per rendered component.
    pub resolutions: Vec<i32>,
    pub k_min: i32,
    pub k_max: i32,
    pub seminorm: SeminormReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub name: String,
    pub fit: SlopeFit,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, observed: f64, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            observed,
            rule: rule.into(),
        }
    }
}

/// Outcome of one study: inputs, per-point norms, fits and verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub params: Params,
    /// The resolved configuration.
    pub inputs: serde_json::Value,
    pub table: StudyTable,
    pub points: Vec<PointRecord>,
    pub slopes: Vec<SlopeRecord>,
    pub concentration: Vec<ConcentrationReport>,
    pub verdicts: Vec<Verdict>,
    /// Profiles by id, written separately as CSV.
    #[serde(skip)]
    pub profiles: Vec<(String, ScaleProfile)>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn slope(&self, name: &str) -> Option<&SlopeRecord> {
        self.slopes.iter().find(|s| s.name == name)
    }

    pub fn write_slopes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["name", "slope", "intercept", "max_residual", "expected"])?;
        for s in &self.slopes {
            wr.write_record([
                s.name.clone(),
                format!("{:e}", s.fit.slope),
                format!("{:e}", s.fit.intercept),
                format!("{:e}", s.fit.max_residual),
                format!("{:e}", s.expected),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Largest residual a slope fit may carry, relative to the slope magnitude.
pub(crate) const RESIDUAL_FRACTION: f64 = 0.25;

pub(crate) fn residual_verdict(name: &str, fit: &SlopeFit) -> Verdict {
    let frac = fit.max_residual / fit.slope.abs();
    Verdict::new(
        &format!("{name}_residual"),
        frac <= RESIDUAL_FRACTION,
        frac,
        format!("max_residual / |slope| <= {RESIDUAL_FRACTION}"),
    )
}
