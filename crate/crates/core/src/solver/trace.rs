use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_HEADER: &str = "k,objective,alpha,t,step_norm,rank,ms";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Relative objective decrease below `eps1`.
    RelativeDecrease,
    /// `1/alpha` below `eps2`.
    StepSize,
    MaxIterations,
    TargetReached,
    /// Outer iterates stopped moving (two-block and ALM solvers).
    Stationary,
}

/// One row of a solver trace. Row `k = 0` holds the starting point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub alpha: f64,
    pub t: f64,
    /// `|L_{X_k}(X_{k-1})|`.
    pub step_norm: f64,
    pub rank: usize,
    pub ms: f64,
}

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{},{:.3}",
            self.k, self.objective, self.alpha, self.t, self.step_norm, self.rank, self.ms
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn push(&mut self, r: IterationRecord) {
        debug_assert!(self.records.last().is_none_or(|p| p.k < r.k));
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// First iteration index whose objective is `<= target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.objective <= target).map(|r| r.k)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}
