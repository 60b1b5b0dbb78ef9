//! Run reports and their JSON-lines serialization. Reports are
//! append-only: a crashed run leaves the lines already written intact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Outcome of one solver run on one instance.
///
/// `gap_pct` follows the benchmark convention
/// `100 * (cost - reference) / reference`; a negative gap improves on
/// the reference. The gap is present exactly when a reference cost is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub instance_name: String,
    pub algorithm: String,
    pub seed: u64,
    /// Snapshot of the effective parameters.
    pub params: BTreeMap<String, String>,
    pub cost: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_cost: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_pct: Option<T>,
    /// Wall-clock seconds; informative only, and zero under
    /// deterministic budgets so replayed reports are byte-identical.
    pub elapsed: f64,
    pub iterations: u64,
    pub proven: bool,
}

impl<T: Scalar> RunReport<T> {
    pub fn new(
        instance_name: impl Into<String>,
        algorithm: impl Into<String>,
        seed: u64,
        cost: T,
    ) -> Self {
        Self {
            instance_name: instance_name.into(),
            algorithm: algorithm.into(),
            seed,
            params: BTreeMap::new(),
            cost,
            reference_cost: None,
            gap_pct: None,
            elapsed: 0.0,
            iterations: 0,
            proven: false,
        }
    }

    /// Attaches a reference cost and the derived gap.
    pub fn with_reference(mut self, reference: T) -> Self {
        let hundred = T::from_f64_lossy(100.0);
        self.gap_pct = Some(hundred * (self.cost - reference) / reference);
        self.reference_cost = Some(reference);
        self
    }
}

/// Appends one report as a JSON line.
pub fn write_report_line<T: Scalar, W: Write>(
    w: &mut W,
    report: &RunReport<T>,
) -> std::io::Result<()> {
    let line = serde_json::to_string(report).expect("report serializes");
    writeln!(w, "{line}")
}

/// Reads every report line, failing on the first malformed one.
pub fn read_report_lines<T: Scalar, R: BufRead>(
    r: R,
) -> Result<Vec<RunReport<T>>, serde_json::Error> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
