use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AUDIT_SCHEMA: &str = "robustsum-audit/1";

/// One audit check: columns `check_id,parameters,statistic,threshold,verdict`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub check_id: String,
    pub parameters: String,
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: CheckVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckVerdict {
    Pass,
    Fail,
}

impl CheckVerdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        }
    }
}

impl AuditRow {
    pub fn new(check_id: &str, parameters: impl Into<String>, statistic: f64, threshold: f64, pass: bool) -> Self {
        AuditRow {
            check_id: check_id.to_string(),
            parameters: parameters.into(),
            statistic,
            threshold,
            verdict: CheckVerdict::from_bool(pass),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == CheckVerdict::Pass
    }
}

/// Writes `# <schema>`, a header row and one row per record.
pub fn write_csv<T: Serialize, W: Write>(schema: &str, rows: &[T], mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("write failed: {e}"));
    writeln!(out, "# {schema}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    }
    w.flush().map_err(io)
}

pub fn audit_csv(rows: &[AuditRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(AUDIT_SCHEMA, rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
