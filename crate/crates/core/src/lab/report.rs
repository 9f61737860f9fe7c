//! Check reports and their JSON/CSV forms.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Measured,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Measured => "MEASURED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    pub status: Status,
    pub measured_constant: Option<f64>,
    pub witness: Value,
    pub config_digest: String,
}

pub fn any_failed(reports: &[CheckReport]) -> bool {
    reports.iter().any(|r| r.status == Status::Fail)
}

pub fn write_json(reports: &[CheckReport], out: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, reports)?;
    writeln!(out)?;
    Ok(())
}

/// `check_id,status,constant` with an empty constant when absent.
pub fn write_csv(reports: &[CheckReport], out: &mut impl Write) -> Result<()> {
    writeln!(out, "check_id,status,constant")?;
    for r in reports {
        let c = r.measured_constant.map(|c| format!("{c:e}")).unwrap_or_default();
        writeln!(out, "{},{},{}", r.check_id, r.status.as_str(), c)?;
    }
    Ok(())
}
