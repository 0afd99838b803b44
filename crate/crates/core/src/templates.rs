//! Ready-made sheets with their analytics jobs.
//!
//! Each template is a save string plus a list of jobs that are not yet bound
//! to a sheet. [`TemplateJob::bind`] attaches a job to the sheet the template
//! was installed as.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::CellRange;
use crate::autopilot::{JobKind, JobSpec};
use crate::rpc::SheetKey;
use crate::save::parse_save_string;
use crate::sheet::Sheet;
use crate::value::ErrorCode;

/// Names accepted by [`load_template`].
pub const TEMPLATE_NAMES: [&str; 4] = ["school-attendance", "school-marks", "health-record", "pds-stock"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no template named {0:?}")]
pub struct NoSuchTemplate(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateJob {
    pub id: String,
    pub range: CellRange,
    #[serde(flatten)]
    pub kind: JobKind,
    pub period_ms: u64,
    pub output_snapshot: String,
    /// Set when the job is meant to report this error on the shipped data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_error: Option<ErrorCode>,
}

impl TemplateJob {
    pub fn bind(&self, key: SheetKey) -> JobSpec {
        JobSpec {
            id: self.id.clone(),
            key,
            range: self.range,
            kind: self.kind.clone(),
            period_ms: self.period_ms,
            output_snapshot: self.output_snapshot.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplatePack {
    pub name: String,
    pub save_string: String,
    pub jobs: Vec<TemplateJob>,
    pub description: String,
}

impl TemplatePack {
    pub fn sheet(&self) -> Sheet {
        parse_save_string(&self.save_string).expect("shipped templates parse")
    }
}

#[derive(Deserialize)]
struct Sidecar {
    description: String,
    jobs: Vec<TemplateJob>,
}

macro_rules! template_files {
    ($name:literal) => {
        (
            include_str!(concat!("../../../templates/", $name, "/sheet.scsave")),
            include_str!(concat!("../../../templates/", $name, "/jobs.json")),
        )
    };
}

pub fn load_template(name: &str) -> Result<TemplatePack, NoSuchTemplate> {
    let (save_string, jobs) = match name {
        "school-attendance" => template_files!("school-attendance"),
        "school-marks" => template_files!("school-marks"),
        "health-record" => template_files!("health-record"),
        "pds-stock" => template_files!("pds-stock"),
        _ => return Err(NoSuchTemplate(name.to_string())),
    };
    let sidecar: Sidecar = serde_json::from_str(jobs).expect("shipped jobs.json is valid");
    Ok(TemplatePack {
        name: name.to_string(),
        save_string: save_string.to_string(),
        jobs: sidecar.jobs,
        description: sidecar.description,
    })
}
