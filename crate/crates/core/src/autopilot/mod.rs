//! Server-side analytics: range aggregates and linear trends computed on a
//! schedule, with each result appended as a row to a results sheet.

mod schedule;
mod trend;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{execute, JobHost, ScheduledJob, Scheduler};
pub use trend::{linear_trend, InsufficientData, TrendLine};

use crate::address::{CellAddress, CellRange};
use crate::clock::Millis;
use crate::formula::{Accumulator, Aggregate, Criterion};
use crate::rpc::SheetKey;
use crate::sheet::{is_valid_name, CellContent, Sheet};
use crate::value::{ComputedValue, ErrorCode};

/// Shortest allowed job period.
pub const MIN_PERIOD_MS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JobKind {
    Sum,
    Mean,
    Min,
    Max,
    Count,
    CountIf { criterion: Criterion },
    Trend,
}

impl JobKind {
    /// The formula aggregate with the same semantics, if any.
    pub fn aggregate(&self) -> Option<Aggregate> {
        Some(match self {
            JobKind::Sum => Aggregate::Sum,
            JobKind::Mean => Aggregate::Average,
            JobKind::Min => Aggregate::Min,
            JobKind::Max => Aggregate::Max,
            JobKind::Count => Aggregate::Count,
            JobKind::CountIf { criterion } => Aggregate::CountIf(criterion.clone()),
            JobKind::Trend => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    pub key: SheetKey,
    pub range: CellRange,
    pub kind: JobKind,
    pub period_ms: u64,
    pub output_snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("job ids and snapshot names are 1-64 characters without whitespace")]
    BadName,
    #[error("period must be at least {MIN_PERIOD_MS} ms")]
    PeriodTooShort,
    #[error("a trend job needs a single-column range")]
    TrendNeedsColumn,
    #[error("job {0:?} already exists")]
    Exists(String),
}

impl JobSpec {
    pub fn validate(&self) -> Result<(), JobError> {
        if !is_valid_name(&self.id) || !is_valid_name(&self.output_snapshot) {
            return Err(JobError::BadName);
        }
        if self.period_ms < MIN_PERIOD_MS {
            return Err(JobError::PeriodTooShort);
        }
        if self.kind == JobKind::Trend && !self.range.is_single_column() {
            return Err(JobError::TrendNeedsColumn);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum JobValue {
    Value { value: ComputedValue },
    Trend { trend: TrendLine },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub job_id: String,
    pub computed_at: Millis,
    #[serde(flatten)]
    pub value: JobValue,
}

/// Aggregates the cells of `range` exactly as the matching formula function would.
pub fn compute_aggregate(sheet: &Sheet, range: CellRange, kind: Aggregate) -> ComputedValue {
    let mut acc = Accumulator::new(kind);
    for (_, content) in sheet.cells().filter(|(a, _)| range.contains(*a)) {
        acc.push_cell(content.value().expect("stored cells are non-empty"));
    }
    acc.finish()
}

/// Runs one job against a sheet snapshot.
pub fn run_job(sheet: &Sheet, range: CellRange, kind: &JobKind) -> JobValue {
    if let Some(aggregate) = kind.aggregate() {
        return JobValue::Value { value: compute_aggregate(sheet, range, aggregate) };
    }
    let mut values = Vec::new();
    for (_, content) in sheet.cells().filter(|(a, _)| range.contains(*a)) {
        match content.value() {
            Some(ComputedValue::Num(n)) => values.push(n),
            Some(ComputedValue::Err(e)) => return JobValue::Value { value: ComputedValue::Err(e) },
            _ => {}
        }
    }
    match linear_trend(&values) {
        Ok(trend) => JobValue::Trend { trend },
        Err(InsufficientData) => JobValue::Value { value: ComputedValue::Err(ErrorCode::Value) },
    }
}

/// Appends `result` below the last used row of `results`:
/// job id, timestamp, then the value (or slope, intercept, prediction).
pub fn append_result_row(results: &mut Sheet, result: &JobResult) {
    let row = results.used_range().map_or(1, |r| r.end().row() + 1);
    let cell = |col: u32| CellAddress::new(col, row).expect("results sheet within bounds");
    let value_cell = |v: &ComputedValue| match v {
        ComputedValue::Num(n) => CellContent::Number(*n),
        ComputedValue::Str(s) => CellContent::Text(s.clone()),
        ComputedValue::Err(e) => CellContent::Text(e.label().to_string()),
    };
    let mut row_cells = vec![
        CellContent::Text(result.job_id.clone()),
        CellContent::Number(result.computed_at as f64),
    ];
    match &result.value {
        JobValue::Value { value } => row_cells.push(value_cell(value)),
        JobValue::Trend { trend } => row_cells.extend(
            [trend.slope, trend.intercept, trend.next_prediction]
                .map(|n| value_cell(&ComputedValue::number(n))),
        ),
    }
    for (i, content) in row_cells.into_iter().enumerate() {
        results.set_cell(cell(i as u32 + 1), content).expect("valid result content");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{evaluate_formula, parse_formula, recalculate_sheet};
    use crate::save::parse_save_string;
    use crate::sheet::SheetName;

    fn marks() -> Sheet {
        parse_save_string(
            "socialcalc-save 1 marks\n\
             cell E1 text t MARKS OBTAINED\n\
             cell E2 value n 24\n\
             cell E3 text t NOT YET OUT\n\
             cell E4 value n 33\n",
        )
        .unwrap()
    }

    fn range(s: &str) -> CellRange {
        s.parse().unwrap()
    }

    #[test]
    fn mean_of_marks() {
        assert_eq!(compute_aggregate(&marks(), range("E2:E4"), Aggregate::Average), ComputedValue::Num(28.5));
    }

    #[test]
    fn attendance_count() {
        let sheet = parse_save_string(
            "socialcalc-save 1 a\ncell C1 text t P\ncell C2 text t A\ncell C3 text t P\ncell C4 text t P\ncell C5 text t A\n",
        )
        .unwrap();
        let kind = Aggregate::CountIf(Criterion::Str("P".into()));
        assert_eq!(compute_aggregate(&sheet, range("C1:C5"), kind), ComputedValue::Num(3.0));
    }

    #[test]
    fn count_of_nothing() {
        assert_eq!(compute_aggregate(&Sheet::default(), range("A1:C9"), Aggregate::Count), ComputedValue::Num(0.0));
        assert_eq!(
            compute_aggregate(&Sheet::default(), range("A1:C9"), Aggregate::Average),
            ComputedValue::Err(ErrorCode::Div0)
        );
    }

    #[test]
    fn matches_formula_functions() {
        let mut sheet = marks();
        sheet.set_cell("E5".parse().unwrap(), CellContent::formula("E2/0").unwrap()).unwrap();
        recalculate_sheet(&mut sheet);
        for (func, kind) in [
            ("SUM", Aggregate::Sum),
            ("AVERAGE", Aggregate::Average),
            ("MIN", Aggregate::Min),
            ("MAX", Aggregate::Max),
            ("COUNT", Aggregate::Count),
        ] {
            for r in ["E2:E4", "E1:E5", "A1:D9"] {
                let expr = parse_formula(&format!("{func}({r})")).unwrap();
                let lookup = |a: CellAddress| sheet.get_cell(a).value();
                assert_eq!(compute_aggregate(&sheet, range(r), kind.clone()), evaluate_formula(&expr, &lookup));
            }
        }
    }

    #[test]
    fn trend_job() {
        let sheet = parse_save_string(
            "socialcalc-save 1 t\ncell B1 text t header\ncell B2 value n 2\ncell B3 value n 4\ncell B5 value n 6\n",
        )
        .unwrap();
        let JobValue::Trend { trend } = run_job(&sheet, range("B1:B9"), &JobKind::Trend) else { panic!() };
        assert_eq!(trend.next_prediction, 8.0);
        assert_eq!(
            run_job(&Sheet::default(), range("B1:B9"), &JobKind::Trend),
            JobValue::Value { value: ComputedValue::Err(ErrorCode::Value) }
        );
    }

    #[test]
    fn result_rows_append() {
        let mut results = Sheet::new(SheetName::new("stats").unwrap());
        let r1 = JobResult {
            job_id: "j".into(),
            computed_at: 1000,
            value: JobValue::Value { value: ComputedValue::Num(3.0) },
        };
        let r2 = JobResult {
            job_id: "j".into(),
            computed_at: 2000,
            value: JobValue::Value { value: ComputedValue::Err(ErrorCode::Ref) },
        };
        append_result_row(&mut results, &r1);
        append_result_row(&mut results, &r2);
        assert_eq!(
            crate::save::serialize_sheet(&results),
            "socialcalc-save 1 stats\n\
             cell A1 text t j\ncell B1 value n 1000\ncell C1 value n 3\n\
             cell A2 text t j\ncell B2 value n 2000\ncell C2 text t #REF!\n"
        );
    }

    #[test]
    fn spec_validation() {
        let spec = JobSpec {
            id: "j".into(),
            key: SheetKey::new("a", "g"),
            range: range("A1:B2"),
            kind: JobKind::Trend,
            period_ms: 5_000,
            output_snapshot: "out".into(),
        };
        assert_eq!(spec.validate(), Err(JobError::TrendNeedsColumn));
        let spec = JobSpec { kind: JobKind::Sum, period_ms: 999, ..spec };
        assert_eq!(spec.validate(), Err(JobError::PeriodTooShort));
        let spec = JobSpec { period_ms: 1000, output_snapshot: "has space".into(), ..spec };
        assert_eq!(spec.validate(), Err(JobError::BadName));
    }
}
