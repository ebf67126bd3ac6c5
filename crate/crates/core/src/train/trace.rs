use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str = "step,epoch,split,metric,value";

/// One metric observation.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub epoch: usize,
    pub split: &'static str,
    pub metric: String,
    pub value: f64,
}

impl TraceRow {
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.step, self.epoch, self.split, self.metric, self.value)
    }
}

/// Appends rows to `path`, writing the header first if the file is new.
pub fn append_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = String::new();
    if fresh {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    f.write_all(out.as_bytes())?;
    Ok(())
}
