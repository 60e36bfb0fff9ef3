use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Arm, Subject, TrialData};
use crate::error::{Error, Result};
use crate::rank::Direction;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub id_column: String,
    pub arm_column: String,
    pub baseline_column: String,
    /// Post-baseline columns in visit order; `None` takes every remaining
    /// column in header order.
    pub outcome_columns: Option<Vec<String>>,
    pub direction: Direction,
    pub missing_tokens: Vec<String>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            id_column: "id".into(),
            arm_column: "trt".into(),
            baseline_column: "y0".into(),
            outcome_columns: None,
            direction: Direction::Higher,
            missing_tokens: vec![String::new(), "NA".into(), ".".into()],
            delimiter: b',',
        }
    }
}

pub fn read_wide_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<TrialData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_wide_csv_from(file, options)
}

pub fn read_wide_csv_from<R: Read>(reader: R, options: &CsvOptions) -> Result<TrialData> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Io(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Input {
            row: 1,
            column: name.to_string(),
            message: "required column is missing from the header".into(),
        })
    };
    let id_col = find(&options.id_column)?;
    let arm_col = find(&options.arm_column)?;
    let base_col = find(&options.baseline_column)?;
    let outcome_cols: Vec<usize> = match &options.outcome_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|c| ![id_col, arm_col, base_col].contains(c))
            .collect(),
    };
    if outcome_cols.is_empty() {
        return Err(Error::Config("no outcome columns selected".into()));
    }

    let mut subjects = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Input {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let parse = |c: usize| -> Result<Option<f64>> {
            let raw = cell(c);
            if options.missing_tokens.iter().any(|t| t == raw) {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::Input {
                    row,
                    column: header[c].clone(),
                    message: format!("cannot parse '{raw}' as a number"),
                }),
            }
        };
        let id = cell(id_col).to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Input {
                row,
                column: header[id_col].clone(),
                message: format!("duplicate subject id '{id}'"),
            });
        }
        let arm = match cell(arm_col) {
            "0" => Arm::Control,
            "1" => Arm::Treatment,
            other => {
                return Err(Error::Input {
                    row,
                    column: header[arm_col].clone(),
                    message: format!("arm must be 0 or 1, found '{other}'"),
                })
            }
        };
        subjects.push(Subject {
            id,
            arm,
            baseline: parse(base_col)?,
            outcomes: outcome_cols.iter().map(|&c| parse(c)).collect::<Result<_>>()?,
        });
    }
    let labels = outcome_cols.iter().map(|&c| header[c].clone()).collect();
    TrialData::new(subjects, options.direction, header[base_col].clone(), labels)
}

/// Writes `data` in the layout `read_wide_csv` accepts with default options
/// (id, trt, baseline, visits; missing cells as `NA`).
pub fn write_wide_csv<W: Write>(data: &TrialData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["id".to_string(), "trt".to_string(), data.baseline_label().to_string()];
    header.extend(data.timepoint_labels().iter().cloned());
    w.write_record(&header).map_err(io)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for s in data.subjects() {
        let mut rec = vec![s.id.clone(), s.arm.index().to_string(), fmt(s.baseline)];
        rec.extend(s.outcomes.iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
