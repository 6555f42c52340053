//! Trajectory records: one JSON object per line, or flattened CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::Format;

/// One trajectory sample.
///
/// `t` is physical time; `s` is the chart's rescaled independent variable
/// when it differs from `t`.  `res` holds the monitored invariant residuals.
/// A sample that could not be produced carries an `error` and no state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default)]
    pub state: BTreeMap<String, f64>,
    #[serde(default)]
    pub res: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Write records in the requested format.  CSV columns are `t`, `s` (if any
/// record has it), the state fields in `fields` order, `res_<name>` for each
/// residual and `error`.
pub fn write_records(
    out: &mut dyn Write,
    format: Format,
    fields: &[String],
    residuals: &[String],
    records: &[Record],
) -> Result<()> {
    match format {
        Format::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut *out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let with_s = records.iter().any(|r| r.s.is_some());
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["t".to_string()];
            if with_s {
                header.push("s".into());
            }
            header.extend(fields.iter().cloned());
            header.extend(residuals.iter().map(|n| format!("res_{n}")));
            header.push("error".into());
            w.write_record(&header)?;
            for r in records {
                let mut row = vec![r.t.to_string()];
                if with_s {
                    row.push(r.s.map(|s| s.to_string()).unwrap_or_default());
                }
                row.extend(fields.iter().map(|f| r.state.get(f).map(|v| v.to_string()).unwrap_or_default()));
                row.extend(residuals.iter().map(|n| r.res.get(n).map(|v| v.to_string()).unwrap_or_default()));
                row.push(r.error.clone().unwrap_or_default());
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Read JSON-lines records, skipping blank lines.
pub fn read_records(input: impl BufRead) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("record on line {}", k + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> Record {
        Record {
            t: 0.5,
            s: Some(1.0),
            state: [("r".to_string(), 2.0), ("p_r".to_string(), -1.0)].into(),
            res: [("energy".to_string(), 1e-14)].into(),
            error: None,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let mut buf = Vec::new();
        let recs = vec![record(), Record { t: 1.0, error: Some("collision manifold".into()), ..Record::default() }];
        write_records(&mut buf, Format::Jsonl, &[], &[], &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"t\":0.5"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        let fields = vec!["r".to_string(), "p_r".to_string()];
        write_records(&mut buf, Format::Csv, &fields, &["energy".to_string()], &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,s,r,p_r,res_energy,error");
        assert_eq!(lines.next().unwrap(), "0.5,1,2,-1,0.00000000000001,");
    }
}
