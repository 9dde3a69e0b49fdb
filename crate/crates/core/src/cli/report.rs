//! CSV and JSON emission of check results.
//!
//! Floats are written with 17 significant digits so that every `f64`
//! survives a round trip. JSON has no literal for non-finite numbers; those
//! are written as the strings `"Infinity"`, `"-Infinity"` and `"NaN"`.

use std::io::Write;

use serde_json::Value;

use crate::verify::{CheckResult, OrderTable};

/// Column order of `results.csv`.
pub const CSV_COLUMNS: [&str; 8] = [
    "check",
    "N",
    "m",
    "seed",
    "measured",
    "tolerance",
    "order",
    "pass",
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("refusing to emit an empty report")]
    Empty,
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed report: {0}")]
    Parse(String),
}

/// `{:.16e}` for finite values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x == f64::INFINITY {
        "Infinity".into()
    } else if x == f64::NEG_INFINITY {
        "-Infinity".into()
    } else {
        format!("{x:.16e}")
    }
}

fn json_float(x: f64) -> String {
    if x.is_finite() {
        format_float(x)
    } else {
        format!("\"{}\"", format_float(x))
    }
}

pub fn write_csv<W: Write>(results: &[CheckResult], sink: W) -> Result<(), ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_COLUMNS)?;
    for r in results {
        w.write_record([
            r.check.clone(),
            r.modes.to_string(),
            r.m.to_string(),
            r.seed.to_string(),
            format_float(r.measured),
            format_float(r.tolerance),
            r.order.map(format_float).unwrap_or_default(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(results: &[CheckResult]) -> Result<String, ReportError> {
    let mut buf = Vec::new();
    write_csv(results, &mut buf)?;
    String::from_utf8(buf).map_err(|e| ReportError::Parse(e.to_string()))
}

/// Array of objects with the CSV column names as keys.
pub fn to_json(results: &[CheckResult]) -> Result<String, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut out = String::from("[\n");
    for (i, r) in results.iter().enumerate() {
        let check =
            serde_json::to_string(&r.check).map_err(|e| ReportError::Parse(e.to_string()))?;
        let order = r.order.map(json_float).unwrap_or_else(|| "null".into());
        out.push_str(&format!(
            "  {{\"check\": {check}, \"N\": {}, \"m\": {}, \"seed\": {}, \"measured\": {}, \"tolerance\": {}, \"order\": {order}, \"pass\": {}}}",
            r.modes,
            r.m,
            r.seed,
            json_float(r.measured),
            json_float(r.tolerance),
            r.pass
        ));
        out.push_str(if i + 1 < results.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    Ok(out)
}

fn float_field(obj: &serde_json::Map<String, Value>, key: &str) -> Result<f64, ReportError> {
    match obj.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| ReportError::Parse(format!("{key} is not a float"))),
        Some(Value::String(s)) => match s.as_str() {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            _ => Err(ReportError::Parse(format!(
                "{key}: unexpected string {s:?}"
            ))),
        },
        _ => Err(ReportError::Parse(format!("missing float field {key}"))),
    }
}

fn int_field(obj: &serde_json::Map<String, Value>, key: &str) -> Result<u64, ReportError> {
    obj.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| ReportError::Parse(format!("missing integer field {key}")))
}

/// Inverse of [`to_json`].
pub fn parse_json(text: &str) -> Result<Vec<CheckResult>, ReportError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
    let rows = value
        .as_array()
        .ok_or_else(|| ReportError::Parse("report must be an array".into()))?;
    rows.iter()
        .map(|row| {
            let obj = row
                .as_object()
                .ok_or_else(|| ReportError::Parse("report rows must be objects".into()))?;
            if let Some(extra) = obj.keys().find(|k| !CSV_COLUMNS.contains(&k.as_str())) {
                return Err(ReportError::Parse(format!("unknown field {extra}")));
            }
            Ok(CheckResult {
                check: obj
                    .get("check")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ReportError::Parse("missing check name".into()))?
                    .to_string(),
                modes: int_field(obj, "N")? as usize,
                m: int_field(obj, "m")? as usize,
                seed: int_field(obj, "seed")?,
                measured: float_field(obj, "measured")?,
                tolerance: float_field(obj, "tolerance")?,
                order: match obj.get("order") {
                    None | Some(Value::Null) => None,
                    Some(_) => Some(float_field(obj, "order")?),
                },
                pass: obj
                    .get("pass")
                    .and_then(Value::as_bool)
                    .ok_or_else(|| ReportError::Parse("missing pass flag".into()))?,
            })
        })
        .collect()
}

/// One row per rung and quantity: `quantity,N,step,error,order`.
pub fn orders_csv(table: &OrderTable) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "N", "step", "error", "order"])?;
    for row in &table.rows {
        for ((n, h), e) in row.modes.iter().zip(&row.steps).zip(&row.errors) {
            w.write_record([
                row.quantity.clone(),
                n.to_string(),
                format_float(*h),
                format_float(*e),
                format_float(row.order),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Parse(e.to_string()))
}
