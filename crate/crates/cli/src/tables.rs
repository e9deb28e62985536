//! Tables only the command-line driver produces.

use serde::{Deserialize, Serialize};

use mixtop::io::{csv_bytes, csv_records, fmt_opt_int, format_float, parse_float, parse_int, parse_opt_int};
use mixtop::{Error, Result};

/// EGP Chern numbers of one state and chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingRow {
    pub label: String,
    #[serde(rename = "T", with = "mixtop::io::extended_float")]
    pub temperature: f64,
    #[serde(rename = "T_over_gap", with = "mixtop::io::extended_float")]
    pub t_over_gap: f64,
    #[serde(with = "mixtop::io::extended_float")]
    pub beta: f64,
    #[serde(rename = "N")]
    pub n_cells: usize,
    #[serde(rename = "Cx_egp")]
    pub cx: Option<i64>,
    #[serde(rename = "Cy_egp")]
    pub cy: Option<i64>,
    /// Transverse samples after refinement, x and y chains.
    pub samples_x: usize,
    pub samples_y: usize,
    pub status: String,
}

const WINDING_COLUMNS: [&str; 10] =
    ["label", "T", "T_over_gap", "beta", "N", "Cx_egp", "Cy_egp", "samples_x", "samples_y", "status"];

/// Missing temperatures (tabulated states) are written as `nan`.
pub fn winding_csv(rows: &[WindingRow]) -> Result<String> {
    let header: Vec<String> = WINDING_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        vec![
            r.label.clone(),
            format_float(r.temperature),
            format_float(r.t_over_gap),
            format_float(r.beta),
            r.n_cells.to_string(),
            fmt_opt_int(r.cx),
            fmt_opt_int(r.cy),
            r.samples_x.to_string(),
            r.samples_y.to_string(),
            r.status.clone(),
        ]
    });
    Ok(String::from_utf8(csv_bytes(&header, body)?).map_err(|e| Error::Numerical(e.to_string()))?)
}

pub fn parse_winding_csv(text: &str) -> Result<Vec<WindingRow>> {
    csv_records(text, &WINDING_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(WindingRow {
                label: rec[0].to_string(),
                temperature: parse_float(&rec[1], line)?,
                t_over_gap: parse_float(&rec[2], line)?,
                beta: parse_float(&rec[3], line)?,
                n_cells: parse_int(&rec[4], line)?,
                cx: parse_opt_int(&rec[5], line)?,
                cy: parse_opt_int(&rec[6], line)?,
                samples_x: parse_int(&rec[7], line)?,
                samples_y: parse_int(&rec[8], line)?,
                status: rec[9].to_string(),
            })
        })
        .collect()
}
