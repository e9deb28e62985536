//! Plain-text formats: CSV tables, JSON documents and the matrix-grid file.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so every value
//! survives a write/read cycle bit for bit. Files are written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::egp::{EgpResult, GaugeReductionRow};
use crate::error::{Error, Result};
use crate::geometry::{CurvatureField, PhaseKind, PhaseProfile};
use crate::linalg::CMatrix;
use crate::model::{self, BlochModel, MatrixGrid, MomentumGrid};
use crate::uhlmann::InvariantReport;

/// Serde adapter writing non-finite floats as the strings `inf`, `-inf`, `nan`.
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Number(x) => Ok(x),
            Repr::Text(s) => s.parse().map_err(|_| E::custom(format!("not a float: {s}"))),
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::format_float(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

/// `{:.16e}`; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_float(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse { line, message: format!("not a float: {s:?}") })
}

pub fn parse_int<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse { line, message: format!("not an integer: {s:?}") })
}

pub fn parse_opt_int(s: &str, line: usize) -> Result<Option<i64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_int(s, line).map(Some)
    }
}

pub fn fmt_opt_int(x: Option<i64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn csv_records(text: &str, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < expected.len() || names[..expected.len()] != *expected {
        return Err(Error::Parse { line: 1, message: format!("expected columns {expected:?}, found {names:?}") });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != names.len() {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", names.len(), rec.len()) });
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

// ---- phase profiles ----

pub fn phase_profile_csv(profile: &PhaseProfile) -> Result<String> {
    let rows = profile
        .parameters
        .iter()
        .zip(&profile.phases)
        .map(|(p, v)| vec![format_float(*p), format_float(*v)]);
    Ok(String::from_utf8(csv_bytes(&["parameter".into(), "value".into()], rows)?).expect("ascii"))
}

/// Parses a `parameter,value` table; metadata lives only in the JSON form.
pub fn parse_phase_profile_csv(text: &str, kind: PhaseKind) -> Result<PhaseProfile> {
    let mut params = Vec::new();
    let mut phases = Vec::new();
    for (line, rec) in csv_records(text, &["parameter", "value"])? {
        params.push(parse_float(&rec[0], line)?);
        phases.push(parse_float(&rec[1], line)?);
    }
    PhaseProfile::new(kind, params, phases)
}

pub fn write_phase_profile_csv(path: &Path, profile: &PhaseProfile) -> Result<()> {
    write_atomic(path, phase_profile_csv(profile)?.as_bytes())
}

pub fn read_phase_profile_csv(path: &Path, kind: PhaseKind) -> Result<PhaseProfile> {
    parse_phase_profile_csv(&fs::read_to_string(path)?, kind)
}

// ---- EGP rows ----

/// Row of the EGP table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgpRow {
    pub transverse_k: f64,
    pub phase: f64,
    pub modulus: f64,
    pub n_cells: usize,
    #[serde(with = "extended_float")]
    pub beta: f64,
}

impl From<&EgpResult> for EgpRow {
    fn from(r: &EgpResult) -> Self {
        Self { transverse_k: r.transverse_k, phase: r.phase, modulus: r.modulus, n_cells: r.n_cells, beta: r.beta }
    }
}

const EGP_COLUMNS: [&str; 5] = ["transverse_k", "phase", "modulus", "N", "beta"];

pub fn egp_csv(rows: &[EgpRow]) -> Result<String> {
    let header: Vec<String> = EGP_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        vec![
            format_float(r.transverse_k),
            format_float(r.phase),
            format_float(r.modulus),
            r.n_cells.to_string(),
            format_float(r.beta),
        ]
    });
    Ok(String::from_utf8(csv_bytes(&header, body)?).expect("ascii"))
}

pub fn parse_egp_csv(text: &str) -> Result<Vec<EgpRow>> {
    csv_records(text, &EGP_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(EgpRow {
                transverse_k: parse_float(&rec[0], line)?,
                phase: parse_float(&rec[1], line)?,
                modulus: parse_float(&rec[2], line)?,
                n_cells: parse_int(&rec[3], line)?,
                beta: parse_float(&rec[4], line)?,
            })
        })
        .collect()
}

// ---- invariant reports ----

const REPORT_COLUMNS: [&str; 8] = ["T", "beta", "Cx_uhlmann", "Cy_uhlmann", "Cx_egp", "Cy_egp", "C_ground", "status"];

pub fn invariant_report_csv(rows: &[InvariantReport]) -> Result<String> {
    let header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        vec![
            format_float(r.temperature),
            format_float(r.beta),
            fmt_opt_int(r.cx_uhlmann),
            fmt_opt_int(r.cy_uhlmann),
            fmt_opt_int(r.cx_egp),
            fmt_opt_int(r.cy_egp),
            r.c_ground.to_string(),
            r.status.clone(),
        ]
    });
    Ok(String::from_utf8(csv_bytes(&header, body)?).expect("utf8"))
}

pub fn parse_invariant_report_csv(text: &str) -> Result<Vec<InvariantReport>> {
    csv_records(text, &REPORT_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(InvariantReport {
                temperature: parse_float(&rec[0], line)?,
                beta: parse_float(&rec[1], line)?,
                cx_uhlmann: parse_opt_int(&rec[2], line)?,
                cy_uhlmann: parse_opt_int(&rec[3], line)?,
                cx_egp: parse_opt_int(&rec[4], line)?,
                cy_egp: parse_opt_int(&rec[5], line)?,
                c_ground: parse_int(&rec[6], line)?,
                status: rec[7].to_string(),
            })
        })
        .collect()
}

// ---- gauge reduction ----

const GAUGE_COLUMNS: [&str; 4] = ["N", "egp", "reference", "deviation"];

pub fn gauge_reduction_csv(rows: &[GaugeReductionRow]) -> Result<String> {
    let header: Vec<String> = GAUGE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        vec![r.n_cells.to_string(), format_float(r.egp), format_float(r.reference), format_float(r.deviation)]
    });
    Ok(String::from_utf8(csv_bytes(&header, body)?).expect("ascii"))
}

pub fn parse_gauge_reduction_csv(text: &str) -> Result<Vec<GaugeReductionRow>> {
    csv_records(text, &GAUGE_COLUMNS)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(GaugeReductionRow {
                n_cells: parse_int(&rec[0], line)?,
                egp: parse_float(&rec[1], line)?,
                reference: parse_float(&rec[2], line)?,
                deviation: parse_float(&rec[3], line)?,
            })
        })
        .collect()
}

// ---- curvature ----

const CURVATURE_COLUMNS: [&str; 3] = ["kx", "ky", "F_plaq"];

/// One row per plaquette, labelled by its lower-left corner, `kx` outer.
pub fn curvature_csv(field: &CurvatureField) -> Result<String> {
    let header: Vec<String> = CURVATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let g = field.grid;
    let body = (0..g.nx()).flat_map(|i| {
        (0..g.ny()).map(move |j| vec![format_float(g.kx(i)), format_float(g.ky(j)), format_float(field.at(i, j))])
    });
    Ok(String::from_utf8(csv_bytes(&header, body)?).expect("ascii"))
}

pub fn parse_curvature_csv(text: &str) -> Result<CurvatureField> {
    let recs = csv_records(text, &CURVATURE_COLUMNS)?;
    let mut rows = Vec::with_capacity(recs.len());
    for (line, rec) in recs {
        rows.push((line, parse_float(&rec[0], line)?, parse_float(&rec[1], line)?, parse_float(&rec[2], line)?));
    }
    let first_kx = rows.first().map(|r| r.1).ok_or(Error::Parse { line: 1, message: "empty table".into() })?;
    let ny = rows.iter().take_while(|r| r.1 == first_kx).count();
    if ny == 0 || rows.len() % ny != 0 {
        return Err(Error::Parse { line: 1, message: "rows do not form a full grid".into() });
    }
    let grid = MomentumGrid::new(rows.len() / ny, ny)?;
    for (idx, &(line, kx, ky, _)) in rows.iter().enumerate() {
        let (i, j) = (idx / ny, idx % ny);
        if kx != grid.kx(i) || ky != grid.ky(j) {
            return Err(Error::Parse { line, message: format!("unexpected momentum ({kx}, {ky})") });
        }
    }
    Ok(CurvatureField { grid, values: rows.into_iter().map(|r| r.3).collect() })
}

// ---- spectrum ----

/// Band energies on a grid, plus the direct gap around `mu` if it exists.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub grid: MomentumGrid,
    /// Ascending energies per grid point, flat-index order.
    pub energies: Vec<Vec<f64>>,
    pub gap: Option<f64>,
}

impl SpectrumTable {
    pub fn compute(model: &dyn BlochModel, grid: &MomentumGrid, mu: f64) -> Result<Self> {
        let energies = model::bands_on_grid(model, grid)?.into_iter().map(|b| b.energies).collect();
        let gap = match model::band_gap(model, grid, mu) {
            Ok(g) => Some(g),
            Err(Error::MuInsideBand { .. }) | Err(Error::Gapless { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { grid: *grid, energies, gap })
    }
}

/// `kx, ky, e1..ep`, preceded by a `# gap` comment line.
pub fn spectrum_csv(table: &SpectrumTable) -> Result<String> {
    let p = table.energies.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["kx".into(), "ky".into()];
    header.extend((1..=p).map(|n| format!("e{n}")));
    let g = table.grid;
    let body = (0..g.len()).map(|idx| {
        let (i, j) = (idx / g.ny(), idx % g.ny());
        let mut row = vec![format_float(g.kx(i)), format_float(g.ky(j))];
        row.extend(table.energies[idx].iter().map(|e| format_float(*e)));
        row
    });
    let gap = table.gap.map(format_float).unwrap_or_else(|| "none".into());
    let csv = String::from_utf8(csv_bytes(&header, body)?).expect("ascii");
    Ok(format!("# gap {gap}\n{csv}"))
}

pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumTable> {
    let gap_line = text.lines().next().unwrap_or_default();
    let gap = match gap_line.strip_prefix("# gap ") {
        Some("none") => None,
        Some(v) => Some(parse_float(v, 1)?),
        None => return Err(Error::Parse { line: 1, message: "missing '# gap' line".into() }),
    };
    let recs = csv_records(text, &["kx", "ky"])?;
    let mut kxs = Vec::new();
    let mut energies = Vec::new();
    for (line, rec) in &recs {
        kxs.push(parse_float(&rec[0], *line)?);
        energies.push(rec.iter().skip(2).map(|e| parse_float(e, *line)).collect::<Result<Vec<f64>>>()?);
    }
    let ny = kxs.iter().take_while(|&&k| Some(&k) == kxs.first()).count();
    if ny == 0 || kxs.len() % ny != 0 {
        return Err(Error::Parse { line: 2, message: "rows do not form a full grid".into() });
    }
    Ok(SpectrumTable { grid: MomentumGrid::new(kxs.len() / ny, ny)?, energies, gap })
}

// ---- matrix grid ----

/// Header `p Nx Ny`, then one line per grid point (`kx` outer) holding the
/// `p x p` matrix row-major as `re im` pairs.
pub fn matrix_grid_text(table: &MatrixGrid) -> String {
    let g = table.grid;
    let p = table.dim;
    let mut out = format!("{p} {} {}\n", g.nx(), g.ny());
    for m in &table.values {
        let mut fields = Vec::with_capacity(2 * p * p);
        for r in 0..p {
            for c in 0..p {
                fields.push(format_float(m[(r, c)].re));
                fields.push(format_float(m[(r, c)].im));
            }
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_grid(text: &str) -> Result<MatrixGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(Error::Parse { line: hline + 1, message: "header must be 'p Nx Ny'".into() });
    }
    let p: usize = parse_int(h[0], hline + 1)?;
    let nx: usize = parse_int(h[1], hline + 1)?;
    let ny: usize = parse_int(h[2], hline + 1)?;
    if p == 0 {
        return Err(Error::Parse { line: hline + 1, message: "p must be positive".into() });
    }
    let grid = MomentumGrid::new(nx, ny)?;
    let mut numbers = Vec::with_capacity(grid.len() * p * p * 2);
    for (n, line) in lines {
        for tok in line.split_whitespace() {
            numbers.push(parse_float(tok, n + 1)?);
        }
    }
    let expected = grid.len() * p * p * 2;
    if numbers.len() != expected {
        return Err(Error::Parse { line: 0, message: format!("expected {expected} numbers, found {}", numbers.len()) });
    }
    let values = numbers
        .chunks(2 * p * p)
        .map(|c| CMatrix::from_row_iterator(p, p, c.chunks(2).map(|z| Complex64::new(z[0], z[1]))))
        .collect();
    MatrixGrid::new(grid, p, values)
}

pub fn write_matrix_grid(path: &Path, table: &MatrixGrid) -> Result<()> {
    write_atomic(path, matrix_grid_text(table).as_bytes())
}

pub fn read_matrix_grid(path: &Path) -> Result<MatrixGrid> {
    parse_matrix_grid(&fs::read_to_string(path)?)
}
