//! Two-file field format: `<stem>.json` header plus `<stem>.bin` payload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Axis, AxisName, GridField, Parity, Scalar};

pub const BYTE_ORDER: &str = "little-endian";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisHeader {
    pub name: AxisName,
    pub origin: f64,
    pub step: f64,
    pub count: usize,
    pub parity: Parity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dims: usize,
    pub axes: Vec<AxisHeader>,
    pub scalar: String,
    pub byte_order: String,
    pub payload_sha256: String,
    #[serde(default)]
    pub non_finite: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// A field read from disk together with its header.
#[derive(Clone, Debug)]
pub struct LoadedField<T: Scalar> {
    pub field: GridField<T>,
    pub header: FieldHeader,
}

impl<T: Scalar> LoadedField<T> {
    pub fn non_finite(&self) -> bool {
        self.header.non_finite
    }

    /// The field, rejecting payloads flagged as non-finite.
    pub fn into_finite(self) -> Result<GridField<T>> {
        if self.header.non_finite {
            return Err(Error::NonFinite);
        }
        Ok(self.field)
    }
}

pub fn json_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "json")
}

pub fn bin_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "bin")
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

pub fn encode_payload<T: Scalar>(field: &GridField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.values().len() * T::WIDTH);
    for v in field.values() {
        v.write_le(&mut out);
    }
    out
}

pub fn header_for<T: Scalar>(
    field: &GridField<T>,
    payload: &[u8],
    metadata: Option<serde_json::Value>,
) -> FieldHeader {
    FieldHeader {
        dims: field.dims(),
        axes: field
            .axes()
            .iter()
            .zip(field.parity())
            .map(|(a, p)| AxisHeader {
                name: a.name,
                origin: a.origin,
                step: a.step,
                count: a.count,
                parity: *p,
            })
            .collect(),
        scalar: T::KIND.to_string(),
        byte_order: BYTE_ORDER.to_string(),
        payload_sha256: sha256_hex(payload),
        non_finite: field.non_finite(),
        metadata,
    }
}

/// Writes `<stem>.json` and `<stem>.bin`, returning the header.
pub fn write_field<T: Scalar>(
    field: &GridField<T>,
    stem: &Path,
    metadata: Option<serde_json::Value>,
) -> Result<FieldHeader> {
    if let Some(dir) = stem.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let payload = encode_payload(field);
    let header = header_for(field, &payload, metadata);
    fs::write(bin_path(stem), &payload)?;
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    fs::write(json_path(stem), text)?;
    Ok(header)
}

pub fn read_header(stem: &Path) -> Result<FieldHeader> {
    let path = json_path(stem);
    if !path.exists() {
        return Err(Error::MissingInput(path));
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path,
        reason: e.to_string(),
    })
}

/// Reads a field. Non-finite payloads load successfully with the flag set.
pub fn read_field<T: Scalar>(stem: &Path) -> Result<LoadedField<T>> {
    let mut header = read_header(stem)?;
    let jpath = json_path(stem);
    let malformed = |reason: String| Error::MalformedHeader {
        path: jpath.clone(),
        reason,
    };
    if header.byte_order != BYTE_ORDER {
        return Err(malformed(format!(
            "unsupported byte order {}",
            header.byte_order
        )));
    }
    if header.scalar != T::KIND {
        return Err(malformed(format!(
            "scalar kind {} where {} was expected",
            header.scalar,
            T::KIND
        )));
    }
    if header.dims != header.axes.len() {
        return Err(Error::DimensionMismatch {
            expected: header.dims,
            got: header.axes.len(),
        });
    }
    let bpath = bin_path(stem);
    if !bpath.exists() {
        return Err(Error::MissingInput(bpath));
    }
    let payload = fs::read(&bpath)?;
    if sha256_hex(&payload) != header.payload_sha256 {
        return Err(Error::ChecksumMismatch(bpath));
    }
    let expected: usize = header.axes.iter().map(|a| a.count).product();
    if payload.len() % T::WIDTH != 0 || payload.len() / T::WIDTH != expected {
        return Err(Error::CountMismatch {
            expected,
            got: payload.len() / T::WIDTH,
        });
    }
    let values: Vec<T> = payload.chunks_exact(T::WIDTH).map(T::read_le).collect();
    let mut axes = Vec::with_capacity(header.axes.len());
    let mut parity = Vec::with_capacity(header.axes.len());
    for a in &header.axes {
        axes.push(Axis::new(a.name, a.origin, a.step, a.count)?);
        parity.push(a.parity);
    }
    let field = GridField::new(axes, parity, values)?;
    header.non_finite = field.non_finite();
    Ok(LoadedField { field, header })
}

/// CSV export: axis coordinates then value(s), one row per sample.
pub fn write_csv<T: Scalar>(field: &GridField<T>, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let names: Vec<&str> = field.axes().iter().map(|a| a.name.label()).collect();
    let value_cols = if T::WIDTH == 16 { "re,im" } else { "value" };
    writeln!(out, "{},{}", names.join(","), value_cols)?;
    let shape = field.shape();
    let mut idx = vec![0usize; shape.len()];
    let mut buf = Vec::with_capacity(16);
    for v in field.values() {
        for (k, &i) in idx.iter().enumerate() {
            write!(out, "{},", field.axis(k).coord(i))?;
        }
        buf.clear();
        v.write_le(&mut buf);
        if T::WIDTH == 16 {
            writeln!(
                out,
                "{},{}",
                f64::read_le(&buf[..8]),
                f64::read_le(&buf[8..])
            )?;
        } else {
            writeln!(out, "{}", f64::read_le(&buf))?;
        }
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes a plain table with a header row.
pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", columns.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}
