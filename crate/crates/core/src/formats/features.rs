//! Feature files.
//!
//! CSV: header `item_id,<feature names...>`; an empty cell or `nan` is a
//! missing value.
//!
//! Binary (little-endian): magic `MGFM`, u32 row count `n`, u32 feature count
//! `d`, `n * d` f32 values row-major (NaN = missing), then optionally the
//! item ids as `n` entries of u32 byte length + UTF-8 bytes. Without the id
//! block rows are named `0..n-1`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::gbt::FeatureMatrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"MGFM";

pub fn read_features_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("item_id") {
        return Err(Error::Format("first column must be item_id".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        ids.push(rec[0].trim().to_string());
        for cell in rec.iter().skip(1) {
            let cell = cell.trim();
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                FeatureMatrix::MISSING
            } else {
                cell.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {line}: bad feature value {cell:?}")))?
            };
            values.push(v);
        }
    }
    FeatureMatrix::new(ids, names.len(), values, Some(names)).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_features_csv<W: Write>(w: W, x: &FeatureMatrix) -> Result<()> {
    let mut wtr = csv_writer(w);
    let mut header = vec!["item_id".to_string()];
    match x.feature_names() {
        Some(names) => header.extend(names.iter().cloned()),
        None => header.extend((0..x.n_features()).map(|j| format!("f{j}"))),
    }
    wtr.write_record(&header)?;
    for (i, id) in x.item_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(x.row(i).iter().map(|&v| fmt_f64(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_features_binary<R: Read>(mut r: R) -> Result<FeatureMatrix> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let short = || Error::Format("truncated feature file".into());
    if buf.len() < 12 || &buf[..4] != FEATURE_MAGIC {
        return Err(Error::Format("not a feature file (bad magic)".into()));
    }
    let u32_at = |p: usize| -> Option<usize> {
        buf.get(p..p + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
    };
    let n = u32_at(4).ok_or_else(short)?;
    let d = u32_at(8).ok_or_else(short)?;
    let body = n.checked_mul(d).and_then(|c| c.checked_mul(4)).ok_or_else(short)?;
    let mut pos = 12;
    let data = buf.get(pos..pos + body).ok_or_else(short)?;
    let values: Vec<f64> = data
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    pos += body;
    let ids = if pos == buf.len() {
        (0..n).map(|i| i.to_string()).collect()
    } else {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let len = u32_at(pos).ok_or_else(short)?;
            pos += 4;
            let bytes = buf.get(pos..pos + len).ok_or_else(short)?;
            ids.push(
                String::from_utf8(bytes.to_vec())
                    .map_err(|_| Error::Format("item id is not UTF-8".into()))?,
            );
            pos += len;
        }
        if pos != buf.len() {
            return Err(Error::Format("trailing bytes after item ids".into()));
        }
        ids
    };
    FeatureMatrix::new(ids, d, values, None).map_err(|e| Error::Format(e.to_string()))
}

/// Writes the binary format with the item id block. Values are narrowed to f32.
pub fn write_features_binary<W: Write>(mut w: W, x: &FeatureMatrix) -> Result<()> {
    let mut out = Vec::with_capacity(12 + x.values().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    for c in [x.n_rows(), x.n_features()] {
        let c = u32::try_from(c).map_err(|_| Error::InvalidInput("matrix too large".into()))?;
        out.extend_from_slice(&c.to_le_bytes());
    }
    for &v in x.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for id in x.item_ids() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    w.write_all(&out)?;
    Ok(())
}

/// Reads a feature file, choosing the format by magic bytes.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut f = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let n = f.read(&mut magic)?;
    let chained = (&magic[..n]).chain(f);
    if n == 4 && &magic == FEATURE_MAGIC {
        read_features_binary(chained)
    } else {
        read_features_csv(chained)
    }
}
