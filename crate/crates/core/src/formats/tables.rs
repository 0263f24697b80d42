use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::game::{MemorabilityTable, Role, StimulusItem, TableRow};
use crate::stats::ResponseMatrix;

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn required(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    header_index(headers, name).ok_or_else(|| Error::Format(format!("missing column {name:?}")))
}

fn parse_f64(s: &str, line: u64, col: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad {col} value {s:?}")))
}

fn parse_usize(s: &str, line: u64, col: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad {col} value {s:?}")))
}

/// Pool manifest with columns `item_id,image_uri,role`.
pub fn read_pool<R: Read>(r: R) -> Result<Vec<StimulusItem>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let (id, uri, role) = (
        required(&headers, "item_id")?,
        required(&headers, "image_uri")?,
        required(&headers, "role")?,
    );
    let mut items = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let role: Role = rec[role]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: unknown role {:?}", &rec[role])))?;
        items.push(StimulusItem::new(rec[id].trim(), rec[uri].trim(), role));
    }
    Ok(items)
}

pub fn write_pool<W: Write>(w: W, items: &[StimulusItem]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["item_id", "image_uri", "role"])?;
    for it in items {
        wtr.write_record([it.item_id.as_str(), it.image_uri.as_str(), it.role.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(w: W, table: &MemorabilityTable) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["item_id", "score", "n_observers", "variance", "false_alarms"])?;
    for row in &table.rows {
        wtr.write_record([
            row.item_id.clone(),
            fmt_f64(row.score),
            row.n_observers.to_string(),
            fmt_f64(row.variance),
            fmt_f64(row.false_alarms),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a memorability table. Only `item_id` and `score` are required, so a
/// plain label file is accepted; absent columns are filled in.
pub fn read_table<R: Read>(r: R) -> Result<MemorabilityTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let id = required(&headers, "item_id")?;
    let score = required(&headers, "score")?;
    let n_obs = header_index(&headers, "n_observers");
    let var = header_index(&headers, "variance");
    let fa = header_index(&headers, "false_alarms");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let s = parse_f64(&rec[score], line, "score")?;
        if !s.is_finite() {
            return Err(Error::Format(format!("line {line}: non-finite score")));
        }
        let n_observers = n_obs.map(|c| parse_usize(&rec[c], line, "n_observers")).transpose()?.unwrap_or(0);
        rows.push(TableRow {
            item_id: rec[id].trim().to_string(),
            score: s,
            hits: (s * n_observers as f64).round() as usize,
            n_observers,
            variance: var.map(|c| parse_f64(&rec[c], line, "variance")).transpose()?.unwrap_or(s * (1.0 - s)),
            false_alarms: fa.map(|c| parse_f64(&rec[c], line, "false_alarms")).transpose()?.unwrap_or(0.0),
        });
    }
    Ok(MemorabilityTable { rows })
}

/// Response matrix with columns `participant_id,<target ids...>`; cells are
/// `1`, `0` or empty for unobserved.
pub fn write_matrix<W: Write>(w: W, m: &ResponseMatrix) -> Result<()> {
    let mut wtr = csv_writer(w);
    let mut header = vec!["participant_id".to_string()];
    header.extend(m.target_ids().iter().cloned());
    wtr.write_record(&header)?;
    for (i, pid) in m.participant_ids().iter().enumerate() {
        let mut rec = vec![pid.as_str()];
        rec.extend(m.row(i).iter().map(|c| match c {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        }));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(r: R) -> Result<ResponseMatrix> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("participant_id") {
        return Err(Error::Format("first column must be participant_id".into()));
    }
    let targets: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut pids = Vec::new();
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        pids.push(rec[0].trim().to_string());
        for c in rec.iter().skip(1) {
            cells.push(match c.trim() {
                "1" => Some(true),
                "0" => Some(false),
                "" => None,
                other => return Err(Error::Format(format!("line {line}: bad cell {other:?}"))),
            });
        }
    }
    ResponseMatrix::new(pids, targets, cells).map_err(|e| Error::Format(e.to_string()))
}

/// Predictions with columns `item_id,prediction`.
pub fn write_predictions<W: Write>(w: W, ids: &[String], preds: &[f64]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["item_id", "prediction"])?;
    for (id, p) in ids.iter().zip(preds) {
        wtr.write_record([id.clone(), fmt_f64(*p)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let id = required(&headers, "item_id")?;
    let pred = required(&headers, "prediction")?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = parse_f64(&rec[pred], line, "prediction")?;
        if out.insert(rec[id].trim().to_string(), v).is_some() {
            return Err(Error::Format(format!("line {line}: duplicate item {}", &rec[id])));
        }
    }
    Ok(out)
}
