//! CSV contracts: fixation records in, metric tables out (and back in).

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::is_valid_id;
use crate::fmt::format_real;
use crate::geometry::PositionCategory;
use crate::relevance::MetricRow;

pub const FIXATION_HEADER: [&str; 5] = [
    "image_id",
    "object_id",
    "participant",
    "total_duration_ms",
    "fixation_count",
];

pub const METRIC_HEADER: [&str; 14] = [
    "image_id",
    "object_id",
    "name",
    "obj_image_vissim",
    "objs_vissim",
    "overall_vissim",
    "sent_semsim",
    "words_semsim",
    "concepts_semsim",
    "overall_semsim",
    "sum_vissem_sim",
    "proportion",
    "saliency",
    "position",
];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("bad row at line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("duplicate key at line {line}: {key}")]
    DuplicateKey { line: usize, key: String },
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationRecord {
    pub image_id: String,
    pub object_id: String,
    pub participant: String,
    pub total_duration_ms: f64,
    pub fixation_count: u64,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r)
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

pub fn parse_fixations<R: Read>(r: R) -> Result<Vec<FixationRecord>, TableError> {
    let mut rdr = reader(r);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(TableError::BadHeader("empty file".into())),
    };
    if header.iter().collect::<Vec<_>>() != FIXATION_HEADER {
        return Err(TableError::BadHeader(format!(
            "expected '{}', got '{}'",
            FIXATION_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, i + 2);
        let bad = |reason: String| TableError::BadRow { line, reason };
        if rec.len() != FIXATION_HEADER.len() {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        for (field, name) in rec.iter().take(3).zip(FIXATION_HEADER) {
            if !is_valid_id(field) {
                return Err(bad(format!("{name} '{field}' must match [A-Za-z0-9_-]+")));
            }
        }
        let duration: f64 = rec[3]
            .parse()
            .map_err(|_| bad(format!("non-numeric duration '{}'", &rec[3])))?;
        if !duration.is_finite() || duration < 0.0 {
            return Err(bad(format!("duration must be finite and nonnegative, got {duration}")));
        }
        let count: u64 = rec[4]
            .parse()
            .map_err(|_| bad(format!("fixation count '{}' is not a nonnegative integer", &rec[4])))?;
        let key = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        if !seen.insert(key.clone()) {
            return Err(TableError::DuplicateKey {
                line,
                key: format!("{}/{}/{}", key.0, key.1, key.2),
            });
        }
        out.push(FixationRecord {
            image_id: key.0,
            object_id: key.1,
            participant: key.2,
            total_duration_ms: duration,
            fixation_count: count,
        });
    }
    Ok(out)
}

pub fn read_fixations(path: &Path) -> Result<Vec<FixationRecord>, TableError> {
    parse_fixations(std::fs::File::open(path)?)
}

pub fn write_fixations<W: Write>(w: W, rows: &[FixationRecord]) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FIXATION_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.image_id.as_str(),
            &r.object_id,
            &r.participant,
            &format_real(r.total_duration_ms),
            &r.fixation_count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn write_metric_rows<W: Write>(w: W, rows: &[MetricRow]) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(METRIC_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.image_id.clone(),
            r.object_id.clone(),
            r.name.clone(),
            opt(r.obj_image_vissim),
            opt(r.objs_vissim),
            opt(r.overall_vissim),
            opt(r.sent_semsim),
            opt(r.words_semsim),
            opt(r.concepts_semsim),
            opt(r.overall_semsim),
            opt(r.sum_vissem_sim),
            format_real(r.proportion),
            opt(r.saliency),
            r.position.label().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_metric_table(rows: &[MetricRow], path: &Path) -> Result<(), TableError> {
    let mut buf = Vec::new();
    write_metric_rows(&mut buf, rows)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn parse_metric_table<R: Read>(r: R) -> Result<Vec<MetricRow>, TableError> {
    let mut rdr = reader(r);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(TableError::BadHeader("empty file".into())),
    };
    for (i, col) in header.iter().enumerate() {
        if !METRIC_HEADER.contains(&col) {
            return Err(TableError::ParseError {
                line: 1,
                reason: format!("unknown column '{col}'"),
            });
        }
        if METRIC_HEADER.get(i) != Some(&col) {
            return Err(TableError::ParseError {
                line: 1,
                reason: format!("column '{col}' out of order"),
            });
        }
    }
    if header.len() != METRIC_HEADER.len() {
        return Err(TableError::ParseError {
            line: 1,
            reason: format!("missing column '{}'", METRIC_HEADER[header.len()]),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, i + 2);
        let perr = |reason: String| TableError::ParseError { line, reason };
        if rec.len() != METRIC_HEADER.len() {
            return Err(perr(format!(
                "expected {} fields, found {}",
                METRIC_HEADER.len(),
                rec.len()
            )));
        }
        let real = |idx: usize| -> Result<Option<f64>, TableError> {
            let s = &rec[idx];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| TableError::ParseError {
                    line,
                    reason: format!("{} '{s}' is not a finite number", METRIC_HEADER[idx]),
                })
        };
        out.push(MetricRow {
            image_id: rec[0].to_string(),
            object_id: rec[1].to_string(),
            name: rec[2].to_string(),
            obj_image_vissim: real(3)?,
            objs_vissim: real(4)?,
            overall_vissim: real(5)?,
            sent_semsim: real(6)?,
            words_semsim: real(7)?,
            concepts_semsim: real(8)?,
            overall_semsim: real(9)?,
            sum_vissem_sim: real(10)?,
            proportion: real(11)?.ok_or_else(|| perr("proportion is required".into()))?,
            saliency: real(12)?,
            position: rec[13].parse::<PositionCategory>().map_err(perr)?,
        });
    }
    Ok(out)
}

pub fn read_metric_table(path: &Path) -> Result<Vec<MetricRow>, TableError> {
    parse_metric_table(std::fs::File::open(path)?)
}
