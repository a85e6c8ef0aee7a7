//! Scene bundle documents: one image's caption, embeddings and detected objects.
//!
//! Validation walks the raw JSON tree and records every problem it finds, so a
//! single pass reports all defects. Reading a bundle runs the same validator
//! and fails on the first error.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{clip_to_image, BBox, ImageDims};
use crate::vecmath::{l2_norm, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: String,
    pub name: String,
    pub bbox: BBox,
    pub embedding: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_text_embedding: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub caption: String,
    pub embedding_dim: usize,
    pub image_embedding: Vector,
    pub objects: Vec<ObjectRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption_sentence_embeddings: Option<Vec<Vector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Value>,
}

impl SceneBundle {
    pub fn dims(&self) -> ImageDims {
        ImageDims::new(self.width, self.height)
    }

    pub fn object(&self, object_id: &str) -> Option<&ObjectRecord> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    /// Re-run the document validator on an in-memory bundle.
    pub fn validate(&self) -> ValidationReport {
        match serde_json::to_value(self) {
            Ok(v) => validate_value(&v),
            Err(e) => ValidationReport::single_error("$", IssueKind::Schema, e.to_string()),
        }
    }
}

/// Object and image ids are restricted so CSV output never needs quoting.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueKind {
    Parse,
    Schema,
    Dim,
    Geometry,
    Io,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub path: String,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub ok: bool,
}

impl ValidationReport {
    fn single_error(path: &str, kind: IssueKind, message: String) -> Self {
        let mut r = Collector::default();
        r.error(path, kind, message);
        r.finish()
    }

    pub fn entry_count(&self) -> usize {
        self.errors.len() + self.warnings.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.errors {
            out.push_str(&format!("error   {}: {}\n", e.path, e.message));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning {}: {}\n", w.path, w.message));
        }
        out.push_str(if self.ok { "ok\n" } else { "invalid\n" });
        out
    }
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("dimension mismatch at {path}: {message}")]
    DimMismatch { path: String, message: String },
    #[error("geometry error at {path}: {message}")]
    Geometry { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<Issue> for BundleError {
    fn from(issue: Issue) -> Self {
        let Issue { path, kind, message } = issue;
        match kind {
            IssueKind::Parse => BundleError::ParseError {
                location: path,
                message,
            },
            IssueKind::Dim => BundleError::DimMismatch { path, message },
            IssueKind::Geometry => BundleError::Geometry { path, message },
            IssueKind::Schema | IssueKind::Io => BundleError::SchemaError { path, message },
        }
    }
}

#[derive(Default)]
struct Collector {
    errors: Vec<Issue>,
    warnings: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, path: &str, kind: IssueKind, message: impl Into<String>) {
        self.errors.push(Issue {
            path: path.to_string(),
            kind,
            message: message.into(),
        });
    }

    fn warn(&mut self, path: &str, kind: IssueKind, message: impl Into<String>) {
        self.warnings.push(Issue {
            path: path.to_string(),
            kind,
            message: message.into(),
        });
    }

    fn finish(self) -> ValidationReport {
        ValidationReport {
            ok: self.errors.is_empty(),
            errors: self.errors,
            warnings: self.warnings,
        }
    }
}

const KNOWN_FIELDS: [&str; 10] = [
    "image_id",
    "width",
    "height",
    "caption",
    "embedding_dim",
    "image_embedding",
    "objects",
    "caption_sentence_embeddings",
    "image_path",
    "provenance",
];

fn positive_int(c: &mut Collector, obj: &Map<String, Value>, key: &str) -> Option<u64> {
    match obj.get(key) {
        None => {
            c.error(key, IssueKind::Schema, "missing field");
            None
        }
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => Some(n),
            _ => {
                c.error(key, IssueKind::Schema, "expected a positive integer");
                None
            }
        },
    }
}

fn string_field<'a>(c: &mut Collector, obj: &'a Map<String, Value>, key: &str, path: &str) -> Option<&'a str> {
    match obj.get(key) {
        None => {
            c.error(path, IssueKind::Schema, "missing field");
            None
        }
        Some(Value::String(s)) => Some(s),
        Some(_) => {
            c.error(path, IssueKind::Schema, "expected a string");
            None
        }
    }
}

/// Checks a numeric array and returns its length when valid.
fn check_vector(c: &mut Collector, v: &Value, path: &str, expected: Option<usize>) -> Option<usize> {
    let Some(items) = v.as_array() else {
        c.error(path, IssueKind::Schema, "expected an array of numbers");
        return None;
    };
    let mut values = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match item.as_f64() {
            Some(x) if x.is_finite() => values.push(x),
            _ => {
                c.error(&format!("{path}[{i}]"), IssueKind::Schema, "expected a finite number");
                return None;
            }
        }
    }
    match expected {
        Some(d) if d != values.len() => {
            c.error(
                path,
                IssueKind::Dim,
                format!("expected length {d}, found {}", values.len()),
            );
            return None;
        }
        None if values.is_empty() => {
            c.error(path, IssueKind::Dim, "empty vector");
            return None;
        }
        _ => {}
    }
    if let Ok(vec) = Vector::new(values) {
        if l2_norm(&vec) == 0.0 {
            c.warn(
                path,
                IssueKind::Dim,
                "zero-norm vector; dependent metrics will be missing",
            );
        }
    }
    Some(items.len())
}

fn check_bbox(c: &mut Collector, v: &Value, path: &str, dims: Option<ImageDims>) {
    let Some(obj) = v.as_object() else {
        c.error(path, IssueKind::Schema, "expected an object {x, y, w, h}");
        return;
    };
    let mut parts = [0.0f64; 4];
    for (slot, key) in parts.iter_mut().zip(["x", "y", "w", "h"]) {
        match obj.get(key).and_then(Value::as_f64) {
            Some(x) if x.is_finite() => *slot = x,
            Some(_) => {
                c.error(&format!("{path}.{key}"), IssueKind::Schema, "expected a finite number");
                return;
            }
            None => {
                c.error(
                    &format!("{path}.{key}"),
                    IssueKind::Schema,
                    "missing or non-numeric field",
                );
                return;
            }
        }
    }
    let b = BBox::new(parts[0], parts[1], parts[2], parts[3]);
    if !(b.w > 0.0 && b.h > 0.0) {
        c.error(path, IssueKind::Geometry, "width and height must be positive");
        return;
    }
    if let Some(dims) = dims {
        if !b.within(dims) {
            match clip_to_image(b, dims) {
                Ok(clipped) => c.warn(
                    path,
                    IssueKind::Geometry,
                    format!(
                        "extends past the image; clipped to ({}, {}, {}, {})",
                        clipped.x, clipped.y, clipped.w, clipped.h
                    ),
                ),
                Err(_) => c.error(path, IssueKind::Geometry, "lies entirely outside the image"),
            }
        }
    }
}

/// Validate a parsed bundle document, collecting every issue.
pub fn validate_value(doc: &Value) -> ValidationReport {
    let mut c = Collector::default();
    let Some(root) = doc.as_object() else {
        c.error("$", IssueKind::Schema, "bundle must be a JSON object");
        return c.finish();
    };

    for key in root.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            c.warn(key, IssueKind::Schema, "unknown field ignored");
        }
    }

    if let Some(id) = string_field(&mut c, root, "image_id", "image_id") {
        if !is_valid_id(id) {
            c.error("image_id", IssueKind::Schema, "id must match [A-Za-z0-9_-]+");
        }
    }
    let width = positive_int(&mut c, root, "width");
    let height = positive_int(&mut c, root, "height");
    let dims = width.zip(height).map(|(w, h)| ImageDims::new(w as u32, h as u32));
    string_field(&mut c, root, "caption", "caption");
    let dim = positive_int(&mut c, root, "embedding_dim").map(|d| d as usize);

    match root.get("image_embedding") {
        None => c.error("image_embedding", IssueKind::Schema, "missing field"),
        Some(v) => {
            check_vector(&mut c, v, "image_embedding", dim);
        }
    }

    let mut text_dim: Option<usize> = None;
    match root.get("objects") {
        None => c.error("objects", IssueKind::Schema, "missing field"),
        Some(Value::Array(objects)) if objects.is_empty() => {
            c.error("objects", IssueKind::Schema, "at least one object is required")
        }
        Some(Value::Array(objects)) => {
            let mut seen = HashSet::new();
            for (i, o) in objects.iter().enumerate() {
                let path = format!("objects[{i}]");
                let Some(obj) = o.as_object() else {
                    c.error(&path, IssueKind::Schema, "expected an object");
                    continue;
                };
                let id_path = format!("{path}.object_id");
                if let Some(id) = string_field(&mut c, obj, "object_id", &id_path) {
                    if !is_valid_id(id) {
                        c.error(&id_path, IssueKind::Schema, "id must match [A-Za-z0-9_-]+");
                    } else if !seen.insert(id.to_string()) {
                        c.error(&id_path, IssueKind::Schema, format!("duplicate object id '{id}'"));
                    }
                }
                let name_path = format!("{path}.name");
                if let Some(name) = string_field(&mut c, obj, "name", &name_path) {
                    if name.trim().is_empty() {
                        c.error(&name_path, IssueKind::Schema, "name must be nonempty");
                    }
                }
                let bbox_path = format!("{path}.bbox");
                match obj.get("bbox") {
                    None => c.error(&bbox_path, IssueKind::Schema, "missing field"),
                    Some(b) => check_bbox(&mut c, b, &bbox_path, dims),
                }
                let emb_path = format!("{path}.embedding");
                match obj.get("embedding") {
                    None => c.error(&emb_path, IssueKind::Schema, "missing field"),
                    Some(e) => {
                        check_vector(&mut c, e, &emb_path, dim);
                    }
                }
                if let Some(t) = obj.get("name_text_embedding").filter(|v| !v.is_null()) {
                    let p = format!("{path}.name_text_embedding");
                    if let Some(len) = check_vector(&mut c, t, &p, text_dim) {
                        text_dim.get_or_insert(len);
                    }
                }
                for key in obj.keys() {
                    if !["object_id", "name", "bbox", "embedding", "name_text_embedding"].contains(&key.as_str()) {
                        c.warn(&format!("{path}.{key}"), IssueKind::Schema, "unknown field ignored");
                    }
                }
            }
        }
        Some(_) => c.error("objects", IssueKind::Schema, "expected an array"),
    }

    match root.get("caption_sentence_embeddings") {
        None | Some(Value::Null) => {}
        Some(Value::Array(sentences)) if sentences.is_empty() => c.error(
            "caption_sentence_embeddings",
            IssueKind::Schema,
            "must hold at least one sentence embedding when present",
        ),
        Some(Value::Array(sentences)) => {
            for (i, s) in sentences.iter().enumerate() {
                let p = format!("caption_sentence_embeddings[{i}]");
                if let Some(len) = check_vector(&mut c, s, &p, text_dim) {
                    text_dim.get_or_insert(len);
                }
            }
        }
        Some(_) => c.error(
            "caption_sentence_embeddings",
            IssueKind::Schema,
            "expected an array of vectors",
        ),
    }

    match root.get("image_path") {
        None | Some(Value::Null) | Some(Value::String(_)) => {}
        Some(_) => c.error("image_path", IssueKind::Schema, "expected a string"),
    }

    c.finish()
}

pub fn validate_str(text: &str) -> ValidationReport {
    match serde_json::from_str::<Value>(text) {
        Ok(v) => validate_value(&v),
        Err(e) => ValidationReport::single_error(
            &format!("line {} column {}", e.line(), e.column()),
            IssueKind::Parse,
            e.to_string(),
        ),
    }
}

pub fn validate_bundle(path: &Path) -> ValidationReport {
    match std::fs::read_to_string(path) {
        Ok(text) => validate_str(&text),
        Err(e) => ValidationReport::single_error(
            &path.display().to_string(),
            IssueKind::Io,
            format!("cannot read file: {e}"),
        ),
    }
}

/// Parse and validate a bundle; out-of-bounds boxes are clipped and reported
/// in the returned warnings.
pub fn parse_bundle(text: &str) -> Result<(SceneBundle, Vec<Issue>), BundleError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| BundleError::ParseError {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let report = validate_value(&doc);
    if let Some(first) = report.errors.into_iter().next() {
        return Err(first.into());
    }
    let mut bundle: SceneBundle = serde_json::from_value(doc).map_err(|e| BundleError::SchemaError {
        path: "$".into(),
        message: e.to_string(),
    })?;
    let dims = bundle.dims();
    for (i, o) in bundle.objects.iter_mut().enumerate() {
        o.bbox = clip_to_image(o.bbox, dims).map_err(|e| BundleError::Geometry {
            path: format!("objects[{i}].bbox"),
            message: e.to_string(),
        })?;
    }
    Ok((bundle, report.warnings))
}

pub fn read_bundle(path: &Path) -> Result<SceneBundle, BundleError> {
    let text = std::fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (bundle, warnings) = parse_bundle(&text)?;
    for w in warnings {
        log::warn!("{}: {}: {}", path.display(), w.path, w.message);
    }
    Ok(bundle)
}

pub fn write_bundle(bundle: &SceneBundle, path: &Path) -> Result<(), BundleError> {
    let text = serde_json::to_string_pretty(bundle).map_err(|e| BundleError::SchemaError {
        path: "$".into(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}
