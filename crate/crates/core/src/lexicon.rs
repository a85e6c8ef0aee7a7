//! Word-vector stores in the plain-text `.vec` layout and name resolution.
//!
//! The first line holds `count dim`; each following non-empty line is a token
//! followed by `dim` space-separated components. Tokens are lowercased on load
//! and the first occurrence of a token wins.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::vecmath::{mean_vector, Vector};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("bad line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct WordVectorStore {
    dim: usize,
    declared_count: usize,
    entries: HashMap<String, Vector>,
    warnings: Vec<String>,
}

impl WordVectorStore {
    pub fn from_entries<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (String, Vector)>,
    {
        let mut store = Self { dim, ..Self::default() };
        for (token, v) in entries {
            assert_eq!(v.dim(), dim, "vector for '{token}' has wrong dimension");
            store.entries.entry(token.to_lowercase()).or_insert(v);
        }
        store.declared_count = store.entries.len();
        store
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn declared_count(&self) -> usize {
        self.declared_count
    }

    /// Non-fatal issues noticed while loading (count mismatch, duplicates).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, token: &str) -> Option<&Vector> {
        self.entries.get(token)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }
}

pub fn parse_vec<R: Read>(reader: R) -> Result<WordVectorStore, LexiconError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| LexiconError::MalformedHeader("empty file".into()))??;
    let mut fields = header.split_whitespace();
    let parse_field = |f: Option<&str>, what: &str| -> Result<usize, LexiconError> {
        f.and_then(|s| s.parse().ok())
            .ok_or_else(|| LexiconError::MalformedHeader(format!("expected {what} in '{header}'")))
    };
    let declared_count = parse_field(fields.next(), "count")?;
    let dim = parse_field(fields.next(), "dimension")?;
    if fields.next().is_some() || dim == 0 {
        return Err(LexiconError::MalformedHeader(format!(
            "expected 'count dim', got '{header}'"
        )));
    }

    let mut store = WordVectorStore {
        dim,
        declared_count,
        entries: HashMap::with_capacity(declared_count),
        warnings: Vec::new(),
    };
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        let mut values = Vec::with_capacity(dim);
        for part in parts {
            let v: f64 = part.parse().map_err(|_| LexiconError::BadLine {
                line: line_no,
                reason: format!("non-numeric component '{part}'"),
            })?;
            values.push(v);
        }
        if values.len() != dim {
            return Err(LexiconError::BadLine {
                line: line_no,
                reason: format!("expected {dim} components, found {}", values.len()),
            });
        }
        let vector = Vector::new(values).map_err(|e| LexiconError::BadLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        let key = token.to_lowercase();
        if store.entries.contains_key(&key) {
            store
                .warnings
                .push(format!("line {line_no}: duplicate token '{token}' ignored"));
            continue;
        }
        store.entries.insert(key, vector);
    }
    if store.entries.len() != declared_count {
        store.warnings.push(format!(
            "header declares {declared_count} entries, parsed {}",
            store.entries.len()
        ));
    }
    Ok(store)
}

pub fn load_vec_file(path: &Path) -> Result<WordVectorStore, LexiconError> {
    let store = parse_vec(std::fs::File::open(path)?)?;
    for w in store.warnings() {
        warn!("{}: {}", path.display(), w);
    }
    Ok(store)
}

/// Resolve an object label; multiword labels average the tokens that are known.
pub fn lookup_name(store: &WordVectorStore, name: &str) -> Option<Vector> {
    let lowered = name.to_lowercase();
    let tokens: Vec<&str> = lowered.split_whitespace().collect();
    match tokens.as_slice() {
        [] => None,
        [single] => store.get(single).cloned(),
        many => mean_of_known(store, many.iter().copied()),
    }
}

/// Bag-of-words embedding: mean vector of the in-vocabulary tokens.
pub fn fallback_sentence_embedding(store: &WordVectorStore, text: &str) -> Option<Vector> {
    let lowered = text.to_lowercase();
    let tokens = lowered
        .split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|t| !t.is_empty());
    mean_of_known(store, tokens)
}

fn mean_of_known<'a>(store: &WordVectorStore, tokens: impl Iterator<Item = &'a str>) -> Option<Vector> {
    let found: Vec<&Vector> = tokens.filter_map(|t| store.get(t)).collect();
    if found.is_empty() {
        None
    } else {
        mean_vector(found).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn parses_small_file() {
        let s = parse_vec("2 3\ncat 1 0 0\ndog 0 1 0\n".as_bytes()).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.len(), 2);
        assert!(s.warnings().is_empty());
        assert_eq!(s.get("dog"), Some(&v(&[0.0, 1.0, 0.0])));
    }

    #[test]
    fn wrong_field_count_is_bad_line() {
        match parse_vec("2 3\ncat 1 0\n".as_bytes()) {
            Err(LexiconError::BadLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_vec("2 2\ncat 1 0\ndog 1 x\n".as_bytes()) {
            Err(LexiconError::BadLine { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_warns() {
        let s = parse_vec("5 3\ncat 1 0 0\ndog 0 1 0\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.declared_count(), 5);
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn duplicate_keeps_first() {
        let s = parse_vec("2 1\nCat 1\ncat 2\n".as_bytes()).unwrap();
        assert_eq!(s.get("cat"), Some(&v(&[1.0])));
        assert_eq!(s.warnings().len(), 2);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_vec("".as_bytes()),
            Err(LexiconError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_vec("abc 3\n".as_bytes()),
            Err(LexiconError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_vec("2 0\n".as_bytes()),
            Err(LexiconError::MalformedHeader(_))
        ));
    }

    #[test]
    fn tolerates_trailing_space() {
        let s = parse_vec("1 2\nwolf 0.5 -0.25 \n".as_bytes()).unwrap();
        assert_eq!(s.get("wolf"), Some(&v(&[0.5, -0.25])));
    }

    fn sample() -> WordVectorStore {
        WordVectorStore::from_entries(
            3,
            [
                ("cat".to_string(), v(&[1.0, 0.0, 0.0])),
                ("plant".to_string(), v(&[0.0, 0.0, 1.0])),
                ("dog".to_string(), v(&[0.0, 1.0, 0.0])),
            ],
        )
    }

    #[test]
    fn lookup_examples() {
        let s = sample();
        assert_eq!(lookup_name(&s, "cat"), Some(v(&[1.0, 0.0, 0.0])));
        assert_eq!(lookup_name(&s, "Cat"), lookup_name(&s, "cat"));
        assert_eq!(lookup_name(&s, "potted plant"), Some(v(&[0.0, 0.0, 1.0])));
        assert_eq!(lookup_name(&s, "zzyzx"), None);
        assert_eq!(lookup_name(&s, "cat dog"), Some(v(&[0.5, 0.5, 0.0])));
    }

    #[test]
    fn fallback_examples() {
        let s = sample();
        assert_eq!(fallback_sentence_embedding(&s, "a cat."), Some(v(&[1.0, 0.0, 0.0])));
        assert_eq!(fallback_sentence_embedding(&s, "cat dog"), Some(v(&[0.5, 0.5, 0.0])));
        assert_eq!(fallback_sentence_embedding(&s, "the zzyzx!"), None);
        assert_eq!(fallback_sentence_embedding(&s, "dog"), lookup_name(&s, "dog"));
    }

    proptest! {
        #[test]
        fn parse_round_trip(rows in prop::collection::btree_map("[a-z]{1,8}", prop::collection::vec(-1e3f64..1e3, 4), 1..20)) {
            let mut text = format!("{} 4\n", rows.len());
            for (tok, vals) in &rows {
                let joined: Vec<String> = vals.iter().map(|x| crate::fmt::format_real(*x)).collect();
                text.push_str(&format!("{tok} {}\n", joined.join(" ")));
            }
            let store = parse_vec(text.as_bytes()).unwrap();
            for (tok, vals) in &rows {
                let got = lookup_name(&store, tok).unwrap();
                prop_assert_eq!(got.as_slice(), vals.as_slice());
            }
        }
    }
}
