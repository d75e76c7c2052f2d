use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::io::BufRead;

use indexmap::IndexSet;

use super::schema::{kind_of, AttributeKind, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::par::Execution;

/// One attribute value of a connection record, typed by its schema position.
#[derive(Debug, Clone)]
pub enum FeatureValue {
    Numeric(f64),
    Binary(bool),
    Categorical(String),
}

impl FeatureValue {
    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            FeatureValue::Numeric(v) => Some(*v),
            FeatureValue::Binary(b) => Some(if *b { 1.0 } else { 0.0 }),
            FeatureValue::Categorical(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            FeatureValue::Categorical(t) => Some(t),
            _ => None,
        }
    }
}

// Numeric equality is bitwise so that `Eq` and `Hash` agree; the parser never
// produces NaN.
impl PartialEq for FeatureValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FeatureValue::Numeric(a), FeatureValue::Numeric(b)) => a.to_bits() == b.to_bits(),
            (FeatureValue::Binary(a), FeatureValue::Binary(b)) => a == b,
            (FeatureValue::Categorical(a), FeatureValue::Categorical(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for FeatureValue {}

impl Hash for FeatureValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            FeatureValue::Numeric(v) => {
                0u8.hash(state);
                v.to_bits().hash(state);
            }
            FeatureValue::Binary(b) => {
                1u8.hash(state);
                b.hash(state);
            }
            FeatureValue::Categorical(t) => {
                2u8.hash(state);
                t.hash(state);
            }
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Numeric(v) => write!(f, "{v}"),
            FeatureValue::Binary(b) => f.write_str(if *b { "1" } else { "0" }),
            FeatureValue::Categorical(t) => f.write_str(t),
        }
    }
}

/// A labeled, pre-featurized KDD connection record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConnectionRecord {
    values: Vec<FeatureValue>,
    label: String,
}

impl ConnectionRecord {
    pub fn new(values: Vec<FeatureValue>, label: impl Into<String>) -> Result<Self> {
        if values.len() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                actual: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            let ok = matches!(
                (kind_of(i), v),
                (AttributeKind::Numeric, FeatureValue::Numeric(_))
                    | (AttributeKind::Binary, FeatureValue::Binary(_))
                    | (AttributeKind::Categorical, FeatureValue::Categorical(_))
            );
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "attribute {} has the wrong kind for its schema position",
                    i + 1
                )));
            }
        }
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidInput("empty label".into()));
        }
        Ok(Self { values, label })
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn value(&self, position: usize) -> &FeatureValue {
        &self.values[position]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Canonical KDD text form: 41 values, the label, and a trailing period.
    pub fn to_kdd_line(&self) -> String {
        let mut out = String::with_capacity(128);
        for v in &self.values {
            let _ = write!(out, "{v},");
        }
        out.push_str(&self.label);
        out.push('.');
        out
    }
}

/// Anything that carries an exploit label; the class-balance filters work on it.
pub trait Labeled {
    fn label(&self) -> &str;
}

impl Labeled for ConnectionRecord {
    fn label(&self) -> &str {
        &self.label
    }
}

/// Parses one comma-separated KDD row. `line_no` is 1-based and only used in errors.
pub fn parse_kdd_line(line: &str, line_no: usize) -> Result<ConnectionRecord> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let line = line.trim();
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != NUM_FEATURES + 1 {
        return Err(err(format!(
            "expected {} comma-separated fields, found {}",
            NUM_FEATURES + 1,
            fields.len()
        )));
    }
    let mut values = Vec::with_capacity(NUM_FEATURES);
    for (i, raw) in fields[..NUM_FEATURES].iter().enumerate() {
        let raw = raw.trim();
        let value = match kind_of(i) {
            AttributeKind::Numeric => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| err(format!("attribute {}: `{raw}` is not numeric", i + 1)))?;
                if !v.is_finite() {
                    return Err(err(format!("attribute {}: `{raw}` is not finite", i + 1)));
                }
                FeatureValue::Numeric(v)
            }
            AttributeKind::Binary => match raw {
                "0" => FeatureValue::Binary(false),
                "1" => FeatureValue::Binary(true),
                _ => {
                    return Err(err(format!(
                        "attribute {}: `{raw}` is not a 0/1 flag",
                        i + 1
                    )))
                }
            },
            AttributeKind::Categorical => {
                if raw.is_empty() {
                    return Err(err(format!("attribute {}: empty token", i + 1)));
                }
                FeatureValue::Categorical(raw.to_string())
            }
        };
        values.push(value);
    }
    let label = fields[NUM_FEATURES].trim();
    let label = label.strip_suffix('.').unwrap_or(label).trim();
    if label.is_empty() {
        return Err(err("empty label".into()));
    }
    Ok(ConnectionRecord {
        values,
        label: label.to_string(),
    })
}

const CHUNK_LINES: usize = 1 << 16;

/// Reads every non-blank line of a KDD file, parsing chunks with `exec`.
///
/// `sink` receives records in file order.
pub fn for_each_record<R, F>(reader: R, exec: Execution, mut sink: F) -> Result<usize>
where
    R: BufRead,
    F: FnMut(ConnectionRecord),
{
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK_LINES);
    let mut total = 0usize;
    let mut flush = |chunk: &mut Vec<(usize, String)>, total: &mut usize| -> Result<()> {
        let parsed = exec.try_map(chunk, |(n, l)| parse_kdd_line(l, *n))?;
        *total += parsed.len();
        parsed.into_iter().for_each(&mut sink);
        chunk.clear();
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        chunk.push((i + 1, line));
        if chunk.len() == CHUNK_LINES {
            flush(&mut chunk, &mut total)?;
        }
    }
    flush(&mut chunk, &mut total)?;
    Ok(total)
}

pub fn read_records<R: BufRead>(reader: R, exec: Execution) -> Result<Vec<ConnectionRecord>> {
    let mut out = Vec::new();
    for_each_record(reader, exec, |r| out.push(r))?;
    Ok(out)
}

/// Keeps the first occurrence of every exact duplicate (all attributes and
/// the label), preserving input order.
pub fn deduplicate(records: Vec<ConnectionRecord>) -> Vec<ConnectionRecord> {
    let set: IndexSet<ConnectionRecord> = records.into_iter().collect();
    set.into_iter().collect()
}

/// A unique record held in canonical text form.
///
/// The streaming deduplicator keys on this text, which is equivalent to
/// keying on the parsed record but far smaller in memory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalLine {
    text: Box<str>,
    label_start: u32,
}

impl CanonicalLine {
    pub fn from_record(record: &ConnectionRecord) -> Self {
        let text = record.to_kdd_line();
        let label_start = (text.len() - record.label.len() - 1) as u32;
        Self {
            text: text.into_boxed_str(),
            label_start,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn parse(&self) -> ConnectionRecord {
        parse_kdd_line(&self.text, 0).expect("canonical lines always parse")
    }
}

impl Labeled for CanonicalLine {
    fn label(&self) -> &str {
        &self.text[self.label_start as usize..self.text.len() - 1]
    }
}

/// Streaming exact-duplicate filter.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: IndexSet<CanonicalLine>,
    total: usize,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the record had not been seen before.
    pub fn push(&mut self, record: &ConnectionRecord) -> bool {
        self.total += 1;
        self.seen.insert(CanonicalLine::from_record(record))
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn unique(&self) -> usize {
        self.seen.len()
    }

    pub fn into_unique(self) -> Vec<CanonicalLine> {
        self.seen.into_iter().collect()
    }
}
