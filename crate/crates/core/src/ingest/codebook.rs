use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::record::ConnectionRecord;
use super::schema::{AttributeKind, CATEGORICAL_POSITIONS, NUM_FEATURES, SCHEMA};
use crate::error::{Error, Result};

/// Integer coding for one symbolic attribute.
///
/// Tokens are sorted lexicographically and coded by position; any token not
/// seen in training maps to `tokens.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalCodebook {
    pub position: usize,
    tokens: Vec<String>,
}

impl CategoricalCodebook {
    pub fn from_tokens<'a>(position: usize, tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = tokens.into_iter().collect();
        Self {
            position,
            tokens: set.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn overflow_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn code(&self, token: &str) -> usize {
        self.tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .unwrap_or(self.tokens.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebooks {
    books: Vec<CategoricalCodebook>,
}

impl Codebooks {
    /// Builds one codebook per symbolic attribute from training records only.
    pub fn build<'a, I>(train: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ConnectionRecord>,
    {
        let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); CATEGORICAL_POSITIONS.len()];
        let mut any = false;
        for record in train {
            any = true;
            for (slot, &pos) in CATEGORICAL_POSITIONS.iter().enumerate() {
                if let Some(tok) = record.value(pos).as_token() {
                    if !seen[slot].contains(tok) {
                        seen[slot].insert(tok.to_string());
                    }
                }
            }
        }
        if !any {
            return Err(Error::InvalidInput(
                "cannot build codebooks from an empty training set".into(),
            ));
        }
        let books = CATEGORICAL_POSITIONS
            .iter()
            .zip(seen)
            .map(|(&position, toks)| CategoricalCodebook {
                position,
                tokens: toks.into_iter().collect(),
            })
            .collect();
        Ok(Self { books })
    }

    pub fn books(&self) -> &[CategoricalCodebook] {
        &self.books
    }

    pub fn for_position(&self, position: usize) -> Option<&CategoricalCodebook> {
        self.books.iter().find(|b| b.position == position)
    }

    /// Raw numeric vector: symbolic attributes replaced by their codes,
    /// numeric and binary attributes passed through.
    pub fn encode(&self, record: &ConnectionRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(NUM_FEATURES);
        for (i, value) in record.values().iter().enumerate() {
            let v = match SCHEMA[i].kind {
                AttributeKind::Categorical => {
                    let book = self
                        .for_position(i)
                        .expect("codebooks cover every categorical position");
                    book.code(value.as_token().unwrap_or_default()) as f64
                }
                _ => value.as_numeric().unwrap_or_default(),
            };
            out.push(v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::parse_kdd_line;

    const ROW: &str = "0,tcp,http,SF,181,5450,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,0.00,0.00,0.00,0.00,1.00,0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal.";

    fn with_protocol(p: &str) -> ConnectionRecord {
        parse_kdd_line(&ROW.replacen("tcp", p, 1), 1).unwrap()
    }

    #[test]
    fn lexicographic_codes() {
        let b = CategoricalCodebook::from_tokens(1, ["udp", "tcp", "icmp", "tcp"]);
        assert_eq!(b.code("icmp"), 0);
        assert_eq!(b.code("tcp"), 1);
        assert_eq!(b.code("udp"), 2);
        assert_eq!(b.code("sctp"), 3);
        assert_eq!(b.overflow_index(), 3);
    }

    #[test]
    fn single_token_book() {
        let b = CategoricalCodebook::from_tokens(1, ["tcp"]);
        assert_eq!(b.code("tcp"), 0);
        assert_eq!(b.overflow_index(), 1);
    }

    #[test]
    fn encode_replaces_symbols_and_passes_numbers() {
        let train: Vec<_> = ["udp", "tcp", "icmp"].iter().map(|p| with_protocol(p)).collect();
        let books = Codebooks::build(&train).unwrap();
        let v = books.encode(&train[1]);
        assert_eq!(v.len(), NUM_FEATURES);
        assert_eq!(v[1], 1.0);
        assert_eq!(v[4], 181.0);
        assert_eq!(v[11], 1.0);
        assert_eq!(books.encode(&with_protocol("sctp"))[1], 3.0);
    }

    #[test]
    fn order_independent() {
        let mut train: Vec<_> = ["udp", "tcp", "icmp"].iter().map(|p| with_protocol(p)).collect();
        let a = Codebooks::build(&train).unwrap();
        train.reverse();
        assert_eq!(a, Codebooks::build(&train).unwrap());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(Codebooks::build(&Vec::<ConnectionRecord>::new()).is_err());
    }
}
