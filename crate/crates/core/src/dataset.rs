//! Dense feature storage and the columnar dataset file.
//!
//! # Columnar file layout (version 1)
//!
//! All integers and floats are little-endian.
//!
//! | field      | type                     | notes                                  |
//! |------------|--------------------------|----------------------------------------|
//! | magic      | 8 bytes                  | `OSIRCOL\0`                            |
//! | version    | u32                      | `1`                                    |
//! | rows       | u64                      |                                        |
//! | cols       | u32                      |                                        |
//! | labels     | u32                      | size of the label table                |
//! | label table| labels × (u32 len, utf8) | sorted lexicographically               |
//! | columns    | cols × rows × f64        | column-major                           |
//! | label ids  | rows × u32               | index into the label table, row order  |

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"OSIRCOL\0";
const VERSION: u32 = 1;

/// A scaled feature vector; every element lies in `[0, 1]` after scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::new(cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Feature rows with their exploit labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    pub fn write_columnar(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode_columnar(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn encode_columnar<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let table: Vec<&str> = self
            .labels
            .iter()
            .map(String::as_str)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.features.cols() as u32).to_le_bytes())?;
        w.write_all(&(table.len() as u32).to_le_bytes())?;
        for l in &table {
            w.write_all(&(l.len() as u32).to_le_bytes())?;
            w.write_all(l.as_bytes())?;
        }
        for c in 0..self.features.cols() {
            for r in 0..self.features.rows() {
                w.write_all(&self.features.row(r)[c].to_le_bytes())?;
            }
        }
        for l in &self.labels {
            let id = table.binary_search(&l.as_str()).expect("label in table") as u32;
            w.write_all(&id.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_columnar(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Self::decode_columnar(&mut r).map_err(|e| match e {
            DecodeError::Io(e) => Error::io(path, e),
            DecodeError::Format(message) => Error::Format {
                path: path.to_path_buf(),
                message,
            },
        })
    }

    pub fn decode_columnar<R: Read>(r: &mut R) -> Result<Self, DecodeError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DecodeError::Format("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(DecodeError::Format(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let rows = read_u64(r)? as usize;
        let cols = read_u32(r)? as usize;
        let n_labels = read_u32(r)? as usize;
        let mut table = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let len = read_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            table.push(
                String::from_utf8(buf).map_err(|_| DecodeError::Format("label not utf-8".into()))?,
            );
        }
        let mut data = vec![0.0; rows * cols];
        let mut buf = [0u8; 8];
        for c in 0..cols {
            for row in 0..rows {
                r.read_exact(&mut buf)?;
                data[row * cols + c] = f64::from_le_bytes(buf);
            }
        }
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let id = read_u32(r)? as usize;
            let l = table
                .get(id)
                .ok_or_else(|| DecodeError::Format(format!("label id {id} out of range")))?;
            labels.push(l.clone());
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(DecodeError::Format("trailing bytes".into()));
        }
        Ok(Self {
            features: FeatureMatrix { rows, cols, data },
            labels,
        })
    }
}

#[derive(Debug)]
pub enum DecodeError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for DecodeError {
    fn from(e: std::io::Error) -> Self {
        DecodeError::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_stable() {
        let ds = Dataset::new(
            FeatureMatrix::from_rows(&[[0.5, 1.0], [0.0, 0.25]]).unwrap(),
            vec!["smurf".into(), "normal".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.encode_columnar(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"OSIRCOL\0");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 2);
        // label table: "normal" then "smurf"
        assert_eq!(&buf[32..38], b"normal");
        // first column, first row
        let off = 28 + 4 + 6 + 4 + 5;
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), 0.5);
        // label ids at the tail
        let n = buf.len();
        assert_eq!(u32::from_le_bytes(buf[n - 8..n - 4].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[n - 4..].try_into().unwrap()), 0);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let ds = Dataset::new(
            FeatureMatrix::from_rows(&[[0.5]]).unwrap(),
            vec!["a".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.encode_columnar(&mut buf).unwrap();
        assert!(Dataset::decode_columnar(&mut &buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            Dataset::decode_columnar(&mut &bad[..]),
            Err(DecodeError::Format(_))
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(Dataset::decode_columnar(&mut &long[..]).is_err());
    }

    #[test]
    fn push_row_checks_width() {
        let mut m = FeatureMatrix::new(2);
        m.push_row(&[1.0, 2.0]).unwrap();
        assert!(m.push_row(&[1.0]).is_err());
        assert_eq!(m.select(&[0, 0]).rows(), 2);
    }

    proptest! {
        #[test]
        fn columnar_round_trip(
            rows in prop::collection::vec(
                (prop::collection::vec(any::<f64>(), 3), "[a-z]{1,6}"), 0..20)
        ) {
            let mut m = FeatureMatrix::new(3);
            let mut labels = Vec::new();
            for (r, l) in &rows {
                m.push_row(r).unwrap();
                labels.push(l.clone());
            }
            let ds = Dataset::new(m, labels).unwrap();
            let mut buf = Vec::new();
            ds.encode_columnar(&mut buf).unwrap();
            let back = Dataset::decode_columnar(&mut &buf[..]).unwrap();
            prop_assert_eq!(back.labels, ds.labels);
            let a: Vec<u64> = back.features.as_flat().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = ds.features.as_flat().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
