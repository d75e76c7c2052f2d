use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_TAXONOMY: &str = include_str!("../../data/taxonomy.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metatype {
    Normal,
    Dos,
    Probe,
    R2l,
    U2r,
    Unlisted,
}

impl fmt::Display for Metatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metatype::Normal => "normal",
            Metatype::Dos => "dos",
            Metatype::Probe => "probe",
            Metatype::R2l => "r2l",
            Metatype::U2r => "u2r",
            Metatype::Unlisted => "unlisted",
        })
    }
}

impl FromStr for Metatype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "normal" => Metatype::Normal,
            "dos" => Metatype::Dos,
            "probe" => Metatype::Probe,
            "r2l" => Metatype::R2l,
            "u2r" => Metatype::U2r,
            "unlisted" => Metatype::Unlisted,
            _ => return Err(Error::InvalidInput(format!("unknown metatype `{s}`"))),
        })
    }
}

/// Exploit name to attack metatype, read from a plain-text table.
///
/// Each non-empty line is `exploit metatype`; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    map: BTreeMap<String, Metatype>,
}

impl Taxonomy {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TAXONOMY).expect("bundled taxonomy is well formed")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN_TAXONOMY
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(exploit), Some(meta), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected `exploit metatype`, got `{line}`"),
                });
            };
            let meta = meta.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("unknown metatype `{meta}`"),
            })?;
            map.insert(exploit.to_string(), meta);
        }
        Ok(Self { map })
    }

    pub fn metatype(&self, exploit: &str) -> Metatype {
        self.map.get(exploit).copied().unwrap_or(Metatype::Unlisted)
    }

    pub fn to_text(&self) -> String {
        self.map
            .iter()
            .map(|(e, m)| format!("{e} {m}\n"))
            .collect()
    }
}

/// Ground-truth status of a test label relative to the trained classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    Known(usize),
    Unknown,
}

/// Known classes (indexed in lexicographic order) plus the test-only labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    known: Vec<String>,
    unknown: BTreeSet<String>,
    metatypes: BTreeMap<String, Metatype>,
}

impl LabelSpace {
    /// `train_labels` must be taken after the training-side class filters.
    pub fn build<'a, I, J>(train_labels: I, test_labels: J, taxonomy: &Taxonomy) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
        J: IntoIterator<Item = &'a str>,
    {
        let known: BTreeSet<&str> = train_labels.into_iter().collect();
        if known.is_empty() {
            return Err(Error::InvalidInput("training label set is empty".into()));
        }
        let unknown: BTreeSet<String> = test_labels
            .into_iter()
            .filter(|l| !known.contains(l))
            .map(str::to_string)
            .collect();
        let metatypes = known
            .iter()
            .copied()
            .chain(unknown.iter().map(String::as_str))
            .map(|l| (l.to_string(), taxonomy.metatype(l)))
            .collect();
        Ok(Self {
            known: known.into_iter().map(str::to_string).collect(),
            unknown,
            metatypes,
        })
    }

    pub fn known(&self) -> &[String] {
        &self.known
    }

    pub fn unknown(&self) -> &BTreeSet<String> {
        &self.unknown
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.known.binary_search_by(|k| k.as_str().cmp(label)).ok()
    }

    pub fn class_name(&self, index: usize) -> &str {
        &self.known[index]
    }

    /// Any label that is not a trained class counts as unknown, including
    /// labels never seen in either set.
    pub fn truth(&self, label: &str) -> Truth {
        match self.index_of(label) {
            Some(i) => Truth::Known(i),
            None => Truth::Unknown,
        }
    }

    pub fn metatype(&self, label: &str) -> Metatype {
        self.metatypes
            .get(label)
            .copied()
            .unwrap_or(Metatype::Unlisted)
    }

    /// Restricts the known classes to those not in `withheld`; withheld
    /// classes become unknown.
    pub fn withholding(&self, withheld: &BTreeSet<String>) -> Result<Self> {
        for w in withheld {
            if self.index_of(w).is_none() {
                return Err(Error::InvalidInput(format!(
                    "withheld class `{w}` is not a known training class"
                )));
            }
        }
        let known: Vec<String> = self
            .known
            .iter()
            .filter(|k| !withheld.contains(*k))
            .cloned()
            .collect();
        if known.is_empty() {
            return Err(Error::InvalidInput("every known class was withheld".into()));
        }
        let mut unknown = self.unknown.clone();
        unknown.extend(withheld.iter().cloned());
        Ok(Self {
            known,
            unknown,
            metatypes: self.metatypes.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_taxonomy_covers_figure_exploits() {
        let t = Taxonomy::builtin();
        assert_eq!(t.metatype("normal"), Metatype::Normal);
        assert_eq!(t.metatype("smurf"), Metatype::Dos);
        assert_eq!(t.metatype("snmpguess"), Metatype::R2l);
        assert_eq!(t.metatype("xterm"), Metatype::U2r);
        assert_eq!(t.metatype("saint"), Metatype::Probe);
        assert_eq!(t.metatype("zergrush"), Metatype::Unlisted);
        assert_eq!(Taxonomy::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn malformed_taxonomy_line() {
        assert!(matches!(
            Taxonomy::parse("normal normal\nsmurf\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(Taxonomy::parse("smurf dragons").is_err());
    }

    #[test]
    fn unknown_is_set_difference() {
        let t = Taxonomy::builtin();
        let ls = LabelSpace::build(
            ["normal", "smurf", "normal"],
            ["normal", "smurf", "snmpguess"],
            &t,
        )
        .unwrap();
        assert_eq!(ls.known(), ["normal", "smurf"]);
        assert_eq!(ls.unknown().iter().collect::<Vec<_>>(), ["snmpguess"]);
        assert_eq!(ls.truth("smurf"), Truth::Known(1));
        assert_eq!(ls.truth("snmpguess"), Truth::Unknown);
        assert_eq!(ls.metatype("snmpguess"), Metatype::R2l);
    }

    #[test]
    fn identical_sets_have_no_unknowns() {
        let t = Taxonomy::builtin();
        let ls = LabelSpace::build(["a", "b"], ["b", "a"], &t).unwrap();
        assert!(ls.unknown().is_empty());
        assert_eq!(ls.metatype("a"), Metatype::Unlisted);
    }

    #[test]
    fn filtered_training_class_counts_as_unknown() {
        // "land" was dropped by the rare-class filter, so it is absent from train labels.
        let t = Taxonomy::builtin();
        let ls = LabelSpace::build(["normal", "neptune"], ["normal", "land"], &t).unwrap();
        assert!(ls.unknown().contains("land"));
    }

    #[test]
    fn empty_training_labels() {
        let t = Taxonomy::builtin();
        assert!(LabelSpace::build([], ["normal"], &t).is_err());
    }

    #[test]
    fn withholding_moves_classes_to_unknown() {
        let t = Taxonomy::builtin();
        let ls = LabelSpace::build(["a", "b", "c"], ["a", "d"], &t).unwrap();
        let w: BTreeSet<String> = ["b".to_string()].into();
        let ls2 = ls.withholding(&w).unwrap();
        assert_eq!(ls2.known(), ["a", "c"]);
        assert!(ls2.unknown().contains("b") && ls2.unknown().contains("d"));
        let missing: BTreeSet<String> = ["zz".to_string()].into();
        assert!(ls.withholding(&missing).is_err());
    }
}
