use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hard clustering of named units. Cluster indices are always `0..k` with no gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    units: Vec<String>,
    labels: Vec<usize>,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    #[serde(default)]
    units: Option<Vec<String>>,
    labels: Vec<usize>,
    #[serde(default)]
    k: Option<usize>,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        let units = r.units.unwrap_or_else(|| default_ids(r.labels.len()));
        let p = Partition::from_labels(units, &r.labels)?;
        if let Some(k) = r.k {
            if k != p.k {
                return Err(Error::Parse(format!("k = {k} but labels use {} clusters", p.k)));
            }
        }
        Ok(p)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr { units: Some(p.units), labels: p.labels, k: Some(p.k) }
    }
}

fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("u{i}")).collect()
}

impl Partition {
    /// Builds a partition from arbitrary cluster tags. Gaps are closed while
    /// keeping the relative order of the tags, so tag 3 < tag 7 stays 0 < 1.
    pub fn from_labels(units: Vec<String>, raw: &[usize]) -> Result<Self> {
        if units.len() != raw.len() {
            return Err(Error::DimensionMismatch { expected: units.len(), found: raw.len() });
        }
        let mut distinct: Vec<usize> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let remap: HashMap<usize, usize> =
            distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let labels = raw.iter().map(|l| remap[l]).collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = units.iter().find(|u| !seen.insert(u.as_str())) {
            return Err(Error::Parse(format!("duplicate unit id `{dup}`")));
        }
        Ok(Self { units, labels, k: distinct.len() })
    }

    /// Partition over positional ids `u0, u1, ...`.
    pub fn anonymous(raw: &[usize]) -> Self {
        Self::from_labels(default_ids(raw.len()), raw).expect("generated ids are unique")
    }

    pub fn singletons(units: Vec<String>) -> Self {
        let raw: Vec<usize> = (0..units.len()).collect();
        Self::from_labels(units, &raw).expect("lengths match")
    }

    pub fn one_block(units: Vec<String>) -> Self {
        let raw = vec![0; units.len()];
        Self::from_labels(units, &raw).expect("lengths match")
    }

    pub fn from_blocks(units: Vec<String>, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut raw = vec![usize::MAX; units.len()];
        for (b, members) in blocks.iter().enumerate() {
            for &m in members {
                if m >= raw.len() || raw[m] != usize::MAX {
                    return Err(Error::Parse(format!("unit index {m} invalid or repeated")));
                }
                raw[m] = b;
            }
        }
        if raw.contains(&usize::MAX) {
            return Err(Error::Parse("blocks do not cover every unit".into()));
        }
        Self::from_labels(units, &raw)
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Unit indices per cluster, in cluster order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Labels in restricted-growth form: clusters numbered by first appearance.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = BTreeMap::new();
        self.labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect()
    }

    /// Same blocks over the same units, regardless of numbering or unit order.
    pub fn same_blocks(&self, other: &Partition) -> bool {
        match other.aligned_labels(&self.units) {
            Some(theirs) => {
                Partition::anonymous(&theirs).canonical_labels() == self.canonical_labels()
            }
            None => false,
        }
    }

    /// `other`'s view of this partition: labels listed in the order of `units`.
    /// `None` when the unit sets differ.
    pub fn aligned_labels(&self, units: &[String]) -> Option<Vec<usize>> {
        if units.len() != self.units.len() {
            return None;
        }
        if units == self.units.as_slice() {
            return Some(self.labels.clone());
        }
        let index: HashMap<&str, usize> =
            self.units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        units.iter().map(|u| index.get(u.as_str()).map(|&i| self.labels[i])).collect()
    }
}
