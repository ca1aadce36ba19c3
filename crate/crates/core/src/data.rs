//! Per-unit sufficient statistics and their CSV interchange.
//!
//! Transition data are stored as `(successes, trials)` per situation, which is
//! sufficient for the Binomial likelihood. Holding data keep the full vector of
//! observed holding times per edge.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialCounts {
    pub id: String,
    pub successes: u64,
    pub trials: u64,
}

impl BinomialCounts {
    pub fn new(id: impl Into<String>, successes: u64, trials: u64) -> Self {
        Self { id: id.into(), successes, trials }
    }

    pub fn failures(&self) -> u64 {
        self.trials - self.successes
    }
}

/// Edge-traversal counts for a set of two-outcome situations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionData {
    units: Vec<BinomialCounts>,
}

impl TransitionData {
    pub fn new(units: Vec<BinomialCounts>) -> Result<Self> {
        check_unique(units.iter().map(|u| u.id.as_str()))?;
        for u in &units {
            if u.successes > u.trials {
                return Err(Error::InvalidCounts {
                    unit: u.id.clone(),
                    successes: u.successes,
                    trials: u.trials,
                });
            }
        }
        Ok(Self { units })
    }

    /// Builds data with ids `s0, s1, ...`.
    pub fn from_counts(counts: &[(u64, u64)]) -> Result<Self> {
        Self::new(
            counts
                .iter()
                .enumerate()
                .map(|(i, &(s, n))| BinomialCounts::new(format!("s{i}"), s, n))
                .collect(),
        )
    }

    pub fn units(&self) -> &[BinomialCounts] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.units.iter().map(|u| u.id.clone()).collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            situation_id: String,
            successes: u64,
            totals: u64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut units = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            units.push(BinomialCounts::new(row.situation_id, row.successes, row.totals));
        }
        Self::new(units)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["situation_id", "successes", "totals"])?;
        for u in &self.units {
            w.write_record([u.id.clone(), u.successes.to_string(), u.trials.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTimes {
    pub id: String,
    pub times: Vec<f64>,
}

impl EdgeTimes {
    pub fn new(id: impl Into<String>, times: Vec<f64>) -> Self {
        Self { id: id.into(), times }
    }
}

/// Holding-time observations, one vector per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldingData {
    edges: Vec<EdgeTimes>,
}

impl HoldingData {
    pub fn new(edges: Vec<EdgeTimes>) -> Result<Self> {
        check_unique(edges.iter().map(|e| e.id.as_str()))?;
        for e in &edges {
            if let Some(&bad) = e.times.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
                return Err(Error::NonPositiveTime { unit: e.id.clone(), value: bad });
            }
        }
        Ok(Self { edges })
    }

    /// Builds data with ids `e0, e1, ...`.
    pub fn from_times(times: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            times
                .into_iter()
                .enumerate()
                .map(|(i, t)| EdgeTimes::new(format!("e{i}"), t))
                .collect(),
        )
    }

    pub fn edges(&self) -> &[EdgeTimes] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.edges.iter().map(|e| e.id.clone()).collect()
    }

    /// Reads `edge_id,obs_index,holding_time` rows. Edges keep their order of
    /// first appearance; observations are ordered by `obs_index`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            edge_id: String,
            obs_index: usize,
            holding_time: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let entry = rows.entry(row.edge_id.clone()).or_insert_with(|| {
                order.push(row.edge_id.clone());
                Vec::new()
            });
            entry.push((row.obs_index, row.holding_time));
        }
        let edges = order
            .into_iter()
            .map(|id| {
                let mut obs = rows.remove(&id).unwrap_or_default();
                obs.sort_by_key(|&(i, _)| i);
                EdgeTimes::new(id, obs.into_iter().map(|(_, t)| t).collect())
            })
            .collect();
        Self::new(edges)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["edge_id", "obs_index", "holding_time"])?;
        for e in &self.edges {
            for (i, t) in e.times.iter().enumerate() {
                w.write_record([e.id.clone(), i.to_string(), format!("{t:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Either kind of clustering input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dataset {
    Transitions(TransitionData),
    Holding(HoldingData),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Transitions(d) => d.len(),
            Dataset::Holding(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        match self {
            Dataset::Transitions(d) => d.ids(),
            Dataset::Holding(d) => d.ids(),
        }
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        match self {
            Dataset::Transitions(d) => d.write_csv(f),
            Dataset::Holding(d) => d.write_csv(f),
        }
    }
}

impl From<TransitionData> for Dataset {
    fn from(d: TransitionData) -> Self {
        Dataset::Transitions(d)
    }
}

impl From<HoldingData> for Dataset {
    fn from(d: HoldingData) -> Self {
        Dataset::Holding(d)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Parse(format!("duplicate unit id `{id}`")));
        }
    }
    Ok(())
}
