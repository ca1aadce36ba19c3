//! Greedy agglomerative clustering on conjugate scores, and an exhaustive
//! search over all set partitions for small unit counts.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conjugate::{unit_stats, BlockStats, ConjugatePrior};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Largest unit count accepted by [`exact_partition_search`]; Bell(10) = 115975.
pub const EXACT_SEARCH_CAP: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeStep {
    /// Indices of the merged clusters among the clusters alive at that step.
    pub pair: (usize, usize),
    pub delta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AhcResult {
    pub partition: Partition,
    pub log_score: f64,
    pub seconds: f64,
    pub initial_score: f64,
    pub merges: Vec<MergeStep>,
}

struct Cluster {
    members: Vec<usize>,
    stats: BlockStats,
    evidence: f64,
    group: usize,
}

pub fn ahc_cluster(data: &Dataset, prior: &ConjugatePrior) -> Result<AhcResult> {
    ahc_cluster_grouped(data, prior, None)
}

/// AHC where only units sharing a compatibility group may be merged, e.g.
/// situations with identical outgoing label multisets.
pub fn ahc_cluster_grouped(
    data: &Dataset,
    prior: &ConjugatePrior,
    groups: Option<&[usize]>,
) -> Result<AhcResult> {
    let start = Instant::now();
    if data.is_empty() {
        return Err(Error::TooFewUnits { needed: 1, found: 0 });
    }
    if let Some(g) = groups {
        if g.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), found: g.len() });
        }
    }
    let stats = unit_stats(data, prior)?;
    let mut clusters: Vec<Option<Cluster>> = stats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Some(Cluster {
                members: vec![i],
                stats: *s,
                evidence: prior.log_evidence(s),
                group: groups.map_or(0, |g| g[i]),
            })
        })
        .collect();
    let n = clusters.len();
    let delta_of = |a: &Cluster, b: &Cluster| -> f64 {
        if a.group != b.group {
            return f64::NEG_INFINITY;
        }
        prior.log_evidence(&a.stats.merge(&b.stats)) - a.evidence - b.evidence
    };

    // Slot i < j holds clusters in their current index order, since a merge
    // keeps the lower slot.
    let mut delta = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            delta[i * n + j] = delta_of(clusters[i].as_ref().unwrap(), clusters[j].as_ref().unwrap());
        }
    }

    let initial_score: f64 = clusters.iter().flatten().map(|c| c.evidence).sum();
    let mut score = initial_score;
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if clusters[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if clusters[j].is_none() {
                    continue;
                }
                let d = delta[i * n + j];
                if d > 0.0 && best.is_none_or(|(_, _, b)| d > b) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, d)) = best else { break };
        let rank = |slot: usize| clusters[..slot].iter().flatten().count();
        let pair = (rank(i), rank(j));

        let absorbed = clusters[j].take().unwrap();
        let target = clusters[i].as_mut().unwrap();
        target.members.extend(absorbed.members);
        target.stats = target.stats.merge(&absorbed.stats);
        target.evidence = prior.log_evidence(&target.stats);
        score += d;
        merges.push(MergeStep { pair, delta: d, score });

        let merged = clusters[i].as_ref().unwrap();
        for other in 0..n {
            if other == i {
                continue;
            }
            if let Some(c) = clusters[other].as_ref() {
                let (a, b) = if other < i { (other, i) } else { (i, other) };
                delta[a * n + b] = delta_of(merged, c);
            }
        }
    }

    let mut raw = vec![0; n];
    for (label, c) in clusters.iter().flatten().enumerate() {
        for &m in &c.members {
            raw[m] = label;
        }
    }
    let partition = Partition::from_labels(data.ids(), &raw)?;
    let log_score = clusters.iter().flatten().map(|c| c.evidence).sum();
    Ok(AhcResult {
        partition,
        log_score,
        seconds: start.elapsed().as_secs_f64(),
        initial_score,
        merges,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactResult {
    pub partition: Partition,
    pub log_score: f64,
    /// Number of partitions scored.
    pub evaluated: usize,
}

/// Scores every set partition of the units and returns the best one. Ties go
/// to fewer clusters, then to the lexicographically smallest labelling.
pub fn exact_partition_search(data: &Dataset, prior: &ConjugatePrior) -> Result<ExactResult> {
    let n = data.len();
    if n == 0 {
        return Err(Error::TooFewUnits { needed: 1, found: 0 });
    }
    if n > EXACT_SEARCH_CAP {
        return Err(Error::TooManyUnits { units: n, cap: EXACT_SEARCH_CAP });
    }
    let stats = unit_stats(data, prior)?;
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut evaluated = 0;
    for_each_set_partition(n, |labels, k| {
        evaluated += 1;
        let mut pooled: Vec<Option<BlockStats>> = vec![None; k];
        for (i, &l) in labels.iter().enumerate() {
            pooled[l] = Some(match pooled[l] {
                None => stats[i],
                Some(s) => s.merge(&stats[i]),
            });
        }
        let score: f64 = pooled.iter().flatten().map(|s| prior.log_evidence(s)).sum();
        let better = match &best {
            None => true,
            // Enumeration is lexicographic, so later equal candidates never win on labels.
            Some((b, bk, _)) => score > *b || (score == *b && k < *bk),
        };
        if better {
            best = Some((score, k, labels.to_vec()));
        }
    });
    let (log_score, _, labels) = best.expect("at least one partition");
    Ok(ExactResult { partition: Partition::from_labels(data.ids(), &labels)?, log_score, evaluated })
}

/// Visits every set partition of `n` items as a restricted-growth string, in
/// lexicographic order, together with its block count.
pub fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[usize], usize)) {
    if n == 0 {
        visit(&[], 0);
        return;
    }
    let mut a = vec![0usize; n];
    // max_prefix[i] = max(a[0..i]) + 1, the largest label allowed at i.
    let mut max_prefix = vec![1usize; n];
    loop {
        visit(&a, max_prefix[n - 1].max(a[n - 1] + 1));
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if a[i] < max_prefix[i] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        for j in (i + 1)..n {
            a[j] = 0;
            max_prefix[j] = max_prefix[j - 1].max(a[j - 1] + 1);
        }
    }
}
