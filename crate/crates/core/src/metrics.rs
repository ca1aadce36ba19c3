//! Agreement between a predicted and a true partition.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::partition::Partition;

fn aligned(pred: &Partition, truth: &Partition) -> Result<(Vec<usize>, Vec<usize>)> {
    if pred.len() != truth.len() {
        return Err(Error::UnitSetMismatch);
    }
    let p = pred.aligned_labels(truth.units()).ok_or(Error::UnitSetMismatch)?;
    Ok((p, truth.labels().to_vec()))
}

/// Contingency counts plus row and column margins.
fn contingency(a: &[usize], b: &[usize]) -> (BTreeMap<(usize, usize), u64>, BTreeMap<usize, u64>, BTreeMap<usize, u64>) {
    let mut joint = BTreeMap::new();
    let mut ra = BTreeMap::new();
    let mut rb = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *ra.entry(x).or_insert(0) += 1;
        *rb.entry(y).or_insert(0) += 1;
    }
    (joint, ra, rb)
}

fn entropy(counts: &BTreeMap<usize, u64>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn same_blocks(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Normalized mutual information of two labelings of the same units.
pub fn nmi_labels(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::UnitSetMismatch);
    }
    if pred.is_empty() {
        return Err(Error::TooFewUnits { needed: 1, found: 0 });
    }
    let n = pred.len() as f64;
    let (joint, ra, rb) = contingency(pred, truth);
    if ra.len() == 1 || rb.len() == 1 {
        return Ok(if same_blocks(pred, truth) { 1.0 } else { 0.0 });
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            (c / n) * (n * c / (ra[&x] as f64 * rb[&y] as f64)).ln()
        })
        .sum();
    let v = mi / (entropy(&ra, n) * entropy(&rb, n)).sqrt();
    Ok(v.clamp(0.0, 1.0))
}

/// Fraction of unit pairs on which the two labelings agree.
pub fn rand_index_labels(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::UnitSetMismatch);
    }
    let n = pred.len() as u64;
    if n < 2 {
        return Err(Error::TooFewUnits { needed: 2, found: n as usize });
    }
    let pairs = |c: u64| c * c.saturating_sub(1) / 2;
    let (joint, ra, rb) = contingency(pred, truth);
    let both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let in_a: u64 = ra.values().map(|&c| pairs(c)).sum();
    let in_b: u64 = rb.values().map(|&c| pairs(c)).sum();
    let agree = pairs(n) + 2 * both - in_a - in_b;
    Ok(agree as f64 / pairs(n) as f64)
}

pub fn nmi(pred: &Partition, truth: &Partition) -> Result<f64> {
    let (p, t) = aligned(pred, truth)?;
    nmi_labels(&p, &t)
}

pub fn rand_index(pred: &Partition, truth: &Partition) -> Result<f64> {
    let (p, t) = aligned(pred, truth)?;
    rand_index_labels(&p, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_examples() {
        assert_eq!(nmi_labels(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert!((rand_index_labels(&[0, 0, 1], &[0, 1, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rand_index_labels(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(nmi_labels(&[2, 2, 0, 1], &[0, 0, 1, 2]).unwrap(), 1.0);
        assert_eq!(rand_index_labels(&[2, 2, 0, 1], &[0, 0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn single_block_convention() {
        assert_eq!(nmi_labels(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi_labels(&[0, 0, 0], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi_labels(&[0, 1, 1], &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn independent_labels_have_low_nmi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        assert!(nmi_labels(&a, &b).unwrap() < 0.05);
    }

    #[test]
    fn partitions_are_aligned_by_unit() {
        let truth = Partition::from_labels(vec!["a".into(), "b".into(), "c".into()], &[0, 0, 1]).unwrap();
        let pred = Partition::from_labels(vec!["c".into(), "a".into(), "b".into()], &[5, 1, 1]).unwrap();
        assert_eq!(nmi(&pred, &truth).unwrap(), 1.0);
        assert_eq!(rand_index(&pred, &truth).unwrap(), 1.0);
        let other = Partition::from_labels(vec!["a".into(), "b".into(), "d".into()], &[0, 0, 1]).unwrap();
        assert!(matches!(nmi(&other, &truth), Err(Error::UnitSetMismatch)));
        assert!(matches!(rand_index_labels(&[0], &[0]), Err(Error::TooFewUnits { .. })));
    }
}
