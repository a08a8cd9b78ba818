//! Multi-reference aggregation.
//!
//! A segment scored against `R` references yields an `N × R` matrix; the
//! aggregated sample set is the pointwise mean over the selected reference
//! columns, one value per stochastic run.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SampleMatrix;

fn validate_subset(n_refs: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::invalid("reference subset must be nonempty"));
    }
    let mut seen = vec![false; n_refs];
    for &r in subset {
        if r >= n_refs {
            return Err(Error::invalid(format!(
                "reference index {r} out of range for {n_refs} references"
            )));
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::invalid(format!("duplicate reference index {r}")));
        }
    }
    Ok(())
}

/// Row means over the reference columns in `subset` (all columns when `None`).
pub fn aggregate_references(samples: &SampleMatrix, subset: Option<&[usize]>) -> Result<Vec<f64>> {
    let all: Vec<usize>;
    let cols = match subset {
        Some(s) => {
            validate_subset(samples.n_refs(), s)?;
            s
        }
        None => {
            all = (0..samples.n_refs()).collect();
            &all
        }
    };
    let k = cols.len() as f64;
    Ok((0..samples.n_samples())
        .map(|i| {
            let row = samples.row(i);
            crate::numeric::sum(cols.iter().map(|&r| row[r])) / k
        })
        .collect())
}

/// How reference subsets are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// Every size-k subset in lexicographic order.
    Exhaustive,
    /// `count` independent draws without replacement.
    Sampled { count: usize },
}

/// Size-`k` reference subsets of `0..n_refs`, each sorted ascending.
pub fn sample_reference_subsets(
    n_refs: usize,
    k: usize,
    mode: SubsetMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_refs == 0 || k == 0 {
        return Err(Error::invalid(
            "reference count and subset size must be positive",
        ));
    }
    if k > n_refs {
        return Err(Error::invalid(format!(
            "cannot choose {k} references out of {n_refs}"
        )));
    }
    match mode {
        SubsetMode::Exhaustive => Ok(combinations(n_refs, k)),
        SubsetMode::Sampled { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| random_subset(n_refs, k, &mut rng))
                .collect())
        }
    }
}

/// One uniformly random size-`k` subset, sorted ascending.
pub fn random_subset(n_refs: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = index::sample(rng, n_refs, k).into_vec();
    picked.sort_unstable();
    picked
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Rightmost index that can still advance.
        let Some(pos) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[pos] += 1;
        for j in pos + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}
