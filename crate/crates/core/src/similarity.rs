//! Ranking-based similarity between two interaction networks.
//!
//! Each target's incoming impacts form a ranking over all other variables
//! (absent edges count as weight 0). Two networks are compared target by
//! target with Spearman's rank correlation or NDCG, and the per-target
//! scores are averaged over targets that have incoming edges in the
//! reference network.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Spearman,
    Ndcg,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Spearman, Measure::Ndcg];
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Spearman => "spearman",
            Measure::Ndcg => "ndcg",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spearman" => Ok(Measure::Spearman),
            "ndcg" => Ok(Measure::Ndcg),
            other => Err(Error::InvalidArgument(format!("unknown measure `{other}`"))),
        }
    }
}

/// Inputs of one target ordered by descending weight, ties by name.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedImpactList {
    pub target: String,
    pub items: Vec<(String, f64)>,
}

impl RankedImpactList {
    pub fn new(target: impl Into<String>, mut items: Vec<(String, f64)>) -> Self {
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self {
            target: target.into(),
            items,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.items.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// 1-based ranks by weight, with tied weights sharing their mean rank.
    fn mid_ranks(&self) -> BTreeMap<&str, f64> {
        let mut out = BTreeMap::new();
        let mut i = 0;
        while i < self.items.len() {
            let mut j = i + 1;
            while j < self.items.len() && self.items[j].1 == self.items[i].1 {
                j += 1;
            }
            let rank = (i + 1 + j) as f64 / 2.0;
            for (name, _) in &self.items[i..j] {
                out.insert(name.as_str(), rank);
            }
            i = j;
        }
        out
    }

    fn weights(&self) -> BTreeMap<&str, f64> {
        self.items.iter().map(|(n, w)| (n.as_str(), *w)).collect()
    }
}

fn check_same_items(a: &RankedImpactList, b: &RankedImpactList) -> Result<()> {
    let mut x = a.names();
    let mut y = b.names();
    x.sort_unstable();
    y.sort_unstable();
    if x != y {
        return Err(Error::InvalidArgument(format!(
            "rankings for `{}` and `{}` cover different items",
            a.target, b.target
        )));
    }
    Ok(())
}

/// One ranking per universe variable over all other universe variables.
pub fn to_ranked_lists<S: AsRef<str>>(net: &Network, universe: &[S]) -> Vec<RankedImpactList> {
    universe
        .iter()
        .map(|t| {
            let t = t.as_ref();
            let items = universe
                .iter()
                .map(AsRef::as_ref)
                .filter(|s| *s != t)
                .map(|s| (s.to_string(), net.weight(s, t).unwrap_or(0.0)))
                .collect();
            RankedImpactList::new(t, items)
        })
        .collect()
}

/// `1 - 6 * sum(d^2) / (n (n^2 - 1))` over mid-rank differences.
pub fn spearman(a: &RankedImpactList, b: &RankedImpactList) -> Result<f64> {
    check_same_items(a, b)?;
    let n = a.items.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs at least 2 items, got {n}"
        )));
    }
    let ra = a.mid_ranks();
    let rb = b.mid_ranks();
    let d2: f64 = ra
        .iter()
        .map(|(k, r)| {
            let d = r - rb[k];
            d * d
        })
        .sum();
    let n = n as f64;
    Ok((1.0 - 6.0 * d2 / (n * (n * n - 1.0))).clamp(-1.0, 1.0))
}

/// NDCG of the candidate order with gains `2^w - 1` from reference weights.
pub fn ndcg(reference: &RankedImpactList, candidate: &RankedImpactList) -> Result<f64> {
    check_same_items(reference, candidate)?;
    let gain = |w: f64| w.exp2() - 1.0;
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let ideal: f64 = reference
        .items
        .iter()
        .enumerate()
        .map(|(i, (_, w))| gain(*w) * discount(i))
        .sum();
    if !(ideal > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference ranking for `{}` has no positive weight",
            reference.target
        )));
    }
    let rel = reference.weights();
    let dcg: f64 = candidate
        .items
        .iter()
        .enumerate()
        .map(|(i, (name, _))| gain(rel[name.as_str()]) * discount(i))
        .sum();
    Ok((dcg / ideal).clamp(0.0, 1.0))
}

pub fn score(measure: Measure, reference: &RankedImpactList, candidate: &RankedImpactList) -> Result<f64> {
    match measure {
        Measure::Spearman => spearman(reference, candidate),
        Measure::Ndcg => ndcg(reference, candidate),
    }
}

/// Mean per-target score over targets with incoming reference edges.
pub fn network_similarity<S: AsRef<str>>(
    reference: &Network,
    candidate: &Network,
    universe: &[S],
    measure: Measure,
) -> Result<f64> {
    let refs = to_ranked_lists(reference, universe);
    let cands = to_ranked_lists(candidate, universe);
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, c) in refs.iter().zip(&cands) {
        if r.items.iter().any(|(_, w)| *w > 0.0) {
            total += score(measure, r, c)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(total / count as f64)
}
