use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use super::Corpus;

/// Which `extra` keys pruning removed, and why.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PruneReport {
    /// Keys carrying a single value (or absence) across the whole corpus.
    pub constant: Vec<String>,
    /// `(kept, removed)` pairs whose values map one-to-one.
    pub redundant: Vec<(String, String)>,
}

impl PruneReport {
    pub fn removed(&self) -> BTreeSet<&str> {
        self.constant
            .iter()
            .map(String::as_str)
            .chain(self.redundant.iter().map(|(_, r)| r.as_str()))
            .collect()
    }
}

fn column<'c>(c: &'c Corpus, key: &str) -> Vec<Option<&'c str>> {
    c.events.iter().map(|e| e.event.extra.get(key).map(String::as_str)).collect()
}

fn bijective(a: &[Option<&str>], b: &[Option<&str>]) -> bool {
    let mut forward = HashMap::new();
    let mut backward = HashMap::new();
    a.iter().zip(b).all(|(x, y)| {
        *forward.entry(*x).or_insert(*y) == *y && *backward.entry(*y).or_insert(*x) == *x
    })
}

/// Decides which `extra` keys to drop. Core fields are never considered.
pub fn prune_report(c: &Corpus) -> PruneReport {
    let keys: BTreeSet<&str> =
        c.events.iter().flat_map(|e| e.event.extra.keys().map(String::as_str)).collect();

    let mut report = PruneReport::default();
    let mut alive = Vec::new();
    for key in keys {
        let col = column(c, key);
        let distinct: HashSet<Option<&str>> = col.iter().copied().collect();
        if distinct.len() <= 1 {
            report.constant.push(key.to_owned());
        } else {
            alive.push((key, col));
        }
    }

    // Keys are visited in sorted order, so the larger key of a redundant
    // pair is the one dropped.
    let mut dropped = vec![false; alive.len()];
    for i in 0..alive.len() {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..alive.len() {
            if !dropped[j] && bijective(&alive[i].1, &alive[j].1) {
                dropped[j] = true;
                report.redundant.push((alive[i].0.to_owned(), alive[j].0.to_owned()));
            }
        }
    }
    report
}

/// Drops constant `extra` keys and the larger key of every pair with a
/// one-to-one value correspondence.
pub fn prune_features(c: &Corpus) -> Corpus {
    let report = prune_report(c);
    let removed = report.removed();
    let mut out = c.clone();
    for e in &mut out.events {
        e.event.extra.retain(|k, _| !removed.contains(k.as_str()));
    }
    out
}
