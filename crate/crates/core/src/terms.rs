//! Candidate phrase extraction and C-value ranking for lexicon building.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{Lexicon, LexiconEntry, Visit};
use crate::{Error, Result};

/// A candidate phrase with its raw occurrence count and links to the
/// surviving candidates that strictly contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub freq: u64,
    /// Indices (into the candidate list) of strictly longer candidates
    /// containing this one contiguously.
    pub nested_in: Vec<usize>,
}

impl Candidate {
    pub fn term(&self) -> String {
        self.tokens.join(" ")
    }
}

fn is_digit_only(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

/// Counts all contiguous n-grams (1..=max_len) over interview + examination
/// sections, filters by stopword boundaries, digit-only tokens and min_freq,
/// and resolves nesting links among the survivors.
pub fn extract_candidates(
    visits: &[Visit],
    max_len: usize,
    min_freq: u64,
    stopwords: &HashSet<String>,
) -> Vec<Candidate> {
    assert!(max_len >= 1 && min_freq >= 1);
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    for visit in visits {
        for tokens in [&visit.interview, &visit.examination] {
            for start in 0..tokens.len() {
                for len in 1..=max_len.min(tokens.len() - start) {
                    let gram = &tokens[start..start + len];
                    if stopwords.contains(&gram[0]) || stopwords.contains(&gram[len - 1]) {
                        continue;
                    }
                    if gram.iter().any(|t| is_digit_only(t)) {
                        continue;
                    }
                    *counts.entry(gram.to_vec()).or_insert(0) += 1;
                }
            }
        }
    }
    let mut candidates: Vec<Candidate> = counts
        .into_iter()
        .filter(|(_, f)| *f >= min_freq)
        .map(|(tokens, freq)| Candidate {
            tokens,
            freq,
            nested_in: Vec::new(),
        })
        .collect();
    candidates.sort_by(|a, b| a.tokens.cmp(&b.tokens));

    let index: HashMap<Vec<String>, usize> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.tokens.clone(), i))
        .collect();
    let mut nested: Vec<Vec<usize>> = vec![Vec::new(); candidates.len()];
    for (container_idx, container) in candidates.iter().enumerate() {
        let n = container.tokens.len();
        for start in 0..n {
            for len in 1..n - start + 1 {
                if len == n {
                    continue;
                }
                if let Some(&inner_idx) = index.get(&container.tokens[start..start + len]) {
                    nested[inner_idx].push(container_idx);
                }
            }
        }
    }
    for (c, mut links) in candidates.iter_mut().zip(nested) {
        links.sort_unstable();
        links.dedup();
        c.nested_in = links;
    }
    candidates
}

/// C(a) = log2(|a|+1) * (f(a) - mean frequency of candidates strictly
/// containing a); with no containers the penalty term vanishes.
pub fn c_value(candidate: &Candidate, all: &[Candidate]) -> f64 {
    let weight = ((candidate.tokens.len() + 1) as f64).log2();
    if candidate.nested_in.is_empty() {
        return weight * candidate.freq as f64;
    }
    let container_sum: u64 = candidate.nested_in.iter().map(|&i| all[i].freq).sum();
    let penalty = container_sum as f64 / candidate.nested_in.len() as f64;
    weight * (candidate.freq as f64 - penalty)
}

/// Keeps candidates with C-value >= threshold, ordered by C-value descending
/// then term string; labels come from the optional label file, defaulting to
/// the single label "term".
pub fn build_lexicon(
    candidates: &[Candidate],
    cvalue_threshold: f64,
    labels: Option<&HashMap<String, Vec<String>>>,
) -> Result<Lexicon> {
    if let Some(map) = labels {
        let known: HashSet<String> = candidates.iter().map(|c| c.term()).collect();
        for term in map.keys() {
            if !known.contains(term) {
                eprintln!("warning: label file references unknown term {term:?}");
            }
        }
    }
    let mut scored: Vec<(f64, &Candidate)> = candidates
        .iter()
        .map(|c| (c_value(c, candidates), c))
        .filter(|(cv, _)| *cv >= cvalue_threshold)
        .collect();
    scored.sort_by(|(cv_a, a), (cv_b, b)| {
        cv_b.partial_cmp(cv_a)
            .unwrap()
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    let entries = scored
        .into_iter()
        .map(|(cv, c)| {
            let term = c.term();
            let entry_labels = labels
                .and_then(|m| m.get(&term).cloned())
                .unwrap_or_else(|| vec!["term".to_string()]);
            LexiconEntry {
                tokens: c.tokens.clone(),
                labels: entry_labels,
                score: cv,
            }
        })
        .collect();
    Lexicon::new(entries)
}

/// One stopword per line, UTF-8.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let token = line.trim();
        if !token.is_empty() {
            out.insert(token.to_lowercase());
        }
    }
    Ok(out)
}

/// Label file: TSV term, comma-separated labels.
pub fn load_labels(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 2 tab-separated columns, got {}", cols.len()),
            });
        }
        let labels: Vec<String> = cols[1]
            .split(',')
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        out.insert(cols[0].trim().to_string(), labels);
    }
    Ok(out)
}
