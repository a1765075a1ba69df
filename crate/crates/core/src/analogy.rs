//! Term analogy evaluation and the word-order synonym task.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::embedding::{cosine, EmbeddingModel};
use crate::{Error, Result};

/// A named list of term pairs sharing one relationship.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyCategory {
    pub name: String,
    pub pairs: Vec<(String, String)>,
}

impl AnalogyCategory {
    pub fn new(name: impl Into<String>, pairs: Vec<(String, String)>) -> Result<Self> {
        let name = name.into();
        if pairs.len() < 2 {
            return Err(Error::Invalid(format!(
                "category {name:?} needs at least 2 pairs"
            )));
        }
        for (a, b) in &pairs {
            if a == b {
                return Err(Error::Invalid(format!(
                    "category {name:?} has a pair with identical terms {a:?}"
                )));
            }
        }
        Ok(AnalogyCategory { name, pairs })
    }
}

/// All two-element subsets of the pair list, asked in both orientations:
/// n pairs yield n(n-1) questions.
pub fn make_questions(category: &AnalogyCategory) -> Vec<(String, String, String, String)> {
    let mut out = Vec::new();
    let pairs = &category.pairs;
    for x in 0..pairs.len() {
        for y in x + 1..pairs.len() {
            let (a, b) = &pairs[x];
            let (c, d) = &pairs[y];
            out.push((a.clone(), b.clone(), c.clone(), d.clone()));
            out.push((c.clone(), d.clone(), a.clone(), b.clone()));
        }
    }
    out
}

/// 3CosAdd: ranks the vocabulary against v(b) - v(a) + v(c) by cosine,
/// excluding the three input terms; `None` when any term is out of
/// vocabulary.
pub fn answer(
    model: &EmbeddingModel,
    question: &(String, String, String, String),
    k: usize,
) -> Option<bool> {
    let (a, b, c, d) = question;
    let ia = model.index_of(a)?;
    let ib = model.index_of(b)?;
    let ic = model.index_of(c)?;
    let id = model.index_of(d)?;
    let target: Vec<f64> = model
        .vector(ib)
        .iter()
        .zip(model.vector(ia))
        .zip(model.vector(ic))
        .map(|((vb, va), vc)| vb - va + vc)
        .collect();
    let excluded: HashSet<usize> = [ia, ib, ic].into();
    let mut scored: Vec<(usize, f64)> = (0..model.vocab.len())
        .filter(|i| !excluded.contains(i))
        .map(|i| (i, cosine(&target, model.vector(i))))
        .collect();
    scored.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .unwrap()
            .then_with(|| model.vocab[x.0].cmp(&model.vocab[y.0]))
    });
    Some(scored.iter().take(k).any(|&(i, _)| i == id))
}

#[derive(Debug, Clone)]
pub struct CategoryResult {
    pub name: String,
    pub answered: usize,
    pub skipped: usize,
    /// Accuracy per entry of the evaluated k list.
    pub accuracy: Vec<f64>,
}

/// Per-category and mean accuracy at each neighborhood size, with
/// out-of-vocabulary skip counts. The synonym task, when evaluated, is
/// reported separately and contributes only to `mean_with_synonyms`.
#[derive(Debug, Clone)]
pub struct AnalogyReport {
    pub ks: Vec<usize>,
    pub categories: Vec<CategoryResult>,
    /// Unweighted mean over categories with at least one answered question.
    pub mean: Vec<f64>,
    pub synonyms: Option<CategoryResult>,
    pub mean_with_synonyms: Option<Vec<f64>>,
}

/// Evaluates every category at every k; optionally folds in the synonym
/// task as one more row.
pub fn evaluate(
    model: &EmbeddingModel,
    categories: &[AnalogyCategory],
    ks: &[usize],
    synonyms: Option<&[(String, String)]>,
) -> Result<AnalogyReport> {
    assert!(!ks.is_empty());
    let mut results = Vec::with_capacity(categories.len());
    let mut any_answered = false;
    for category in categories {
        let questions = make_questions(category);
        let mut answered = 0;
        let mut skipped = 0;
        let mut correct = vec![0usize; ks.len()];
        for q in &questions {
            let outcomes: Vec<Option<bool>> = ks.iter().map(|&k| answer(model, q, k)).collect();
            if outcomes[0].is_none() {
                skipped += 1;
                continue;
            }
            answered += 1;
            for (c, o) in correct.iter_mut().zip(&outcomes) {
                if o.unwrap() {
                    *c += 1;
                }
            }
        }
        if answered > 0 {
            any_answered = true;
        }
        let accuracy = correct
            .iter()
            .map(|&c| {
                if answered > 0 {
                    c as f64 / answered as f64
                } else {
                    0.0
                }
            })
            .collect();
        results.push(CategoryResult {
            name: category.name.clone(),
            answered,
            skipped,
            accuracy,
        });
    }
    if !any_answered {
        return Err(Error::VocabularyMismatch);
    }
    let scored: Vec<&CategoryResult> = results.iter().filter(|r| r.answered > 0).collect();
    let mean: Vec<f64> = (0..ks.len())
        .map(|ki| scored.iter().map(|r| r.accuracy[ki]).sum::<f64>() / scored.len() as f64)
        .collect();

    let mut synonym_result = None;
    let mut mean_with_synonyms = None;
    if let Some(pairs) = synonyms {
        let mut accuracy = Vec::with_capacity(ks.len());
        let mut counted = (0, 0);
        for &k in ks {
            let (acc, answered, skipped) = synonym_check(model, pairs, k);
            accuracy.push(acc);
            counted = (answered, skipped);
        }
        let result = CategoryResult {
            name: "synonyms".to_string(),
            answered: counted.0,
            skipped: counted.1,
            accuracy,
        };
        if result.answered > 0 {
            let rows: Vec<&CategoryResult> =
                scored.iter().copied().chain([&result]).collect();
            mean_with_synonyms = Some(
                (0..ks.len())
                    .map(|ki| {
                        rows.iter().map(|r| r.accuracy[ki]).sum::<f64>() / rows.len() as f64
                    })
                    .collect(),
            );
        }
        synonym_result = Some(result);
    }
    Ok(AnalogyReport {
        ks: ks.to_vec(),
        categories: results,
        mean,
        synonyms: synonym_result,
        mean_with_synonyms,
    })
}

/// Fraction of in-vocabulary pairs whose second term is among the top-k
/// cosine neighbors of the first. Returns (accuracy, answered, skipped).
pub fn synonym_check(
    model: &EmbeddingModel,
    pairs: &[(String, String)],
    k: usize,
) -> (f64, usize, usize) {
    let mut answered = 0;
    let mut skipped = 0;
    let mut correct = 0;
    for (t1, t2) in pairs {
        let (Some(i1), Some(i2)) = (model.index_of(t1), model.index_of(t2)) else {
            skipped += 1;
            continue;
        };
        answered += 1;
        let qv = model.vector(i1);
        let mut scored: Vec<(usize, f64)> = (0..model.vocab.len())
            .filter(|&i| i != i1)
            .map(|i| (i, cosine(qv, model.vector(i))))
            .collect();
        scored.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap()
                .then_with(|| model.vocab[x.0].cmp(&model.vocab[y.0]))
        });
        if scored.iter().take(k).any(|&(i, _)| i == i2) {
            correct += 1;
        }
    }
    let acc = if answered > 0 {
        correct as f64 / answered as f64
    } else {
        0.0
    };
    (acc, answered, skipped)
}

/// Pairs file: TSV category, term_a, term_b; category order preserved by
/// first appearance.
pub fn load_categories(path: &Path) -> Result<Vec<AnalogyCategory>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_name: std::collections::HashMap<String, Vec<(String, String)>> =
        std::collections::HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        let name = cols[0].trim().to_string();
        if !by_name.contains_key(&name) {
            order.push(name.clone());
        }
        by_name
            .entry(name)
            .or_default()
            .push((cols[1].trim().to_string(), cols[2].trim().to_string()));
    }
    order
        .into_iter()
        .map(|name| {
            let pairs = by_name.remove(&name).unwrap();
            AnalogyCategory::new(name, pairs)
        })
        .collect()
}

/// Report TSV: category x k accuracy matrix with answered/skipped counts,
/// mean row, and synonym rows when evaluated.
pub fn save_report(report: &AnalogyReport, path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = ["category".to_string(), "answered".into(), "skipped".into()]
        .into_iter()
        .chain(report.ks.iter().map(|k| format!("k={k}")))
        .collect();
    writeln!(out, "{}", header.join("\t")).map_err(|e| Error::io(path, e))?;
    let row = |name: &str, answered: usize, skipped: usize, acc: &[f64]| -> String {
        let mut cols = vec![name.to_string(), answered.to_string(), skipped.to_string()];
        cols.extend(acc.iter().map(|a| format!("{a:.4}")));
        cols.join("\t")
    };
    for c in &report.categories {
        writeln!(out, "{}", row(&c.name, c.answered, c.skipped, &c.accuracy))
            .map_err(|e| Error::io(path, e))?;
    }
    if let Some(s) = &report.synonyms {
        writeln!(out, "{}", row(&s.name, s.answered, s.skipped, &s.accuracy))
            .map_err(|e| Error::io(path, e))?;
    }
    let mean_cols: Vec<String> = ["mean".to_string(), String::new(), String::new()]
        .into_iter()
        .chain(report.mean.iter().map(|a| format!("{a:.4}")))
        .collect();
    writeln!(out, "{}", mean_cols.join("\t")).map_err(|e| Error::io(path, e))?;
    if let Some(mean) = &report.mean_with_synonyms {
        let cols: Vec<String> = ["mean_with_synonyms".to_string(), String::new(), String::new()]
            .into_iter()
            .chain(mean.iter().map(|a| format!("{a:.4}")))
            .collect();
        writeln!(out, "{}", cols.join("\t")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
