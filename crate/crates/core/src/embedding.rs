//! Concept co-occurrence matrices, GloVe training, and visit vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedVisit, Section};
use crate::{Error, Result};

/// Sparse symmetric concept-pair counts built with whole-document windows.
/// Pairs are stored canonically with i < j; the diagonal is absent.
#[derive(Debug, Clone)]
pub struct CoocMatrix {
    pub vocab: Vec<String>,
    pub counts: BTreeMap<(usize, usize), f64>,
}

impl CoocMatrix {
    pub fn index_of(&self, concept: &str) -> Option<usize> {
        self.vocab.iter().position(|c| c == concept)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.counts.get(&key).copied().unwrap_or(0.0)
    }

    /// All nonzero entries in both orientations, deterministic order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.counts.len() * 2);
        for (&(i, j), &x) in &self.counts {
            out.push((i, j, x));
            out.push((j, i, x));
        }
        out
    }

    /// TSV dump: i, j, X_ij with i < j.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (&(i, j), &x) in &self.counts {
            writeln!(out, "{i}\t{j}\t{x}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn save_vocab(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for c in &self.vocab {
            writeln!(out, "{c}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(cooc_path: &Path, vocab_path: &Path) -> Result<Self> {
        let vocab_file = std::fs::File::open(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
        let mut vocab = Vec::new();
        for line in BufReader::new(vocab_file).lines() {
            let line = line.map_err(|e| Error::io(vocab_path, e))?;
            if !line.is_empty() {
                vocab.push(line);
            }
        }
        let file = std::fs::File::open(cooc_path).map_err(|e| Error::io(cooc_path, e))?;
        let mut counts = BTreeMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(cooc_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let parse_err = |msg: String| Error::Malformed {
                path: cooc_path.to_path_buf(),
                line: idx + 1,
                message: msg,
            };
            if cols.len() != 3 {
                return Err(parse_err(format!("expected 3 columns, got {}", cols.len())));
            }
            let i: usize = cols[0].parse().map_err(|_| parse_err("bad index".into()))?;
            let j: usize = cols[1].parse().map_err(|_| parse_err("bad index".into()))?;
            let x: f64 = cols[2].parse().map_err(|_| parse_err("bad count".into()))?;
            if i >= j || j >= vocab.len() {
                return Err(parse_err(format!("bad pair ({i}, {j})")));
            }
            counts.insert((i, j), x);
        }
        Ok(CoocMatrix { vocab, counts })
    }
}

/// Builds the co-occurrence matrix for one section. The whole section is the
/// window: each visit's de-duplicated in-vocabulary concept set contributes +1
/// to every unordered pair. Vocabulary keeps concepts appearing in at least
/// `min_count` visits.
pub fn build_cooc(
    annotated: &[AnnotatedVisit],
    section: Section,
    min_count: usize,
) -> Result<CoocMatrix> {
    assert!(min_count >= 1);
    let mut visit_occurrence: HashMap<&str, usize> = HashMap::new();
    for visit in annotated {
        let unique: HashSet<&str> = visit.concepts(section).iter().map(|c| c.as_str()).collect();
        for c in unique {
            *visit_occurrence.entry(c).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<String> = visit_occurrence
        .iter()
        .filter(|(_, &n)| n >= min_count)
        .map(|(&c, _)| c.to_string())
        .collect();
    vocab.sort();
    let index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut usable = false;
    for visit in annotated {
        let mut ids: Vec<usize> = visit
            .concepts(section)
            .iter()
            .filter_map(|c| index.get(c.as_str()).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() >= 2 {
            usable = true;
        }
        for a in 0..ids.len() {
            for b in a + 1..ids.len() {
                *counts.entry((ids[a], ids[b])).or_insert(0.0) += 1.0;
            }
        }
    }
    if !usable {
        return Err(Error::DegenerateCooc);
    }
    Ok(CoocMatrix { vocab, counts })
}

/// GloVe training hyperparameters.
#[derive(Debug, Clone)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub alpha: f64,
    pub x_max: f64,
    pub learning_rate: f64,
}

impl GloveConfig {
    pub fn new(dim: usize, epochs: usize, seed: u64) -> Self {
        GloveConfig {
            dim,
            epochs,
            seed,
            alpha: 0.75,
            x_max: 100.0,
            learning_rate: 0.05,
        }
    }
}

/// Vocabulary-indexed dense vectors with training provenance. `combined`
/// (main + context) is the exported embedding.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub vocab: Vec<String>,
    pub dim: usize,
    pub main: Vec<f64>,
    pub context: Vec<f64>,
    pub bias: Vec<f64>,
    pub context_bias: Vec<f64>,
    pub combined: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingModel {
    pub fn vector(&self, idx: usize) -> &[f64] {
        &self.combined[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn index_of(&self, concept: &str) -> Option<usize> {
        self.vocab.iter().position(|c| c == concept)
    }

    /// Text format: first line "<vocab_size> <dim>", then one line per
    /// concept with spaces in the id replaced by underscores.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(out, "{} {}", self.vocab.len(), self.dim).map_err(|e| Error::io(path, e))?;
        for (i, concept) in self.vocab.iter().enumerate() {
            let id = concept.replace(' ', "_");
            let values: Vec<String> = self.vector(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{} {}", id, values.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let parse_err = |line: usize, msg: &str| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message: msg.to_string(),
        };
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(parse_err(1, "empty embedding file")),
        };
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(parse_err(1, "header must be `<vocab_size> <dim>`"));
        }
        let vocab_size: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(1, "bad vocab size"))?;
        let dim: usize = parts[1].parse().map_err(|_| parse_err(1, "bad dim"))?;
        let mut vocab = Vec::with_capacity(vocab_size);
        let mut combined = Vec::with_capacity(vocab_size * dim);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields
                .next()
                .ok_or_else(|| parse_err(idx + 1, "missing concept id"))?;
            vocab.push(id.replace('_', " "));
            let values: std::result::Result<Vec<f64>, _> =
                fields.map(|v| v.parse::<f64>()).collect();
            let values = values.map_err(|_| parse_err(idx + 1, "bad vector value"))?;
            if values.len() != dim {
                return Err(parse_err(idx + 1, "wrong vector length"));
            }
            combined.extend(values);
        }
        if vocab.len() != vocab_size {
            return Err(parse_err(1, "vocab size does not match line count"));
        }
        let n = vocab.len();
        Ok(EmbeddingModel {
            vocab,
            dim,
            main: combined.clone(),
            context: vec![0.0; n * dim],
            bias: vec![0.0; n],
            context_bias: vec![0.0; n],
            combined,
            epoch_losses: Vec::new(),
        })
    }
}

fn weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

/// Full-batch loss J and its analytic gradient at the given parameters.
/// J sums f(X_ij) * (w_i . w~_j + b_i + b~_j - ln X_ij)^2 over nonzero
/// entries in both orientations.
#[allow(clippy::too_many_arguments)]
pub fn glove_loss_and_grad(
    entries: &[(usize, usize, f64)],
    dim: usize,
    main: &[f64],
    context: &[f64],
    bias: &[f64],
    context_bias: &[f64],
    x_max: f64,
    alpha: f64,
) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut loss = 0.0;
    let mut g_main = vec![0.0; main.len()];
    let mut g_context = vec![0.0; context.len()];
    let mut g_bias = vec![0.0; bias.len()];
    let mut g_context_bias = vec![0.0; context_bias.len()];
    for &(i, j, x) in entries {
        let wi = &main[i * dim..(i + 1) * dim];
        let cj = &context[j * dim..(j + 1) * dim];
        let dot: f64 = wi.iter().zip(cj).map(|(a, b)| a * b).sum();
        let diff = dot + bias[i] + context_bias[j] - x.ln();
        let f = weight(x, x_max, alpha);
        loss += f * diff * diff;
        let scale = 2.0 * f * diff;
        for d in 0..dim {
            g_main[i * dim + d] += scale * cj[d];
            g_context[j * dim + d] += scale * wi[d];
        }
        g_bias[i] += scale;
        g_context_bias[j] += scale;
    }
    (loss, g_main, g_context, g_bias, g_context_bias)
}

/// Trains GloVe on the co-occurrence matrix with AdaGrad over shuffled
/// nonzero entries. Deterministic for a fixed seed.
pub fn train_glove(cooc: &CoocMatrix, config: &GloveConfig) -> Result<EmbeddingModel> {
    assert!(config.dim >= 1 && config.epochs >= 1);
    let n = cooc.vocab.len();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = 0.5 / dim as f64;
    let mut rand_vec = |len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-span..span)).collect()
    };
    let mut main = rand_vec(n * dim);
    let mut context = rand_vec(n * dim);
    let mut bias = rand_vec(n);
    let mut context_bias = rand_vec(n);

    // AdaGrad accumulators start at 1.0
    let mut acc_main = vec![1.0_f64; n * dim];
    let mut acc_context = vec![1.0_f64; n * dim];
    let mut acc_bias = vec![1.0_f64; n];
    let mut acc_context_bias = vec![1.0_f64; n];

    let mut entries = cooc.entries();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        entries.shuffle(&mut rng);
        let mut loss = 0.0;
        for &(i, j, x) in &entries {
            let dot: f64 = (0..dim)
                .map(|d| main[i * dim + d] * context[j * dim + d])
                .sum();
            let diff = dot + bias[i] + context_bias[j] - x.ln();
            let f = weight(x, config.x_max, config.alpha);
            loss += f * diff * diff;
            let scale = 2.0 * f * diff;
            for d in 0..dim {
                let gm = scale * context[j * dim + d];
                let gc = scale * main[i * dim + d];
                main[i * dim + d] -= config.learning_rate * gm / acc_main[i * dim + d].sqrt();
                context[j * dim + d] -=
                    config.learning_rate * gc / acc_context[j * dim + d].sqrt();
                acc_main[i * dim + d] += gm * gm;
                acc_context[j * dim + d] += gc * gc;
            }
            bias[i] -= config.learning_rate * scale / acc_bias[i].sqrt();
            context_bias[j] -= config.learning_rate * scale / acc_context_bias[j].sqrt();
            acc_bias[i] += scale * scale;
            acc_context_bias[j] += scale * scale;
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(loss);
    }

    let combined: Vec<f64> = main
        .iter()
        .zip(&context)
        .map(|(w, c)| w + c)
        .collect();
    Ok(EmbeddingModel {
        vocab: cooc.vocab.clone(),
        dim,
        main,
        context,
        bias,
        context_bias,
        combined,
        epoch_losses,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top-k vocabulary items by cosine similarity of combined vectors, query
/// excluded.
pub fn nearest_terms(
    model: &EmbeddingModel,
    concept: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    assert!(k >= 1);
    let query = model
        .index_of(concept)
        .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?;
    let qv = model.vector(query);
    let mut scored: Vec<(usize, f64)> = (0..model.vocab.len())
        .filter(|&i| i != query)
        .map(|i| (i, cosine(qv, model.vector(i))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| model.vocab[a.0].cmp(&model.vocab[b.0]))
    });
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(i, c)| (model.vocab[i].clone(), c))
        .collect())
}

/// Concatenated per-section mean of concept vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitVector {
    pub visit_id: String,
    pub vector: Vec<f64>,
}

fn section_mean(concepts: &[String], model: &EmbeddingModel) -> (Vec<f64>, bool) {
    let mut unique: Vec<&str> = concepts.iter().map(|c| c.as_str()).collect();
    unique.sort_unstable();
    unique.dedup();
    let in_vocab: Vec<usize> = unique
        .iter()
        .filter_map(|c| model.index_of(c))
        .collect();
    if in_vocab.is_empty() {
        return (vec![0.0; model.dim], false);
    }
    let mut mean = vec![0.0; model.dim];
    for &idx in &in_vocab {
        for (m, v) in mean.iter_mut().zip(model.vector(idx)) {
            *m += v;
        }
    }
    let n = in_vocab.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    (mean, true)
}

/// Visit vector = mean interview-concept vector concatenated with mean
/// examination-concept vector. A section with no in-vocabulary concepts
/// contributes the zero vector; visits where both halves are zero are
/// dropped with a warning.
pub fn embed_visits(
    annotated: &[AnnotatedVisit],
    interview_model: &EmbeddingModel,
    exam_model: &EmbeddingModel,
) -> Vec<VisitVector> {
    let mut out = Vec::with_capacity(annotated.len());
    for visit in annotated {
        let (interview, has_i) = section_mean(&visit.interview_concepts, interview_model);
        let (examination, has_e) = section_mean(&visit.examination_concepts, exam_model);
        if !has_i && !has_e {
            eprintln!(
                "warning: visit {} has no in-vocabulary concepts, dropped",
                visit.visit_id
            );
            continue;
        }
        let mut vector = interview;
        vector.extend(examination);
        out.push(VisitVector {
            visit_id: visit.visit_id.clone(),
            vector,
        });
    }
    out
}

/// TSV: visit_id then one column per coordinate.
pub fn save_visit_vectors(vectors: &[VisitVector], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for v in vectors {
        let values: Vec<String> = v.vector.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}\t{}", v.visit_id, values.join("\t")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_visit_vectors(path: &Path) -> Result<Vec<VisitVector>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let visit_id = cols
            .next()
            .ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "empty row".into(),
            })?
            .to_string();
        let vector: std::result::Result<Vec<f64>, _> = cols.map(|c| c.parse::<f64>()).collect();
        let vector = vector.map_err(|_| Error::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: "bad coordinate".into(),
        })?;
        out.push(VisitVector { visit_id, vector });
    }
    Ok(out)
}
