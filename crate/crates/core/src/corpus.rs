//! Visit ingestion, lexicon handling, and longest-match concept annotation.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One visit record: three token streams plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub visit_id: String,
    pub doctor_id: String,
    pub specialty: String,
    pub icd10: Option<String>,
    pub interview: Vec<String>,
    pub examination: Vec<String>,
    pub recommendation: Vec<String>,
}

impl Visit {
    pub fn section(&self, section: Section) -> &[String] {
        match section {
            Section::Interview => &self.interview,
            Section::Examination => &self.examination,
            Section::Recommendation => &self.recommendation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Interview,
    Examination,
    Recommendation,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Interview => "interview",
            Section::Examination => "examination",
            Section::Recommendation => "recommendation",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VisitLine {
    visit_id: String,
    doctor_id: String,
    specialty: String,
    icd10: Option<String>,
    interview: String,
    examination: String,
    recommendation: String,
}

fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Reads a JSON Lines corpus, one visit per line. Text fields are
/// whitespace-tokenized and lowercased.
pub fn load_corpus(path: &Path) -> Result<Vec<Visit>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut visits = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: VisitLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if raw.visit_id.is_empty() {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "empty visit_id".into(),
            });
        }
        if !seen.insert(raw.visit_id.clone()) {
            return Err(Error::DuplicateVisitId(raw.visit_id));
        }
        visits.push(Visit {
            visit_id: raw.visit_id,
            doctor_id: raw.doctor_id,
            specialty: raw.specialty,
            icd10: raw.icd10,
            interview: tokenize(&raw.interview),
            examination: tokenize(&raw.examination),
            recommendation: tokenize(&raw.recommendation),
        });
    }
    Ok(visits)
}

pub fn save_corpus(visits: &[Visit], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for v in visits {
        let line = VisitLine {
            visit_id: v.visit_id.clone(),
            doctor_id: v.doctor_id.clone(),
            specialty: v.specialty.clone(),
            icd10: v.icd10.clone(),
            interview: v.interview.join(" "),
            examination: v.examination.join(" "),
            recommendation: v.recommendation.join(" "),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// One lexicon entry: a canonical term with its semantic labels and rank score.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
    pub score: f64,
}

impl LexiconEntry {
    /// Canonical concept id: tokens joined by single spaces.
    pub fn concept_id(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Ranked list of canonical terms; drives longest-match annotation.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
    by_term: HashMap<String, usize>,
    max_len: usize,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut by_term = HashMap::new();
        let mut max_len = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.tokens.is_empty() {
                return Err(Error::Invalid("lexicon term with zero tokens".into()));
            }
            if e.labels.is_empty() {
                return Err(Error::Invalid(format!(
                    "lexicon term {:?} has no labels",
                    e.concept_id()
                )));
            }
            if by_term.insert(e.concept_id(), i).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate lexicon term {:?}",
                    e.concept_id()
                )));
            }
            max_len = max_len.max(e.tokens.len());
        }
        Ok(Lexicon {
            entries,
            by_term,
            max_len,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, concept_id: &str) -> Option<&LexiconEntry> {
        self.by_term.get(concept_id).map(|&i| &self.entries[i])
    }

    pub fn contains_tokens(&self, tokens: &[String]) -> bool {
        self.by_term.contains_key(&tokens.join(" "))
    }

    /// TSV columns: term (tokens joined by spaces), labels (comma-separated),
    /// score (decimal).
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
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
                    message: format!("expected 3 tab-separated columns, got {}", cols.len()),
                });
            }
            let tokens = tokenize(cols[0]);
            let labels: Vec<String> = cols[1]
                .split(',')
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            let score: f64 = cols[2].trim().parse().map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("bad score {:?}", cols[2]),
            })?;
            entries.push(LexiconEntry {
                tokens,
                labels,
                score,
            });
        }
        Lexicon::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}",
                e.concept_id(),
                e.labels.join(","),
                e.score
            )
            .map_err(|err| Error::io(path, err))?;
        }
        Ok(())
    }
}

/// Tokens and characters consumed by lexicon matches within one section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub tokens_covered: usize,
    pub tokens_total: usize,
    pub chars_covered: usize,
    pub chars_total: usize,
}

impl Coverage {
    pub fn token_ratio(&self) -> f64 {
        if self.tokens_total == 0 {
            0.0
        } else {
            self.tokens_covered as f64 / self.tokens_total as f64
        }
    }

    pub fn char_ratio(&self) -> f64 {
        if self.chars_total == 0 {
            0.0
        } else {
            self.chars_covered as f64 / self.chars_total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedVisit {
    pub visit_id: String,
    pub doctor_id: String,
    pub specialty: String,
    pub icd10: Option<String>,
    pub interview_concepts: Vec<String>,
    pub examination_concepts: Vec<String>,
    pub recommendation_concepts: Vec<String>,
    pub interview_coverage: Coverage,
    pub examination_coverage: Coverage,
    pub recommendation_coverage: Coverage,
}

impl AnnotatedVisit {
    pub fn concepts(&self, section: Section) -> &[String] {
        match section {
            Section::Interview => &self.interview_concepts,
            Section::Examination => &self.examination_concepts,
            Section::Recommendation => &self.recommendation_concepts,
        }
    }

    pub fn coverage(&self, section: Section) -> &Coverage {
        match section {
            Section::Interview => &self.interview_coverage,
            Section::Examination => &self.examination_coverage,
            Section::Recommendation => &self.recommendation_coverage,
        }
    }
}

fn annotate_section(tokens: &[String], lexicon: &Lexicon) -> (Vec<String>, Coverage) {
    let mut concepts = Vec::new();
    let mut cov = Coverage {
        tokens_total: tokens.len(),
        chars_total: tokens.iter().map(|t| t.chars().count()).sum(),
        ..Coverage::default()
    };
    let mut pos = 0;
    while pos < tokens.len() {
        let longest = lexicon.max_len.min(tokens.len() - pos);
        let mut matched = 0;
        for len in (1..=longest).rev() {
            if lexicon.contains_tokens(&tokens[pos..pos + len]) {
                matched = len;
                break;
            }
        }
        if matched > 0 {
            let span = &tokens[pos..pos + matched];
            concepts.push(span.join(" "));
            cov.tokens_covered += matched;
            cov.chars_covered += span.iter().map(|t| t.chars().count()).sum::<usize>();
            pos += matched;
        } else {
            // not recognized tokens are skipped
            pos += 1;
        }
    }
    (concepts, cov)
}

/// Greedy left-to-right longest-match annotation of every section.
pub fn annotate(visit: &Visit, lexicon: &Lexicon) -> AnnotatedVisit {
    let (interview_concepts, interview_coverage) = annotate_section(&visit.interview, lexicon);
    let (examination_concepts, examination_coverage) =
        annotate_section(&visit.examination, lexicon);
    let (recommendation_concepts, recommendation_coverage) =
        annotate_section(&visit.recommendation, lexicon);
    AnnotatedVisit {
        visit_id: visit.visit_id.clone(),
        doctor_id: visit.doctor_id.clone(),
        specialty: visit.specialty.clone(),
        icd10: visit.icd10.clone(),
        interview_concepts,
        examination_concepts,
        recommendation_concepts,
        interview_coverage,
        examination_coverage,
        recommendation_coverage,
    }
}

/// Per-section mean coverage over visits; visits with an empty section are
/// excluded from that section's mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub interview_token_pct: f64,
    pub interview_char_pct: f64,
    pub examination_token_pct: f64,
    pub examination_char_pct: f64,
    pub recommendation_token_pct: f64,
    pub recommendation_char_pct: f64,
}

pub fn coverage_report(annotated: &[AnnotatedVisit]) -> Result<CoverageReport> {
    let mean = |section: Section| -> Option<(f64, f64)> {
        let covs: Vec<&Coverage> = annotated
            .iter()
            .map(|a| a.coverage(section))
            .filter(|c| c.tokens_total > 0)
            .collect();
        if covs.is_empty() {
            return None;
        }
        let n = covs.len() as f64;
        Some((
            covs.iter().map(|c| c.token_ratio()).sum::<f64>() / n,
            covs.iter().map(|c| c.char_ratio()).sum::<f64>() / n,
        ))
    };
    let interview = mean(Section::Interview);
    let examination = mean(Section::Examination);
    let recommendation = mean(Section::Recommendation);
    if interview.is_none() && examination.is_none() && recommendation.is_none() {
        return Err(Error::NoAnnotatableText);
    }
    let pct = |x: Option<(f64, f64)>| x.map(|(t, c)| (t * 100.0, c * 100.0)).unwrap_or((0.0, 0.0));
    let (it, ic) = pct(interview);
    let (et, ec) = pct(examination);
    let (rt, rc) = pct(recommendation);
    Ok(CoverageReport {
        interview_token_pct: it,
        interview_char_pct: ic,
        examination_token_pct: et,
        examination_char_pct: ec,
        recommendation_token_pct: rt,
        recommendation_char_pct: rc,
    })
}

/// Keeps visits with non-empty recommendation concepts and at least one of
/// interview or examination concepts non-empty.
pub fn filter_for_clustering(annotated: &[AnnotatedVisit]) -> Vec<AnnotatedVisit> {
    annotated
        .iter()
        .filter(|a| {
            !a.recommendation_concepts.is_empty()
                && (!a.interview_concepts.is_empty() || !a.examination_concepts.is_empty())
        })
        .cloned()
        .collect()
}

pub fn load_annotated(path: &Path) -> Result<Vec<AnnotatedVisit>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let a: AnnotatedVisit = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(a);
    }
    Ok(out)
}

pub fn save_annotated(annotated: &[AnnotatedVisit], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for a in annotated {
        serde_json::to_writer(&mut out, a).map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
