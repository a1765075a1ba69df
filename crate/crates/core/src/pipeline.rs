//! Stage configuration and the end-to-end pipeline: extract terms, annotate,
//! embed, cluster, and emit interpretation artifacts into an output
//! directory.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::cluster::{
    adjusted_rand, elbow_k, kmeans, ward, ClusterStats, Clustering, Method,
};
use crate::corpus::{
    annotate, coverage_report, filter_for_clustering, load_corpus, save_annotated, AnnotatedVisit,
    Section, Visit,
};
use crate::embedding::{
    build_cooc, embed_visits, save_visit_vectors, train_glove, EmbeddingModel, GloveConfig,
};
use crate::terms::{build_lexicon, extract_candidates};
use crate::analysis::{
    cluster_profile, contingency, correspondence_analysis, emit_svg, pca_2d, save_ca,
    save_profiles, tsne_2d,
};
use crate::{Error, Result};

/// All stage parameters plus artifact locations. Mirrors every module flag;
/// loadable from a flat key=value file with CLI flags overriding.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub max_len: usize,
    pub min_freq: u64,
    pub cvalue_threshold: f64,
    pub min_count: usize,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub x_max: f64,
    pub alpha: f64,
    /// Fixed cluster count; `None` selects k by the elbow rule.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub tau: f64,
    pub restarts: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub top_n: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_len: 5,
            min_freq: 5,
            cvalue_threshold: 20.0,
            min_count: 5,
            dim: 20,
            epochs: 50,
            learning_rate: 0.05,
            x_max: 100.0,
            alpha: 0.75,
            k: None,
            k_min: 2,
            k_max: 15,
            tau: 0.05,
            restarts: 10,
            perplexity: 30.0,
            tsne_iterations: 1000,
            top_n: 5,
            seed: 42,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    /// Flat key=value file; `#` starts a comment, unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                "{}:{}: expected key=value, got {raw:?}",
                path.display(),
                idx + 1
            )))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "max_len" => self.max_len = parse(key, value)?,
            "min_freq" => self.min_freq = parse(key, value)?,
            "cvalue_threshold" => self.cvalue_threshold = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "x_max" => self.x_max = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "k" => {
                self.k = if value == "auto" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "k_min" => self.k_min = parse(key, value)?,
            "k_max" => self.k_max = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "perplexity" => self.perplexity = parse(key, value)?,
            "tsne_iterations" => self.tsne_iterations = parse(key, value)?,
            "top_n" => self.top_n = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 1 || self.min_freq < 1 || self.min_count < 1 {
            return Err(Error::Config("max_len, min_freq, min_count must be >= 1".into()));
        }
        if self.dim < 1 || self.epochs < 1 {
            return Err(Error::Config("dim and epochs must be >= 1".into()));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::Config("need 2 <= k_min <= k_max".into()));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::Config("k must be >= 2".into()));
            }
        }
        if self.cvalue_threshold < 0.0 || self.tau <= 0.0 || self.perplexity <= 0.0 {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if self.restarts < 1 || self.tsne_iterations < 1 || self.workers < 1 {
            return Err(Error::Config("restarts, iterations, workers must be >= 1".into()));
        }
        Ok(())
    }

    pub fn glove(&self) -> GloveConfig {
        GloveConfig {
            dim: self.dim,
            epochs: self.epochs,
            seed: self.seed,
            alpha: self.alpha,
            x_max: self.x_max,
            learning_rate: self.learning_rate,
        }
    }
}

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const LEXICON: &str = "lexicon.tsv";
    pub const ANNOTATED: &str = "annotated.jsonl";
    pub const COVERAGE: &str = "coverage.json";
    pub const COOC_INTERVIEW: &str = "interview.cooc.tsv";
    pub const COOC_EXAMINATION: &str = "examination.cooc.tsv";
    pub const VOCAB_INTERVIEW: &str = "interview.vocab.txt";
    pub const VOCAB_EXAMINATION: &str = "examination.vocab.txt";
    pub const EMB_INTERVIEW: &str = "interview.emb.txt";
    pub const EMB_EXAMINATION: &str = "examination.emb.txt";
    pub const VISIT_VECTORS: &str = "visit_vectors.tsv";
    pub const ASSIGN_KMEANS: &str = "assignments_kmeans.tsv";
    pub const ASSIGN_WARD: &str = "assignments_ward.tsv";
    pub const DENDROGRAM: &str = "dendrogram.tsv";
    pub const STATS: &str = "stats.json";
    pub const PROFILES: &str = "profiles.tsv";
    pub const CA_ICD10: &str = "ca_icd10.tsv";
    pub const CA_DOCTOR: &str = "ca_doctor.tsv";
    pub const TSNE_TSV: &str = "tsne.tsv";
    pub const TSNE_SVG: &str = "tsne.svg";
    pub const PCA_TSV: &str = "pca.tsv";
    pub const PCA_SVG: &str = "pca.svg";
}

/// Errors with the producing stage when a prerequisite artifact is missing.
pub fn require(path: &Path, producing_stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage: producing_stage.to_string(),
        })
    }
}

/// In-memory results of a full pipeline run, for inspection and testing.
pub struct PipelineOutputs {
    pub lexicon_size: usize,
    pub annotated: Vec<AnnotatedVisit>,
    pub interview_model: EmbeddingModel,
    pub examination_model: EmbeddingModel,
    pub chosen_k: usize,
    pub kmeans_clustering: Clustering,
    pub ward_clustering: Clustering,
    pub methods_ari: f64,
}

/// Runs stages (1)-(4) plus the interpretation artifacts, writing every
/// output under `out_dir`. Deterministic for fixed seeds with workers = 1.
pub fn run(corpus_path: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<PipelineOutputs> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out = |name: &str| out_dir.join(name);

    // (1) concept extraction
    let visits = load_corpus(corpus_path)?;
    let candidates = extract_candidates(&visits, config.max_len, config.min_freq, &HashSet::new());
    let lexicon = build_lexicon(&candidates, config.cvalue_threshold, None)?;
    lexicon.save(&out(artifacts::LEXICON))?;

    let annotated: Vec<AnnotatedVisit> = visits.iter().map(|v| annotate(v, &lexicon)).collect();
    save_annotated(&annotated, &out(artifacts::ANNOTATED))?;
    let coverage = coverage_report(&annotated)?;
    let coverage_json =
        serde_json::to_string_pretty(&coverage).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(out(artifacts::COVERAGE), coverage_json + "\n")
        .map_err(|e| Error::io(out_dir, e))?;

    // (2) concept embeddings, one model per section
    let filtered = filter_for_clustering(&annotated);
    let cooc_interview = build_cooc(&filtered, Section::Interview, config.min_count)?;
    cooc_interview.save(&out(artifacts::COOC_INTERVIEW))?;
    cooc_interview.save_vocab(&out(artifacts::VOCAB_INTERVIEW))?;
    let cooc_examination = build_cooc(&filtered, Section::Examination, config.min_count)?;
    cooc_examination.save(&out(artifacts::COOC_EXAMINATION))?;
    cooc_examination.save_vocab(&out(artifacts::VOCAB_EXAMINATION))?;

    let interview_model = train_glove(&cooc_interview, &config.glove())?;
    interview_model.save(&out(artifacts::EMB_INTERVIEW))?;
    let examination_model = train_glove(&cooc_examination, &config.glove())?;
    examination_model.save(&out(artifacts::EMB_EXAMINATION))?;

    // (3) visit embeddings
    let vectors = embed_visits(&filtered, &interview_model, &examination_model);
    save_visit_vectors(&vectors, &out(artifacts::VISIT_VECTORS))?;

    // (4) clustering, both methods compared at equal k
    let (chosen_k, elbow_curve) = match config.k {
        Some(k) => (k, None),
        None => {
            let elbow = elbow_k(
                &vectors,
                config.k_min,
                config.k_max,
                Method::Kmeans,
                config.tau,
                config.restarts,
                config.seed,
            )?;
            (elbow.k, Some(elbow.curve))
        }
    };
    let kmeans_clustering = kmeans(&vectors, chosen_k, config.restarts, config.seed)?;
    let (ward_clustering, dendrogram) = ward(&vectors, chosen_k)?;
    kmeans_clustering.save(&out(artifacts::ASSIGN_KMEANS))?;
    ward_clustering.save(&out(artifacts::ASSIGN_WARD))?;
    dendrogram.save(&out(artifacts::DENDROGRAM))?;
    let methods_ari = adjusted_rand(&kmeans_clustering, &ward_clustering)?;
    let stats = ClusterStats {
        method: Method::Kmeans,
        k: chosen_k,
        sizes: kmeans_clustering.sizes.clone(),
        wcss: kmeans_clustering.wcss,
        seed: config.seed,
        ari: Some(methods_ari),
        elbow_curve,
    };
    let stats_json =
        serde_json::to_string_pretty(&stats).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(out(artifacts::STATS), stats_json + "\n").map_err(|e| Error::io(out_dir, e))?;

    // interpretation artifacts
    let profiles = cluster_profile(&kmeans_clustering, &filtered, config.top_n, Some(&lexicon));
    save_profiles(&profiles, &out(artifacts::PROFILES))?;

    let icd10: HashMap<String, String> = visits
        .iter()
        .filter_map(|v| v.icd10.clone().map(|c| (v.visit_id.clone(), c)))
        .collect();
    let doctors: HashMap<String, String> = visits
        .iter()
        .map(|v| (v.visit_id.clone(), v.doctor_id.clone()))
        .collect();
    save_ca(
        &correspondence_analysis(&contingency(&kmeans_clustering, &icd10))?,
        &out(artifacts::CA_ICD10),
    )?;
    save_ca(
        &correspondence_analysis(&contingency(&kmeans_clustering, &doctors))?,
        &out(artifacts::CA_DOCTOR),
    )?;

    let assignment = kmeans_clustering.assignment();
    let items: Vec<(String, Vec<f64>)> = vectors
        .iter()
        .map(|v| (v.visit_id.clone(), v.vector.clone()))
        .collect();
    let color_key: Vec<String> = vectors
        .iter()
        .map(|v| assignment[v.visit_id.as_str()].to_string())
        .collect();
    let mut tsne =
        tsne_2d(&items, config.perplexity, config.tsne_iterations, config.seed)?.projection;
    tsne.color_key = Some(color_key.clone());
    tsne.save(&out(artifacts::TSNE_TSV))?;
    emit_svg(&tsne, &out(artifacts::TSNE_SVG))?;
    let mut pca = pca_2d(&items)?.projection;
    pca.color_key = Some(color_key);
    pca.save(&out(artifacts::PCA_TSV))?;
    emit_svg(&pca, &out(artifacts::PCA_SVG))?;

    Ok(PipelineOutputs {
        lexicon_size: lexicon.len(),
        annotated,
        interview_model,
        examination_model,
        chosen_k,
        kmeans_clustering,
        ward_clustering,
        methods_ari,
    })
}

/// Recovers the planted-topic clustering of a synthetic corpus for ARI
/// checks, restricted to the given visit ids.
pub fn planted_clustering(visits: &[Visit], ids: &[String]) -> Option<Clustering> {
    let by_id: HashMap<&str, &Visit> = visits.iter().map(|v| (v.visit_id.as_str(), v)).collect();
    let mut labels = Vec::with_capacity(ids.len());
    for id in ids {
        let topic = crate::synth::planted_topic(by_id.get(id.as_str())?.icd10.as_deref()?)?;
        labels.push(topic);
    }
    let k = labels.iter().copied().max()? + 1;
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    Some(Clustering {
        method: Method::Kmeans,
        k,
        visit_ids: ids.to_vec(),
        labels,
        wcss: f64::NAN,
        sizes,
    })
}
