use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viseg::analogy::{evaluate, load_categories, save_report};
use viseg::analysis::{
    cluster_profile, contingency, correspondence_analysis, emit_svg, pca_2d, save_ca,
    save_profiles, tsne_2d, Projection2D,
};
use viseg::cluster::{
    adjusted_rand, elbow_k, kmeans, ward, ClusterStats, Clustering, Method,
};
use viseg::corpus::{
    annotate, coverage_report, filter_for_clustering, load_annotated, load_corpus, save_annotated,
    save_corpus, AnnotatedVisit, Lexicon, Section,
};
use viseg::embedding::{
    build_cooc, embed_visits, load_visit_vectors, save_visit_vectors, train_glove, CoocMatrix,
    EmbeddingModel,
};
use viseg::pipeline::{self, require, PipelineConfig};
use viseg::synth::{generate_synthetic, SynthSpec};
use viseg::terms::{build_lexicon, extract_candidates, load_labels, load_stopwords};
use viseg::{Error, Result};

/// Concept-based segmentation of free-text visit records.
#[derive(Parser)]
#[command(name = "viseg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value configuration file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key (repeatable), e.g. --set dim=30.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed for every randomized stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count; determinism is guaranteed at 1.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for entry in &self.overrides {
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {entry:?}")))?;
            config.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus with planted topics.
    Synth {
        /// Output corpus (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        visits: usize,
        #[arg(long, default_value_t = 3)]
        topics: usize,
        #[arg(long, default_value_t = 80)]
        vocab_per_topic: usize,
        #[arg(long, default_value_t = 5)]
        rec_per_topic: usize,
        /// Fraction of section tokens replaced by another topic's tokens.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Extract candidate phrases, rank them by C-value, write the lexicon.
    ExtractTerms {
        #[arg(long)]
        corpus: PathBuf,
        /// Output lexicon TSV.
        #[arg(long)]
        out: PathBuf,
        /// Stopword list, one token per line.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Optional label file: TSV term, comma-separated labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Annotate visits with lexicon concepts via longest match.
    Annotate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Output annotated visits (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-section coverage report here.
        #[arg(long)]
        coverage: Option<PathBuf>,
    },
    /// Build the concept co-occurrence matrix for one section.
    Cooccur {
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long, value_parser = parse_section)]
        section: Section,
        /// Output co-occurrence TSV (i, j, count with i < j).
        #[arg(long)]
        out: PathBuf,
        /// Output vocabulary list, one concept per line.
        #[arg(long)]
        vocab_out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train GloVe embeddings from a co-occurrence matrix.
    Train {
        #[arg(long)]
        cooc: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Output embedding file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate term analogies and the word-order synonym task.
    Analogy {
        #[arg(long)]
        model: PathBuf,
        /// Pairs file: TSV category, term_a, term_b.
        #[arg(long)]
        pairs: PathBuf,
        /// Synonym pairs file: TSV term_a, term_b.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// Neighborhood sizes, comma-separated.
        #[arg(long, default_value = "1,3,5", value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average concept embeddings into visit vectors.
    EmbedVisits {
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long)]
        interview_model: PathBuf,
        #[arg(long)]
        examination_model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster visit vectors with k-means or Ward.
    Cluster {
        #[arg(long)]
        vectors: PathBuf,
        /// Output assignments TSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "kmeans")]
        method: Method,
        /// Cluster count, or "auto" for elbow selection over k_min..k_max.
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write Ward merge rows here (ward only).
        #[arg(long)]
        dendrogram: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Adjusted Rand index between two assignment files.
    Compare {
        first: PathBuf,
        second: PathBuf,
    },
    /// WCSS curve over a k range with elbow selection.
    Elbow {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value = "kmeans")]
        method: Method,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Per-cluster recommendation term profiles.
    Profile {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster-by-label contingency table.
    Contingency {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        annotated: PathBuf,
        /// Metadata column: icd10 or doctor.
        #[arg(long, default_value = "icd10")]
        by: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correspondence analysis of a cluster-by-label table.
    Ca {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long, default_value = "icd10")]
        by: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2-D projection of visit vectors (PCA or exact t-SNE) as TSV + SVG.
    Project {
        #[arg(long)]
        vectors: PathBuf,
        /// pca or tsne.
        #[arg(long, default_value = "tsne")]
        method: String,
        /// Color points by these cluster assignments.
        #[arg(long)]
        assignments: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run every stage end to end into an output directory.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_section(value: &str) -> std::result::Result<Section, String> {
    match value {
        "interview" => Ok(Section::Interview),
        "examination" => Ok(Section::Examination),
        "recommendation" => Ok(Section::Recommendation),
        other => Err(format!("unknown section {other:?}")),
    }
}

fn metadata_map(annotated: &[AnnotatedVisit], by: &str) -> Result<HashMap<String, String>> {
    match by {
        "icd10" => Ok(annotated
            .iter()
            .filter_map(|a| a.icd10.clone().map(|c| (a.visit_id.clone(), c)))
            .collect()),
        "doctor" => Ok(annotated
            .iter()
            .map(|a| (a.visit_id.clone(), a.doctor_id.clone()))
            .collect()),
        other => Err(Error::Config(format!(
            "unknown metadata column {other:?} (use icd10 or doctor)"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            visits,
            topics,
            vocab_per_topic,
            rec_per_topic,
            noise,
            seed,
        } => {
            let spec = SynthSpec {
                n_visits: visits,
                n_topics: topics,
                vocab_per_topic,
                rec_per_topic,
                noise_rate: noise,
                seed,
                ..SynthSpec::default()
            };
            let corpus = generate_synthetic(&spec)?;
            save_corpus(&corpus, &out)?;
            println!("wrote {} visits to {}", corpus.len(), out.display());
        }
        Command::ExtractTerms {
            corpus,
            out,
            stopwords,
            labels,
            config,
        } => {
            let config = config.build()?;
            require(&corpus, "synth")?;
            let visits = load_corpus(&corpus)?;
            let stopwords = match stopwords {
                Some(path) => load_stopwords(&path)?,
                None => HashSet::new(),
            };
            let labels = labels.map(|path| load_labels(&path)).transpose()?;
            let candidates =
                extract_candidates(&visits, config.max_len, config.min_freq, &stopwords);
            let lexicon = build_lexicon(&candidates, config.cvalue_threshold, labels.as_ref())?;
            lexicon.save(&out)?;
            println!(
                "{} candidates, {} lexicon terms (threshold {})",
                candidates.len(),
                lexicon.len(),
                config.cvalue_threshold
            );
        }
        Command::Annotate {
            corpus,
            lexicon,
            out,
            coverage,
        } => {
            require(&corpus, "synth")?;
            require(&lexicon, "extract-terms")?;
            let visits = load_corpus(&corpus)?;
            let lexicon = Lexicon::load(&lexicon)?;
            let annotated: Vec<AnnotatedVisit> =
                visits.iter().map(|v| annotate(v, &lexicon)).collect();
            save_annotated(&annotated, &out)?;
            let report = coverage_report(&annotated)?;
            println!(
                "interview coverage: {:.2}% tokens / {:.2}% chars; examination: {:.2}% / {:.2}%",
                report.interview_token_pct,
                report.interview_char_pct,
                report.examination_token_pct,
                report.examination_char_pct
            );
            if let Some(path) = coverage {
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Invalid(e.to_string()))?;
                std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Cooccur {
            annotated,
            section,
            out,
            vocab_out,
            config,
        } => {
            let config = config.build()?;
            require(&annotated, "annotate")?;
            let filtered = filter_for_clustering(&load_annotated(&annotated)?);
            let cooc = build_cooc(&filtered, section, config.min_count)?;
            cooc.save(&out)?;
            cooc.save_vocab(&vocab_out)?;
            println!(
                "{} concepts, {} nonzero pairs",
                cooc.vocab.len(),
                cooc.counts.len()
            );
        }
        Command::Train {
            cooc,
            vocab,
            out,
            config,
        } => {
            let config = config.build()?;
            require(&cooc, "cooccur")?;
            require(&vocab, "cooccur")?;
            let cooc = CoocMatrix::load(&cooc, &vocab)?;
            let model = train_glove(&cooc, &config.glove())?;
            model.save(&out)?;
            println!(
                "trained dim {} for {} epochs; loss {:.4} -> {:.4}",
                config.dim,
                config.epochs,
                model.epoch_losses.first().unwrap_or(&f64::NAN),
                model.epoch_losses.last().unwrap_or(&f64::NAN)
            );
        }
        Command::Analogy {
            model,
            pairs,
            synonyms,
            ks,
            out,
        } => {
            require(&model, "train")?;
            let model = EmbeddingModel::load(&model)?;
            let categories = load_categories(&pairs)?;
            let synonym_pairs = synonyms
                .map(|path| -> Result<Vec<(String, String)>> {
                    Ok(load_categories(&path)
                        .or_else(|_| {
                            // also accept a plain two-column file
                            let text = std::fs::read_to_string(&path)
                                .map_err(|e| Error::io(&path, e))?;
                            let pairs = text
                                .lines()
                                .filter(|l| !l.trim().is_empty())
                                .map(|l| {
                                    let cols: Vec<&str> = l.split('\t').collect();
                                    (
                                        cols.first().unwrap_or(&"").to_string(),
                                        cols.get(1).unwrap_or(&"").to_string(),
                                    )
                                })
                                .collect::<Vec<_>>();
                            Ok(vec![viseg::analogy::AnalogyCategory {
                                name: "synonyms".into(),
                                pairs,
                            }])
                        })?
                        .into_iter()
                        .flat_map(|c| c.pairs)
                        .collect())
                })
                .transpose()?;
            let report = evaluate(&model, &categories, &ks, synonym_pairs.as_deref())?;
            save_report(&report, &out)?;
            let means: Vec<String> = report
                .ks
                .iter()
                .zip(&report.mean)
                .map(|(k, m)| format!("k={k}: {m:.4}"))
                .collect();
            println!("mean accuracy {}", means.join(", "));
        }
        Command::EmbedVisits {
            annotated,
            interview_model,
            examination_model,
            out,
        } => {
            require(&annotated, "annotate")?;
            require(&interview_model, "train")?;
            require(&examination_model, "train")?;
            let filtered = filter_for_clustering(&load_annotated(&annotated)?);
            let interview = EmbeddingModel::load(&interview_model)?;
            let examination = EmbeddingModel::load(&examination_model)?;
            let vectors = embed_visits(&filtered, &interview, &examination);
            save_visit_vectors(&vectors, &out)?;
            println!("embedded {} visits", vectors.len());
        }
        Command::Cluster {
            vectors,
            out,
            method,
            k,
            stats,
            dendrogram,
            config,
        } => {
            let config = config.build()?;
            require(&vectors, "embed-visits")?;
            let vectors = load_visit_vectors(&vectors)?;
            let (chosen_k, curve) = if k == "auto" {
                let result = elbow_k(
                    &vectors,
                    config.k_min,
                    config.k_max,
                    method,
                    config.tau,
                    config.restarts,
                    config.seed,
                )?;
                (result.k, Some(result.curve))
            } else {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad k {k:?}")))?;
                (k, None)
            };
            let clustering = match method {
                Method::Kmeans => kmeans(&vectors, chosen_k, config.restarts, config.seed)?,
                Method::Ward => {
                    let (clustering, tree) = ward(&vectors, chosen_k)?;
                    if let Some(path) = &dendrogram {
                        tree.save(path)?;
                    }
                    clustering
                }
            };
            clustering.save(&out)?;
            println!(
                "{} clusters ({}), sizes {:?}, wcss {:.4}",
                clustering.k, method, clustering.sizes, clustering.wcss
            );
            if let Some(path) = stats {
                let stats = ClusterStats {
                    method,
                    k: clustering.k,
                    sizes: clustering.sizes.clone(),
                    wcss: clustering.wcss,
                    seed: config.seed,
                    ari: None,
                    elbow_curve: curve,
                };
                let json = serde_json::to_string_pretty(&stats)
                    .map_err(|e| Error::Invalid(e.to_string()))?;
                std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Compare { first, second } => {
            require(&first, "cluster")?;
            require(&second, "cluster")?;
            let u = Clustering::load(&first, Method::Kmeans)?;
            let v = Clustering::load(&second, Method::Ward)?;
            println!("ARI {:.4}", adjusted_rand(&u, &v)?);
        }
        Command::Elbow {
            vectors,
            method,
            config,
        } => {
            let config = config.build()?;
            require(&vectors, "embed-visits")?;
            let vectors = load_visit_vectors(&vectors)?;
            let result = elbow_k(
                &vectors,
                config.k_min,
                config.k_max,
                method,
                config.tau,
                config.restarts,
                config.seed,
            )?;
            for (k, wcss) in &result.curve {
                println!("k={k}\twcss={wcss}");
            }
            println!("chosen k = {}", result.k);
        }
        Command::Profile {
            assignments,
            annotated,
            lexicon,
            top_n,
            out,
        } => {
            require(&assignments, "cluster")?;
            require(&annotated, "annotate")?;
            let clustering = Clustering::load(&assignments, Method::Kmeans)?;
            let annotated = load_annotated(&annotated)?;
            let lexicon = lexicon.map(|path| Lexicon::load(&path)).transpose()?;
            let profiles = cluster_profile(&clustering, &annotated, top_n, lexicon.as_ref());
            save_profiles(&profiles, &out)?;
            println!("wrote profiles for {} clusters", profiles.len());
        }
        Command::Contingency {
            assignments,
            annotated,
            by,
            out,
        } => {
            require(&assignments, "cluster")?;
            require(&annotated, "annotate")?;
            let clustering = Clustering::load(&assignments, Method::Kmeans)?;
            let metadata = metadata_map(&load_annotated(&annotated)?, &by)?;
            let table = contingency(&clustering, &metadata);
            table.save(&out)?;
            println!(
                "{} clusters x {} labels, {} visits",
                table.rows.len(),
                table.cols.len(),
                table.total()
            );
        }
        Command::Ca {
            assignments,
            annotated,
            by,
            out,
        } => {
            require(&assignments, "cluster")?;
            require(&annotated, "annotate")?;
            let clustering = Clustering::load(&assignments, Method::Kmeans)?;
            let metadata = metadata_map(&load_annotated(&annotated)?, &by)?;
            let result = correspondence_analysis(&contingency(&clustering, &metadata))?;
            save_ca(&result, &out)?;
            let shares: Vec<String> = result
                .inertias
                .iter()
                .take(2)
                .map(|v| format!("{:.1}%", 100.0 * v / result.total_inertia.max(f64::MIN_POSITIVE)))
                .collect();
            println!(
                "total inertia {:.4}; first dimensions explain {}",
                result.total_inertia,
                shares.join(", ")
            );
        }
        Command::Project {
            vectors,
            method,
            assignments,
            out,
            svg,
            config,
        } => {
            let config = config.build()?;
            require(&vectors, "embed-visits")?;
            let vectors = load_visit_vectors(&vectors)?;
            let items: Vec<(String, Vec<f64>)> = vectors
                .iter()
                .map(|v| (v.visit_id.clone(), v.vector.clone()))
                .collect();
            let mut projection: Projection2D = match method.as_str() {
                "pca" => pca_2d(&items)?.projection,
                "tsne" => {
                    tsne_2d(&items, config.perplexity, config.tsne_iterations, config.seed)?
                        .projection
                }
                other => return Err(Error::Config(format!("unknown projection {other:?}"))),
            };
            if let Some(path) = assignments {
                require(&path, "cluster")?;
                let clustering = Clustering::load(&path, Method::Kmeans)?;
                let map = clustering.assignment();
                projection.color_key = Some(
                    projection
                        .ids
                        .iter()
                        .map(|id| {
                            map.get(id.as_str())
                                .map(|c| c.to_string())
                                .unwrap_or_default()
                        })
                        .collect(),
                );
            }
            projection.save(&out)?;
            if let Some(path) = svg {
                emit_svg(&projection, &path)?;
            }
            println!("projected {} items with {}", projection.ids.len(), method);
        }
        Command::Pipeline {
            corpus,
            out_dir,
            config,
        } => {
            let config = config.build()?;
            require(&corpus, "synth")?;
            let outputs = pipeline::run(&corpus, &out_dir, &config)?;
            println!(
                "lexicon {} terms; k = {}; kmeans sizes {:?}; ARI(kmeans, ward) {:.4}",
                outputs.lexicon_size,
                outputs.chosen_k,
                outputs.kmeans_clustering.sizes,
                outputs.methods_ari
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
