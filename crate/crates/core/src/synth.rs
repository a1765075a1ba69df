//! Seeded synthetic corpus generator for end-to-end testing. Visits are
//! drawn from disjoint per-topic vocabularies with a planted topic recorded
//! in the icd10 field.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Visit;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_visits: usize,
    pub n_topics: usize,
    /// Concept tokens per topic vocabulary (pairwise disjoint by construction).
    pub vocab_per_topic: usize,
    /// Recommendation terms per topic.
    pub rec_per_topic: usize,
    pub section_tokens_min: usize,
    pub section_tokens_max: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_visits: 300,
            n_topics: 3,
            vocab_per_topic: 80,
            rec_per_topic: 5,
            section_tokens_min: 14,
            section_tokens_max: 24,
            noise_rate: 0.05,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics < 2 {
            return Err(Error::Config("need at least 2 topics".into()));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Config("noise_rate must be in [0, 1)".into()));
        }
        if self.section_tokens_min == 0 || self.section_tokens_min > self.section_tokens_max {
            return Err(Error::Config("bad section token range".into()));
        }
        if self.vocab_per_topic == 0 || self.rec_per_topic == 0 {
            return Err(Error::Config("vocabularies must be non-empty".into()));
        }
        Ok(())
    }

    pub fn topic_token(&self, topic: usize, word: usize) -> String {
        format!("t{topic}w{word:02}")
    }

    /// Recommendation terms are the first `rec_per_topic` words of the topic
    /// vocabulary, so they also occur in interview/examination text and make
    /// it into a lexicon learned from those sections.
    pub fn rec_token(&self, topic: usize, word: usize) -> String {
        self.topic_token(topic, word % self.vocab_per_topic)
    }
}

/// The planted topic of each visit, read back from the icd10 surrogate.
pub fn planted_topic(visit_icd10: &str) -> Option<usize> {
    visit_icd10.strip_prefix("TOPIC")?.parse().ok()
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<Visit>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut visits = Vec::with_capacity(spec.n_visits);
    for v in 0..spec.n_visits {
        let topic = rng.random_range(0..spec.n_topics);
        let section = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let len = rng.random_range(spec.section_tokens_min..=spec.section_tokens_max);
            (0..len)
                .map(|_| {
                    let t = if spec.noise_rate > 0.0 && rng.random::<f64>() < spec.noise_rate {
                        // noise token from a different topic
                        let mut other = rng.random_range(0..spec.n_topics - 1);
                        if other >= topic {
                            other += 1;
                        }
                        other
                    } else {
                        topic
                    };
                    spec.topic_token(t, rng.random_range(0..spec.vocab_per_topic))
                })
                .collect()
        };
        let interview = section(&mut rng);
        let examination = section(&mut rng);
        let rec_len = rng.random_range(1..=spec.rec_per_topic.min(3));
        let recommendation = (0..rec_len)
            .map(|_| spec.rec_token(topic, rng.random_range(0..spec.rec_per_topic)))
            .collect();
        visits.push(Visit {
            visit_id: format!("v{v:05}"),
            doctor_id: format!("doc{}", topic * 2 + rng.random_range(0..2)),
            specialty: "synthetic".to_string(),
            icd10: Some(format!("TOPIC{topic}")),
            interview,
            examination,
            recommendation,
        });
    }
    Ok(visits)
}
