//! Document reranking: biographies rewritten four ways, scored by how well
//! participants answer the same questions after reading each rewrite.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TaskConfig;
use crate::metrics::reranking::{pairwise_reranking_accuracy, DocAccuracyTable, DocRow, Variant};
use crate::metrics::{humanlikeness, MetricError, ScoreDistribution};
use crate::participants::{run_session, Participant, ParticipantError};
use crate::rng::derive_seed;
use crate::stimulus::{validate_questions, PackItem, PackQuestion, StimulusPack};
use crate::task::TaskId;
use crate::tasks::SessionBuilder;

pub const BIOGRAPHIES: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentVariant {
    pub biography_id: u32,
    pub variant: Variant,
    pub text: String,
    pub questions: Vec<PackQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantPack {
    pub pack_id: String,
    pub documents: Vec<DocumentVariant>,
}

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("reading variant pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid variant pack: {0}")]
    SchemaError(String),
    #[error("biography {biography_id}: {variant:?} does not share the base question set")]
    KeyMismatch { biography_id: u32, variant: Variant },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl VariantPack {
    pub fn load(path: &Path) -> Result<Self, RerankError> {
        let text = fs::read_to_string(path)?;
        let pack: VariantPack = serde_json::from_str(&text).map_err(|e| RerankError::SchemaError(e.to_string()))?;
        pack.validate()?;
        Ok(pack)
    }

    /// The bundled sample pack.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/packs/biographies.json")).expect("bundled pack parses")
    }

    /// Ten biographies, each with all four variants, ten questions, and
    /// one question set shared by the variants.
    pub fn validate(&self) -> Result<(), RerankError> {
        let mut by_bio: BTreeMap<u32, BTreeMap<Variant, &DocumentVariant>> = BTreeMap::new();
        for d in &self.documents {
            if !(1..=BIOGRAPHIES).contains(&d.biography_id) {
                return Err(RerankError::SchemaError(format!("biography id {} outside 1-10", d.biography_id)));
            }
            if d.text.trim().is_empty() {
                return Err(RerankError::SchemaError(format!("biography {} {:?} has no text", d.biography_id, d.variant)));
            }
            validate_questions(&format!("{}/{}", d.biography_id, d.variant.as_str()), &d.questions)
                .map_err(|e| RerankError::SchemaError(e.to_string()))?;
            if by_bio.entry(d.biography_id).or_default().insert(d.variant, d).is_some() {
                return Err(RerankError::SchemaError(format!("duplicate {:?} for biography {}", d.variant, d.biography_id)));
            }
        }
        for b in 1..=BIOGRAPHIES {
            let variants = by_bio.get(&b);
            for v in Variant::ALL {
                if variants.is_none_or(|m| !m.contains_key(&v)) {
                    return Err(RerankError::SchemaError(format!("biography {b} is missing the {} variant", v.as_str())));
                }
            }
        }
        if self.documents.len() != 40 {
            return Err(RerankError::SchemaError(format!("{} documents, expected 40", self.documents.len())));
        }
        for (b, variants) in &by_bio {
            let base = &variants[&Variant::Base].questions;
            for (v, d) in variants {
                if &d.questions != base {
                    return Err(RerankError::KeyMismatch { biography_id: *b, variant: *v });
                }
            }
        }
        Ok(())
    }

    /// A one-item factual-QA pack for a document.
    pub fn stimulus_pack(&self, doc: &DocumentVariant) -> StimulusPack {
        StimulusPack::new(
            format!("{}/{}-{}", self.pack_id, doc.biography_id, doc.variant.as_str()),
            TaskId::FactualQa,
            vec![PackItem {
                id: format!("{}-{}", doc.biography_id, doc.variant.as_str()),
                text: doc.text.clone(),
                questions: doc.questions.clone(),
                reference_text: None,
            }],
        )
    }
}

/// Result of a rerank run. Documents whose every trial failed have no row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRun {
    pub table: DocAccuracyTable,
    pub failures: Vec<String>,
}

impl RerankRun {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty() || !self.table.is_complete()
    }
}

/// Builds a fresh participant for one session; the seed is shared by all
/// four variants of a biography at a given trial.
pub type ParticipantFactory = dyn Fn(u64) -> Result<Box<dyn Participant>, ParticipantError> + Send + Sync;

/// Runs `trials_per_doc` factual-QA sessions per document, up to
/// `parallel` documents at a time.
pub fn run_rerank(
    pack: &VariantPack,
    factory: &ParticipantFactory,
    trials_per_doc: usize,
    seed: u64,
    parallel: usize,
) -> Result<RerankRun, RerankError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| RerankError::SchemaError(e.to_string()))?;
    let results: Vec<(Option<DocRow>, Vec<String>)> = pool.install(|| {
        pack.documents
            .par_iter()
            .map(|doc| {
                let stim = pack.stimulus_pack(doc);
                let mut accs = Vec::new();
                let mut failures = Vec::new();
                for t in 0..trials_per_doc {
                    let s = derive_seed(seed, &format!("rerank/{}/{t}", doc.biography_id));
                    match run_doc(&stim, s, factory) {
                        Ok(a) => accs.push(a),
                        Err(e) => failures.push(format!("biography {} {} trial {t}: {e}", doc.biography_id, doc.variant.as_str())),
                    }
                }
                let row = (!accs.is_empty()).then(|| DocRow {
                    biography_id: doc.biography_id,
                    variant: doc.variant,
                    mean: accs.iter().sum::<f64>() / accs.len() as f64,
                    n: accs.len(),
                });
                (row, failures)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (row, f) in results {
        rows.extend(row);
        failures.extend(f);
    }
    Ok(RerankRun { table: DocAccuracyTable::new(rows), failures })
}

fn run_doc(pack: &StimulusPack, seed: u64, factory: &ParticipantFactory) -> Result<f64, ParticipantError> {
    let mut participant = factory(seed)?;
    let mut session = SessionBuilder::new(TaskConfig::new(TaskId::FactualQa, seed))
        .pack(pack.clone())
        .participant("rerank", participant.describe())
        .build()?;
    let score = run_session(&mut session, participant.as_mut())?;
    Ok(score.normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankComparison {
    pub condition: String,
    pub accuracy: f64,
    pub humanlikeness: f64,
    pub variant_means: BTreeMap<String, f64>,
}

/// Pairwise reranking accuracy and humanlikeness of each model table
/// against the human one.
pub fn compare_rerankers<R: Rng + ?Sized>(
    human: &DocAccuracyTable,
    models: &[(String, DocAccuracyTable)],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<RerankComparison>, RerankError> {
    let human_means: Vec<f64> = human.rows.iter().map(|r| r.mean).collect();
    let h = ScoreDistribution::new(human_means, (0.0, 1.0), "human")?;
    models
        .iter()
        .map(|(condition, table)| {
            let accuracy = pairwise_reranking_accuracy(human, table, trials, rng)?;
            let m = ScoreDistribution::new(table.rows.iter().map(|r| r.mean).collect(), (0.0, 1.0), condition.as_str())?;
            Ok(RerankComparison {
                condition: condition.clone(),
                accuracy,
                humanlikeness: humanlikeness(&h, &m)?,
                variant_means: Variant::ALL.iter().map(|v| (v.as_str().to_string(), table.mean_of(*v))).collect(),
            })
        })
        .collect()
}
