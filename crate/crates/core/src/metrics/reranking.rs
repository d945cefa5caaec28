use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    ReadingLevel,
    Redundant,
    Distractor,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Base,
        Variant::ReadingLevel,
        Variant::Redundant,
        Variant::Distractor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::ReadingLevel => "reading_level",
            Variant::Redundant => "redundant",
            Variant::Distractor => "distractor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRow {
    pub biography_id: u32,
    pub variant: Variant,
    pub mean: f64,
    pub n: usize,
}

/// Mean accuracy per document variant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DocAccuracyTable {
    pub rows: Vec<DocRow>,
}

impl DocAccuracyTable {
    pub fn new(mut rows: Vec<DocRow>) -> Self {
        rows.sort_by_key(|r| (r.biography_id, r.variant));
        DocAccuracyTable { rows }
    }

    fn by_key(&self) -> BTreeMap<(u32, Variant), f64> {
        self.rows.iter().map(|r| ((r.biography_id, r.variant), r.mean)).collect()
    }

    /// Full tables hold 10 biographies by 4 variants with means in [0, 1].
    pub fn is_complete(&self) -> bool {
        let keys = self.by_key();
        keys.len() == 40
            && self.rows.len() == 40
            && (1..=10).all(|b| Variant::ALL.iter().all(|v| keys.contains_key(&(b, *v))))
            && self.rows.iter().all(|r| (0.0..=1.0).contains(&r.mean))
    }

    pub fn mean_of(&self, variant: Variant) -> f64 {
        let rows: Vec<f64> = self.rows.iter().filter(|r| r.variant == variant).map(|r| r.mean).collect();
        rows.iter().sum::<f64>() / rows.len().max(1) as f64
    }
}

/// Fraction of sampled document pairs on which the two tables prefer the
/// same document. Preference goes to the higher mean, ties broken by `rng`.
pub fn pairwise_reranking_accuracy<R: Rng + ?Sized>(
    human: &DocAccuracyTable,
    model: &DocAccuracyTable,
    trials: usize,
    rng: &mut R,
) -> Result<f64, MetricError> {
    let h = human.by_key();
    let m = model.by_key();
    if h.len() != human.rows.len() || h.keys().ne(m.keys()) || h.len() < 2 {
        return Err(MetricError::TableMismatch);
    }
    if trials == 0 {
        return Err(MetricError::EmptySample);
    }
    let hv: Vec<f64> = h.values().copied().collect();
    let mv: Vec<f64> = m.values().copied().collect();
    let n = hv.len();
    let prefer = |v: &[f64], a: usize, b: usize, rng: &mut R| {
        if v[a] > v[b] {
            a
        } else if v[b] > v[a] {
            b
        } else if rng.gen_bool(0.5) {
            a
        } else {
            b
        }
    };
    let mut agree = 0usize;
    for _ in 0..trials {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        if prefer(&hv, a, b, rng) == prefer(&mv, a, b, rng) {
            agree += 1;
        }
    }
    Ok(agree as f64 / trials as f64)
}
