use mtdiag_core::explainer::Explanation;
use mtdiag_core::sorter::{order_by, Activation, Direction, Neuron, SortKey};
use mtdiag_core::Side;
use serde::{Deserialize, Serialize};

use crate::Store;

pub const DEFAULT_LIMIT: usize = 20;
pub const MAX_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    BadRequest(String),
    NotFound(String),
}

impl std::fmt::Display for QueryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryError::BadRequest(m) | QueryError::NotFound(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    Correct,
    Incorrect,
}

/// Query string of `GET /api/segments`. Everything is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentQuery {
    pub activation: Option<Activation>,
    pub neuron: Option<Neuron>,
    pub direction: Option<Direction>,
    pub correctness: Option<Correctness>,
    pub softmax_lo: Option<f64>,
    pub softmax_hi: Option<f64>,
    pub q: Option<String>,
    pub min_score: Option<f64>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterSpec {
    pub correctness: Option<Correctness>,
    pub softmax_range: Option<(f64, f64)>,
    pub query: Option<String>,
    pub min_score: Option<f64>,
}

impl FilterSpec {
    pub fn matches(&self, e: &Explanation) -> bool {
        if let Some(c) = self.correctness {
            if e.prediction().is_correct() != (c == Correctness::Correct) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.softmax_range {
            if e.softmax_machine < lo || e.softmax_machine > hi {
                return false;
            }
        }
        if let Some(q) = &self.query {
            let ts = &e.token_scores;
            let hit = [&ts.source, &ts.left, &ts.right]
                .into_iter()
                .flatten()
                .any(|(t, _)| t.contains(q.as_str()));
            if !hit {
                return false;
            }
        }
        if let Some(min) = self.min_score {
            if e.token_scores.max_abs() < min {
                return false;
            }
        }
        true
    }
}

impl SegmentQuery {
    pub fn key(&self) -> SortKey {
        let d = SortKey::default();
        SortKey {
            activation: self.activation.unwrap_or(d.activation),
            neuron: self.neuron.unwrap_or(d.neuron),
            direction: self.direction.unwrap_or(d.direction),
        }
    }

    pub fn filter(&self) -> Result<FilterSpec, QueryError> {
        let softmax_range = match (self.softmax_lo, self.softmax_hi) {
            (None, None) => None,
            (lo, hi) => {
                let (lo, hi) = (lo.unwrap_or(0.0), hi.unwrap_or(1.0));
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                    return Err(QueryError::BadRequest(format!("softmax range [{lo}, {hi}] outside [0, 1]")));
                }
                if lo > hi {
                    return Err(QueryError::BadRequest(format!("softmax_lo {lo} exceeds softmax_hi {hi}")));
                }
                Some((lo, hi))
            }
        };
        if let Some(m) = self.min_score {
            if !m.is_finite() || m < 0.0 {
                return Err(QueryError::BadRequest(format!("min_score {m} must be a non-negative number")));
            }
        }
        Ok(FilterSpec {
            correctness: self.correctness,
            softmax_range,
            query: self.q.clone().filter(|q| !q.is_empty()),
            min_score: self.min_score,
        })
    }

    fn limit(&self) -> Result<usize, QueryError> {
        let limit = self.limit.unwrap_or(DEFAULT_LIMIT);
        if !(1..=MAX_LIMIT).contains(&limit) {
            return Err(QueryError::BadRequest(format!("limit {limit} outside 1..={MAX_LIMIT}")));
        }
        Ok(limit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenView {
    pub token: String,
    pub score: f64,
    /// score / max |score| over the whole sample
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentView {
    pub sample_id: u64,
    /// 1-based position among the matching segments under the request's key.
    pub rank: usize,
    pub true_label: Side,
    pub predicted_label: Side,
    pub logit_machine: f64,
    pub softmax_machine: f64,
    pub source: Vec<TokenView>,
    pub left: Vec<TokenView>,
    pub right: Vec<TokenView>,
}

impl SegmentView {
    pub fn new(e: &Explanation, rank: usize) -> Self {
        let max = e.token_scores.max_abs();
        let view = |scores: &[(String, f64)]| {
            scores
                .iter()
                .map(|(t, s)| TokenView {
                    token: t.clone(),
                    score: *s,
                    intensity: if max > 0.0 { s / max } else { 0.0 },
                })
                .collect()
        };
        SegmentView {
            sample_id: e.sample_id,
            rank,
            true_label: e.machine_side,
            predicted_label: e.prediction().predicted_side,
            logit_machine: e.logit_machine,
            softmax_machine: e.softmax_machine,
            source: view(&e.token_scores.source),
            left: view(&e.token_scores.left),
            right: view(&e.token_scores.right),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub key: SortKey,
    pub segments: Vec<SegmentView>,
}

fn sorted(store: &Store, key: SortKey, filter: &FilterSpec) -> Vec<usize> {
    let all = store.explanations();
    let matching: Vec<usize> = (0..all.len()).filter(|&i| filter.matches(&all[i])).collect();
    order_by(
        &matching,
        key.direction,
        |&i| key.value(&all[i].prediction()),
        |&i| all[i].sample_id,
    )
    .into_iter()
    .map(|j| matching[j])
    .collect()
}

pub fn get_segments(store: &Store, query: &SegmentQuery) -> Result<Page, QueryError> {
    let key = query.key();
    let filter = query.filter()?;
    let limit = query.limit()?;
    let offset = query.offset.unwrap_or(0);
    let order = sorted(store, key, &filter);
    let segments = order
        .iter()
        .enumerate()
        .skip(offset)
        .take(limit)
        .map(|(pos, &i)| SegmentView::new(&store.explanations()[i], pos + 1))
        .collect();
    Ok(Page {
        total: order.len(),
        offset,
        limit,
        key,
        segments,
    })
}

/// One segment, ranked under the default key over the whole corpus.
pub fn get_segment(store: &Store, sample_id: u64) -> Result<SegmentView, QueryError> {
    let order = sorted(store, SortKey::default(), &FilterSpec::default());
    order
        .iter()
        .position(|&i| store.explanations()[i].sample_id == sample_id)
        .map(|pos| SegmentView::new(&store.explanations()[order[pos]], pos + 1))
        .ok_or_else(|| QueryError::NotFound(format!("no segment with id {sample_id}")))
}
