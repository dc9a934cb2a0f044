//! Corpus-level frequency contrasts between human and machine translations,
//! with Pearson χ² tests on 2×2 segment-presence tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::tokenize;
use crate::explainer::Explanation;
use crate::{Error, Result};

/// Significance level used throughout the reports.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// Rows are {human, machine}; columns are {present, absent}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        ContingencyTable { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn human_rate(&self) -> f64 {
        rate(self.counts[0])
    }

    pub fn machine_rate(&self) -> f64 {
        rate(self.counts[1])
    }
}

fn rate(row: [u64; 2]) -> f64 {
    let n = row[0] + row[1];
    if n == 0 {
        0.0
    } else {
        row[0] as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhenomenonSpec {
    TokenFrequency { token: String },
    NgramFrequency { ngram: Vec<String> },
    /// An internal ". " followed by a capital letter.
    MultiSentence,
    /// The translation ends in . ! or ? while its source does not.
    EndMarkerAdded,
}

impl PhenomenonSpec {
    pub fn name(&self) -> String {
        match self {
            PhenomenonSpec::TokenFrequency { token } => format!("token {token:?}"),
            PhenomenonSpec::NgramFrequency { ngram } => format!("ngram {:?}", ngram.join(" ")),
            PhenomenonSpec::MultiSentence => "multiple sentences".to_owned(),
            PhenomenonSpec::EndMarkerAdded => "end marker added".to_owned(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PhenomenonSpec::TokenFrequency { token } if token.is_empty() => {
                Err(Error::Config("empty token phenomenon".into()))
            }
            PhenomenonSpec::NgramFrequency { ngram } if ngram.is_empty() || ngram.iter().any(String::is_empty) => {
                Err(Error::Config("empty n-gram phenomenon".into()))
            }
            _ => Ok(()),
        }
    }

    fn present(&self, text: &str, source: Option<&str>) -> bool {
        match self {
            PhenomenonSpec::TokenFrequency { token } => tokenize(text).iter().any(|t| t == token),
            PhenomenonSpec::NgramFrequency { ngram } => {
                let toks = tokenize(text);
                toks.windows(ngram.len()).any(|w| w == ngram.as_slice())
            }
            PhenomenonSpec::MultiSentence => has_internal_boundary(text),
            PhenomenonSpec::EndMarkerAdded => {
                ends_with_marker(text) && !ends_with_marker(source.unwrap_or_default())
            }
        }
    }
}

fn ends_with_marker(text: &str) -> bool {
    matches!(text.trim_end().chars().last(), Some('.' | '!' | '?'))
}

fn has_internal_boundary(text: &str) -> bool {
    text.match_indices(". ").any(|(i, _)| {
        i > 0 && text[i + 2..].chars().next().is_some_and(char::is_uppercase)
    })
}

/// Tallies per-segment presence of a phenomenon in each corpus.
pub fn count_phenomenon<S: AsRef<str>>(
    human: &[S],
    machine: &[S],
    sources: Option<&[S]>,
    spec: &PhenomenonSpec,
) -> Result<ContingencyTable> {
    spec.validate()?;
    if human.len() != machine.len() {
        return Err(Error::Shape(format!(
            "{} human vs {} machine segments",
            human.len(),
            machine.len()
        )));
    }
    if *spec == PhenomenonSpec::EndMarkerAdded {
        match sources {
            None => return Err(Error::MissingSources),
            Some(s) if s.len() != human.len() => {
                return Err(Error::Shape(format!("{} sources for {} segments", s.len(), human.len())))
            }
            _ => {}
        }
    }
    let mut table = ContingencyTable::default();
    for i in 0..human.len() {
        let src = sources.map(|s| s[i].as_ref());
        for (row, text) in [human[i].as_ref(), machine[i].as_ref()].into_iter().enumerate() {
            let col = if spec.present(text, src) { 0 } else { 1 };
            table.counts[row][col] += 1;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquared {
    /// `None` when some expected count is zero.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub alpha: f64,
    pub significant: bool,
}

impl ChiSquared {
    pub fn testable(&self) -> bool {
        self.statistic.is_some()
    }
}

/// Upper-tail probability of χ² with one degree of freedom.
pub fn chi2_1dof_survival(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        libm::erfc((x / 2.0).sqrt())
    }
}

/// χ² quantile with one degree of freedom: the x whose upper tail is
/// `alpha`, found by bisection on the survival function.
pub fn critical_value(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while chi2_1dof_survival(hi) > alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_1dof_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Pearson χ² on a 2×2 table, one degree of freedom, no continuity
/// correction.
pub fn chi_squared_at(table: &ContingencyTable, alpha: f64) -> ChiSquared {
    let c = table.counts;
    let n = table.total() as f64;
    let rows = [(c[0][0] + c[0][1]) as f64, (c[1][0] + c[1][1]) as f64];
    let cols = [(c[0][0] + c[1][0]) as f64, (c[0][1] + c[1][1]) as f64];
    if n == 0.0 || rows.contains(&0.0) || cols.contains(&0.0) {
        return ChiSquared {
            statistic: None,
            p_value: None,
            alpha,
            significant: false,
        };
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] * cols[j] / n;
            let d = c[i][j] as f64 - expected;
            stat += d * d / expected;
        }
    }
    ChiSquared {
        statistic: Some(stat),
        p_value: Some(chi2_1dof_survival(stat)),
        alpha,
        significant: stat > critical_value(alpha),
    }
}

pub fn chi_squared(table: &ContingencyTable) -> ChiSquared {
    chi_squared_at(table, DEFAULT_ALPHA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramRanking {
    pub ngram: Vec<String>,
    pub mean_score: f64,
    pub occurrences: usize,
    pub table: ContingencyTable,
    pub chi_squared: ChiSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgramOptions {
    pub k: usize,
    pub n: usize,
    pub min_occurrences: usize,
    /// Rankings with |mean score| at or below this are dropped.
    pub min_abs_score: f64,
}

impl Default for NgramOptions {
    fn default() -> Self {
        NgramOptions {
            k: 20,
            n: 1,
            min_occurrences: 20,
            min_abs_score: 0.0,
        }
    }
}

#[derive(Default)]
struct NgramAcc {
    score_sum: f64,
    occurrences: usize,
    // segment presence: [human present, machine present]
    present: [u64; 2],
}

/// Ranks translation n-grams by the mean of their summed token scores
/// (positive = machine evidence), largest magnitude first. Each surviving
/// n-gram carries a segment-presence χ² test between the human and machine
/// translations of the same explanations.
pub fn top_discriminative_ngrams(explanations: &[Explanation], opts: &NgramOptions) -> Result<Vec<NgramRanking>> {
    if !(1..=3).contains(&opts.n) {
        return Err(Error::Config(format!("n-gram order {} outside 1..=3", opts.n)));
    }
    let mut acc: BTreeMap<Vec<String>, NgramAcc> = BTreeMap::new();
    for e in explanations {
        let human_side = e.machine_side.other();
        for (side, scores) in [
            (crate::Side::Left, &e.token_scores.left),
            (crate::Side::Right, &e.token_scores.right),
        ] {
            let row = if side == human_side { 0 } else { 1 };
            let mut seen = std::collections::BTreeSet::new();
            for w in scores.windows(opts.n) {
                let gram: Vec<String> = w.iter().map(|(t, _)| t.clone()).collect();
                let s: f64 = w.iter().map(|(_, s)| s).sum();
                let entry = acc.entry(gram.clone()).or_default();
                entry.score_sum += s;
                entry.occurrences += 1;
                if seen.insert(gram) {
                    entry.present[row] += 1;
                }
            }
        }
    }

    let segments = explanations.len() as u64;
    let mut ranked: Vec<NgramRanking> = acc
        .into_iter()
        .filter(|(_, a)| a.occurrences >= opts.min_occurrences)
        .map(|(ngram, a)| {
            let table = ContingencyTable::new([
                [a.present[0], segments - a.present[0]],
                [a.present[1], segments - a.present[1]],
            ]);
            NgramRanking {
                ngram,
                mean_score: a.score_sum / a.occurrences as f64,
                occurrences: a.occurrences,
                chi_squared: chi_squared(&table),
                table,
            }
        })
        .filter(|r| r.mean_score.abs() > opts.min_abs_score)
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_score
            .abs()
            .total_cmp(&a.mean_score.abs())
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    ranked.truncate(opts.k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonReport {
    pub name: String,
    pub spec: PhenomenonSpec,
    pub table: ContingencyTable,
    pub human_rate: f64,
    pub machine_rate: f64,
    pub chi_squared: ChiSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub critical_value: f64,
    pub segments: usize,
    pub phenomena: Vec<PhenomenonReport>,
    pub top_ngrams: Vec<NgramRanking>,
    #[serde(default)]
    pub config_checksum: Option<String>,
}

/// The phenomena checked by default: reduced and full negation, sentence
/// splitting, and end markers added to open-ended sources.
pub fn default_phenomena() -> Vec<PhenomenonSpec> {
    vec![
        PhenomenonSpec::TokenFrequency { token: "n't".into() },
        PhenomenonSpec::TokenFrequency { token: "not".into() },
        PhenomenonSpec::MultiSentence,
        PhenomenonSpec::EndMarkerAdded,
    ]
}

pub fn phenomenon_report<S: AsRef<str>>(
    human: &[S],
    machine: &[S],
    sources: Option<&[S]>,
    spec: &PhenomenonSpec,
) -> Result<PhenomenonReport> {
    let table = count_phenomenon(human, machine, sources, spec)?;
    Ok(PhenomenonReport {
        name: spec.name(),
        spec: spec.clone(),
        table,
        human_rate: table.human_rate(),
        machine_rate: table.machine_rate(),
        chi_squared: chi_squared(&table),
    })
}

/// Plain-text rendering of a report for terminals.
pub fn render_report(report: &StatsReport) -> String {
    let mut out = format!(
        "{:<28} {:>9} {:>9} {:>12} {:>5}\n",
        "phenomenon", "human", "machine", "chi2", "sig"
    );
    for p in &report.phenomena {
        let stat = p
            .chi_squared
            .statistic
            .map_or_else(|| "n/a".to_owned(), |s| format!("{s:.3}"));
        out.push_str(&format!(
            "{:<28} {:>9.4} {:>9.4} {:>12} {:>5}\n",
            p.name,
            p.human_rate,
            p.machine_rate,
            stat,
            if p.chi_squared.significant { "*" } else { "" }
        ));
    }
    if !report.top_ngrams.is_empty() {
        out.push_str(&format!("\n{:<28} {:>9} {:>9} {:>12} {:>5}\n", "n-gram", "mean", "count", "chi2", "sig"));
        for r in &report.top_ngrams {
            let stat = r
                .chi_squared
                .statistic
                .map_or_else(|| "n/a".to_owned(), |s| format!("{s:.3}"));
            out.push_str(&format!(
                "{:<28} {:>9.4} {:>9} {:>12} {:>5}\n",
                r.ngram.join(" "),
                r.mean_score,
                r.occurrences,
                stat,
                if r.chi_squared.significant { "*" } else { "" }
            ));
        }
    }
    out.push_str(&format!(
        "\nalpha = {}, critical value = {:.3}, segments = {}\n",
        report.alpha, report.critical_value, report.segments
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::{Explanation, Method, TargetNeuron, TokenScores};
    use crate::Side;
    use proptest::prelude::*;

    #[test]
    fn token_table() {
        let t = count_phenomenon(
            &["ca n't go"],
            &["can not go"],
            None,
            &PhenomenonSpec::TokenFrequency { token: "n't".into() },
        )
        .unwrap();
        assert_eq!(t.counts, [[1, 0], [0, 1]]);
    }

    #[test]
    fn identical_corpora_have_equal_rows() {
        let texts = ["He left . She stayed .", "no end", "It is n't ."];
        for spec in default_phenomena() {
            let t = count_phenomenon(&texts, &texts, Some(&texts), &spec).unwrap();
            assert_eq!(t.counts[0], t.counts[1], "{spec:?}");
        }
    }

    #[test]
    fn end_marker_needs_sources() {
        let err = count_phenomenon(&["a ."], &["b ."], None, &PhenomenonSpec::EndMarkerAdded);
        assert!(matches!(err, Err(Error::MissingSources)));
        let t = count_phenomenon(&["a"], &["a ."], Some(&["q"]), &PhenomenonSpec::EndMarkerAdded).unwrap();
        assert_eq!(t.counts, [[0, 1], [1, 0]]);
    }

    #[test]
    fn ngram_presence() {
        let spec = PhenomenonSpec::NgramFrequency {
            ngram: vec!["can".into(), "not".into()],
        };
        let t = count_phenomenon(&["I ca n't"], &["I can not"], None, &spec).unwrap();
        assert_eq!(t.counts, [[0, 1], [1, 0]]);
        let bad = PhenomenonSpec::NgramFrequency { ngram: vec![] };
        assert!(count_phenomenon(&["x"], &["x"], None, &bad).is_err());
    }

    #[test]
    fn chi_squared_examples() {
        let r = chi_squared(&ContingencyTable::new([[10, 20], [10, 20]]));
        assert_eq!(r.statistic, Some(0.0));
        assert!(!r.significant);

        // N(ad - bc)^2 / (r1 r2 c1 c2) = 80 * 800^2 / 40^4 = 20
        let r = chi_squared(&ContingencyTable::new([[30, 10], [10, 30]]));
        assert!((r.statistic.unwrap() - 20.0).abs() < 1e-12);
        assert!(r.significant);

        let r = chi_squared(&ContingencyTable::new([[0, 5], [0, 7]]));
        assert!(!r.testable());
        assert!(!r.significant);
    }

    #[test]
    fn critical_value_at_one_in_a_thousand() {
        assert!((critical_value(0.001) - 10.828).abs() <= 1e-3);
        // 1.959964^2 for the two-sided 5% normal quantile
        assert!((critical_value(0.05) - 3.841_458_820_694_124).abs() < 1e-9);
    }

    fn expl(id: u64, right: Vec<(&str, f64)>) -> Explanation {
        Explanation {
            sample_id: id,
            method: Method::LrpEpsilon,
            target_neuron: TargetNeuron::Machine,
            machine_side: Side::Right,
            logits: [0.0, 1.0],
            softmax: [0.27, 0.73],
            logit_machine: 1.0,
            softmax_machine: 0.73,
            token_scores: TokenScores {
                source: vec![],
                left: vec![],
                right: right.into_iter().map(|(t, s)| (t.to_owned(), s)).collect(),
            },
            checkpoint_checksum: String::new(),
            config_checksum: None,
        }
    }

    #[test]
    fn singleton_ngram_ranking() {
        let opts = NgramOptions {
            k: 5,
            n: 1,
            min_occurrences: 1,
            min_abs_score: 0.0,
        };
        let r = top_discriminative_ngrams(&[expl(0, vec![("not", 1.0)])], &opts).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].ngram, vec!["not".to_owned()]);
        assert_eq!((r[0].mean_score, r[0].occurrences), (1.0, 1));
        assert_eq!(r[0].table.counts, [[0, 1], [1, 0]]);
    }

    #[test]
    fn zero_scores_rank_nothing_above_a_floor() {
        let opts = NgramOptions {
            k: 5,
            n: 2,
            min_occurrences: 1,
            min_abs_score: 1e-12,
        };
        let e = expl(0, vec![("a", 0.0), ("b", 0.0), ("c", 0.0)]);
        assert!(top_discriminative_ngrams(&[e], &opts).unwrap().is_empty());
        let bad = NgramOptions { n: 4, ..opts };
        assert!(top_discriminative_ngrams(&[], &bad).is_err());
    }

    proptest! {
        #[test]
        fn statistic_is_symmetric_and_scales(a in 1u64..500, b in 1u64..500, c in 1u64..500, d in 1u64..500) {
            let s = |t: [[u64; 2]; 2]| chi_squared(&ContingencyTable::new(t)).statistic.unwrap();
            let base = s([[a, b], [c, d]]);
            let tol = 1e-9 * base.max(1.0);
            prop_assert!((s([[c, d], [a, b]]) - base).abs() <= tol);
            prop_assert!((s([[b, a], [d, c]]) - base).abs() <= tol);
            let scaled = s([[10 * a, 10 * b], [10 * c, 10 * d]]);
            prop_assert!((scaled - 10.0 * base).abs() <= 1e-9 * scaled.max(1.0));
        }
    }
}
