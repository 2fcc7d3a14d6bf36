//! Model-free evaluation metrics: accuracy, macro P/R/F1, ROUGE, and the
//! aggregated hallucination rate for extraction.

pub mod report;

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// (gold, predicted) label pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPredictions {
    pairs: Vec<(String, String)>,
}

impl LabeledPredictions {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Parameter("no predictions".into()));
        }
        if pairs.iter().any(|(g, p)| g.is_empty() || p.is_empty()) {
            return Err(Error::Parameter("labels must be non-empty".into()));
        }
        Ok(Self { pairs })
    }

    pub fn from_slices(gold: &[&str], pred: &[&str]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::Parameter(format!(
                "{} gold labels but {} predictions",
                gold.len(),
                pred.len()
            )));
        }
        Self::new(
            gold.iter()
                .zip(pred)
                .map(|(g, p)| (g.to_string(), p.to_string()))
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(preds: &LabeledPredictions) -> f64 {
    let correct = preds.pairs.iter().filter(|(g, p)| g == p).count();
    ratio(correct, preds.pairs.len())
}

/// Per-class scores averaged without weighting over every label that occurs
/// as gold or as prediction. A zero denominator scores 0.
pub fn macro_prf(preds: &LabeledPredictions) -> Prf {
    let classes: BTreeSet<&str> = preds
        .pairs
        .iter()
        .flat_map(|(g, p)| [g.as_str(), p.as_str()])
        .collect();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in &classes {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (g, p) in &preds.pairs {
            match (g == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fneg += 1,
                (false, false) => {}
            }
        }
        let s = Prf::from_pr(ratio(tp, tp + fp), ratio(tp, tp + fneg));
        p_sum += s.precision;
        r_sum += s.recall;
        f_sum += s.f1;
    }
    let n = classes.len() as f64;
    Prf {
        precision: p_sum / n,
        recall: r_sum / n,
        f1: f_sum / n,
    }
}

/// Lowercase, split on Unicode whitespace, drop tokens with no
/// alphanumeric character. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub reference: Vec<String>,
    pub candidate: Vec<String>,
}

impl TextPair {
    pub fn from_text(reference: &str, candidate: &str) -> Self {
        Self {
            reference: tokenize(reference),
            candidate: tokenize(candidate),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            reference: self.candidate.clone(),
            candidate: self.reference.clone(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.reference.is_empty() {
            Err(Error::Parameter("reference has no tokens".into()))
        } else {
            Ok(())
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n(pair: &TextPair, n: usize) -> Result<Prf> {
    pair.check()?;
    if n == 0 {
        return Err(Error::Parameter("n-gram order must be at least 1".into()));
    }
    let r = ngram_counts(&pair.reference, n);
    let c = ngram_counts(&pair.candidate, n);
    let overlap: usize = c
        .iter()
        .map(|(g, &cnt)| cnt.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let c_total = pair.candidate.len().saturating_sub(n - 1);
    let r_total = pair.reference.len().saturating_sub(n - 1);
    Ok(Prf::from_pr(ratio(overlap, c_total), ratio(overlap, r_total)))
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(pair: &TextPair) -> Result<Prf> {
    pair.check()?;
    let l = lcs_len(&pair.reference, &pair.candidate);
    Ok(Prf::from_pr(ratio(l, pair.candidate.len()), ratio(l, pair.reference.len())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionRecord {
    pub source_text: String,
    pub generated_examples: Vec<String>,
}

/// Lowercase and collapse whitespace runs to one space.
pub fn normalize_for_matching(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Share of generated examples, pooled over all records, that are not a
/// substring of their record's source after normalization.
pub fn hallucination_rate(records: &[ExtractionRecord]) -> Result<f64> {
    let (mut total, mut missing) = (0usize, 0usize);
    for r in records {
        if r.source_text.trim().is_empty() {
            return Err(Error::Parameter("extraction record has an empty source".into()));
        }
        let source = normalize_for_matching(&r.source_text);
        for ex in &r.generated_examples {
            total += 1;
            if !source.contains(&normalize_for_matching(ex)) {
                missing += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedRate("no generated examples".into()));
    }
    Ok(missing as f64 / total as f64)
}
