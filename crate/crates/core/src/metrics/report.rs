//! JSON-lines evaluation records and the metric report built from them.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    accuracy, hallucination_rate, macro_prf, rouge_l, rouge_n, ExtractionRecord, LabeledPredictions, TextPair,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sentiment,
    Reasoning,
    Summarization,
    Extraction,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentiment" => Ok(Task::Sentiment),
            "reasoning" => Ok(Task::Reasoning),
            "summarization" => Ok(Task::Summarization),
            "extraction" => Ok(Task::Extraction),
            other => Err(Error::Parameter(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ClassificationLine {
    gold: String,
    pred: String,
}

#[derive(Debug, Deserialize)]
struct SummarizationLine {
    reference: String,
    candidate: String,
    /// Optional externally computed BERTScore F1, averaged into the report.
    #[serde(default)]
    bertscore: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ExtractionLine {
    source: String,
    examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub records: usize,
    /// Values rounded to 4 decimals.
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn read_lines<T: for<'de> Deserialize<'de>>(input: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<metrics input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Parameter("input has no records".into()));
    }
    Ok(out)
}

pub fn evaluate(task: Task, input: impl BufRead) -> Result<MetricReport> {
    let mut metrics = BTreeMap::new();
    let mut notes = Vec::new();
    let records;
    match task {
        Task::Sentiment | Task::Reasoning => {
            let lines: Vec<ClassificationLine> = read_lines(input)?;
            records = lines.len();
            let preds = LabeledPredictions::new(lines.into_iter().map(|l| (l.gold, l.pred)).collect())?;
            metrics.insert("accuracy".into(), accuracy(&preds));
            let prf = macro_prf(&preds);
            metrics.insert("macro_precision".into(), prf.precision);
            metrics.insert("macro_recall".into(), prf.recall);
            metrics.insert("macro_f1".into(), prf.f1);
        }
        Task::Summarization => {
            let lines: Vec<SummarizationLine> = read_lines(input)?;
            records = lines.len();
            let mut sums: BTreeMap<String, f64> = BTreeMap::new();
            let mut bert = Vec::new();
            for (i, l) in lines.iter().enumerate() {
                let pair = TextPair::from_text(&l.reference, &l.candidate);
                let scored = [
                    ("rouge1", rouge_n(&pair, 1)),
                    ("rouge2", rouge_n(&pair, 2)),
                    ("rougeL", rouge_l(&pair)),
                ];
                for (name, s) in scored {
                    let s = s.map_err(|e| Error::Parameter(format!("record {}: {e}", i + 1)))?;
                    *sums.entry(format!("{name}_precision")).or_default() += s.precision;
                    *sums.entry(format!("{name}_recall")).or_default() += s.recall;
                    *sums.entry(format!("{name}_f1")).or_default() += s.f1;
                }
                bert.extend(l.bertscore);
            }
            for (k, v) in sums {
                metrics.insert(k, v / records as f64);
            }
            if !bert.is_empty() {
                metrics.insert("bertscore_f1".into(), bert.iter().sum::<f64>() / bert.len() as f64);
                notes.push(format!("bertscore_f1 is the mean of {} supplied values", bert.len()));
            }
            notes.push("tokens: lowercase, whitespace split, punctuation-only tokens dropped, no stemming".into());
        }
        Task::Extraction => {
            let lines: Vec<ExtractionLine> = read_lines(input)?;
            records = lines.len();
            let recs: Vec<ExtractionRecord> = lines
                .into_iter()
                .map(|l| ExtractionRecord {
                    source_text: l.source,
                    generated_examples: l.examples,
                })
                .collect();
            metrics.insert("hallucination_rate".into(), hallucination_rate(&recs)?);
            metrics.insert(
                "generated_examples".into(),
                recs.iter().map(|r| r.generated_examples.len()).sum::<usize>() as f64,
            );
            notes.push("matching: case-insensitive, whitespace-collapsed substring of the source".into());
        }
    }
    Ok(MetricReport {
        task,
        records,
        metrics: metrics.into_iter().map(|(k, v)| (k, round4(v))).collect(),
        notes,
    })
}
