//! Text-pair evaluation: token F1, BLEU, ROUGE-1, sentence mover's
//! similarity, METEOR and greedy embedding matching.
//!
//! Lexical metrics analyze both sides with lowercasing and no stemming.

mod bertscore;
mod lexical;
mod sms;
pub mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::dense::EmbeddingProvider;
use crate::error::{Error, Result};

pub use bertscore::{bert_style_score, TokenEmbeddingSet};
pub use lexical::{bleu, meteor, rouge1, token_f1, BleuConfig};
pub use sms::sms;

/// A prediction scored against a reference.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScorePair {
    #[serde(default)]
    pub id: String,
    pub prediction: String,
    pub reference: String,
}

impl ScorePair {
    pub fn new(prediction: impl Into<String>, reference: impl Into<String>) -> Self {
        ScorePair {
            id: String::new(),
            prediction: prediction.into(),
            reference: reference.into(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Reads `{"id", "prediction", "reference"}` lines. Blank lines are
/// skipped; a missing id becomes `id<record index>`.
pub fn read_pairs_jsonl(path: impl AsRef<Path>) -> Result<Vec<ScorePair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut pair: ScorePair = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        if pair.id.is_empty() {
            pair.id = format!("id{}", pairs.len());
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// A metric result: headline value plus named components (precision,
/// recall, brevity penalty, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
    pub components: BTreeMap<String, f64>,
}

impl MetricValue {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        MetricValue {
            name: name.into(),
            value,
            components: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.components.insert(key.to_string(), value);
        self
    }

    pub fn component(&self, key: &str) -> Option<f64> {
        self.components.get(key).copied()
    }
}

/// Arithmetic mean of values sharing one metric name. Components present in
/// every value are averaged too.
pub fn average(values: &[MetricValue]) -> Result<MetricValue> {
    let first = values
        .first()
        .ok_or_else(|| Error::invalid("cannot average zero metric values"))?;
    if let Some(other) = values.iter().find(|v| v.name != first.name) {
        return Err(Error::invalid(format!(
            "cannot average {} with {}",
            first.name, other.name
        )));
    }
    let n = values.len() as f64;
    let mut out = MetricValue::new(
        first.name.clone(),
        values.iter().map(|v| v.value).sum::<f64>() / n,
    );
    for key in first.components.keys() {
        let parts: Option<Vec<f64>> = values.iter().map(|v| v.component(key)).collect();
        if let Some(parts) = parts {
            out.components
                .insert(key.clone(), parts.iter().sum::<f64>() / n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    TokenF1,
    Bleu,
    Rouge1,
    Sms,
    Meteor,
    BertScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl MetricId {
    /// Reporting order: F1, BLEU, ROUGE-1, SMS, METEOR, BERT.
    pub const ALL: [MetricId; 6] = [
        MetricId::TokenF1,
        MetricId::Bleu,
        MetricId::Rouge1,
        MetricId::Sms,
        MetricId::Meteor,
        MetricId::BertScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::TokenF1 => "f1",
            MetricId::Bleu => "bleu",
            MetricId::Rouge1 => "rouge1",
            MetricId::Sms => "sms",
            MetricId::Meteor => "meteor",
            MetricId::BertScore => "bert",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricId::Sms => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    /// Whether the metric reports precision/recall/f1 components.
    pub fn has_precision_recall(self) -> bool {
        matches!(self, MetricId::TokenF1 | MetricId::BertScore)
    }

    pub fn needs_provider(self) -> bool {
        matches!(self, MetricId::Sms | MetricId::BertScore)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "f1" | "token_f1" | "token-f1" => MetricId::TokenF1,
            "bleu" => MetricId::Bleu,
            "rouge1" | "rouge-1" | "rouge" => MetricId::Rouge1,
            "sms" => MetricId::Sms,
            "meteor" => MetricId::Meteor,
            "bert" | "bertscore" | "bert_style_score" => MetricId::BertScore,
            other => return Err(Error::invalid(format!("unknown metric {other:?}"))),
        })
    }
}

/// Scores one pair with one metric. `provider` is required by SMS and the
/// embedding-matching score.
pub fn score_pair(
    metric: MetricId,
    pair: &ScorePair,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<MetricValue> {
    let need = || {
        provider.ok_or_else(|| Error::invalid(format!("metric {metric} needs an embedding provider")))
    };
    match metric {
        MetricId::TokenF1 => token_f1(pair),
        MetricId::Bleu => bleu(pair, &BleuConfig::default()),
        MetricId::Rouge1 => rouge1(pair),
        MetricId::Meteor => meteor(pair),
        MetricId::Sms => sms(pair, need()?),
        MetricId::BertScore => {
            let provider = need()?;
            let pred = TokenEmbeddingSet::from_text(&pair.prediction, provider)?;
            let reference = TokenEmbeddingSet::from_text(&pair.reference, provider)?;
            bert_style_score(&pred, &reference)
        }
    }
}

/// Harmonic mean, zero when `p + r <= 0`.
pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        let a = MetricValue::new("f1", 0.4).with("precision", 1.0);
        let b = MetricValue::new("f1", 0.6).with("precision", 0.0);
        let avg = average(&[a.clone(), b]).unwrap();
        assert!((avg.value - 0.5).abs() < 1e-15);
        assert_eq!(avg.component("precision"), Some(0.5));
        assert_eq!(average(std::slice::from_ref(&a)).unwrap(), a);
        let same = vec![MetricValue::new("bleu", 0.3); 7];
        assert!((average(&same).unwrap().value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn average_errors() {
        assert!(average(&[]).is_err());
        let err = average(&[MetricValue::new("f1", 0.1), MetricValue::new("bleu", 0.1)]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn average_keeps_only_shared_components() {
        let a = MetricValue::new("m", 1.0).with("x", 1.0).with("y", 2.0);
        let b = MetricValue::new("m", 1.0).with("x", 3.0);
        let avg = average(&[a, b]).unwrap();
        assert_eq!(avg.components.keys().collect::<Vec<_>>(), ["x"]);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricId::ALL {
            assert_eq!(m.name().parse::<MetricId>().unwrap(), m);
        }
        assert!("wer".parse::<MetricId>().is_err());
        assert_eq!(MetricId::Sms.direction(), Direction::LowerBetter);
    }

    #[test]
    fn provider_required() {
        let pair = ScorePair::new("a", "a");
        assert!(score_pair(MetricId::Sms, &pair, None).is_err());
        assert!(score_pair(MetricId::TokenF1, &pair, None).is_ok());
    }
}
