use crate::dense::{Embedding, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::textkit::{AnalysisChain, Token};

use super::{harmonic, MetricValue};

/// Tokens of a text together with one embedding per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSet {
    tokens: Vec<Token>,
    vectors: Vec<Embedding>,
    unit: Vec<Vec<f64>>,
}

impl TokenEmbeddingSet {
    pub fn new(tokens: Vec<Token>, vectors: Vec<Embedding>) -> Result<Self> {
        if tokens.len() != vectors.len() {
            return Err(Error::invalid(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.len()
            )));
        }
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.dim() != first.dim()) {
                return Err(Error::invalid("token vectors differ in dimension"));
            }
        }
        let unit = vectors
            .iter()
            .map(|v| {
                let n = v.norm();
                v.as_slice().iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
            })
            .collect();
        Ok(TokenEmbeddingSet {
            tokens,
            vectors,
            unit,
        })
    }

    /// Analyzes `text` (lowercase, no stemming) and embeds each token on its
    /// own. Tokens that embed to the zero vector are left out.
    pub fn from_text(text: &str, provider: &dyn EmbeddingProvider) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut vectors = Vec::new();
        for token in AnalysisChain::metric().analyze(text) {
            let v = provider.embed(token.as_str())?;
            if !v.is_zero() {
                tokens.push(token);
                vectors.push(v);
            }
        }
        Self::new(tokens, vectors)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[Embedding] {
        &self.vectors
    }

    pub(crate) fn unit_vectors(&self) -> &[Vec<f64>] {
        &self.unit
    }

    fn check(&self, side: &str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid(format!("{side} has no tokens")));
        }
        if let Some(i) = self.vectors.iter().position(Embedding::is_zero) {
            return Err(Error::invalid(format!(
                "{side} token {:?} has a zero embedding",
                self.tokens[i].as_str()
            )));
        }
        Ok(())
    }
}

fn greedy_mean(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Greedy embedding matching: precision is the mean, over prediction
/// tokens, of the best cosine to any reference token; recall swaps roles.
///
/// `value` is the F1; components are `precision`, `recall`, `f1`.
pub fn bert_style_score(pred: &TokenEmbeddingSet, reference: &TokenEmbeddingSet) -> Result<MetricValue> {
    pred.check("prediction")?;
    reference.check("reference")?;
    if pred.vectors[0].dim() != reference.vectors[0].dim() {
        return Err(Error::invalid("prediction and reference embeddings differ in dimension"));
    }
    let precision = greedy_mean(&pred.unit, &reference.unit);
    let recall = greedy_mean(&reference.unit, &pred.unit);
    let f1 = harmonic(precision, recall);
    Ok(MetricValue::new("bert", f1)
        .with("precision", precision)
        .with("recall", recall)
        .with("f1", f1))
}
