use crate::dense::EmbeddingProvider;
use crate::error::{Error, Result};

use super::bertscore::TokenEmbeddingSet;
use super::transport::uniform_transport;
use super::{MetricValue, ScorePair};

/// Sentence mover's similarity: minimal cost of moving the prediction's
/// word distribution onto the reference's, with uniform word weights and
/// cosine distance `1 - cos` between word embeddings. Lower is more similar.
///
/// Tokens whose embedding is the zero vector are dropped.
pub fn sms(pair: &ScorePair, provider: &dyn EmbeddingProvider) -> Result<MetricValue> {
    let pred = TokenEmbeddingSet::from_text(&pair.prediction, provider)?;
    let reference = TokenEmbeddingSet::from_text(&pair.reference, provider)?;
    if pred.is_empty() || reference.is_empty() {
        return Err(Error::invalid(
            "sentence mover's similarity needs at least one embeddable token on each side",
        ));
    }
    let cost: Vec<Vec<f64>> = pred
        .unit_vectors()
        .iter()
        .map(|p| {
            reference
                .unit_vectors()
                .iter()
                .map(|r| {
                    let cos: f64 = p.iter().zip(r).map(|(a, b)| a * b).sum();
                    (1.0 - cos).max(0.0)
                })
                .collect()
        })
        .collect();
    let plan = uniform_transport(&cost)?;
    Ok(MetricValue::new("sms", plan.cost)
        .with("pred_tokens", pred.len() as f64)
        .with("ref_tokens", reference.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{cosine, HashedNGram};

    #[test]
    fn identical_sentences_cost_nothing() {
        let p = HashedNGram::default();
        let v = sms(&ScorePair::new("fire door rating", "fire door rating"), &p).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn single_tokens_cost_cosine_distance() {
        let p = HashedNGram::default();
        let v = sms(&ScorePair::new("doors", "door"), &p).unwrap();
        let c = cosine(&p.embed("doors").unwrap(), &p.embed("door").unwrap()).unwrap();
        assert!((v.value - (1.0 - c)).abs() < 1e-12);
    }

    #[test]
    fn empty_side_is_an_error() {
        let p = HashedNGram::default();
        assert!(sms(&ScorePair::new("", "door"), &p).is_err());
        assert!(sms(&ScorePair::new("door", "--"), &p).is_err());
    }
}
