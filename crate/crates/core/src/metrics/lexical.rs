use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::textkit::{stem, AnalysisChain, Token};

use super::{harmonic, MetricValue, ScorePair};

fn analyze_pair(pair: &ScorePair) -> Result<(Vec<Token>, Vec<Token>)> {
    let chain = AnalysisChain::metric();
    let reference = chain.analyze(&pair.reference);
    if reference.is_empty() {
        return Err(Error::invalid("reference has no tokens"));
    }
    Ok((chain.analyze(&pair.prediction), reference))
}

fn counts<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut map = HashMap::new();
    for item in items {
        *map.entry(item).or_insert(0) += 1;
    }
    map
}

/// Size of the multiset intersection: sum over items of the smaller count.
fn clipped_overlap<T: std::hash::Hash + Eq>(
    candidate: &HashMap<T, usize>,
    reference: &HashMap<T, usize>,
) -> usize {
    candidate
        .iter()
        .map(|(item, &c)| c.min(reference.get(item).copied().unwrap_or(0)))
        .sum()
}

/// Unigram precision, recall and F1 with clipped (multiset) overlap.
pub fn token_f1(pair: &ScorePair) -> Result<MetricValue> {
    let (pred, reference) = analyze_pair(pair)?;
    let (precision, recall) = if pred.is_empty() {
        (0.0, 0.0)
    } else {
        let overlap = clipped_overlap(&counts(&pred), &counts(&reference)) as f64;
        (overlap / pred.len() as f64, overlap / reference.len() as f64)
    };
    let f1 = harmonic(precision, recall);
    Ok(MetricValue::new("f1", f1)
        .with("precision", precision)
        .with("recall", recall)
        .with("f1", f1))
}

/// ROUGE-1: clipped unigram overlap over the reference length.
pub fn rouge1(pair: &ScorePair) -> Result<MetricValue> {
    let (pred, reference) = analyze_pair(pair)?;
    let overlap = clipped_overlap(&counts(&reference), &counts(&pred)) as f64;
    Ok(MetricValue::new("rouge1", overlap / reference.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuConfig {
    /// One weight per n-gram order, starting at unigrams; must sum to 1.
    pub weights: Vec<f64>,
    /// Adds this count to the numerator of a zero n-gram precision instead
    /// of zeroing the score. Off by default.
    pub epsilon: Option<f64>,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            weights: vec![0.5, 0.5],
            epsilon: None,
        }
    }
}

/// Sentence BLEU with clipped n-gram precisions and brevity penalty
/// `min(1, |P| / |R|)`.
///
/// Components: `p1..pN`, `bp`.
pub fn bleu(pair: &ScorePair, config: &BleuConfig) -> Result<MetricValue> {
    let weights = &config.weights;
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("BLEU weights must be non-negative and non-empty"));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("BLEU weights must sum to 1"));
    }
    let (pred, reference) = analyze_pair(pair)?;
    let bp = (pred.len() as f64 / reference.len() as f64).min(1.0);

    let mut out = MetricValue::new("bleu", 0.0);
    let mut log_sum = 0.0;
    let mut zero = pred.is_empty();
    for (i, &w) in weights.iter().enumerate() {
        let n = i + 1;
        let pred_grams = counts(pred.windows(n));
        let ref_grams = counts(reference.windows(n));
        let total = pred.len().saturating_sub(n - 1);
        let matched = clipped_overlap(&pred_grams, &ref_grams) as f64;
        let p = if total == 0 {
            0.0
        } else if matched == 0.0 {
            config.epsilon.map_or(0.0, |eps| eps / total as f64)
        } else {
            matched / total as f64
        };
        out.components.insert(format!("p{n}"), p);
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += w * p.ln();
        }
    }
    out.components.insert("bp".into(), bp);
    out.value = if zero { 0.0 } else { bp * log_sum.exp() };
    Ok(out)
}

/// Aligns prediction to reference one-to-one: exact surface matches first,
/// then Porter-stem matches among the leftovers. Each prediction token, in
/// order, takes the leftmost free reference token. Returns `(pred, ref)`
/// index pairs sorted by prediction index.
fn align(pred: &[Token], reference: &[Token]) -> Vec<(usize, usize)> {
    let mut pred_used = vec![false; pred.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();

    let stems = |tokens: &[Token]| tokens.iter().map(|t| stem(t.as_str())).collect::<Vec<_>>();
    let surface = |tokens: &[Token]| tokens.iter().map(|t| t.as_str().to_string()).collect::<Vec<_>>();
    let passes = [
        (surface(pred), surface(reference)),
        (stems(pred), stems(reference)),
    ];
    for (p_forms, r_forms) in &passes {
        for (i, form) in p_forms.iter().enumerate() {
            if pred_used[i] {
                continue;
            }
            if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && r_forms[j] == *form) {
                pred_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// METEOR with exact and stem matching, `β = 1` and fragmentation penalty
/// `0.5 * (chunks / matches)^3`.
///
/// Components: `precision`, `recall`, `f_mean`, `penalty`, `chunks`,
/// `matches`.
pub fn meteor(pair: &ScorePair) -> Result<MetricValue> {
    const GAMMA: f64 = 0.5;
    const THETA: f64 = 3.0;

    let (pred, reference) = analyze_pair(pair)?;
    let alignment = align(&pred, &reference);
    let m = alignment.len();
    let mut out = MetricValue::new("meteor", 0.0);
    if m == 0 {
        for key in ["precision", "recall", "f_mean", "penalty", "chunks", "matches"] {
            out.components.insert(key.into(), 0.0);
        }
        return Ok(out);
    }
    let chunks = 1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let precision = m as f64 / pred.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let f_mean = harmonic(precision, recall);
    let penalty = GAMMA * (chunks as f64 / m as f64).powf(THETA);
    out.value = f_mean * (1.0 - penalty);
    Ok(out
        .with("precision", precision)
        .with("recall", recall)
        .with("f_mean", f_mean)
        .with("penalty", penalty)
        .with("chunks", chunks as f64)
        .with("matches", m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(pred: &str, reference: &str) -> ScorePair {
        ScorePair::new(pred, reference)
    }

    #[test]
    fn token_f1_examples() {
        assert_eq!(token_f1(&p("Fire door", "fire door")).unwrap().value, 1.0);
        assert_eq!(token_f1(&p("stairs", "fire door")).unwrap().value, 0.0);
        let v = token_f1(&p("fire door", "fire exit")).unwrap();
        assert_eq!(v.component("precision"), Some(0.5));
        assert_eq!(v.component("recall"), Some(0.5));
        assert_eq!(v.value, 0.5);
    }

    #[test]
    fn token_f1_empty_sides() {
        let v = token_f1(&p("", "fire door")).unwrap();
        assert_eq!((v.value, v.component("precision"), v.component("recall")), (0.0, Some(0.0), Some(0.0)));
        assert!(matches!(token_f1(&p("a", " . ")), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bleu_examples() {
        let v = bleu(&p("a b c", "a b c"), &BleuConfig::default()).unwrap();
        assert_eq!((v.value, v.component("p1"), v.component("p2"), v.component("bp")), (1.0, Some(1.0), Some(1.0), Some(1.0)));

        let v = bleu(&p("a b c", "a b c d"), &BleuConfig::default()).unwrap();
        assert_eq!(v.component("bp"), Some(0.75));
        assert!((v.value - 0.75).abs() < 1e-15);

        let v = bleu(&p("c b a", "a b c"), &BleuConfig::default()).unwrap();
        assert_eq!(v.component("p2"), Some(0.0));
        assert_eq!(v.value, 0.0);

        assert_eq!(bleu(&p("", "a b"), &BleuConfig::default()).unwrap().value, 0.0);
        assert!(bleu(&p("a", ""), &BleuConfig::default()).is_err());
    }

    #[test]
    fn bleu_weight_validation() {
        let bad = BleuConfig {
            weights: vec![0.5, 0.6],
            epsilon: None,
        };
        assert!(bleu(&p("a", "a"), &bad).is_err());
        let single = BleuConfig {
            weights: vec![1.0],
            epsilon: None,
        };
        assert_eq!(bleu(&p("a x", "a b"), &single).unwrap().value, 0.5);
    }

    #[test]
    fn bleu_epsilon_smoothing() {
        let smooth = BleuConfig {
            weights: vec![0.5, 0.5],
            epsilon: Some(0.1),
        };
        // p1 = 1, p2 = 0.1/2, bp = 1
        let v = bleu(&p("c b a", "a b c"), &smooth).unwrap();
        assert!((v.value - (0.5 * (0.05f64).ln()).exp()).abs() < 1e-15);
    }

    #[test]
    fn bleu_clips_repeats() {
        let v = bleu(&p("the the the", "the door the"), &BleuConfig { weights: vec![1.0], epsilon: None }).unwrap();
        assert!((v.component("p1").unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge1(&p("fire door", "fire door")).unwrap().value, 1.0);
        assert_eq!(rouge1(&p("the the door", "the door")).unwrap().value, 1.0);
        assert_eq!(rouge1(&p("stairs", "fire door")).unwrap().value, 0.0);
    }

    #[test]
    fn meteor_examples() {
        assert_eq!(meteor(&p("alpha", "fire door")).unwrap().value, 0.0);
        let v = meteor(&p("the fire door closes", "the fire door closes")).unwrap();
        assert_eq!(v.component("chunks"), Some(1.0));
        assert_eq!(v.component("penalty"), Some(0.0078125));
        assert_eq!(v.value, 0.9921875);
        let v = meteor(&p("door", "doors")).unwrap();
        assert_eq!(v.component("matches"), Some(1.0));
    }

    #[test]
    fn meteor_prefers_exact_over_stem() {
        // "doors" must pair with the exact "doors", leaving "door" for "door"
        let pairs = align(
            &AnalysisChain::metric().analyze("doors door"),
            &AnalysisChain::metric().analyze("door doors"),
        );
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn meteor_chunk_count() {
        // matches at (0,2),(1,3),(2,0): two chunks
        let v = meteor(&p("c d a", "a b c d")).unwrap();
        assert_eq!(v.component("chunks"), Some(2.0));
        assert_eq!(v.component("matches"), Some(3.0));
    }

    fn sentence() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof!["a", "b", "c", "d", "door", "doors"], 0..8)
            .prop_map(|w| w.join(" "))
    }

    fn nonempty() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof!["a", "b", "c", "d", "door", "doors"], 1..8)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn bounded(pred in sentence(), reference in nonempty()) {
            let pair = p(&pred, &reference);
            for v in [token_f1(&pair).unwrap(), rouge1(&pair).unwrap(),
                      bleu(&pair, &BleuConfig::default()).unwrap(), meteor(&pair).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v.value), "{} = {}", v.name, v.value);
            }
        }

        #[test]
        fn f1_swap(a in nonempty(), b in nonempty()) {
            let ab = token_f1(&p(&a, &b)).unwrap();
            let ba = token_f1(&p(&b, &a)).unwrap();
            prop_assert_eq!(ab.component("precision"), ba.component("recall"));
            prop_assert_eq!(ab.component("recall"), ba.component("precision"));
            prop_assert!((ab.value - ba.value).abs() < 1e-15);
        }

        #[test]
        fn rouge_equals_token_recall(pred in sentence(), reference in nonempty()) {
            let pair = p(&pred, &reference);
            prop_assert_eq!(Some(rouge1(&pair).unwrap().value), token_f1(&pair).unwrap().component("recall"));
        }

        #[test]
        fn bleu_below_bp(pred in sentence(), reference in nonempty()) {
            let v = bleu(&p(&pred, &reference), &BleuConfig::default()).unwrap();
            let bp = v.component("bp").unwrap();
            prop_assert!(v.value <= bp + 1e-15 && bp <= 1.0);
        }

        #[test]
        fn appending_reference_tokens_never_lowers_bp(reference in nonempty(), cut in 0usize..8) {
            let words: Vec<&str> = reference.split(' ').collect();
            let cut = cut.min(words.len());
            let short = words[..cut].join(" ");
            let longer = words[..(cut + 1).min(words.len())].join(" ");
            let bp = |s: &str| bleu(&p(s, &reference), &BleuConfig::default()).unwrap().component("bp").unwrap();
            prop_assert!(bp(&longer) >= bp(&short));
        }

        #[test]
        fn extending_prediction_never_lowers_recall(pred in sentence(), extra in sentence(), reference in nonempty()) {
            let r = |s: &str| token_f1(&p(s, &reference)).unwrap().component("recall").unwrap();
            let longer = format!("{pred} {extra}");
            prop_assert!(r(&longer) >= r(&pred));
        }
    }
}
