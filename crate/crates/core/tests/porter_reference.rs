//! Stemmer output against a frozen table produced by an independent Porter
//! implementation run in original-algorithm mode over a building-code
//! vocabulary.

use regqa_core::textkit::stem;

#[test]
fn matches_reference_table() {
    let table = include_str!("data/porter_reference.tsv");
    let mut mismatches = Vec::new();
    let mut count = 0;
    for line in table.lines() {
        let (word, expected) = line.split_once('\t').expect("tab-separated");
        count += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    assert!(count > 2000);
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}
