//! ROUGE-N, ROUGE-L and ROUGE-Lsum over [`word_tokenize`] tokens.
//!
//! No stemming and no stopword removal.

use std::collections::{BTreeSet, HashMap};

use super::{word_tokenize, Prf};

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Prf {
    let cand = word_tokenize(candidate);
    let refs = word_tokenize(reference);
    rouge_n_tokens(&cand, &refs, n)
}

pub fn rouge_n_tokens(cand: &[String], refs: &[String], n: usize) -> Prf {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let gram_count = |len: usize| if len >= n { len - n + 1 } else { 0 };
    let cand_grams = ngrams(cand, n);
    let ref_grams = ngrams(refs, n);
    let overlap: usize = cand_grams
        .iter()
        .map(|(g, &c)| c.min(ref_grams.get(g).copied().unwrap_or(0)))
        .sum();
    Prf::from_counts(overlap, gram_count(cand.len()), gram_count(refs.len()))
}

/// Dynamic-programming LCS table with `(a.len()+1) x (b.len()+1)` entries.
fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Positions in `reference` of one longest common subsequence with
/// `candidate`. Walks back from the end, taking a match whenever the tokens
/// agree, otherwise moving along the candidate only when that keeps a
/// strictly longer subsequence.
pub fn lcs_reference_positions(reference: &[String], candidate: &[String]) -> Vec<usize> {
    let t = lcs_table(reference, candidate);
    let (mut i, mut j) = (reference.len(), candidate.len());
    let mut positions = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == candidate[j - 1] {
            positions.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i][j - 1] > t[i - 1][j] {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    positions.reverse();
    positions
}

/// Whole-text longest common subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    let cand = word_tokenize(candidate);
    let refs = word_tokenize(reference);
    Prf::from_counts(lcs_len(&cand, &refs), cand.len(), refs.len())
}

/// Sentences split on newlines and on a period followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut start = 0;
        let bytes = line.as_bytes();
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'.' && bytes.get(i + 1).is_some_and(|c| c.is_ascii_whitespace()) {
                out.push(line[start..=i].to_string());
                start = i + 1;
            }
        }
        out.push(line[start..].to_string());
    }
    out.retain(|s| !s.trim().is_empty());
    out
}

/// Summary-level LCS: for every reference sentence, the union of its LCS
/// positions against each candidate sentence, with each token occurrence
/// usable at most as often as it appears on either side.
pub fn rouge_lsum(candidate: &str, reference: &str) -> Prf {
    let cand_sents: Vec<Vec<String>> = split_sentences(candidate)
        .iter()
        .map(|s| word_tokenize(s))
        .collect();
    let ref_sents: Vec<Vec<String>> = split_sentences(reference)
        .iter()
        .map(|s| word_tokenize(s))
        .collect();

    let mut cand_left: HashMap<&str, usize> = HashMap::new();
    for tok in cand_sents.iter().flatten() {
        *cand_left.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut ref_left: HashMap<&str, usize> = HashMap::new();
    for tok in ref_sents.iter().flatten() {
        *ref_left.entry(tok.as_str()).or_insert(0) += 1;
    }
    let cand_total: usize = cand_left.values().sum();
    let ref_total: usize = ref_left.values().sum();

    let mut hits = 0usize;
    for r in &ref_sents {
        let union: BTreeSet<usize> = cand_sents
            .iter()
            .flat_map(|c| lcs_reference_positions(r, c))
            .collect();
        for pos in union {
            let tok = r[pos].as_str();
            let (Some(c), Some(rr)) = (cand_left.get_mut(tok), ref_left.get_mut(tok)) else {
                continue;
            };
            if *c > 0 && *rr > 0 {
                *c -= 1;
                *rr -= 1;
                hits += 1;
            }
        }
    }
    Prf::from_counts(hits, cand_total, ref_total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(p: Prf, (pp, rr, ff): (f64, f64, f64)) {
        assert!((p.precision - pp).abs() < 1e-12, "{p:?}");
        assert!((p.recall - rr).abs() < 1e-12, "{p:?}");
        assert!((p.f1 - ff).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn rouge_n_examples() {
        close(rouge_n("the cat sat", "the cat sat", 1), (1.0, 1.0, 1.0));
        close(rouge_n("the cat sat", "the cat sat", 2), (1.0, 1.0, 1.0));
        close(rouge_n("the cat", "the cat sat", 1), (1.0, 2.0 / 3.0, 0.8));
        close(rouge_n("a b", "c d", 1), (0.0, 0.0, 0.0));
        close(rouge_n("", "c d", 1), (0.0, 0.0, 0.0));
        close(rouge_n("a", "a", 2), (0.0, 0.0, 0.0));
        // Clipping: "the" appears twice in the candidate, once in the reference.
        close(rouge_n("the the", "the cat", 1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn rouge_l_examples() {
        close(rouge_l("a c e", "a b c d e"), (1.0, 0.6, 0.75));
        close(rouge_l("x y z", "x y z"), (1.0, 1.0, 1.0));
        close(rouge_lsum("x y z. p q", "x y z. p q"), (1.0, 1.0, 1.0));
    }

    #[test]
    fn lsum_rewards_swapped_sentences() {
        let reference = "alpha beta gamma.\ndelta epsilon zeta.";
        let candidate = "delta epsilon zeta.\nalpha beta gamma.";
        let l = rouge_l(candidate, reference);
        let lsum = rouge_lsum(candidate, reference);
        assert!(lsum.f1 >= l.f1);
        close(lsum, (1.0, 1.0, 1.0));
    }

    #[test]
    fn sentence_split() {
        assert_eq!(
            split_sentences("One. Two three.\nFour 3.5 five.  \n\n"),
            ["One.", " Two three.", "Four 3.5 five."]
        );
    }

    #[test]
    fn lcs_positions_are_a_common_subsequence() {
        let r = word_tokenize("a b a c b");
        let c = word_tokenize("b a b c");
        let pos = lcs_reference_positions(&r, &c);
        assert_eq!(pos.len(), lcs_len(&r, &c));
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
