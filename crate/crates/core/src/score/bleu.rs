use std::collections::HashMap;

use super::ScoreError;

pub fn text_tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Splits a key chord such as `Ctrl+Shift+T` on `+`. A trailing `+`
/// names the plus key itself (`Ctrl++`).
pub fn chord_tokens(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        match rest.find('+') {
            Some(0) => {
                out.push("+");
                rest = rest[1..].strip_prefix('+').unwrap_or(&rest[1..]);
            }
            Some(i) => {
                out.push(&rest[..i]);
                rest = &rest[i + 1..];
            }
            None => {
                out.push(rest);
                break;
            }
        }
    }
    out
}

/// Unigram BLEU: clipped unigram precision times the brevity penalty
/// `min(1, exp(1 - |ref| / |hyp|))`.
pub fn bleu1(reference: &[&str], hypothesis: &[&str]) -> Result<f64, ScoreError> {
    if reference.is_empty() {
        return Err(ScoreError::EmptyReference);
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut hyp_counts: HashMap<&str, usize> = HashMap::new();
    for t in hypothesis {
        *hyp_counts.entry(t).or_default() += 1;
    }
    let clipped: usize = hyp_counts
        .iter()
        .map(|(t, c)| (*c).min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    let precision = clipped as f64 / hypothesis.len() as f64;
    let (r, h) = (reference.len() as f64, hypothesis.len() as f64);
    let bp = if h >= r { 1.0 } else { (1.0 - r / h).exp() };
    Ok(precision * bp)
}
