use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{Backend, Embedding, EmbeddingMatrix};
use crate::decoder::greedy_caption;
use crate::error::Result;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

pub fn stopwords() -> HashSet<&'static str> {
    STOPWORDS.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WordCount {
    pub word: String,
    pub count: usize,
}

/// Captions every image with a plain greedy decode and returns the `m` most
/// frequent non-stopwords (count descending, then lexicographic).
pub fn most_frequent_words(
    images: &EmbeddingMatrix,
    backend: &dyn Backend,
    m: usize,
    prompt: &str,
    max_tokens: usize,
) -> Result<Vec<WordCount>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let captions: Vec<String> = images
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| {
            let cond = Embedding::normalized(row.to_vec())?;
            greedy_caption(backend, &cond, prompt, max_tokens).map(|(text, _)| text)
        })
        .collect::<Result<_>>()?;
    Ok(top_words(captions.iter().map(String::as_str), m))
}

pub(crate) fn top_words<'a>(captions: impl Iterator<Item = &'a str>, m: usize) -> Vec<WordCount> {
    let stop = stopwords();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for caption in captions {
        for word in caption.to_lowercase().split_whitespace() {
            if !stop.contains(word) {
                *counts.entry(word.to_string()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<WordCount> = counts.into_iter().map(|(word, count)| WordCount { word, count }).collect();
    // BTreeMap order is lexicographic; a stable sort on count keeps it
    ranked.sort_by(|a, b| b.count.cmp(&a.count));
    ranked.truncate(m);
    ranked
}
