use std::fs;
use std::path::Path;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

/// Character-level corpus cut into next-character windows.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCorpus {
    /// Sorted distinct characters; token id is the index.
    pub vocab: Vec<char>,
    pub dataset: Dataset,
}

impl CharCorpus {
    pub fn from_text(text: &str, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::arg("window must be positive"));
        }
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return Err(Error::data("corpus is empty"));
        }
        let mut vocab = chars.clone();
        vocab.sort_unstable();
        vocab.dedup();
        let ids: Vec<usize> = chars.iter().map(|c| vocab.binary_search(c).unwrap()).collect();
        let count = (ids.len() - 1) / window;
        if count == 0 {
            return Err(Error::data(format!("corpus of {} characters has no window of length {window}", ids.len())));
        }
        let mut inputs = Vec::with_capacity(count);
        let mut targets = Vec::with_capacity(count);
        for w in 0..count {
            let s = w * window;
            inputs.push(ids[s..s + window].to_vec());
            targets.push(ids[s + 1..s + window + 1].to_vec());
        }
        let dataset = Dataset::sequence(Split::Train, vocab.len(), inputs, targets)?;
        Ok(CharCorpus { vocab, dataset })
    }

    /// Splits windows contiguously; the last `test_fraction` become the test split.
    pub fn split(&self, test_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::arg("test fraction must lie in [0, 1)"));
        }
        let n = self.dataset.len();
        let n_test = ((n as f64) * test_fraction).round() as usize;
        let cut = n - n_test;
        let mut train = self.dataset.subset(&(0..cut).collect::<Vec<_>>());
        let mut test = self.dataset.subset(&(cut..n).collect::<Vec<_>>());
        train.split = Split::Train;
        test.split = Split::Test;
        Ok((train, test))
    }
}

pub fn load_char_corpus(path: &Path, window: usize) -> Result<CharCorpus> {
    let text = fs::read_to_string(path)?;
    if text.is_empty() {
        return Err(Error::data(format!("{} is empty", path.display())));
    }
    CharCorpus::from_text(&text, window)
}
