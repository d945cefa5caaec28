//! Bundled word list for the word recognition task.

use std::sync::LazyLock;

static WORDS: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    include_str!("../../data/lexicon.txt")
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .collect()
});

/// Common concrete nouns, one per entry, all distinct.
pub fn lexicon() -> &'static [&'static str] {
    &WORDS
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn at_least_500_distinct_words() {
        let words = lexicon();
        assert!(words.len() >= 500);
        let set: HashSet<_> = words.iter().collect();
        assert_eq!(set.len(), words.len());
    }
}
