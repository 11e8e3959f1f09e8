//! Tokenization shared by the corpus statistics and the encoders.
//!
//! Lowercase, split on non-alphanumeric runs, no stemming. Deterministic and
//! language-neutral.

/// Splits `text` into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_non_alphanumeric_runs() {
        assert_eq!(tokenize("Hello,  world! x2"), vec!["hello", "world", "x2"]);
    }

    #[test]
    fn empty_and_punctuation_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("..., --- !!").is_empty());
    }

    #[test]
    fn unicode_lowercasing() {
        assert_eq!(tokenize("Größe Ünit"), vec!["größe", "ünit"]);
    }
}
