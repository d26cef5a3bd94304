//! Per-word lexical 0-1 features.
//!
//! Three indicators that WordPiece splitting destroys and the model gets
//! back as explicit inputs: capital-initial, all-uppercase, hashtag-initial.

/// 0-1 indicator features for one word, in fixed order
/// (capital-initial, all-uppercase, hashtag-initial).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexicalFeatures {
    pub caps_initial: bool,
    pub all_upper: bool,
    pub hashtag: bool,
}

/// Width of the feature vector fed to the model head.
pub const FEATURE_DIM: usize = 3;

impl LexicalFeatures {
    /// The feature vector as 0.0/1.0 values in fixed order.
    pub fn to_vector(self) -> [f64; FEATURE_DIM] {
        [
            f64::from(self.caps_initial),
            f64::from(self.all_upper),
            f64::from(self.hashtag),
        ]
    }
}

/// Extract the lexical features of a single word.
///
/// `caps_initial` looks at the literal first character, so `"#Plant"` is not
/// capital-initial. `all_upper` requires at least one cased letter and no
/// lowercase letter; caseless scripts are ignored by the predicate. Letters
/// are classified by Unicode case properties, not ASCII.
pub fn extract(word: &str) -> LexicalFeatures {
    debug_assert!(!word.is_empty(), "words are non-empty by invariant");
    let first = word.chars().next().unwrap_or('\0');
    let mut has_cased = false;
    let mut has_lower = false;
    for c in word.chars() {
        if c.is_lowercase() {
            has_cased = true;
            has_lower = true;
        } else if c.is_uppercase() {
            has_cased = true;
        }
    }
    LexicalFeatures {
        caps_initial: first.is_uppercase(),
        all_upper: has_cased && !has_lower,
        hashtag: first == '#',
    }
}
