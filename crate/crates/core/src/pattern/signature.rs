use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::is_symbol;

/// Distinct symbol characters of a value, codepoint sorted.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct SymbolSignature(Vec<char>);

impl SymbolSignature {
    pub fn of(value: &str) -> Self {
        let mut chars: Vec<char> = value.chars().filter(|&c| is_symbol(c)).collect();
        chars.sort_unstable();
        chars.dedup();
        SymbolSignature(chars)
    }

    pub fn symbols(&self) -> &[char] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: char) -> bool {
        self.0.binary_search(&c).is_ok()
    }

    pub fn is_subset_of(&self, other: &SymbolSignature) -> bool {
        self.0.iter().all(|&c| other.contains(c))
    }
}

impl From<String> for SymbolSignature {
    fn from(s: String) -> Self {
        let mut chars: Vec<char> = s.chars().collect();
        chars.sort_unstable();
        chars.dedup();
        SymbolSignature(chars)
    }
}

impl From<SymbolSignature> for String {
    fn from(s: SymbolSignature) -> String {
        s.0.into_iter().collect()
    }
}

impl fmt::Debug for SymbolSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c:?}")?;
        }
        write!(f, "}}")
    }
}
