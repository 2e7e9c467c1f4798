//! Lexical attributes and their hashed table rows.

use serde::{Deserialize, Serialize};

pub const N_ATTRIBUTES: usize = 4;

/// Row count of each attribute table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRows {
    pub norm: u32,
    pub prefix: u32,
    pub suffix: u32,
    pub shape: u32,
}

impl Default for AttributeRows {
    fn default() -> Self {
        AttributeRows {
            norm: 4096,
            prefix: 1024,
            suffix: 1024,
            shape: 512,
        }
    }
}

impl AttributeRows {
    pub fn as_array(&self) -> [usize; N_ATTRIBUTES] {
        [
            self.norm as usize,
            self.prefix as usize,
            self.suffix as usize,
            self.shape as usize,
        ]
    }
}

/// The four attribute strings of a token: lowercase form, 3-char prefix,
/// 3-char suffix, and word shape.
pub fn attributes(token: &str) -> [String; N_ATTRIBUTES] {
    let norm = token.to_lowercase();
    let chars: Vec<char> = norm.chars().collect();
    let prefix: String = chars.iter().take(3).collect();
    let suffix: String = chars[chars.len().saturating_sub(3)..].iter().collect();
    [norm, prefix, suffix, word_shape(token)]
}

/// Character-class skeleton: `X` upper, `x` lower, `d` digit, other characters
/// kept; runs of one class longer than four are truncated.
pub fn word_shape(token: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    let mut run = 0;
    for c in token.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if Some(class) == last {
            run += 1;
        } else {
            run = 1;
            last = Some(class);
        }
        if run <= 4 {
            shape.push(class);
        }
    }
    shape
}

/// FNV-1a over a per-attribute tag byte followed by the UTF-8 value.
pub fn stable_hash(attribute: usize, value: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in std::iter::once(attribute as u8).chain(value.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Table row of every attribute of `token`.
pub fn feature_rows(token: &str, rows: &AttributeRows) -> [usize; N_ATTRIBUTES] {
    let attrs = attributes(token);
    let sizes = rows.as_array();
    std::array::from_fn(|a| (stable_hash(a, &attrs[a]) % sizes[a] as u64) as usize)
}
