//! Seeded generator for a toy Code corpus in which every token ending in `()`
//! is a single-token highlight and nothing else is.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bioe::BioTag;
use crate::dataset::LabeledSentence;
use crate::format::FormatType;

const WORDS: &[&str] = &[
    "the", "a", "you", "can", "call", "use", "then", "and", "it", "will", "return", "value", "to", "from", "in", "of",
    "this", "that", "is", "not", "when", "after", "before", "your", "method", "function", "object", "list", "string",
    "array", "should", "work", "try", "instead", "first", "again", "with", "every", "loop", "inside", "class", "file",
    "data", "result", "error", "because", "only", "also", "check", "make", "sure", "here", "there", "now", "just",
    "fast", "slow", "simple", "way", "better", "each", "time", "once", "where", "which", "parameter", "returns",
    "null", "true", "false", "default", "thread", "request", "server", "client", "user", "input", "output",
];

const PREFIXES: &[&str] = &[
    "get", "set", "is", "load", "save", "parse", "read", "write", "close", "open", "find", "add", "remove", "update",
    "init", "to", "has", "create", "build", "run",
];

const STEMS: &[&str] = &[
    "Value", "Name", "Item", "File", "Data", "Config", "Stream", "Buffer", "Index", "Length", "String", "Element",
    "Connection", "Session", "Handler", "Request", "Id", "Key", "List", "Count",
];

fn call_token(rng: &mut ChaCha8Rng) -> String {
    let prefix = PREFIXES.choose(rng).expect("non-empty");
    match rng.gen_range(0..4) {
        0 => format!("{prefix}()"),
        1 => format!("{}.{}()", STEMS.choose(rng).expect("non-empty").to_lowercase(), prefix),
        _ => format!("{prefix}{}()", STEMS.choose(rng).expect("non-empty")),
    }
}

/// `n` sentences of 5 to 14 tokens, each with one or two call tokens.
pub fn code_corpus(n: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(5..=14);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| WORDS.choose(&mut rng).expect("non-empty").to_string())
                .collect();
            let mut tags = vec![BioTag::O; len];
            for _ in 0..rng.gen_range(1..=2) {
                let at = rng.gen_range(0..len);
                tokens[at] = call_token(&mut rng);
                tags[at] = BioTag::B;
            }
            if rng.gen_bool(0.5) {
                let first = &mut tokens[0];
                if tags[0] == BioTag::O {
                    *first = capitalize(first);
                }
            }
            LabeledSentence {
                tokens,
                tags,
                post_id: i as u64,
                format: FormatType::Code,
            }
        })
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
