//! Fixture loaders and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use hiliter_core::FormatType;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Debug, Clone)]
pub struct ParserCase {
    pub id: u64,
    pub title: String,
    pub body: String,
    pub text: String,
    /// (format, start, end), sorted.
    pub spans: Vec<(FormatType, usize, usize)>,
    pub blocks: Option<usize>,
    pub warnings: Option<usize>,
}

/// Reads `parser_corpus.txt`.
pub fn parser_cases() -> Vec<ParserCase> {
    let src = read_fixture("parser_corpus.txt");
    let mut cases = Vec::new();
    let mut lines = src.lines().peekable();
    while let Some(line) = lines.next() {
        let Some(header) = line.strip_prefix("=== ") else {
            continue;
        };
        let (id, title) = header.split_once(' ').unwrap_or((header, ""));
        let section = |lines: &mut std::iter::Peekable<std::str::Lines>| {
            let mut out = Vec::new();
            while let Some(l) = lines.peek() {
                if l.starts_with("--- ") || l.starts_with("=== ") {
                    break;
                }
                out.push(lines.next().unwrap());
            }
            while out.last() == Some(&"") {
                out.pop();
            }
            out.join("\n")
        };
        let body = section(&mut lines);
        assert_eq!(lines.next(), Some("--- expect"), "case {id}");
        let (text, spans) = parse_annotation(&section(&mut lines));
        let mut case = ParserCase {
            id: id.parse().expect("numeric case id"),
            title: title.to_string(),
            body,
            text,
            spans,
            blocks: None,
            warnings: None,
        };
        while let Some(l) = lines.peek().copied().and_then(|l| l.strip_prefix("--- ")) {
            lines.next();
            let (key, n) = l.split_once(' ').expect("trailer value");
            let n = n.trim().parse().expect("trailer count");
            match key {
                "blocks" => case.blocks = Some(n),
                "warnings" => case.warnings = Some(n),
                other => panic!("unknown trailer {other}"),
            }
            section(&mut lines);
        }
        cases.push(case);
    }
    cases
}

/// `"a [bold|b [code|c]]"` to plain text and sorted spans in code points.
pub fn parse_annotation(src: &str) -> (String, Vec<(FormatType, usize, usize)>) {
    let chars: Vec<char> = src.chars().collect();
    let mut text = String::new();
    let mut len = 0;
    let mut open: Vec<(FormatType, usize)> = Vec::new();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '\\' => {
                text.push(chars[i + 1]);
                len += 1;
                i += 2;
            }
            '[' => {
                let bar = (i..chars.len()).find(|&j| chars[j] == '|').expect("format name");
                let name: String = chars[i + 1..bar].iter().collect();
                open.push((name.parse().expect("format"), len));
                i = bar + 1;
            }
            ']' => {
                let (f, start) = open.pop().expect("balanced brackets");
                spans.push((f, start, len));
                i += 1;
            }
            c => {
                text.push(c);
                len += 1;
                i += 1;
            }
        }
    }
    assert!(open.is_empty(), "unbalanced annotation: {src}");
    spans.sort();
    (text, spans)
}

#[derive(Debug, Clone)]
pub struct StatsCase {
    pub post_id: u64,
    pub total_words: usize,
    pub any_words: usize,
    /// Words of every instance, per format, in document order.
    pub instances: Vec<(FormatType, Vec<usize>)>,
    pub body: String,
}

/// Reads `stats_answers.txt`.
pub fn stats_cases() -> Vec<StatsCase> {
    read_fixture("stats_answers.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let f: Vec<&str> = line.splitn(5, '|').map(str::trim).collect();
            let instances = f[3]
                .split_whitespace()
                .map(|entry| {
                    let (name, words) = entry.split_once(':').unwrap();
                    (name.parse().unwrap(), words.split(',').map(|w| w.parse().unwrap()).collect())
                })
                .collect();
            StatsCase {
                post_id: f[0].parse().unwrap(),
                total_words: f[1].parse().unwrap(),
                any_words: f[2].parse().unwrap(),
                instances,
                body: f[4].to_string(),
            }
        })
        .collect()
}
