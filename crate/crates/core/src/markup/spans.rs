//! Two-pass inline scanner.
//!
//! The first pass lexes the input into characters, decoded entities and HTML
//! tags. The second pass walks those items, tracking open taxonomy tags on a
//! stack and pairing markdown delimiters by forward search, emitting the plain
//! text and the raw span list.

use super::{HighlightSpan, ParseWarning};
use crate::format::{tag_format, FormatType};

#[derive(Debug, Clone, PartialEq, Eq)]
enum ItemKind {
    /// Raw source character, eligible for markdown interpretation.
    Char(char),
    /// Character produced by an entity reference; always literal.
    Entity(char),
    Tag { name: String, closing: bool, self_closing: bool },
    Comment,
}

#[derive(Debug, Clone)]
struct Item {
    kind: ItemKind,
    start: usize,
    end: usize,
}

impl Item {
    fn char(&self) -> Option<char> {
        match self.kind {
            ItemKind::Char(c) => Some(c),
            _ => None,
        }
    }

    fn is_char(&self, c: char) -> bool {
        self.char() == Some(c)
    }

    fn is_whitespace_char(&self) -> bool {
        match self.kind {
            ItemKind::Char(c) | ItemKind::Entity(c) => c.is_whitespace(),
            _ => false,
        }
    }

    fn is_alnum_char(&self) -> bool {
        match self.kind {
            ItemKind::Char(c) | ItemKind::Entity(c) => c.is_alphanumeric(),
            _ => false,
        }
    }
}

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "li", "ul", "ol", "blockquote", "hr", "table", "thead", "tbody", "tr", "td",
    "th", "dl", "dt", "dd", "h1", "h2", "h3", "h4", "h5", "h6",
];

/// Output of the scanner in the coordinates of its input.
#[derive(Debug, Clone, Default)]
pub(crate) struct Extraction {
    pub plain: Vec<char>,
    /// Source range `[start, end)` (code points of the input) of every plain character.
    pub origin: Vec<(usize, usize)>,
    pub spans: Vec<HighlightSpan>,
    pub warnings: Vec<ParseWarning>,
}

pub(crate) fn extract(chars: &[char]) -> Extraction {
    let items = lex(chars);
    let mut walker = Walker {
        source: chars,
        items: &items,
        out: Extraction::default(),
        open: Vec::new(),
        raw_spans: Vec::new(),
        code_depth: 0,
        pending_break: None,
    };
    walker.process(0, items.len());
    for open in std::mem::take(&mut walker.open) {
        walker.out.warnings.push(ParseWarning::new(
            open.src,
            format!("unterminated <{}>; span dropped", open.tag),
        ));
    }
    let Walker {
        mut out, raw_spans, ..
    } = walker;
    out.spans = finalize_spans(&out.plain, raw_spans);
    out
}

fn lex(chars: &[char]) -> Vec<Item> {
    let mut items = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            if let Some((kind, end)) = lex_tag(chars, i) {
                items.push(Item { kind, start: i, end });
                i = end;
                continue;
            }
        } else if c == '&' {
            if let Some((decoded, end)) = lex_entity(chars, i) {
                items.push(Item {
                    kind: ItemKind::Entity(decoded),
                    start: i,
                    end,
                });
                i = end;
                continue;
            }
        }
        items.push(Item {
            kind: ItemKind::Char(c),
            start: i,
            end: i + 1,
        });
        i += 1;
    }
    items
}

fn lex_tag(chars: &[char], start: usize) -> Option<(ItemKind, usize)> {
    let rest = &chars[start..];
    if rest.len() >= 4 && rest[1] == '!' && rest[2] == '-' && rest[3] == '-' {
        return (start + 4..chars.len().saturating_sub(2))
            .find(|&j| chars[j..j + 3] == ['-', '-', '>'])
            .map(|j| (ItemKind::Comment, j + 3));
    }
    let mut j = start + 1;
    let closing = chars.get(j) == Some(&'/');
    if closing {
        j += 1;
    }
    let name_start = j;
    if !chars.get(j).is_some_and(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    while chars.get(j).is_some_and(|c| c.is_ascii_alphanumeric()) {
        j += 1;
    }
    let name: String = chars[name_start..j].iter().collect::<String>().to_ascii_lowercase();
    match chars.get(j) {
        Some('>') | Some('/') => {}
        Some(c) if c.is_whitespace() => {}
        _ => return None,
    }
    let mut quote: Option<char> = None;
    while j < chars.len() {
        let c = chars[j];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '<' => return None,
            None if c == '>' => {
                let self_closing = j > name_start && chars[j - 1] == '/';
                return Some((
                    ItemKind::Tag {
                        name,
                        closing,
                        self_closing,
                    },
                    j + 1,
                ));
            }
            None => {}
        }
        j += 1;
    }
    None
}

fn lex_entity(chars: &[char], start: usize) -> Option<(char, usize)> {
    let semi = chars[start + 1..]
        .iter()
        .take(12)
        .position(|&c| c == ';')?
        + start
        + 1;
    let body: String = chars[start + 1..semi].iter().collect();
    let decoded = if let Some(num) = body.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        char::from_u32(code)?
    } else {
        match body.as_str() {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            "nbsp" => ' ',
            _ => return None,
        }
    };
    Some((decoded, semi + 1))
}

struct OpenTag {
    format: FormatType,
    tag: String,
    plain_start: usize,
    src: usize,
}

struct Walker<'a> {
    source: &'a [char],
    items: &'a [Item],
    out: Extraction,
    open: Vec<OpenTag>,
    raw_spans: Vec<(FormatType, usize, usize)>,
    code_depth: usize,
    /// A block boundary waiting for the next character; holds the tag's source range.
    pending_break: Option<(usize, usize)>,
}

impl Walker<'_> {
    fn push(&mut self, c: char, origin: (usize, usize)) {
        if let Some(brk) = self.pending_break.take() {
            if c != '\n' && self.out.plain.last().is_some_and(|&last| last != '\n') {
                self.out.plain.push('\n');
                self.out.origin.push(brk);
            }
        }
        self.out.plain.push(c);
        self.out.origin.push(origin);
    }

    fn request_break(&mut self, item: &Item) {
        if !self.out.plain.is_empty() {
            self.pending_break = Some((item.start, item.end));
        }
    }

    fn push_source(&mut self, item: &Item) {
        match item.kind {
            ItemKind::Char(c) | ItemKind::Entity(c) => self.push(c, (item.start, item.end)),
            _ => {
                for k in item.start..item.end {
                    self.push(self.source[k], (k, k + 1));
                }
            }
        }
    }

    fn process(&mut self, lo: usize, hi: usize) {
        let items = self.items;
        let mut i = lo;
        while i < hi {
            let item = &items[i];
            match &item.kind {
                ItemKind::Tag { .. } => {
                    self.handle_tag(item);
                    i += 1;
                }
                ItemKind::Comment => i += 1,
                ItemKind::Entity(c) => {
                    self.push(*c, (item.start, item.end));
                    i += 1;
                }
                ItemKind::Char(c) => {
                    let c = *c;
                    if self.code_depth == 0 {
                        let consumed = match c {
                            '`' => self.try_backtick(i, hi),
                            '#' => self.try_heading(i, hi),
                            '*' | '_' => self.try_emphasis(i, hi),
                            _ => None,
                        };
                        if let Some(next) = consumed {
                            i = next;
                            continue;
                        }
                        if matches!(c, '`' | '*' | '_') {
                            // push the whole delimiter run so a failed opener is not retried mid-run
                            let n = run_len(items, i, hi, c);
                            for k in i..i + n {
                                self.push_source(&items[k]);
                            }
                            i += n;
                            continue;
                        }
                    }
                    self.push(c, (item.start, item.end));
                    i += 1;
                }
            }
        }
    }

    fn handle_tag(&mut self, item: &Item) {
        let ItemKind::Tag {
            name,
            closing,
            self_closing,
        } = &item.kind
        else {
            return;
        };
        if name == "br" {
            self.push('\n', (item.start, item.end));
            return;
        }
        let is_block = BLOCK_TAGS.contains(&name.as_str());
        let Some(format) = tag_format(name) else {
            if is_block {
                self.request_break(item);
            }
            return;
        };
        if *self_closing {
            return;
        }
        if !closing {
            if is_block {
                self.request_break(item);
            }
            if format == FormatType::Code {
                self.code_depth += 1;
            }
            self.open.push(OpenTag {
                format,
                tag: name.clone(),
                plain_start: self.out.plain.len(),
                src: item.start,
            });
            return;
        }
        match self.open.iter().rposition(|o| &o.tag == name) {
            Some(pos) => {
                let open = self.open.remove(pos);
                if format == FormatType::Code {
                    self.code_depth -= 1;
                }
                self.raw_spans
                    .push((open.format, open.plain_start, self.out.plain.len()));
                if is_block {
                    self.request_break(item);
                }
            }
            None => self.out.warnings.push(ParseWarning::new(
                item.start,
                format!("closing </{name}> without an opening tag"),
            )),
        }
    }

    fn try_backtick(&mut self, i: usize, hi: usize) -> Option<usize> {
        let items = self.items;
        let n = run_len(items, i, hi, '`');
        let mut j = i + n;
        while j < hi {
            if is_paragraph_break(items, j, hi) {
                return None;
            }
            if items[j].is_char('`') {
                let m = run_len(items, j, hi, '`');
                if m == n {
                    break;
                }
                j += m;
            } else {
                j += 1;
            }
        }
        if j >= hi || j == i + n {
            return None;
        }
        let start = self.out.plain.len();
        for item in &items[i + n..j] {
            self.push_source(item);
        }
        self.raw_spans
            .push((FormatType::Code, start, self.out.plain.len()));
        Some(j + n)
    }

    fn try_heading(&mut self, i: usize, hi: usize) -> Option<usize> {
        let items = self.items;
        let at_line_start = i == 0
            || match &items[i - 1].kind {
                ItemKind::Char('\n') => true,
                ItemKind::Tag { name, .. } => name == "br" || BLOCK_TAGS.contains(&name.as_str()),
                _ => false,
            };
        if !at_line_start {
            return None;
        }
        let n = run_len(items, i, hi, '#');
        if n > 6 {
            return None;
        }
        let after = i + n;
        if after < hi && !(items[after].is_char(' ') || items[after].is_char('\t')) {
            return None;
        }
        let line_end = (after..hi)
            .find(|&k| items[k].is_char('\n'))
            .unwrap_or(hi);
        let mut lo = after;
        while lo < line_end && items[lo].is_whitespace_char() {
            lo += 1;
        }
        let mut end = line_end;
        while end > lo && items[end - 1].is_whitespace_char() {
            end -= 1;
        }
        // optional closing run of '#' preceded by whitespace
        let mut k = end;
        while k > lo && items[k - 1].is_char('#') {
            k -= 1;
        }
        if k < end && (k == lo || items[k - 1].is_whitespace_char()) {
            end = k;
            while end > lo && items[end - 1].is_whitespace_char() {
                end -= 1;
            }
        }
        if lo >= end {
            return None;
        }
        let start = self.out.plain.len();
        self.process(lo, end);
        self.raw_spans
            .push((FormatType::Heading, start, self.out.plain.len()));
        Some(line_end)
    }

    fn try_emphasis(&mut self, i: usize, hi: usize) -> Option<usize> {
        let items = self.items;
        let c = items[i].char()?;
        let n = run_len(items, i, hi, c);
        let allowed = if c == '_' { n == 2 } else { (1..=3).contains(&n) };
        if !allowed {
            return None;
        }
        let inner_lo = i + n;
        if inner_lo >= hi || items[inner_lo].is_whitespace_char() {
            return None;
        }
        if c == '_' && i > 0 && items[i - 1].is_alnum_char() {
            return None;
        }
        let mut j = inner_lo;
        let closer = loop {
            if j >= hi || is_paragraph_break(items, j, hi) {
                return None;
            }
            if items[j].is_char(c) {
                let m = run_len(items, j, hi, c);
                let flanked = !items[j - 1].is_whitespace_char();
                let right_ok =
                    c != '_' || j + m >= items.len() || !items[j + m].is_alnum_char();
                if m == n && j > inner_lo && flanked && right_ok {
                    break j;
                }
                j += m;
            } else {
                j += 1;
            }
        };
        let start = self.out.plain.len();
        self.process(inner_lo, closer);
        let end = self.out.plain.len();
        match n {
            1 => self.raw_spans.push((FormatType::Italic, start, end)),
            2 => self.raw_spans.push((FormatType::Bold, start, end)),
            _ => {
                self.raw_spans.push((FormatType::Italic, start, end));
                self.raw_spans.push((FormatType::Bold, start, end));
            }
        }
        Some(closer + n)
    }
}

fn run_len(items: &[Item], i: usize, hi: usize, c: char) -> usize {
    items[i..hi].iter().take_while(|it| it.is_char(c)).count()
}

/// A newline followed (after optional blanks) by another newline.
fn is_paragraph_break(items: &[Item], j: usize, hi: usize) -> bool {
    if !items[j].is_char('\n') {
        return false;
    }
    items[j + 1..hi]
        .iter()
        .take_while(|it| it.is_char(' ') || it.is_char('\t') || it.is_char('\r') || it.is_char('\n'))
        .any(|it| it.is_char('\n'))
}

/// Trims spans to non-whitespace content, drops empty ones, and removes
/// same-type spans that overlap an earlier (outer) span of that type.
fn finalize_spans(plain: &[char], raw: Vec<(FormatType, usize, usize)>) -> Vec<HighlightSpan> {
    let mut trimmed: Vec<(FormatType, usize, usize)> = raw
        .into_iter()
        .filter_map(|(format, mut start, mut end)| {
            while start < end && plain[start].is_whitespace() {
                start += 1;
            }
            while end > start && plain[end - 1].is_whitespace() {
                end -= 1;
            }
            (start < end).then_some((format, start, end))
        })
        .collect();
    trimmed.sort_by_key(|&(f, s, e)| (f, s, std::cmp::Reverse(e)));
    let mut kept: Vec<(FormatType, usize, usize)> = Vec::with_capacity(trimmed.len());
    for span in trimmed {
        if let Some(last) = kept.last() {
            if last.0 == span.0 && span.1 < last.2 {
                continue;
            }
        }
        kept.push(span);
    }
    kept.sort_by_key(|&(f, s, e)| (s, e, f));
    kept.into_iter()
        .map(|(format, start, end)| HighlightSpan {
            format,
            start,
            end,
            content: plain[start..end].iter().collect(),
        })
        .collect()
}
