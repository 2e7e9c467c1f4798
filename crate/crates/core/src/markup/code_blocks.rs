use super::ParseWarning;

/// Result of removing `<pre>` blocks, with a map from every kept character
/// back to its code-point index in the original body.
#[derive(Debug, Clone, Default)]
pub(crate) struct StrippedBody {
    pub text: Vec<char>,
    pub origin: Vec<usize>,
    pub code_blocks: Vec<String>,
    pub warnings: Vec<ParseWarning>,
}

/// Removes every maximal `<pre>...</pre>` region from `body`.
///
/// Returns the remaining text and the block contents (without the `pre`
/// tags) in document order, plus warnings. An unterminated `<pre>` turns the
/// rest of the body into a code block.
pub fn strip_code_blocks(body: &str) -> (String, Vec<String>, Vec<ParseWarning>) {
    let stripped = strip_mapped(body);
    (
        stripped.text.into_iter().collect(),
        stripped.code_blocks,
        stripped.warnings,
    )
}

pub(crate) fn strip_mapped(body: &str) -> StrippedBody {
    let chars: Vec<char> = body.chars().collect();
    let mut out = StrippedBody::default();
    let mut i = 0;
    while i < chars.len() {
        match pre_tag_at(&chars, i) {
            Some((PreTag::Open, open_end)) => {
                let mut depth = 1usize;
                let mut j = open_end;
                let mut closed = None;
                while j < chars.len() {
                    match pre_tag_at(&chars, j) {
                        Some((PreTag::Open, end)) => {
                            depth += 1;
                            j = end;
                        }
                        Some((PreTag::Close, end)) => {
                            depth -= 1;
                            if depth == 0 {
                                closed = Some((j, end));
                                break;
                            }
                            j = end;
                        }
                        None => j += 1,
                    }
                }
                let block_start = i;
                match closed {
                    Some((content_end, after)) => {
                        out.code_blocks
                            .push(chars[open_end..content_end].iter().collect());
                        i = after;
                        while chars.get(i).is_some_and(|&c| c == '\n' || c == '\r') {
                            i += 1;
                        }
                    }
                    None => {
                        out.code_blocks.push(chars[open_end..].iter().collect());
                        out.warnings.push(ParseWarning::new(
                            i,
                            "unterminated <pre>; rest of body treated as a code block",
                        ));
                        i = chars.len();
                    }
                }
                // the block separates what surrounds it like a paragraph break
                while out.text.last().is_some_and(|&c| c == '\n' || c == '\r') {
                    out.text.pop();
                    out.origin.pop();
                }
                if !out.text.is_empty() && i < chars.len() {
                    out.text.push('\n');
                    out.origin.push(block_start);
                }
            }
            Some((PreTag::Close, end)) => {
                out.warnings
                    .push(ParseWarning::new(i, "stray </pre> without an opening tag"));
                i = end;
            }
            None => {
                out.text.push(chars[i]);
                out.origin.push(i);
                i += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PreTag {
    Open,
    Close,
}

/// Recognizes `<pre ...>` or `</pre>` starting at `i`; returns the kind and
/// the index just past the closing `>`.
fn pre_tag_at(chars: &[char], i: usize) -> Option<(PreTag, usize)> {
    if chars.get(i) != Some(&'<') {
        return None;
    }
    let (kind, name_start) = if chars.get(i + 1) == Some(&'/') {
        (PreTag::Close, i + 2)
    } else {
        (PreTag::Open, i + 1)
    };
    let name: String = chars.get(name_start..name_start + 3)?.iter().collect();
    if !name.eq_ignore_ascii_case("pre") {
        return None;
    }
    let after_name = name_start + 3;
    match chars.get(after_name) {
        Some('>') => Some((kind, after_name + 1)),
        Some(c) if c.is_whitespace() || (*c == '/' && kind == PreTag::Open) => {
            let close = chars[after_name..].iter().position(|&c| c == '>')?;
            Some((kind, after_name + close + 1))
        }
        _ => None,
    }
}
