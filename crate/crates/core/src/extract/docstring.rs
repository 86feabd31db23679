//! Docstring literal decoding and whitespace trimming.

/// Tab stop used when measuring indentation.
const TAB_WIDTH: usize = 8;

/// Trims a docstring the way Python's `inspect.cleandoc` does.
///
/// Tabs are expanded to 8 columns, the first line is stripped, the common
/// leading indentation of the remaining non-blank lines is removed, trailing
/// whitespace is stripped from every line and leading/trailing blank lines
/// are dropped.
pub fn trim_docstring(raw: &str) -> String {
    let expanded = expand_tabs(raw);
    let lines: Vec<&str> = expanded.lines().collect();
    if lines.is_empty() {
        return String::new();
    }

    let indent = lines[1..]
        .iter()
        .filter(|line| !line.trim().is_empty())
        .map(|line| line.len() - line.trim_start().len())
        .min()
        .unwrap_or(0);

    let mut trimmed = Vec::with_capacity(lines.len());
    trimmed.push(lines[0].trim().to_string());
    for line in &lines[1..] {
        let cut = indent.min(line.len() - line.trim_start().len());
        trimmed.push(line[cut..].trim_end().to_string());
    }

    while trimmed.last().is_some_and(|l| l.is_empty()) {
        trimmed.pop();
    }
    let first = trimmed.iter().position(|l| !l.is_empty()).unwrap_or(trimmed.len());
    trimmed.drain(..first);
    trimmed.join("\n")
}

fn expand_tabs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut col = 0;
    for ch in text.chars() {
        match ch {
            '\t' => {
                let pad = TAB_WIDTH - col % TAB_WIDTH;
                out.push_str(&" ".repeat(pad));
                col += pad;
            }
            '\n' | '\r' => {
                out.push(ch);
                col = 0;
            }
            _ => {
                out.push(ch);
                col += 1;
            }
        }
    }
    out
}

/// Decodes the value of a Python string literal token such as `r'''x'''`.
///
/// Returns `None` for f-strings and bytes literals, which are never
/// docstrings.
pub fn string_literal_value(literal: &str) -> Option<String> {
    let quote_at = literal.find(['\'', '"'])?;
    let prefix = literal[..quote_at].to_ascii_lowercase();
    if prefix.contains('f') || prefix.contains('b') || prefix.contains('t') {
        return None;
    }
    let raw = prefix.contains('r');
    let rest = &literal[quote_at..];
    let quote = if rest.starts_with("\"\"\"") || rest.starts_with("'''") {
        &rest[..3]
    } else {
        &rest[..1]
    };
    let body = rest.strip_prefix(quote)?;
    let body = body.strip_suffix(quote).unwrap_or(body);
    Some(if raw { body.to_string() } else { unescape(body) })
}

fn unescape(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        let Some(next) = chars.next() else {
            out.push('\\');
            break;
        };
        match next {
            '\n' => {}
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    chars.next();
                }
            }
            '\\' => out.push('\\'),
            '\'' => out.push('\''),
            '"' => out.push('"'),
            'a' => out.push('\x07'),
            'b' => out.push('\x08'),
            'f' => out.push('\x0c'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            't' => out.push('\t'),
            'v' => out.push('\x0b'),
            'x' => push_code_point(&mut out, &mut chars, 2, "\\x"),
            'u' => push_code_point(&mut out, &mut chars, 4, "\\u"),
            'U' => push_code_point(&mut out, &mut chars, 8, "\\U"),
            '0'..='7' => {
                let mut value = next.to_digit(8).unwrap_or(0);
                for _ in 0..2 {
                    match chars.peek().and_then(|c| c.to_digit(8)) {
                        Some(d) => {
                            value = value * 8 + d;
                            chars.next();
                        }
                        None => break,
                    }
                }
                out.push(char::from_u32(value).unwrap_or(char::REPLACEMENT_CHARACTER));
            }
            // Unknown escapes (and \N{...}) are kept verbatim, as Python does
            // for the former.
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    out
}

fn push_code_point(
    out: &mut String,
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
    digits: usize,
    escape: &str,
) {
    let mut hex = String::with_capacity(digits);
    while hex.len() < digits {
        match chars.peek() {
            Some(c) if c.is_ascii_hexdigit() => {
                hex.push(*c);
                chars.next();
            }
            _ => break,
        }
    }
    match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
        Some(c) if hex.len() == digits => out.push(c),
        _ => {
            out.push_str(escape);
            out.push_str(&hex);
        }
    }
}
