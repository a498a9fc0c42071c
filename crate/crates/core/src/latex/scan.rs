//! Byte-level scanning helpers. All structural characters are ASCII, so
//! byte offsets returned here always fall on char boundaries.

/// Given `pos` at `{`, returns `(inner_start, inner_end, after)` of the
/// balanced group. Escaped braces (`\{`, `\}`) do not count.
pub(crate) fn group_at(s: &str, pos: usize) -> Option<(usize, usize, usize)> {
    delimited_at(s, pos, b'{', b'}')
}

/// Same as [`group_at`] for `[`...`]`.
pub(crate) fn bracket_at(s: &str, pos: usize) -> Option<(usize, usize, usize)> {
    delimited_at(s, pos, b'[', b']')
}

fn delimited_at(s: &str, pos: usize, open: u8, close: u8) -> Option<(usize, usize, usize)> {
    let b = s.as_bytes();
    if b.get(pos) != Some(&open) {
        return None;
    }
    let mut depth = 0usize;
    let mut i = pos;
    while i < b.len() {
        match b[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            c if c == open => depth += 1,
            c if c == close => {
                depth -= 1;
                if depth == 0 {
                    return Some((pos + 1, i, i + 1));
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Skips spaces, tabs and newlines.
pub(crate) fn skip_ws(s: &str, mut pos: usize) -> usize {
    let b = s.as_bytes();
    while pos < b.len() && b[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

/// Skips spaces and tabs only.
pub(crate) fn skip_inline_ws(s: &str, mut pos: usize) -> usize {
    let b = s.as_bytes();
    while pos < b.len() && (b[pos] == b' ' || b[pos] == b'\t') {
        pos += 1;
    }
    pos
}

/// At `pos` pointing to `\`, returns the control word name (letters only)
/// and the offset just past it. `None` for control symbols like `\%`.
pub(crate) fn control_word_at(s: &str, pos: usize) -> Option<(&str, usize)> {
    let b = s.as_bytes();
    if b.get(pos) != Some(&b'\\') {
        return None;
    }
    let start = pos + 1;
    let mut end = start;
    while end < b.len() && b[end].is_ascii_alphabetic() {
        end += 1;
    }
    (end > start).then(|| (&s[start..end], end))
}

/// Length in bytes of the UTF-8 char starting at `pos`.
pub(crate) fn char_len_at(s: &str, pos: usize) -> usize {
    s[pos..].chars().next().map_or(1, char::len_utf8)
}

/// One macro argument at `pos` (after skipping whitespace): a brace group
/// (braces stripped), a control sequence, or a single char. Returns the
/// argument text and the offset after it.
pub(crate) fn argument_at(s: &str, pos: usize) -> Option<(&str, usize)> {
    let pos = skip_ws(s, pos);
    let b = s.as_bytes();
    match b.get(pos)? {
        b'{' => group_at(s, pos).map(|(a, z, after)| (&s[a..z], after)),
        b'}' => None,
        b'\\' => match control_word_at(s, pos) {
            Some((_, end)) => Some((&s[pos..end], end)),
            None => {
                let end = pos + 1 + s[pos + 1..].chars().next().map_or(0, char::len_utf8);
                Some((&s[pos..end], end))
            }
        },
        _ => {
            let end = pos + char_len_at(s, pos);
            Some((&s[pos..end], end))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_group() {
        let s = r"{a{b}\}c}d";
        assert_eq!(group_at(s, 0), Some((1, 8, 9)));
        assert_eq!(&s[1..8], r"a{b}\}c");
    }

    #[test]
    fn unbalanced_group() {
        assert_eq!(group_at("{a{b}", 0), None);
    }

    #[test]
    fn control_words() {
        assert_eq!(control_word_at(r"\cite{x}", 0), Some(("cite", 5)));
        assert_eq!(control_word_at(r"\%", 0), None);
    }

    #[test]
    fn arguments() {
        assert_eq!(argument_at(" {x y}z", 0), Some(("x y", 6)));
        assert_eq!(argument_at(r"\alpha b", 0), Some((r"\alpha", 6)));
        assert_eq!(argument_at("ab", 0), Some(("a", 1)));
        assert_eq!(argument_at("é", 0), Some(("é", 2)));
    }
}
