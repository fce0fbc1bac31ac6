//! Deterministic rule tokenizer for extracted paragraph text.
//!
//! Rules, applied to each whitespace-delimited chunk in order:
//! 1. brackets, quotes and `: ; ! ?` become single-character tokens;
//! 2. a comma becomes its own token unless it sits between two digits;
//! 3. a hyphen with non-hyphen text on both sides becomes a `-` token;
//! 4. a trailing run of periods is detached as one token.

const DETACHED: &[char] = &['(', ')', '[', ']', '{', '}', '"', '\u{201c}', '\u{201d}', ':', ';', '!', '?'];

pub fn tokenize(paragraph: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in paragraph.split_whitespace() {
        for piece in split_detached(chunk) {
            for piece in split_commas(piece) {
                for piece in split_hyphens(piece) {
                    split_trailing_periods(piece, &mut out);
                }
            }
        }
    }
    out
}

fn split_detached(chunk: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in chunk.char_indices() {
        if DETACHED.contains(&c) {
            if start < i {
                out.push(&chunk[start..i]);
            }
            out.push(&chunk[i..i + c.len_utf8()]);
            start = i + c.len_utf8();
        }
    }
    if start < chunk.len() {
        out.push(&chunk[start..]);
    }
    out
}

fn split_commas(piece: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = piece.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(i, c)) in chars.iter().enumerate() {
        if c != ',' {
            continue;
        }
        let digit_before = k > 0 && chars[k - 1].1.is_ascii_digit();
        let digit_after = chars.get(k + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
        if digit_before && digit_after {
            continue;
        }
        if start < i {
            out.push(&piece[start..i]);
        }
        out.push(",");
        start = i + 1;
    }
    if start < piece.len() {
        out.push(&piece[start..]);
    }
    out
}

fn split_hyphens(piece: &str) -> Vec<&str> {
    let first = piece.find(|c| c != '-');
    let last = piece.rfind(|c| c != '-');
    let (Some(first), Some(last)) = (first, last) else {
        return vec![piece];
    };
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in piece.char_indices() {
        if c == '-' && i > first && i < last {
            if start < i {
                out.push(&piece[start..i]);
            }
            out.push("-");
            start = i + 1;
        }
    }
    if start < piece.len() {
        out.push(&piece[start..]);
    }
    out
}

fn split_trailing_periods(piece: &str, out: &mut Vec<String>) {
    let body = piece.trim_end_matches('.');
    if body.is_empty() || body.len() == piece.len() {
        out.push(piece.to_string());
    } else {
        out.push(body.to_string());
        out.push(piece[body.len()..].to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn hyphenated_words_split() {
        assert_eq!(toks("Twenty-Fourth Conference"), ["Twenty", "-", "Fourth", "Conference"]);
    }

    #[test]
    fn brackets_and_colon_detach() {
        assert_eq!(toks("(ROCLING 2022) :"), ["(", "ROCLING", "2022", ")", ":"]);
    }

    #[test]
    fn digit_comma_kept() {
        assert_eq!(toks("188-3,2"), ["188", "-", "3,2"]);
        assert_eq!(toks("88,586 papers"), ["88,586", "papers"]);
    }

    #[test]
    fn proceedings_line() {
        let line = "Proceedings of the Twenty-Fourth Conference on Computational Linguistics and Speech Processing (ROCLING 2022) :";
        assert_eq!(
            toks(line).join(" "),
            "Proceedings of the Twenty - Fourth Conference on Computational Linguistics and Speech Processing ( ROCLING 2022 ) :"
        );
    }

    #[test]
    fn punctuation() {
        assert_eq!(toks("in the world."), ["in", "the", "world", "."]);
        assert_eq!(toks("A, B and C..."), ["A", ",", "B", "and", "C", "..."]);
        assert_eq!(toks("e.g. this"), ["e.g", ".", "this"]);
        assert_eq!(toks("picto-"), ["picto-"]);
        assert_eq!(toks("-5 and a--b"), ["-5", "and", "a", "-", "-", "b"]);
        assert_eq!(toks("\u{201c}quoted\u{201d}"), ["\u{201c}", "quoted", "\u{201d}"]);
    }

    #[test]
    fn empty_input() {
        assert!(toks("").is_empty());
        assert!(toks("   \n\t").is_empty());
    }

    proptest! {
        #[test]
        fn no_empty_tokens_and_idempotent(s in "[a-zA-Z0-9 ,.;:()\\[\\]{}\"!?-]{0,60}") {
            let once = tokenize(&s);
            prop_assert!(once.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(twice, once);
        }
    }
}
