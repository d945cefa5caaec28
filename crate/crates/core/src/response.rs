//! Participant responses and the tolerant parser that turns raw text into them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SameDiff {
    Same,
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OldNew {
    Old,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Digits,
    SameDiff,
    OldNew,
    City,
    OptionLetter,
    FreeText,
}

/// What a pending question accepts, with any vocabulary the parser needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSpec {
    Digits,
    SameDiff,
    OldNew,
    City { cities: Vec<String> },
    OptionLetter { n_options: usize },
    FreeText,
}

impl ResponseSpec {
    pub fn kind(&self) -> ResponseKind {
        match self {
            ResponseSpec::Digits => ResponseKind::Digits,
            ResponseSpec::SameDiff => ResponseKind::SameDiff,
            ResponseSpec::OldNew => ResponseKind::OldNew,
            ResponseSpec::City { .. } => ResponseKind::City,
            ResponseSpec::OptionLetter { .. } => ResponseKind::OptionLetter,
            ResponseSpec::FreeText => ResponseKind::FreeText,
        }
    }
}

/// A response in canonical form.
///
/// `Unparseable` keeps the raw text; it is accepted for any question and is
/// always scored as incorrect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedResponse {
    Digits(Vec<u8>),
    SameDiff(SameDiff),
    OldNew(OldNew),
    City(String),
    OptionLetter(char),
    FreeText(String),
    Unparseable(String),
}

impl ParsedResponse {
    pub fn kind(&self) -> Option<ResponseKind> {
        Some(match self {
            ParsedResponse::Digits(_) => ResponseKind::Digits,
            ParsedResponse::SameDiff(_) => ResponseKind::SameDiff,
            ParsedResponse::OldNew(_) => ResponseKind::OldNew,
            ParsedResponse::City(_) => ResponseKind::City,
            ParsedResponse::OptionLetter(_) => ResponseKind::OptionLetter,
            ParsedResponse::FreeText(_) => ResponseKind::FreeText,
            ParsedResponse::Unparseable(_) => return None,
        })
    }

    /// Zero-based option index for an option letter.
    pub fn option_index(&self) -> Option<usize> {
        match self {
            ParsedResponse::OptionLetter(c) if c.is_ascii_uppercase() => {
                Some((*c as u8 - b'A') as usize)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("could not parse {kind:?} response from {raw:?}")]
pub struct Unparseable {
    pub kind: ResponseKind,
    pub raw: String,
}

/// Parses raw participant text against `spec`.
///
/// Digits inside `<<d>>` markers are taken in order when any marker is
/// present; otherwise every digit character counts. Option letters are
/// matched case-insensitively at the start of the answer. Binary judgements
/// take whichever keyword occurs first.
pub fn parse_response(raw: &str, spec: &ResponseSpec) -> Result<ParsedResponse, Unparseable> {
    let fail = || Unparseable {
        kind: spec.kind(),
        raw: raw.to_string(),
    };
    match spec {
        ResponseSpec::Digits => {
            let digits = parse_digits(raw);
            if digits.is_empty() {
                Err(fail())
            } else {
                Ok(ParsedResponse::Digits(digits))
            }
        }
        ResponseSpec::SameDiff => match first_keyword(raw, &["same", "different"]) {
            Some(0) => Ok(ParsedResponse::SameDiff(SameDiff::Same)),
            Some(_) => Ok(ParsedResponse::SameDiff(SameDiff::Different)),
            None => Err(fail()),
        },
        ResponseSpec::OldNew => match first_keyword(raw, &["old", "new"]) {
            Some(0) => Ok(ParsedResponse::OldNew(OldNew::Old)),
            Some(_) => Ok(ParsedResponse::OldNew(OldNew::New)),
            None => Err(fail()),
        },
        ResponseSpec::City { cities } => {
            let refs: Vec<&str> = cities.iter().map(String::as_str).collect();
            match first_keyword(raw, &refs) {
                Some(i) => Ok(ParsedResponse::City(cities[i].clone())),
                None => Err(fail()),
            }
        }
        ResponseSpec::OptionLetter { n_options } => {
            parse_option_letter(raw, *n_options).ok_or_else(fail)
        }
        ResponseSpec::FreeText => Ok(ParsedResponse::FreeText(raw.trim().to_string())),
    }
}

/// Like [`parse_response`] but folds failures into `ParsedResponse::Unparseable`.
pub fn parse_lenient(raw: &str, spec: &ResponseSpec) -> ParsedResponse {
    parse_response(raw, spec).unwrap_or_else(|e| ParsedResponse::Unparseable(e.raw))
}

fn parse_digits(raw: &str) -> Vec<u8> {
    let mut marked = Vec::new();
    let mut rest = raw;
    let mut saw_marker = false;
    while let Some(start) = rest.find("<<") {
        let after = &rest[start + 2..];
        let Some(end) = after.find(">>") else { break };
        saw_marker = true;
        marked.extend(digit_values(&after[..end]));
        rest = &after[end + 2..];
    }
    if saw_marker {
        marked
    } else {
        digit_values(raw)
    }
}

fn digit_values(s: &str) -> Vec<u8> {
    s.chars()
        .filter_map(|c| c.to_digit(10).map(|d| d as u8))
        .collect()
}

fn parse_option_letter(raw: &str, n_options: usize) -> Option<ParsedResponse> {
    let mut text = raw.trim_start_matches(|c: char| !c.is_alphanumeric());
    for prefix in ["answer", "option"] {
        if text.get(..prefix.len()).is_some_and(|h| h.eq_ignore_ascii_case(prefix)) {
            text = text[prefix.len()..].trim_start_matches(|c: char| !c.is_alphanumeric());
            break;
        }
    }
    let mut chars = text.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    let boundary = chars.next().is_none_or(|c| !c.is_alphanumeric());
    let last = (b'A' + n_options.min(26) as u8 - 1) as char;
    (boundary && ('A'..=last).contains(&letter)).then_some(ParsedResponse::OptionLetter(letter))
}

/// Index of the keyword whose first whole-word, case-insensitive occurrence
/// comes earliest in `text`.
fn first_keyword(text: &str, keywords: &[&str]) -> Option<usize> {
    let lower = text.to_lowercase();
    keywords
        .iter()
        .enumerate()
        .filter_map(|(i, kw)| find_word(&lower, &kw.to_lowercase()).map(|pos| (pos, i)))
        .min()
        .map(|(_, i)| i)
}

fn find_word(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(off) = haystack[from..].find(needle) {
        let start = from + off;
        let end = start + needle.len();
        let before_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if before_ok && after_ok {
            return Some(start);
        }
        from = start + 1;
        while !haystack.is_char_boundary(from) {
            from += 1;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn marker_digits_in_order() {
        let r = parse_response("press <<2>>. press <<8>>. press <<4>>.", &ResponseSpec::Digits);
        assert_eq!(r.unwrap(), ParsedResponse::Digits(vec![2, 8, 4]));
    }

    #[test]
    fn bare_digits() {
        let r = parse_response("3917", &ResponseSpec::Digits).unwrap();
        assert_eq!(r, ParsedResponse::Digits(vec![3, 9, 1, 7]));
        let r = parse_response("3 9 1 7", &ResponseSpec::Digits).unwrap();
        assert_eq!(r, ParsedResponse::Digits(vec![3, 9, 1, 7]));
    }

    #[test]
    fn no_digits_is_unparseable() {
        let err = parse_response("I don't remember", &ResponseSpec::Digits).unwrap_err();
        assert_eq!(err.kind, ResponseKind::Digits);
        assert_eq!(
            parse_lenient("I don't remember", &ResponseSpec::Digits),
            ParsedResponse::Unparseable("I don't remember".into())
        );
    }

    #[test]
    fn option_letters() {
        let spec = ResponseSpec::OptionLetter { n_options: 4 };
        assert_eq!(parse_response("b", &spec).unwrap(), ParsedResponse::OptionLetter('B'));
        assert_eq!(
            parse_response("(C) the river", &spec).unwrap(),
            ParsedResponse::OptionLetter('C')
        );
        assert_eq!(
            parse_response("Answer: D", &spec).unwrap(),
            ParsedResponse::OptionLetter('D')
        );
        assert!(parse_response("E", &spec).is_err());
        assert!(parse_response("Because", &spec).is_err());
    }

    #[test]
    fn first_keyword_wins() {
        let r = parse_response("Same, not different", &ResponseSpec::SameDiff).unwrap();
        assert_eq!(r, ParsedResponse::SameDiff(SameDiff::Same));
        let r = parse_response("It's new (not old)", &ResponseSpec::OldNew).unwrap();
        assert_eq!(r, ParsedResponse::OldNew(OldNew::New));
        // "newer" is not the keyword "new"
        assert!(parse_response("newer", &ResponseSpec::OldNew).is_err());
    }

    #[test]
    fn city_matching() {
        let spec = ResponseSpec::City {
            cities: vec!["Boston".into(), "New York".into()],
        };
        let r = parse_response("Alice lives in new york now.", &spec).unwrap();
        assert_eq!(r, ParsedResponse::City("New York".into()));
        assert!(parse_response("somewhere", &spec).is_err());
    }

    proptest! {
        #[test]
        fn parse_never_panics(raw in "\\PC{0,64}") {
            for spec in [
                ResponseSpec::Digits,
                ResponseSpec::SameDiff,
                ResponseSpec::OldNew,
                ResponseSpec::City { cities: vec!["Denver".into()] },
                ResponseSpec::OptionLetter { n_options: 4 },
                ResponseSpec::FreeText,
            ] {
                let _ = parse_lenient(&raw, &spec);
            }
        }

        #[test]
        fn digits_survive_formatting(ds in proptest::collection::vec(0u8..10, 1..20)) {
            let plain: String = ds.iter().map(|d| char::from(b'0' + d)).collect();
            let marked: String = ds.iter().map(|d| format!("press <<{d}>>. ")).collect();
            prop_assert_eq!(parse_response(&plain, &ResponseSpec::Digits).unwrap(), ParsedResponse::Digits(ds.clone()));
            prop_assert_eq!(parse_response(&marked, &ResponseSpec::Digits).unwrap(), ParsedResponse::Digits(ds));
        }
    }
}
