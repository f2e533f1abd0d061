use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Format, OpenSubtype};
use crate::geometry::LengthUnit;

/// A model response reduced to something comparable with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParsedAnswer {
    Choice { letter: char },
    YesNo { yes: bool },
    Scalar { value: f64, unit: Option<LengthUnit> },
    Matrix { rows: Vec<Vec<f64>> },
    Raw { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    ChoiceLetter,
    YesNo,
    ScalarWithUnit,
    Scalar,
    Matrix,
    RawText,
}

impl ParsedAnswer {
    pub fn kind(&self) -> AnswerKind {
        match self {
            ParsedAnswer::Choice { .. } => AnswerKind::ChoiceLetter,
            ParsedAnswer::YesNo { .. } => AnswerKind::YesNo,
            ParsedAnswer::Scalar { unit: Some(_), .. } => AnswerKind::ScalarWithUnit,
            ParsedAnswer::Scalar { unit: None, .. } => AnswerKind::Scalar,
            ParsedAnswer::Matrix { .. } => AnswerKind::Matrix,
            ParsedAnswer::Raw { .. } => AnswerKind::RawText,
        }
    }
}

static ANSWER_SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<answer>(.*?)</answer>").unwrap());
static PAREN_LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([A-Z])\)").unwrap());
static LEADING_LETTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\**\s*([A-Z])(?:[.:)\]*]|\s*$)").unwrap());
static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());
const NUM: &str = r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+";
static QUANTITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r#"(?i)(?P<a>{NUM})(?:\s*(?:-|–|~|to)\s*(?P<b>{NUM}))?(?:\s*(?:distance_unit\s*)?(?P<u>[a-z]+\.?|"|'))?"#
    ))
    .unwrap()
});
static MATRIX_ROW: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(NUM).unwrap());

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    "twenty",
];

/// Content of the last `<answer>` span, if any.
pub fn answer_span(text: &str) -> Option<&str> {
    ANSWER_SPAN.captures_iter(text).last().map(|c| c.get(1).unwrap().as_str().trim())
}

fn parse_num(s: &str) -> Option<f64> {
    s.replace(',', "").parse().ok()
}

/// First number in `text` with the word after it; a range collapses to its
/// larger end.
pub fn first_quantity(text: &str) -> Option<(f64, Option<String>)> {
    let caps = QUANTITY.captures(text)?;
    let a = parse_num(&caps["a"])?;
    let value = match caps.name("b").and_then(|b| parse_num(b.as_str())) {
        Some(b) => a.max(b),
        None => a,
    };
    let unit = caps.name("u").map(|u| u.as_str().trim_end_matches('.').to_string());
    Some((value, unit))
}

fn number_word(text: &str) -> Option<f64> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .find_map(|w| NUMBER_WORDS.iter().position(|n| n.eq_ignore_ascii_case(w)))
        .map(|i| i as f64)
}

fn parse_choice(text: &str) -> Option<char> {
    if let Some(c) = PAREN_LETTER.captures_iter(text).last() {
        return c[1].chars().next();
    }
    LEADING_LETTER.captures(text).and_then(|c| c[1].chars().next())
}

fn parse_matrix(text: &str) -> Option<Vec<Vec<f64>>> {
    let start = text.find("[[")?;
    let rows: Vec<Vec<f64>> = MATRIX_ROW
        .captures_iter(&text[start..])
        .map(|c| NUMBER.find_iter(&c[1]).filter_map(|m| parse_num(m.as_str())).collect::<Vec<_>>())
        .filter(|r| !r.is_empty())
        .collect();
    let width = rows.first()?.len();
    rows.iter().all(|r| r.len() == width).then_some(rows)
}

/// Extracts an answer from free-form model output. Never fails: anything
/// unrecognized comes back as raw text.
pub fn parse_answer(text: &str, format: Format, subtype: Option<OpenSubtype>) -> ParsedAnswer {
    let body = answer_span(text).unwrap_or(text);
    let raw = || ParsedAnswer::Raw { text: body.trim().to_string() };
    match format {
        Format::MultiChoice => parse_choice(body).map(|letter| ParsedAnswer::Choice { letter }),
        Format::Judgment => YES_NO
            .captures(body)
            .map(|c| ParsedAnswer::YesNo { yes: c[1].eq_ignore_ascii_case("yes") }),
        Format::OpenEnded => match subtype.unwrap_or(OpenSubtype::Other) {
            OpenSubtype::Distance => first_quantity(body).map(|(value, unit)| ParsedAnswer::Scalar {
                value,
                unit: unit.and_then(|u| u.parse().ok()),
            }),
            OpenSubtype::Counting => first_quantity(body)
                .map(|(v, _)| v)
                .or_else(|| number_word(body))
                .map(|value| ParsedAnswer::Scalar { value, unit: None }),
            OpenSubtype::Other => parse_matrix(body).map(|rows| ParsedAnswer::Matrix { rows }),
        },
    }
    .unwrap_or_else(raw)
}
