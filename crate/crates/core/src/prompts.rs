//! Prompt templates shipped as text assets.
//!
//! Templates use `{slot}` placeholders; `{{` and `}}` produce literal braces
//! so that JSON examples reach the model with single braces.

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("template has no slot named {0:?}")]
    UnknownSlot(String),
    #[error("slot {0:?} was not provided")]
    MissingSlot(String),
    #[error("unbalanced brace at byte {0}")]
    Unbalanced(usize),
}

macro_rules! asset {
    ($name:literal) => {
        ($name, include_str!(concat!("../assets/prompts/", $name, ".txt")))
    };
}

/// Every shipped template as (name, text).
pub const TEMPLATES: [(&str, &str); 17] = [
    asset!("eval_judgment"),
    asset!("eval_multi_choice"),
    asset!("eval_distance"),
    asset!("eval_open"),
    asset!("judge"),
    asset!("rephrase_open"),
    asset!("rephrase_multi_choice"),
    asset!("generate_options"),
    asset!("convert_judgment"),
    asset!("planner"),
    asset!("executor"),
    asset!("summarizer"),
    asset!("direct"),
    asset!("observer"),
    asset!("react_step"),
    asset!("react_summary"),
    asset!("react_demos"),
];

pub fn template(name: &str) -> &'static str {
    TEMPLATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or_else(|| panic!("no prompt template named {name}"))
}

/// Hex SHA-256 of a template's raw text.
pub fn template_hash(name: &str) -> String {
    hex_sha256(template(name))
}

pub fn hex_sha256(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Names of the slots a template expects, in order of first appearance.
pub fn slots(text: &str) -> Result<Vec<String>, PromptError> {
    let mut out = Vec::new();
    walk(text, |piece| {
        if let Piece::Slot(name) = piece {
            if !out.iter().any(|s| s == name) {
                out.push(name.to_string());
            }
        }
        Ok(())
    })?;
    Ok(out)
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn walk<'a>(text: &'a str, mut f: impl FnMut(Piece<'a>) -> Result<(), PromptError>) -> Result<(), PromptError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                f(Piece::Text(&text[start..i + 1]))?;
                i += 2;
                start = i;
            }
            b'{' => {
                let end = text[i..].find('}').ok_or(PromptError::Unbalanced(i))? + i;
                let name = &text[i + 1..end];
                if name.is_empty() || name.contains('{') {
                    return Err(PromptError::Unbalanced(i));
                }
                f(Piece::Text(&text[start..i]))?;
                f(Piece::Slot(name))?;
                i = end + 1;
                start = i;
            }
            b'}' => return Err(PromptError::Unbalanced(i)),
            _ => i += 1,
        }
    }
    f(Piece::Text(&text[start..]))
}

/// Fills slots; every slot must be provided and every provided value used.
pub fn render(text: &str, values: &[(&str, &str)]) -> Result<String, PromptError> {
    for (k, _) in values {
        if !slots(text)?.iter().any(|s| s == k) {
            return Err(PromptError::UnknownSlot(k.to_string()));
        }
    }
    let mut out = String::with_capacity(text.len());
    walk(text, |piece| {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => {
                let v = values
                    .iter()
                    .find(|(k, _)| *k == name)
                    .ok_or_else(|| PromptError::MissingSlot(name.to_string()))?;
                out.push_str(v.1);
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Renders a named shipped template.
pub fn render_named(name: &str, values: &[(&str, &str)]) -> String {
    render(template(name), values).unwrap_or_else(|e| panic!("template {name}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn braces_and_slots() {
        assert_eq!(render("a {x} {{b}}", &[("x", "1")]).unwrap(), "a 1 {b}");
        assert_eq!(render("{x}", &[]), Err(PromptError::MissingSlot("x".into())));
        assert_eq!(render("x", &[("y", "1")]), Err(PromptError::UnknownSlot("y".into())));
        assert!(render("a } b", &[]).is_err());
    }

    #[test]
    fn shipped_templates_parse() {
        for (name, text) in TEMPLATES {
            if name == "react_demos" {
                continue;
            }
            slots(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(slots(template("planner")).unwrap(), vec!["action_details"]);
        assert_eq!(slots(template("observer")).unwrap(), vec!["USER REQUEST", "actions", "demo_examples"]);
        assert_eq!(
            slots(template("judge")).unwrap(),
            vec!["start", "end", "interval", "open_type", "gt_answer", "pred_answer"]
        );
    }

    #[test]
    fn model_sees_single_braces() {
        let text = render_named("executor", &[("tool_plan", "[]"), ("tool_results", "[]")]);
        assert!(text.contains(r#"{"name": "LocalizeObjects", "arguments": {"image": "image-0", "objects": ["dog", "cat"]}}"#));
        assert!(!text.contains("{{"));
    }
}
