use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::parse::first_quantity;
use super::EvalError;
use crate::corpus::OpenSubtype;
use crate::geometry::{convert_length_to_cm, LengthUnit};
use crate::llmclient::{ChatClient, ChatTurn};
use crate::prompts;

/// Slack applied to the `<= 1 - C` comparison so that errors landing exactly on
/// a threshold (110 vs 100 at C = 0.90) are not lost to rounding.
pub const THRESHOLD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MraConfig {
    pub start: f64,
    pub end: f64,
    pub interval: f64,
}

impl Default for MraConfig {
    fn default() -> Self {
        Self { start: 0.5, end: 0.95, interval: 0.05 }
    }
}

impl MraConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = self.start > 0.0 && self.start < self.end && self.end < 1.0 && self.interval > 0.0;
        if !ok {
            return Err(EvalError::Config(format!(
                "need 0 < start < end < 1 and interval > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Threshold list `start, start + interval, ...` up to `end`.
    ///
    /// The count is rounded rather than truncated, so the defaults give
    /// exactly the ten values 0.50, 0.55, ..., 0.95.
    pub fn thresholds(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.interval).round() as usize + 1;
        (0..n)
            .map(|i| ((self.start + i as f64 * self.interval) * 1e10).round() / 1e10)
            .collect()
    }
}

/// Which normalization `mra` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MraKind {
    Counting,
    Distance,
}

impl TryFrom<OpenSubtype> for MraKind {
    type Error = EvalError;

    fn try_from(s: OpenSubtype) -> Result<Self, EvalError> {
        match s {
            OpenSubtype::Counting => Ok(MraKind::Counting),
            OpenSubtype::Distance => Ok(MraKind::Distance),
            OpenSubtype::Other => Err(EvalError::Config("MRA applies to counting and distance only".into())),
        }
    }
}

/// Relative error, in centimeters for distances. `gt == 0` gives infinity.
pub fn relative_error(
    pred: f64,
    pred_unit: Option<LengthUnit>,
    gt: f64,
    gt_unit: Option<LengthUnit>,
    kind: MraKind,
) -> f64 {
    let (p, g) = match kind {
        MraKind::Counting => (pred, gt),
        MraKind::Distance => match (pred_unit.or(gt_unit), gt_unit.or(pred_unit)) {
            (Some(pu), Some(gu)) => (convert_length_to_cm(pred, pu), convert_length_to_cm(gt, gu)),
            _ => (pred, gt),
        },
    };
    if g == 0.0 {
        return f64::INFINITY;
    }
    (p - g).abs() / g.abs()
}

/// Mean Relative Accuracy of a numeric prediction.
pub fn mra(
    pred: f64,
    pred_unit: Option<LengthUnit>,
    gt: f64,
    gt_unit: Option<LengthUnit>,
    kind: MraKind,
    cfg: &MraConfig,
) -> f64 {
    if !pred.is_finite() {
        return 0.0;
    }
    let err = relative_error(pred, pred_unit, gt, gt_unit, kind);
    let ts = cfg.thresholds();
    let hits = ts.iter().filter(|c| err <= 1.0 - *c + THRESHOLD_EPS).count();
    hits as f64 / ts.len() as f64
}

const FOREIGN_UNITS: [&str; 16] = [
    "km", "kilometer", "kilometers", "yard", "yards", "yd", "mile", "miles", "pixel", "pixels", "px",
    "unit", "units", "dm", "decimeter", "decimeters",
];

fn quantity(text: &str, kind: MraKind) -> Result<Option<(f64, Option<LengthUnit>)>, EvalError> {
    let Some((value, word)) = first_quantity(text) else {
        return Ok(None);
    };
    if kind == MraKind::Counting {
        return Ok(Some((value, None)));
    }
    let unit = match word {
        Some(w) => match w.parse::<LengthUnit>() {
            Ok(u) => Some(u),
            Err(_) if FOREIGN_UNITS.contains(&w.to_ascii_lowercase().as_str()) => {
                return Err(EvalError::UnknownUnit(w))
            }
            Err(_) => None,
        },
        None => None,
    };
    Ok(Some((value, unit)))
}

/// Text form of [`mra`]: parses both answers. An unparsable prediction
/// scores 0; an unparsable ground truth or an out-of-table unit is an error.
pub fn mra_text(pred: &str, gt: &str, kind: MraKind, cfg: &MraConfig) -> Result<f64, EvalError> {
    let (g, gu) = quantity(gt, kind)?.ok_or_else(|| EvalError::Unparsable(gt.to_string()))?;
    let pred = super::parse::answer_span(pred).unwrap_or(pred);
    Ok(match quantity(pred, kind)? {
        Some((p, pu)) => mra(p, pu, g, gu, kind, cfg),
        None => 0.0,
    })
}

static OUTPUT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)output:\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:e[-+]?\d+)?)").unwrap());

/// Score from the last `output: <float>` line of a judge reply, clamped to [0, 1].
pub fn parse_judge_output(reply: &str) -> Option<f64> {
    reply
        .lines()
        .rev()
        .find_map(|l| OUTPUT_LINE.captures(l).and_then(|c| c[1].parse::<f64>().ok()))
        .filter(|v| v.is_finite())
        .map(|v| v.clamp(0.0, 1.0))
}

/// An LLM asked to run the MRA algorithm itself.
#[derive(Clone)]
pub struct Judge {
    pub client: Arc<dyn ChatClient>,
    pub cfg: MraConfig,
}

pub fn judge_prompt(gt: &str, pred: &str, kind: MraKind, cfg: &MraConfig) -> String {
    let open_type = match kind {
        MraKind::Counting => "counting",
        MraKind::Distance => "distance",
    };
    prompts::render_named(
        "judge",
        &[
            ("start", &cfg.start.to_string()),
            ("end", &cfg.end.to_string()),
            ("interval", &cfg.interval.to_string()),
            ("open_type", open_type),
            ("gt_answer", gt),
            ("pred_answer", pred),
        ],
    )
}

pub fn judge_with_llm(
    gt: &str,
    pred: &str,
    kind: MraKind,
    cfg: &MraConfig,
    client: &dyn ChatClient,
) -> Result<f64, EvalError> {
    let reply = client
        .chat(&[ChatTurn::user(judge_prompt(gt, pred, kind, cfg))])
        .map_err(|e| EvalError::JudgeUnavailable(e.to_string()))?;
    parse_judge_output(&reply)
        .ok_or_else(|| EvalError::JudgeUnavailable(format!("no output line in {reply:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::ScriptedClient;

    #[test]
    fn default_thresholds() {
        let ts = MraConfig::default().thresholds();
        assert_eq!(ts, vec![0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]);
        assert!(MraConfig { start: 0.9, end: 0.5, interval: 0.05 }.validate().is_err());
    }

    #[test]
    fn pinned_cases() {
        let cfg = MraConfig::default();
        assert_eq!(mra(100.0, None, 100.0, None, MraKind::Counting, &cfg), 1.0);
        assert_eq!(mra(110.0, None, 100.0, None, MraKind::Counting, &cfg), 0.9);
        assert_eq!(mra(3.0, None, 0.0, None, MraKind::Counting, &cfg), 0.0);
        assert_eq!(mra_text("1 m", "100 cm", MraKind::Distance, &cfg).unwrap(), 1.0);
        assert_eq!(mra_text("150", "1.5 m", MraKind::Distance, &cfg).unwrap(), 0.0);
        assert_eq!(mra_text("1.5", "1.5 m", MraKind::Distance, &cfg).unwrap(), 1.0);
        assert_eq!(mra_text("no idea", "2 m", MraKind::Distance, &cfg).unwrap(), 0.0);
        assert!(matches!(mra_text("3 yards", "2 m", MraKind::Distance, &cfg), Err(EvalError::UnknownUnit(_))));
    }

    #[test]
    fn judge_lines() {
        assert_eq!(parse_judge_output("output: 0.83"), Some(0.83));
        assert_eq!(parse_judge_output("step 1...\nstep 2\noutput: 1.0"), Some(1.0));
        assert_eq!(parse_judge_output("output: 1.7"), Some(1.0));
        assert_eq!(parse_judge_output("the score is high"), None);
        let c = ScriptedClient::new(["output: 0.83", "nope"]);
        let cfg = MraConfig::default();
        assert_eq!(judge_with_llm("100", "110", MraKind::Counting, &cfg, &c).unwrap(), 0.83);
        assert!(judge_with_llm("100", "110", MraKind::Counting, &cfg, &c).is_err());
        let prompt = &c.prompts()[0][0].text;
        assert!(prompt.contains("- start=0.5\n- end=0.95\n- interval=0.05"));
        assert!(prompt.contains("- Type: counting"));
    }
}
