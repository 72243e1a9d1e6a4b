use serde::{Deserialize, Serialize};

use super::DiagnosticsRow;

/// Operational blow-up test on the `max_u` series: growth past
/// `growth_factor × max_u(0)` followed by a plateau, i.e. a window of
/// `plateau_window` steps whose relative spread is at most `plateau_rtol`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUpCriterion {
    pub growth_factor: f64,
    pub plateau_window: usize,
    pub plateau_rtol: f64,
}

impl Default for BlowUpCriterion {
    fn default() -> Self {
        BlowUpCriterion {
            growth_factor: 5.0,
            plateau_window: 200,
            plateau_rtol: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowUpClass {
    Bounded,
    BlowUp,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUpVerdict {
    pub classification: BlowUpClass,
    /// Start of the first plateau window, for blow-up verdicts.
    pub t_detect: Option<f64>,
    pub peak: f64,
}

pub fn classify_blowup(rows: &[DiagnosticsRow], criterion: &BlowUpCriterion) -> BlowUpVerdict {
    let peak = rows.iter().map(|r| r.max_u).fold(f64::NEG_INFINITY, f64::max);
    let Some(first) = rows.first() else {
        return BlowUpVerdict {
            classification: BlowUpClass::Undecided,
            t_detect: None,
            peak,
        };
    };
    let threshold = criterion.growth_factor * first.max_u;
    let Some(reached) = rows.iter().position(|r| r.max_u >= threshold) else {
        return BlowUpVerdict {
            classification: BlowUpClass::Bounded,
            t_detect: None,
            peak,
        };
    };
    let window = criterion.plateau_window;
    for start in reached..rows.len().saturating_sub(window) {
        let span = &rows[start..=start + window];
        let (lo, hi) = span
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.max_u), hi.max(r.max_u)));
        if lo > 0.0 && (hi - lo) / lo <= criterion.plateau_rtol {
            return BlowUpVerdict {
                classification: BlowUpClass::BlowUp,
                t_detect: Some(rows[start].t),
                peak,
            };
        }
    }
    BlowUpVerdict {
        classification: BlowUpClass::Undecided,
        t_detect: None,
        peak,
    }
}
