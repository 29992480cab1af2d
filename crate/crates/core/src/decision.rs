//! Trust indicators fed by both predictors and the rule table acting on them.
//!
//! Each channel (AR, NN) keeps an integer indicator that increments when the
//! channel's error leaves its threshold, at most once per transitory window of
//! `k` steps. Both indicators fall back to zero once `reset_window` steps
//! pass without an increment. The pair of indicator categories selects an action
//! from a total 5×5 table.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    /// AR error threshold, °C.
    pub eps_ar: f64,
    /// NN error threshold, °C.
    pub eps_nn: f64,
    pub alpha: u32,
    pub beta: u32,
    /// Transitory window `k`, in steps.
    pub transitory_len: u32,
    pub reset_window: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            eps_ar: 1.0,
            eps_nn: 2.0,
            alpha: 3,
            beta: 5,
            transitory_len: 4,
            reset_window: 30,
        }
    }
}

impl ThresholdConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.eps_ar > 0.0 && self.eps_ar.is_finite()) {
            v.push(format!(
                "thresholds.eps_ar must be positive, got {}",
                self.eps_ar
            ));
        }
        if !(self.eps_nn > 0.0 && self.eps_nn.is_finite()) {
            v.push(format!(
                "thresholds.eps_nn must be positive, got {}",
                self.eps_nn
            ));
        }
        if !(0 < self.alpha && self.alpha < self.beta) {
            v.push(format!(
                "0 < alpha < beta required, got alpha = {}, beta = {}",
                self.alpha, self.beta
            ));
        }
        if self.transitory_len == 0 {
            v.push("thresholds.transitory_len must be at least 1".into());
        }
        if self.reset_window <= self.transitory_len {
            v.push(format!(
                "thresholds.reset_window ({}) must exceed transitory_len ({})",
                self.reset_window, self.transitory_len
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(msg) => Err(Error::Config(msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustCategory {
    Zero,
    BelowAlpha,
    AtAlpha,
    BetweenAlphaBeta,
    /// `b >= β`; larger counts saturate here.
    AtOrAboveBeta,
}

impl TrustCategory {
    pub const ALL: [TrustCategory; 5] = [
        TrustCategory::Zero,
        TrustCategory::BelowAlpha,
        TrustCategory::AtAlpha,
        TrustCategory::BetweenAlphaBeta,
        TrustCategory::AtOrAboveBeta,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrustCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrustCategory::Zero => "zero",
            TrustCategory::BelowAlpha => "below_alpha",
            TrustCategory::AtAlpha => "at_alpha",
            TrustCategory::BetweenAlphaBeta => "between_alpha_beta",
            TrustCategory::AtOrAboveBeta => "at_or_above_beta",
        };
        f.write_str(s)
    }
}

pub fn classify_trust(b: u32, alpha: u32, beta: u32) -> TrustCategory {
    debug_assert!(0 < alpha && alpha < beta);
    if b == 0 {
        TrustCategory::Zero
    } else if b < alpha {
        TrustCategory::BelowAlpha
    } else if b == alpha {
        TrustCategory::AtAlpha
    } else if b < beta {
        TrustCategory::BetweenAlphaBeta
    } else {
        TrustCategory::AtOrAboveBeta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SelfDestruct,
    DoNothing,
}

/// Total map `(AR category, NN category) -> Action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleTable {
    cells: [[Action; 5]; 5],
}

impl RuleTable {
    pub fn from_fn(mut f: impl FnMut(TrustCategory, TrustCategory) -> Action) -> Self {
        let mut cells = [[Action::DoNothing; 5]; 5];
        for ar in TrustCategory::ALL {
            for nn in TrustCategory::ALL {
                cells[ar.index()][nn.index()] = f(ar, nn);
            }
        }
        Self { cells }
    }

    pub fn evaluate(&self, ar: TrustCategory, nn: TrustCategory) -> Action {
        self.cells[ar.index()][nn.index()]
    }

    pub fn set(&mut self, ar: TrustCategory, nn: TrustCategory, action: Action) {
        self.cells[ar.index()][nn.index()] = action;
    }

    /// Destroys on AR evidence alone, ignoring the NN channel.
    pub fn ar_only() -> Self {
        Self::from_fn(|ar, _| {
            if ar >= TrustCategory::AtAlpha {
                Action::SelfDestruct
            } else {
                Action::DoNothing
            }
        })
    }

    /// True when every cell dominating a `SelfDestruct` cell is also `SelfDestruct`.
    pub fn is_monotone(&self) -> bool {
        TrustCategory::ALL.iter().all(|&a1| {
            TrustCategory::ALL.iter().all(|&n1| {
                self.evaluate(a1, n1) == Action::DoNothing
                    || TrustCategory::ALL
                        .iter()
                        .filter(|&&a2| a2 >= a1)
                        .all(|&a2| {
                            TrustCategory::ALL
                                .iter()
                                .filter(|&&n2| n2 >= n1)
                                .all(|&n2| self.evaluate(a2, n2) == Action::SelfDestruct)
                        })
            })
        })
    }
}

impl Default for RuleTable {
    /// Destroy when both channels reach α, or when one channel saturates at β
    /// and the other has any evidence at all.
    fn default() -> Self {
        use TrustCategory::*;
        Self::from_fn(|ar, nn| {
            let both = ar >= AtAlpha && nn >= AtAlpha;
            let saturated = (ar == AtOrAboveBeta && nn >= BelowAlpha)
                || (nn == AtOrAboveBeta && ar >= BelowAlpha);
            if both || saturated {
                Action::SelfDestruct
            } else {
                Action::DoNothing
            }
        })
    }
}

/// Config-file layout: one row per AR category, each listing the actions for
/// the five NN categories in order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleTableRows {
    zero: [Action; 5],
    below_alpha: [Action; 5],
    at_alpha: [Action; 5],
    between_alpha_beta: [Action; 5],
    at_or_above_beta: [Action; 5],
}

impl Serialize for RuleTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let c = self.cells;
        RuleTableRows {
            zero: c[0],
            below_alpha: c[1],
            at_alpha: c[2],
            between_alpha_beta: c[3],
            at_or_above_beta: c[4],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RuleTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RuleTableRows::deserialize(d)?;
        Ok(Self {
            cells: [
                r.zero,
                r.below_alpha,
                r.at_alpha,
                r.between_alpha_beta,
                r.at_or_above_beta,
            ],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrustState {
    pub b_ar: u32,
    pub b_nn: u32,
    pub transitory_ar: u32,
    pub transitory_nn: u32,
    /// Steps since the last increment or reset.
    pub steps_since_reset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrustChange {
    pub ar_incremented: bool,
    pub nn_incremented: bool,
    pub ar_breach: bool,
    pub nn_breach: bool,
    /// Both indicators were returned to zero this step.
    pub reset: bool,
}

fn channel(b: &mut u32, countdown: &mut u32, breach: bool, k: u32) -> bool {
    if breach && *countdown == 0 {
        *b += 1;
        *countdown = k;
        true
    } else {
        *countdown = countdown.saturating_sub(1);
        false
    }
}

impl TrustState {
    pub fn new() -> Self {
        Self::default()
    }

    /// One step of the trust machine. A channel whose error is `None` (its
    /// predictor is still warming up) neither breaches nor increments.
    pub fn update(
        &mut self,
        err_ar: Option<f64>,
        err_nn: Option<f64>,
        cfg: &ThresholdConfig,
    ) -> TrustChange {
        let ar_breach = err_ar.is_some_and(|e| e.abs() > cfg.eps_ar);
        let nn_breach = err_nn.is_some_and(|e| e.abs() > cfg.eps_nn);
        let k = cfg.transitory_len;
        let ar_incremented = channel(&mut self.b_ar, &mut self.transitory_ar, ar_breach, k);
        let nn_incremented = channel(&mut self.b_nn, &mut self.transitory_nn, nn_breach, k);

        let mut reset = false;
        if ar_incremented || nn_incremented {
            self.steps_since_reset = 0;
        } else {
            self.steps_since_reset += 1;
            if self.steps_since_reset >= cfg.reset_window {
                reset = self.b_ar != 0 || self.b_nn != 0;
                self.b_ar = 0;
                self.b_nn = 0;
                self.steps_since_reset = 0;
            }
        }
        TrustChange {
            ar_incremented,
            nn_incremented,
            ar_breach,
            nn_breach,
            reset,
        }
    }

    pub fn categories(&self, cfg: &ThresholdConfig) -> (TrustCategory, TrustCategory) {
        (
            classify_trust(self.b_ar, cfg.alpha, cfg.beta),
            classify_trust(self.b_nn, cfg.alpha, cfg.beta),
        )
    }

    pub fn is_clean(&self) -> bool {
        self.b_ar == 0 && self.b_nn == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TrustCategory::*;

    fn cfg(k: u32, w: u32) -> ThresholdConfig {
        ThresholdConfig {
            transitory_len: k,
            reset_window: w,
            ..ThresholdConfig::default()
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_trust(0, 3, 5), Zero);
        assert_eq!(classify_trust(1, 3, 5), BelowAlpha);
        assert_eq!(classify_trust(3, 3, 5), AtAlpha);
        assert_eq!(classify_trust(4, 3, 5), BetweenAlphaBeta);
        assert_eq!(classify_trust(5, 3, 5), AtOrAboveBeta);
        assert_eq!(classify_trust(7, 3, 5), AtOrAboveBeta);
    }

    #[test]
    fn first_breach_increments_and_opens_transitory_window() {
        let c = cfg(3, 30);
        let mut s = TrustState::new();
        let ch = s.update(Some(1.5), Some(0.0), &c);
        assert!(ch.ar_incremented && !ch.nn_incremented);
        assert_eq!((s.b_ar, s.b_nn, s.transitory_ar), (1, 0, 3));
    }

    #[test]
    fn below_threshold_is_ignored() {
        let c = cfg(3, 30);
        let mut s = TrustState::new();
        s.update(Some(0.5), Some(-1.9), &c);
        assert!(s.is_clean());
        assert_eq!(s.transitory_ar, 0);
    }

    #[test]
    fn negative_ar_error_uses_magnitude() {
        let mut s = TrustState::new();
        s.update(Some(-1.2), None, &cfg(3, 30));
        assert_eq!(s.b_ar, 1);
    }

    #[test]
    fn consecutive_breaches_inside_window_count_once() {
        let c = cfg(3, 30);
        let mut s = TrustState::new();
        s.update(Some(2.0), None, &c);
        s.update(Some(2.0), None, &c);
        assert_eq!(s.b_ar, 1);
    }

    #[test]
    fn breach_after_window_counts_again() {
        let c = cfg(2, 30);
        let mut s = TrustState::new();
        // increments at steps 0 and 3; steps 1, 2 are inside the window.
        let incs: Vec<bool> = (0..4)
            .map(|_| s.update(Some(5.0), None, &c).ar_incremented)
            .collect();
        assert_eq!(incs, vec![true, false, false, true]);
    }

    #[test]
    fn quiet_window_resets_indicators() {
        let c = cfg(2, 6);
        let mut s = TrustState::new();
        s.update(Some(5.0), Some(5.0), &c);
        for i in 0..5 {
            let ch = s.update(Some(0.0), Some(0.0), &c);
            assert!(!ch.reset, "step {i}");
        }
        assert_eq!((s.b_ar, s.b_nn), (1, 1));
        assert!(s.update(Some(0.0), Some(0.0), &c).reset);
        assert!(s.is_clean());
    }

    #[test]
    fn suppressed_breaches_do_not_hold_off_the_reset() {
        let c = cfg(3, 6);
        let mut s = TrustState::new();
        s.update(Some(5.0), None, &c);
        let resets: Vec<bool> = (0..6)
            .map(|_| s.update(Some(5.0), None, &c).reset)
            .collect();
        // Increments at steps 0 and 4; six steps after the second, reset.
        assert_eq!(s.b_ar, 2);
        assert!(!resets.contains(&true));
        for _ in 0..3 {
            assert!(!s.update(Some(0.0), None, &c).reset);
        }
        assert!(s.update(Some(0.0), None, &c).reset);
    }

    #[test]
    fn default_table_matches_case_study_rules() {
        let t = RuleTable::default();
        assert_eq!(t.evaluate(AtAlpha, AtAlpha), Action::SelfDestruct);
        assert_eq!(t.evaluate(AtAlpha, Zero), Action::DoNothing);
        assert_eq!(t.evaluate(Zero, Zero), Action::DoNothing);
        assert_eq!(
            t.evaluate(AtOrAboveBeta, AtOrAboveBeta),
            Action::SelfDestruct
        );
        assert_eq!(t.evaluate(AtOrAboveBeta, BelowAlpha), Action::SelfDestruct);
        assert_eq!(t.evaluate(AtOrAboveBeta, Zero), Action::DoNothing);
        assert_eq!(t.evaluate(BetweenAlphaBeta, BelowAlpha), Action::DoNothing);
        assert!(t.is_monotone());
    }

    #[test]
    fn ar_only_table_ignores_nn() {
        let t = RuleTable::ar_only();
        assert_eq!(t.evaluate(AtAlpha, Zero), Action::SelfDestruct);
        assert_eq!(t.evaluate(BelowAlpha, AtOrAboveBeta), Action::DoNothing);
        assert!(t.is_monotone());
    }

    #[test]
    fn non_monotone_table_is_detected() {
        let mut t = RuleTable::default();
        t.set(BetweenAlphaBeta, BetweenAlphaBeta, Action::DoNothing);
        assert!(!t.is_monotone());
    }

    #[test]
    fn rule_table_text_round_trip_and_totality() {
        let t = RuleTable::default();
        let text = toml::to_string(&t).unwrap();
        let back: RuleTable = toml::from_str(&text).unwrap();
        assert_eq!(back, t);

        let missing_row = text
            .lines()
            .filter(|l| !l.starts_with("at_alpha"))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(toml::from_str::<RuleTable>(&missing_row).is_err());

        let short_row = text.replace(
            "zero = [\"do_nothing\", \"do_nothing\", \"do_nothing\", \"do_nothing\", \"do_nothing\"]",
            "zero = [\"do_nothing\"]",
        );
        assert_ne!(short_row, text);
        assert!(toml::from_str::<RuleTable>(&short_row).is_err());
    }

    #[test]
    fn threshold_violations() {
        let bad = ThresholdConfig {
            alpha: 5,
            beta: 5,
            ..ThresholdConfig::default()
        };
        let v = bad.violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("0 < alpha < beta"));
        let bad = ThresholdConfig {
            transitory_len: 10,
            reset_window: 10,
            eps_ar: 0.0,
            ..ThresholdConfig::default()
        };
        assert_eq!(bad.violations().len(), 2);
        assert!(ThresholdConfig::default().validate().is_ok());
    }
}
