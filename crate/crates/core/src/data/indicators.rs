//! The 21 flexible-pavement condition indicators and the 20 road-work types.

use serde::{Deserialize, Serialize};

pub const NUM_INDICATORS: usize = 21;
pub const NUM_WORK_TYPES: usize = 20;

/// Value range of an indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKind {
    /// 0 to 100.
    Percent,
    /// Any nonnegative value; normalized against a trained cap.
    NonNegative,
    /// Discrete severity level 1, 2, 3 or 4.
    Level,
    /// Composite score, 0 to 100.
    Score,
    /// Ride score, 0.1 (roughest) to 5.0 (smoothest).
    Ride,
}

impl RangeKind {
    /// Fixed bounds, if the range has them.
    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            RangeKind::Percent | RangeKind::Score => Some((0.0, 100.0)),
            RangeKind::Level => Some((1.0, 4.0)),
            RangeKind::Ride => Some((0.1, 5.0)),
            RangeKind::NonNegative => None,
        }
    }

    pub fn contains(self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            RangeKind::Percent | RangeKind::Score => (0.0..=100.0).contains(&v),
            RangeKind::NonNegative => v >= 0.0,
            RangeKind::Level => v.fract() == 0.0 && (1.0..=4.0).contains(&v),
            RangeKind::Ride => (0.1..=5.0).contains(&v),
        }
    }
}

/// Whether an indicator is modeled as regression or classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorDef {
    /// 1-based index in the reference table.
    pub index: usize,
    pub name: &'static str,
    pub unit: &'static str,
    pub range: RangeKind,
    pub kind: VariableKind,
}

use RangeKind::*;
use VariableKind::*;

pub const INDICATORS: [IndicatorDef; NUM_INDICATORS] = [
    IndicatorDef { index: 1, name: "TX_ACP_RUT_VISUAL_SHALLOW_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 2, name: "TX_ACP_RUT_VISUAL_SEVERE_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 3, name: "TX_ACP_RUT_VISUAL_FAILURE_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 4, name: "TX_ACP_RUT_VISUAL_DEEP_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 5, name: "TX_ACP_RUT_LFT_WP_DPTH_MEAS", unit: "mil", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 6, name: "TX_ACP_RUT_RIT_WP_DPTH_MEAS", unit: "mil", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 7, name: "TX_ACP_RUT_AVG_WP_DEPTH_MEAS", unit: "mil", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 8, name: "TX_ACP_PATCHING_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 9, name: "TX_ACP_FAILURE_QTY", unit: "quantity", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 10, name: "TX_ACP_BLOCK_CRACKING_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 11, name: "TX_ACP_ALLIGATOR_CRACKING_PCT", unit: "percentage", range: Percent, kind: Continuous },
    IndicatorDef { index: 12, name: "TX_ACP_LONGITUDE_CRACKING_PCT", unit: "foot", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 13, name: "TX_ACP_TRANSVERSE_CRACKING_QTY", unit: "quantity", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 14, name: "TX_ACP_RAVELING_CODE", unit: "level", range: Level, kind: Discrete },
    IndicatorDef { index: 15, name: "TX_ACP_FLUSHING_CODE", unit: "level", range: Level, kind: Discrete },
    IndicatorDef { index: 16, name: "TX_IRI_LEFT_SCORE", unit: "in/mile", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 17, name: "TX_IRI_RIGHT_SCORE", unit: "in/mile", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 18, name: "TX_IRI_AVERAGE_SCORE", unit: "in/mile", range: NonNegative, kind: Continuous },
    IndicatorDef { index: 19, name: "TX_RIDE_SCORE", unit: "-", range: Ride, kind: Continuous },
    IndicatorDef { index: 20, name: "TX_DISTRESS_SCORE", unit: "-", range: Score, kind: Continuous },
    IndicatorDef { index: 21, name: "TX_CONDITION_SCORE", unit: "-", range: Score, kind: Continuous },
];

pub fn indicator_by_name(name: &str) -> Option<&'static IndicatorDef> {
    INDICATORS.iter().find(|d| d.name == name)
}

pub fn indicator_names() -> Vec<&'static str> {
    INDICATORS.iter().map(|d| d.name).collect()
}

/// One maintenance / rehabilitation work type.
///
/// One-hot encoding keys on `row` (1..=20), not on the work code: codes
/// collide (code 9 appears twice) and two rows share the MSC label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkType {
    pub row: usize,
    pub code: Option<u32>,
    pub label: &'static str,
    /// Data-point count from the reference work-history table; used as the
    /// sampling weight of the synthetic generator.
    pub reference_count: u64,
}

pub const WORK_TYPES: [WorkType; NUM_WORK_TYPES] = [
    WorkType { row: 1, code: None, label: "Do Nothing", reference_count: 47_217 },
    WorkType { row: 2, code: Some(9), label: "SC - Seal Coat", reference_count: 32_763 },
    WorkType { row: 3, code: Some(12), label: "RER - Rehabilitation of Existing Road", reference_count: 9_308 },
    WorkType { row: 4, code: Some(4), label: "OV - Overlay", reference_count: 5_759 },
    WorkType { row: 5, code: Some(9), label: "P05 - Full Width Seal Coat", reference_count: 3_779 },
    WorkType { row: 6, code: Some(44), label: "MSC - Miscellaneous construction", reference_count: 2_163 },
    WorkType { row: 7, code: Some(7), label: "RES - Restoration", reference_count: 985 },
    WorkType { row: 8, code: Some(11), label: "WF - Widen Freeway", reference_count: 965 },
    WorkType { row: 9, code: Some(40), label: "SP2 - Super-2 Highway", reference_count: 765 },
    WorkType { row: 10, code: Some(13), label: "UPG - Upgrade to Standards Freeway", reference_count: 575 },
    WorkType { row: 11, code: Some(5), label: "WNF - Widen Non-Freeway", reference_count: 462 },
    WorkType { row: 12, code: Some(38), label: "UGN - Upgrade to Standards Non- Freeway", reference_count: 447 },
    WorkType { row: 13, code: Some(10), label: "MSC - Miscellaneous Construction", reference_count: 228 },
    WorkType { row: 14, code: Some(22), label: "HES - Hazard Elimination & Safety", reference_count: 111 },
    WorkType { row: 15, code: Some(41), label: "SSW - Systemic Widening Projects", reference_count: 98 },
    WorkType { row: 16, code: Some(28), label: "NNF - New Location Non-Freeway", reference_count: 94 },
    WorkType { row: 17, code: Some(6), label: "RMS - Routine Maintenance Project (Sealed)", reference_count: 50 },
    WorkType { row: 18, code: Some(2), label: "CNF - Convert Non-Freeway To", reference_count: 48 },
    WorkType { row: 19, code: Some(33), label: "SKP - SKIP - Transportation Enhancement Project", reference_count: 23 },
    WorkType { row: 20, code: Some(27), label: "NLF - New Location Freeway", reference_count: 8 },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_one_indicators_with_two_discrete() {
        assert_eq!(INDICATORS.len(), 21);
        let discrete: Vec<usize> = INDICATORS
            .iter()
            .filter(|d| d.kind == VariableKind::Discrete)
            .map(|d| d.index)
            .collect();
        assert_eq!(discrete, vec![14, 15]);
        for (i, d) in INDICATORS.iter().enumerate() {
            assert_eq!(d.index, i + 1);
        }
    }

    #[test]
    fn twenty_work_types_with_duplicate_code_nine() {
        assert_eq!(WORK_TYPES.len(), 20);
        let nines = WORK_TYPES.iter().filter(|w| w.code == Some(9)).count();
        assert_eq!(nines, 2);
        let msc = WORK_TYPES
            .iter()
            .filter(|w| w.label.starts_with("MSC"))
            .count();
        assert_eq!(msc, 2);
        for (i, w) in WORK_TYPES.iter().enumerate() {
            assert_eq!(w.row, i + 1);
        }
    }

    #[test]
    fn level_range_accepts_only_integer_levels() {
        assert!(RangeKind::Level.contains(3.0));
        assert!(!RangeKind::Level.contains(5.0));
        assert!(!RangeKind::Level.contains(2.5));
        assert!(RangeKind::Ride.contains(0.1));
        assert!(!RangeKind::Ride.contains(0.0));
    }

    #[test]
    fn lookup_by_name() {
        let d = indicator_by_name("TX_IRI_AVERAGE_SCORE").unwrap();
        assert_eq!(d.index, 18);
        assert!(indicator_by_name("NOPE").is_none());
    }
}
