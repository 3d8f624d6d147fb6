//! Feature encoding: one 18x42 matrix per section, plus dataset assembly
//! and train/test splitting.
//!
//! Matrix layout per row (years 2000..=2017 in order): columns 0..21 the
//! normalized indicators, column 21 the scaled years-since-treatment
//! `s_t = min(max(t - last_work_year, 0) / 18, 1)`, columns 22..42 the
//! one-hot work-type dummies (constant down rows, keyed on table row).

use crate::error::{Error, Result};
use crate::model::Target;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::indicators::{IndicatorDef, VariableKind, NUM_INDICATORS, NUM_WORK_TYPES};
use super::normalize::Normalizer;
use super::section::{SectionHistory, FEATURE_YEARS, YEAR_FIRST, YEAR_LAST};

/// Total feature columns: 21 indicators + s_t + 20 work dummies.
pub const FEATURE_COLS: usize = NUM_INDICATORS + 1 + NUM_WORK_TYPES;
/// 0-based column of the years-since-treatment feature.
pub const S_COLUMN: usize = NUM_INDICATORS;
/// Divisor that brings `s_t` onto the unit scale; values cap at 1.
pub const S_SCALE: f64 = FEATURE_YEARS as f64;

/// The encoded model input of one section, in f64 before any scalar cast.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub section_id: String,
    /// `[18, 42]` row-major.
    pub values: Tensor<f64>,
    /// Raw (unnormalized) 2018 value of the studied indicator.
    pub target_raw: f64,
}

/// Encode one complete section against a fitted normalizer.
pub fn encode_section(
    section: &SectionHistory,
    norm: &Normalizer,
    indicator: &IndicatorDef,
) -> Result<FeatureMatrix> {
    section.validate()?;
    let mut values = vec![0.0f64; FEATURE_YEARS * FEATURE_COLS];
    for (y, row) in values.chunks_mut(FEATURE_COLS).enumerate() {
        let year = YEAR_FIRST + y as i32;
        for i in 0..NUM_INDICATORS {
            row[i] = norm.normalize(i, section.value(year, i));
        }
        let s_years = (year - section.last_work_year).max(0) as f64;
        row[S_COLUMN] = (s_years / S_SCALE).min(1.0);
        row[S_COLUMN + section.last_work_row] = 1.0;
    }
    Ok(FeatureMatrix {
        section_id: section.section_id.clone(),
        values: Tensor::new(vec![FEATURE_YEARS, FEATURE_COLS], values)?,
        target_raw: section.value(YEAR_LAST, indicator.index - 1),
    })
}

/// One encoded training/evaluation sample.
#[derive(Debug, Clone)]
pub struct Sample<S: Scalar> {
    pub section_id: String,
    pub features: Tensor<S>,
    pub target_raw: f64,
    pub target: Target,
}

/// Train/test assignment aligned with a dataset's sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub test: Vec<bool>,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.test.is_empty()
    }

    pub fn test_count(&self) -> usize {
        self.test.iter().filter(|&&t| t).count()
    }
}

/// Uniform random train/test assignment of `n` sections, reproducible under
/// the given generator: shuffle indices, take `round(n * test_fraction)` as
/// the test set.
pub fn split_assignment(n: usize, test_fraction: f64, rng: &mut Rng) -> Result<SplitAssignment> {
    if n < 5 {
        return Err(Error::Contract(format!(
            "split needs at least 5 samples, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Contract(format!(
            "test fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut test = vec![false; n];
    for &i in idx.iter().take(n_test) {
        test[i] = true;
    }
    Ok(SplitAssignment { test })
}

/// Encoded dataset for one studied indicator.
#[derive(Debug, Clone)]
pub struct Dataset<S: Scalar> {
    pub indicator: &'static IndicatorDef,
    pub samples: Vec<Sample<S>>,
    split: SplitAssignment,
}

impl<S: Scalar> Dataset<S> {
    /// Assemble a dataset from already-encoded samples.
    pub fn new(
        indicator: &'static IndicatorDef,
        samples: Vec<Sample<S>>,
        split: SplitAssignment,
    ) -> Result<Self> {
        if split.len() != samples.len() {
            return Err(Error::Contract(format!(
                "split covers {} samples, dataset has {}",
                split.len(),
                samples.len()
            )));
        }
        Ok(Dataset {
            indicator,
            samples,
            split,
        })
    }

    pub fn split(&self) -> &SplitAssignment {
        &self.split
    }

    pub fn train(&self) -> Vec<&Sample<S>> {
        self.samples
            .iter()
            .zip(&self.split.test)
            .filter_map(|(s, &t)| (!t).then_some(s))
            .collect()
    }

    pub fn test(&self) -> Vec<&Sample<S>> {
        self.samples
            .iter()
            .zip(&self.split.test)
            .filter_map(|(s, &t)| t.then_some(s))
            .collect()
    }
}

/// Encode every section and attach targets for the studied indicator:
/// normalized values for continuous indicators, `level - 1` class indices
/// for the discrete ones.
pub fn encode_dataset<S: Scalar>(
    sections: &[SectionHistory],
    indicator: &'static IndicatorDef,
    norm: &Normalizer,
    split: SplitAssignment,
) -> Result<Dataset<S>> {
    if split.len() != sections.len() {
        return Err(Error::Contract(format!(
            "split covers {} sections, dataset has {}",
            split.len(),
            sections.len()
        )));
    }
    let mut samples = Vec::with_capacity(sections.len());
    for section in sections {
        let fm = encode_section(section, norm, indicator)?;
        let target = match indicator.kind {
            VariableKind::Continuous => {
                Target::Value(norm.normalize(indicator.index - 1, fm.target_raw))
            }
            VariableKind::Discrete => Target::Class(fm.target_raw as usize - 1),
        };
        samples.push(Sample {
            section_id: fm.section_id,
            features: Tensor::cast_from(&fm.values),
            target_raw: fm.target_raw,
            target,
        });
    }
    Ok(Dataset {
        indicator,
        samples,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::indicators::{indicator_by_name, INDICATORS};
    use crate::data::section::TOTAL_YEARS;

    fn test_section(last_work_row: usize, last_work_year: i32) -> SectionHistory {
        let mut records = Vec::new();
        for y in 0..TOTAL_YEARS {
            let mut row = [0.0; NUM_INDICATORS];
            row[13] = 1.0 + (y / 7) as f64; // raveling steps 1,2,3
            row[14] = 1.0;
            row[17] = 50.0 + y as f64; // average IRI
            row[18] = 4.0;
            row[20] = 90.0 - y as f64; // condition score
            records.push(row);
        }
        SectionHistory {
            section_id: "S42".to_string(),
            records,
            last_work_row,
            last_work_year,
        }
    }

    fn fit_norm(sections: &[SectionHistory]) -> Normalizer {
        Normalizer::fit(sections.iter()).unwrap()
    }

    #[test]
    fn encoded_shape_is_18_by_42() {
        let s = test_section(2, 2004);
        let norm = fit_norm(std::slice::from_ref(&s));
        let ind = indicator_by_name("TX_CONDITION_SCORE").unwrap();
        let fm = encode_section(&s, &norm, ind).unwrap();
        assert_eq!(fm.values.shape(), &[18, 42]);
        assert_eq!(18 * NUM_INDICATORS, 378);
    }

    #[test]
    fn s_column_counts_years_since_treatment() {
        let s = test_section(2, 2000);
        let norm = fit_norm(std::slice::from_ref(&s));
        let ind = indicator_by_name("TX_CONDITION_SCORE").unwrap();
        let fm = encode_section(&s, &norm, ind).unwrap();
        for y in 0..FEATURE_YEARS {
            let got = fm.values.data()[y * FEATURE_COLS + S_COLUMN];
            assert_eq!(got, y as f64 / 18.0, "row {y}");
        }
    }

    #[test]
    fn s_column_clamps_below_at_zero_and_above_at_one() {
        // Treated mid-window: zero before the treatment year.
        let s = test_section(4, 2010);
        let norm = fit_norm(std::slice::from_ref(&s));
        let ind = indicator_by_name("TX_CONDITION_SCORE").unwrap();
        let fm = encode_section(&s, &norm, ind).unwrap();
        assert_eq!(fm.values.data()[5 * FEATURE_COLS + S_COLUMN], 0.0);
        assert_eq!(fm.values.data()[12 * FEATURE_COLS + S_COLUMN], 2.0 / 18.0);

        // Treated far before the window: capped at 1.
        let old = test_section(4, 1990);
        let fm = encode_section(&old, &norm, ind).unwrap();
        assert_eq!(fm.values.data()[17 * FEATURE_COLS + S_COLUMN], 1.0);
    }

    #[test]
    fn one_hot_block_keys_on_row_and_is_constant_down_rows() {
        let s = test_section(2, 2004); // SC - Seal Coat
        let norm = fit_norm(std::slice::from_ref(&s));
        let ind = indicator_by_name("TX_CONDITION_SCORE").unwrap();
        let fm = encode_section(&s, &norm, ind).unwrap();
        for y in 0..FEATURE_YEARS {
            let row = &fm.values.data()[y * FEATURE_COLS..(y + 1) * FEATURE_COLS];
            let dummies = &row[S_COLUMN + 1..];
            assert_eq!(dummies.iter().sum::<f64>(), 1.0, "row sums to one");
            assert_eq!(dummies[1], 1.0, "m_2 set for work row 2");
        }
    }

    #[test]
    fn split_is_reproducible_disjoint_and_sized() {
        let mut rng = Rng::from_seed(5);
        let a = split_assignment(100, 0.2, &mut rng).unwrap();
        assert_eq!(a.test_count(), 20);
        let mut rng2 = Rng::from_seed(5);
        let b = split_assignment(100, 0.2, &mut rng2).unwrap();
        assert_eq!(a, b);
        assert!(split_assignment(4, 0.2, &mut rng).is_err());
    }

    #[test]
    fn dataset_targets_follow_indicator_kind() {
        let sections = vec![
            test_section(2, 2004),
            test_section(1, 1995),
            test_section(4, 2010),
            test_section(3, 2001),
            test_section(2, 2007),
        ];
        let norm = fit_norm(&sections);
        let mut rng = Rng::from_seed(9);
        let split = split_assignment(sections.len(), 0.2, &mut rng).unwrap();

        let rav = indicator_by_name("TX_ACP_RAVELING_CODE").unwrap();
        let ds: Dataset<f64> = encode_dataset(&sections, rav, &norm, split.clone()).unwrap();
        // 2018 raveling level is 3 in the fixture; class index is 2.
        assert!(matches!(ds.samples[0].target, Target::Class(2)));

        let cond = &INDICATORS[20];
        let ds: Dataset<f64> = encode_dataset(&sections, cond, &norm, split).unwrap();
        let Target::Value(v) = ds.samples[0].target else {
            panic!("expected regression target");
        };
        assert_eq!(v, norm.normalize(20, ds.samples[0].target_raw));
        assert_eq!(ds.train().len() + ds.test().len(), ds.samples.len());
    }
}
