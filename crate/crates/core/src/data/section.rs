//! Per-section condition history over the fixed 2000-2018 window.

use crate::error::{Error, Result};

use super::indicators::{INDICATORS, NUM_INDICATORS, NUM_WORK_TYPES};

/// First observed year (first feature row).
pub const YEAR_FIRST: i32 = 2000;
/// Target year; also the last observed year.
pub const YEAR_LAST: i32 = 2018;
/// Number of feature rows (years 2000..=2017).
pub const FEATURE_YEARS: usize = 18;
/// Total observed years per section.
pub const TOTAL_YEARS: usize = 19;

/// One pavement section: 21 indicator values for every year of the window,
/// plus its last-treatment record.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionHistory {
    pub section_id: String,
    /// `records[y][i]` = indicator `i` (0-based) in year `YEAR_FIRST + y`.
    pub records: Vec<[f64; NUM_INDICATORS]>,
    /// Work-type row index, 1..=20.
    pub last_work_row: usize,
    pub last_work_year: i32,
}

impl SectionHistory {
    pub fn value(&self, year: i32, indicator0: usize) -> f64 {
        self.records[(year - YEAR_FIRST) as usize][indicator0]
    }

    /// Check completeness, work-type row, and every value against its
    /// indicator range.
    pub fn validate(&self) -> Result<()> {
        if self.records.len() != TOTAL_YEARS {
            return Err(Error::Validation(format!(
                "section {}: expected {TOTAL_YEARS} years of records, got {}",
                self.section_id,
                self.records.len()
            )));
        }
        if !(1..=NUM_WORK_TYPES).contains(&self.last_work_row) {
            return Err(Error::Validation(format!(
                "section {}: work row index {} out of 1..=20",
                self.section_id, self.last_work_row
            )));
        }
        for (y, row) in self.records.iter().enumerate() {
            for (def, &v) in INDICATORS.iter().zip(row.iter()) {
                if !def.range.contains(v) {
                    return Err(Error::Validation(format!(
                        "section {}, year {}: {} value {} out of range",
                        self.section_id,
                        YEAR_FIRST + y as i32,
                        def.name,
                        v
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank_section() -> SectionHistory {
        let mut row = [0.0; NUM_INDICATORS];
        row[13] = 1.0; // raveling level
        row[14] = 1.0; // flushing level
        row[18] = 4.5; // ride score
        SectionHistory {
            section_id: "S1".to_string(),
            records: vec![row; TOTAL_YEARS],
            last_work_row: 2,
            last_work_year: 2004,
        }
    }

    #[test]
    fn valid_section_passes() {
        blank_section().validate().unwrap();
    }

    #[test]
    fn out_of_range_level_names_indicator_and_section() {
        let mut s = blank_section();
        s.records[7][13] = 5.0;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("TX_ACP_RAVELING_CODE") && err.contains("S1"), "{err}");
    }

    #[test]
    fn missing_years_fail_validation() {
        let mut s = blank_section();
        s.records.truncate(18);
        assert!(s.validate().is_err());
    }
}
