//! Per-indicator min-max normalization to `[0, 1]`.
//!
//! Indicators with fixed reference ranges use those bounds. Unbounded
//! (nonnegative) indicators use `[0, p99.5]` of the training values, with
//! values above the cap clamping to 1. The fit must only ever see training
//! sections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::indicators::{INDICATORS, NUM_INDICATORS};
use super::section::SectionHistory;

/// Percentile used as the cap for unbounded indicators.
pub const CAP_PERCENTILE: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorStat {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// Zero-width range: every value maps to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub stats: Vec<IndicatorStat>,
}

/// Linear-interpolation percentile of ascending-sorted values:
/// index `(n-1)*q`, interpolated between the two bracketing order
/// statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

impl Normalizer {
    /// Fit per-indicator statistics over all years of the given (training)
    /// sections.
    pub fn fit<'a>(sections: impl IntoIterator<Item = &'a SectionHistory>) -> Result<Self> {
        let sections: Vec<&SectionHistory> = sections.into_iter().collect();
        if sections.is_empty() {
            return Err(Error::Contract(
                "normalizer fit needs a nonempty training set".to_string(),
            ));
        }
        let mut stats = Vec::with_capacity(NUM_INDICATORS);
        for (i, def) in INDICATORS.iter().enumerate() {
            let stat = match def.range.bounds() {
                Some((lo, hi)) => IndicatorStat {
                    name: def.name.to_string(),
                    min: lo,
                    max: hi,
                    degenerate: false,
                },
                None => {
                    let mut values: Vec<f64> = sections
                        .iter()
                        .flat_map(|s| s.records.iter().map(move |row| row[i]))
                        .collect();
                    values.sort_by(|a, b| a.partial_cmp(b).expect("validated finite values"));
                    let cap = percentile(&values, CAP_PERCENTILE);
                    let degenerate = cap <= 0.0;
                    if degenerate {
                        log::warn!("indicator {} has a zero-width training range", def.name);
                    }
                    IndicatorStat {
                        name: def.name.to_string(),
                        min: 0.0,
                        max: cap,
                        degenerate,
                    }
                }
            };
            stats.push(stat);
        }
        Ok(Normalizer { stats })
    }

    /// Map a raw value of indicator `indicator0` (0-based) into `[0, 1]`.
    pub fn normalize(&self, indicator0: usize, v: f64) -> f64 {
        let s = &self.stats[indicator0];
        if s.degenerate {
            return 0.0;
        }
        ((v - s.min) / (s.max - s.min)).clamp(0.0, 1.0)
    }

    /// Inverse map; exact for in-range values of non-degenerate indicators.
    pub fn denormalize(&self, indicator0: usize, x: f64) -> f64 {
        let s = &self.stats[indicator0];
        if s.degenerate {
            return s.min;
        }
        s.min + x * (s.max - s.min)
    }

    pub fn stat(&self, indicator0: usize) -> &IndicatorStat {
        &self.stats[indicator0]
    }

    /// Sanity-check a header-loaded normalizer.
    pub fn validate(&self) -> Result<()> {
        if self.stats.len() != NUM_INDICATORS {
            return Err(Error::Format(format!(
                "normalizer has {} indicator stats, expected {NUM_INDICATORS}",
                self.stats.len()
            )));
        }
        for (stat, def) in self.stats.iter().zip(INDICATORS.iter()) {
            if stat.name != def.name {
                return Err(Error::Format(format!(
                    "normalizer stat order mismatch: {} vs {}",
                    stat.name, def.name
                )));
            }
        }
        Ok(())
    }

    /// Identity-like normalizer from the fixed ranges, with unbounded
    /// indicators capped at `fallback_cap`. For tests and tooling.
    pub fn from_reference_ranges(fallback_cap: f64) -> Self {
        let stats = INDICATORS
            .iter()
            .map(|def| {
                let (min, max) = def.range.bounds().unwrap_or((0.0, fallback_cap));
                IndicatorStat {
                    name: def.name.to_string(),
                    min,
                    max,
                    degenerate: false,
                }
            })
            .collect();
        Normalizer { stats }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::section::TOTAL_YEARS;

    fn section_with_iri(values: &[f64]) -> Vec<SectionHistory> {
        // One section per value; all years share the value.
        values
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                let mut row = [0.0; NUM_INDICATORS];
                row[13] = 1.0;
                row[14] = 1.0;
                row[15] = v; // left IRI
                row[16] = v;
                row[17] = v; // average IRI
                row[18] = 3.0;
                SectionHistory {
                    section_id: format!("S{n}"),
                    records: vec![row; TOTAL_YEARS],
                    last_work_row: 1,
                    last_work_year: 1999,
                }
            })
            .collect()
    }

    #[test]
    fn bounded_indicator_maps_midpoint_to_half() {
        let sections = section_with_iri(&[100.0]);
        let norm = Normalizer::fit(&sections).unwrap();
        // Condition score (index 21, 0-based 20) has range 0..100.
        assert_eq!(norm.normalize(20, 50.0), 0.5);
        assert_eq!(norm.normalize(20, 0.0), 0.0);
        assert_eq!(norm.denormalize(20, 0.5), 50.0);
    }

    #[test]
    fn percentile_matches_hand_computed_oracle() {
        // Training values 50..=400: p99.5 sits a quarter past index 348.
        let values: Vec<f64> = (50..=400).map(|v| v as f64).collect();
        assert_eq!(percentile(&values, CAP_PERCENTILE), 398.25);
        assert_eq!(percentile(&values, 1.0), 400.0);
        assert_eq!(percentile(&values, 0.0), 50.0);
    }

    #[test]
    fn unbounded_cap_uses_p995_and_clamps_above() {
        let values: Vec<f64> = (50..=400).map(|v| v as f64).collect();
        let sections = section_with_iri(&values);
        let norm = Normalizer::fit(&sections).unwrap();
        let iri_avg = 17; // 0-based index of the average IRI
        // The fit sees each section's value once per year; its cap must be
        // the p99.5 of exactly that multiset.
        let mut all: Vec<f64> = sections
            .iter()
            .flat_map(|s| s.records.iter().map(|r| r[iri_avg]))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(norm.stat(iri_avg).max, percentile(&all, CAP_PERCENTILE));
        assert_eq!(norm.normalize(iri_avg, 1e9), 1.0, "above-cap clamps");
        let v = 123.456;
        let round_trip = norm.denormalize(iri_avg, norm.normalize(iri_avg, v));
        assert!((round_trip - v).abs() < 1e-9);
    }

    #[test]
    fn degenerate_indicator_maps_to_zero() {
        let sections = section_with_iri(&[0.0, 0.0]);
        let norm = Normalizer::fit(&sections).unwrap();
        let iri_avg = 17;
        assert!(norm.stat(iri_avg).degenerate);
        assert_eq!(norm.normalize(iri_avg, 5.0), 0.0);
    }

    #[test]
    fn round_trip_within_tolerance_for_in_range_values() {
        let values: Vec<f64> = (0..200).map(|v| v as f64 * 2.0).collect();
        let sections = section_with_iri(&values);
        let norm = Normalizer::fit(&sections).unwrap();
        for i in 0..NUM_INDICATORS {
            if norm.stat(i).degenerate {
                continue;
            }
            let (lo, hi) = (norm.stat(i).min, norm.stat(i).max);
            for k in 0..=10 {
                let v = lo + (hi - lo) * k as f64 / 10.0;
                let rt = norm.denormalize(i, norm.normalize(i, v));
                assert!((rt - v).abs() < 1e-9, "indicator {i}: {v} -> {rt}");
            }
        }
    }
}
