//! Seeded synthetic section generator.
//!
//! Real PMIS extracts are not redistributable, so this generator is the
//! artifact's ground truth. Every kernel is a pure function of documented
//! constants ([`GeneratorConfig`]) so tests can re-evaluate the equations
//! independently of the generation loop:
//!
//! - each section carries a pre-window work year, optionally one recorded
//!   treatment, and per-group susceptibility factors `q`;
//! - deterioration is driven by per-group *effective age*: a treatment of
//!   type `w` at year `tau` rescales the accumulated age by
//!   `1 - effectiveness[w][group]`, after which aging resumes at one year
//!   per year;
//! - distress percentages grow sigmoidally with effective age, counts and
//!   rut depth grow linearly, IRI grows linearly from a base, ride decays
//!   exponentially, the two level codes step up as age crosses jittered
//!   thresholds, and the composite scores are derived monotonically;
//! - Gaussian measurement noise is added last and values clamp to their
//!   reference ranges.
//!
//! The per-section draw order is fixed (ages, work type, factors, then one
//! noise draw per indicator per year), so a seed fully determines the
//! dataset. Noise draws are consumed even when a scale is zero, keeping
//! sequences aligned across config variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::indicators::{NUM_INDICATORS, NUM_WORK_TYPES, WORK_TYPES};
use super::section::{SectionHistory, TOTAL_YEARS, YEAR_FIRST, YEAR_LAST};

/// Deterioration group of an indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Surface = 0,
    RutDepth = 1,
    Roughness = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    pub percent: f64,
    pub quantity: f64,
    pub length: f64,
    pub depth: f64,
    pub iri: f64,
    pub ride: f64,
    pub score: f64,
    pub level: f64,
}

impl NoiseScales {
    pub fn zero() -> Self {
        NoiseScales {
            percent: 0.0,
            quantity: 0.0,
            length: 0.0,
            depth: 0.0,
            iri: 0.0,
            ride: 0.0,
            score: 0.0,
            level: 0.0,
        }
    }
}

/// Kernel constants and sampling weights of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Maximum years since the previous work at the window start.
    pub max_initial_age: f64,
    /// Minimum pavement age when a recorded treatment happens.
    pub treatment_min_age: f64,
    /// Inclusive year range of recorded treatments.
    pub treatment_years: (i32, i32),
    /// Sampling weights per work-type row (reference data-point counts).
    pub work_weights: Vec<f64>,
    /// Uniform range of the per-section, per-group susceptibility factor.
    pub susceptibility: (f64, f64),
    /// Sigmoid midpoints (effective-age years) for the seven distress
    /// percentages: shallow, severe, failure, deep rutting, patching,
    /// block cracking, alligator cracking.
    pub distress_midpoint: [f64; 7],
    pub distress_spread: [f64; 7],
    pub failure_rate_per_year: f64,
    pub transverse_rate_per_year: f64,
    pub longitudinal_rate_per_year: f64,
    pub rut_depth_rate_per_year: f64,
    /// Uniform amplitude of the left/right rut-depth asymmetry fraction.
    pub depth_asymmetry: f64,
    pub iri_base: f64,
    pub iri_rate_per_year: f64,
    /// Uniform amplitude of the left/right IRI offset (in/mile).
    pub iri_asymmetry: f64,
    /// e-folding age of the ride-score decay toward 0.1.
    pub ride_decay_age: f64,
    pub distress_score_pct_weight: f64,
    pub distress_score_failure_weight: f64,
    pub condition_ride_exponent: f64,
    pub raveling_thresholds: [f64; 3],
    pub flushing_thresholds: [f64; 3],
    /// Sigma of the per-section threshold jitter for the level codes.
    pub level_threshold_jitter: f64,
    /// Per work-type reset effectiveness `[surface, rut depth, roughness]`.
    pub effectiveness: Vec<[f64; 3]>,
    pub noise: NoiseScales,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_initial_age: 25.0,
            treatment_min_age: 5.0,
            treatment_years: (1996, 2015),
            work_weights: WORK_TYPES.iter().map(|w| w.reference_count as f64).collect(),
            susceptibility: (0.6, 1.5),
            distress_midpoint: [10.0, 22.0, 26.0, 24.0, 15.0, 17.0, 13.0],
            distress_spread: [4.0, 2.5, 2.5, 2.5, 3.0, 3.0, 3.5],
            failure_rate_per_year: 0.6,
            transverse_rate_per_year: 1.2,
            longitudinal_rate_per_year: 90.0,
            rut_depth_rate_per_year: 12.0,
            depth_asymmetry: 0.15,
            iri_base: 45.0,
            iri_rate_per_year: 5.5,
            iri_asymmetry: 6.0,
            ride_decay_age: 16.0,
            distress_score_pct_weight: 0.55,
            distress_score_failure_weight: 2.5,
            condition_ride_exponent: 0.5,
            raveling_thresholds: [8.0, 16.0, 24.0],
            flushing_thresholds: [10.0, 18.0, 26.0],
            level_threshold_jitter: 2.0,
            effectiveness: vec![
                [0.00, 0.00, 0.00], // 1  Do Nothing
                [0.90, 0.20, 0.15], // 2  SC - Seal Coat
                [0.95, 0.90, 0.85], // 3  RER - Rehabilitation
                [0.90, 0.85, 0.95], // 4  OV - Overlay
                [0.90, 0.20, 0.15], // 5  P05 - Full Width Seal Coat
                [0.30, 0.10, 0.10], // 6  MSC
                [0.85, 0.80, 0.70], // 7  RES - Restoration
                [0.90, 0.90, 0.90], // 8  WF - Widen Freeway
                [0.90, 0.90, 0.90], // 9  SP2 - Super-2 Highway
                [0.90, 0.90, 0.90], // 10 UPG - Upgrade Freeway
                [0.90, 0.90, 0.90], // 11 WNF - Widen Non-Freeway
                [0.90, 0.90, 0.90], // 12 UGN - Upgrade Non-Freeway
                [0.30, 0.10, 0.10], // 13 MSC
                [0.40, 0.20, 0.20], // 14 HES - Hazard Elimination
                [0.70, 0.60, 0.50], // 15 SSW - Systemic Widening
                [0.95, 0.95, 0.95], // 16 NNF - New Location Non-Freeway
                [0.60, 0.20, 0.15], // 17 RMS - Routine Maintenance (Sealed)
                [0.90, 0.90, 0.90], // 18 CNF - Convert Non-Freeway
                [0.20, 0.10, 0.10], // 19 SKP - Enhancement Project
                [0.95, 0.95, 0.95], // 20 NLF - New Location Freeway
            ],
            noise: NoiseScales {
                percent: 0.8,
                quantity: 0.3,
                length: 8.0,
                depth: 3.0,
                iri: 3.0,
                ride: 0.05,
                score: 1.5,
                level: 0.2,
            },
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.work_weights.len() != NUM_WORK_TYPES
            || self.effectiveness.len() != NUM_WORK_TYPES
        {
            return Err(Error::Validation(format!(
                "generator config needs {NUM_WORK_TYPES} work weights and effectiveness rows"
            )));
        }
        if self
            .effectiveness
            .iter()
            .flatten()
            .any(|e| !(0.0..=1.0).contains(e))
        {
            return Err(Error::Validation(
                "treatment effectiveness must lie in [0, 1]".to_string(),
            ));
        }
        Ok(())
    }

    // Deterioration kernels. `age` is effective age times the section's
    // susceptibility factor.

    pub fn distress_pct(&self, slot: usize, age: f64) -> f64 {
        100.0 / (1.0 + (-(age - self.distress_midpoint[slot]) / self.distress_spread[slot]).exp())
    }

    pub fn failures(&self, age: f64) -> f64 {
        self.failure_rate_per_year * age
    }

    pub fn transverse_cracking(&self, age: f64) -> f64 {
        self.transverse_rate_per_year * age
    }

    pub fn longitudinal_cracking(&self, age: f64) -> f64 {
        self.longitudinal_rate_per_year * age
    }

    pub fn rut_depth(&self, age: f64) -> f64 {
        self.rut_depth_rate_per_year * age
    }

    pub fn iri(&self, age: f64) -> f64 {
        self.iri_base + self.iri_rate_per_year * age
    }

    pub fn ride(&self, age: f64) -> f64 {
        0.1 + 4.9 * (-age / self.ride_decay_age).exp()
    }

    /// Level code: one plus the number of thresholds the jittered age has
    /// crossed, clamped to 1..=4.
    pub fn level(thresholds: &[f64; 3], jittered_age: f64) -> f64 {
        let steps = thresholds.iter().filter(|&&t| jittered_age > t).count();
        (1 + steps).min(4) as f64
    }

    pub fn distress_score(&self, mean_distress_pct: f64, failures: f64) -> f64 {
        (100.0
            - self.distress_score_pct_weight * mean_distress_pct
            - self.distress_score_failure_weight * failures)
            .clamp(0.0, 100.0)
    }

    pub fn condition_score(&self, distress_score: f64, ride: f64) -> f64 {
        distress_score * (ride / 5.0).powf(self.condition_ride_exponent)
    }

    /// Per-group effective age at `year`, given the pre-window work year and
    /// an optional recorded treatment `(work_row, treatment_year)`.
    pub fn effective_age(
        &self,
        year: i32,
        prev_work_year: i32,
        treatment: Option<(usize, i32)>,
    ) -> [f64; 3] {
        let base = (year - prev_work_year).max(0) as f64;
        match treatment {
            Some((row, tau)) if year >= tau => {
                let at_treatment = (tau - prev_work_year).max(0) as f64;
                let since = (year - tau) as f64;
                let eff = self.effectiveness[row - 1];
                [
                    (1.0 - eff[0]) * at_treatment + since,
                    (1.0 - eff[1]) * at_treatment + since,
                    (1.0 - eff[2]) * at_treatment + since,
                ]
            }
            _ => [base, base, base],
        }
    }
}

/// Latent per-section state drawn before any year is generated.
struct SectionPlan {
    prev_work_year: i32,
    work_row: usize,
    treatment: Option<(usize, i32)>,
    q: [f64; 3],
    iri_offset: f64,
    depth_asym: f64,
    raveling_jitter: f64,
    flushing_jitter: f64,
}

fn draw_plan(config: &GeneratorConfig, rng: &mut Rng) -> SectionPlan {
    let work_row = rng.weighted_index(&config.work_weights) + 1;
    let (prev_work_year, treatment) = if work_row == 1 {
        let age0 = rng.uniform(0.0, config.max_initial_age);
        (YEAR_FIRST - age0.round() as i32, None)
    } else {
        let (lo, hi) = config.treatment_years;
        let tau = lo + rng.index((hi - lo + 1) as usize) as i32;
        let pre_age = rng.uniform(config.treatment_min_age, config.max_initial_age);
        (tau - pre_age.round() as i32, Some((work_row, tau)))
    };
    let (qlo, qhi) = config.susceptibility;
    let q = [
        rng.uniform(qlo, qhi),
        rng.uniform(qlo, qhi),
        rng.uniform(qlo, qhi),
    ];
    SectionPlan {
        prev_work_year,
        work_row,
        treatment,
        q,
        iri_offset: rng.uniform(-config.iri_asymmetry, config.iri_asymmetry),
        depth_asym: rng.uniform(-config.depth_asymmetry, config.depth_asymmetry),
        raveling_jitter: rng.normal() * config.level_threshold_jitter,
        flushing_jitter: rng.normal() * config.level_threshold_jitter,
    }
}

/// Noiseless indicator vector for one year of a planned section.
fn noiseless_row(config: &GeneratorConfig, plan: &SectionPlan, year: i32) -> [f64; NUM_INDICATORS] {
    let ages = config.effective_age(year, plan.prev_work_year, plan.treatment);
    let a_s = ages[Group::Surface as usize] * plan.q[0];
    let a_r = ages[Group::RutDepth as usize] * plan.q[1];
    let a_h = ages[Group::Roughness as usize] * plan.q[2];

    let pcts = [
        config.distress_pct(0, a_s), // shallow rutting
        config.distress_pct(1, a_s), // severe rutting
        config.distress_pct(2, a_s), // failure rutting
        config.distress_pct(3, a_s), // deep rutting
        config.distress_pct(4, a_s), // patching
        config.distress_pct(5, a_s), // block cracking
        config.distress_pct(6, a_s), // alligator cracking
    ];
    let failures = config.failures(a_s);
    let depth = config.rut_depth(a_r);
    let iri = config.iri(a_h);
    let ride = config.ride(a_h);
    let mean_pct = pcts.iter().sum::<f64>() / pcts.len() as f64;
    let ds = config.distress_score(mean_pct, failures);

    let mut row = [0.0; NUM_INDICATORS];
    row[0] = pcts[0];
    row[1] = pcts[1];
    row[2] = pcts[2];
    row[3] = pcts[3];
    row[4] = depth * (1.0 + plan.depth_asym);
    row[5] = depth * (1.0 - plan.depth_asym);
    row[6] = depth;
    row[7] = pcts[4];
    row[8] = failures;
    row[9] = pcts[5];
    row[10] = pcts[6];
    row[11] = config.longitudinal_cracking(a_s);
    row[12] = config.transverse_cracking(a_s);
    row[13] = GeneratorConfig::level(&config.raveling_thresholds, a_s + plan.raveling_jitter);
    row[14] = GeneratorConfig::level(&config.flushing_thresholds, a_s + plan.flushing_jitter);
    row[15] = iri + plan.iri_offset;
    row[16] = iri - plan.iri_offset;
    row[17] = iri;
    row[18] = ride;
    row[19] = ds;
    row[20] = config.condition_score(ds, ride);
    row
}

/// Measurement noise and range clamping; one normal draw per indicator.
fn apply_noise(config: &GeneratorConfig, row: &mut [f64; NUM_INDICATORS], rng: &mut Rng) {
    let n = &config.noise;
    for (i, v) in row.iter_mut().enumerate() {
        let z = rng.normal();
        match i {
            0..=3 | 7 | 9 | 10 => *v = (*v + z * n.percent).clamp(0.0, 100.0),
            4..=6 => *v = (*v + z * n.depth).max(0.0),
            8 | 12 => *v = (*v + z * n.quantity).max(0.0),
            11 => *v = (*v + z * n.length).max(0.0),
            13 | 14 => *v = (*v + z * n.level).round().clamp(1.0, 4.0),
            15..=17 => *v = (*v + z * n.iri).max(0.0),
            18 => *v = (*v + z * n.ride).clamp(0.1, 5.0),
            _ => *v = (*v + z * n.score).clamp(0.0, 100.0),
        }
    }
}

/// Generate `n` complete sections under the given config and seed stream.
pub fn generate_synthetic(
    n: usize,
    config: &GeneratorConfig,
    rng: &mut Rng,
) -> Result<Vec<SectionHistory>> {
    if n == 0 {
        return Err(Error::Contract(
            "synthetic generation needs at least one section".to_string(),
        ));
    }
    config.validate()?;
    let mut sections = Vec::with_capacity(n);
    for idx in 0..n {
        let plan = draw_plan(config, rng);
        let mut records = Vec::with_capacity(TOTAL_YEARS);
        for year in YEAR_FIRST..=YEAR_LAST {
            let mut row = noiseless_row(config, &plan, year);
            apply_noise(config, &mut row, rng);
            records.push(row);
        }
        let (last_work_row, last_work_year) = match plan.treatment {
            Some((row, tau)) => (row, tau),
            None => (plan.work_row, plan.prev_work_year),
        };
        let section = SectionHistory {
            section_id: format!("S{idx:05}"),
            records,
            last_work_row,
            last_work_year,
        };
        debug_assert!(section.validate().is_ok());
        sections.push(section);
    }
    Ok(sections)
}
