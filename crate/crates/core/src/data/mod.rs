//! PMIS-style data model: indicator tables, section histories, CSV I/O,
//! feature encoding, normalization, splitting, and the synthetic generator.

mod csv_io;
mod encode;
mod indicators;
mod normalize;
mod section;
mod synth;

pub use csv_io::{
    conditions_header, ingest_csv, write_conditions, write_work_history, IngestReport, WORK_HEADER,
};
pub use encode::{
    encode_dataset, encode_section, split_assignment, Dataset, FeatureMatrix, Sample,
    SplitAssignment, FEATURE_COLS, S_COLUMN, S_SCALE,
};
pub use indicators::{
    indicator_by_name, indicator_names, IndicatorDef, RangeKind, VariableKind, WorkType,
    INDICATORS, NUM_INDICATORS, NUM_WORK_TYPES, WORK_TYPES,
};
pub use normalize::{percentile, IndicatorStat, Normalizer, CAP_PERCENTILE};
pub use section::{SectionHistory, FEATURE_YEARS, TOTAL_YEARS, YEAR_FIRST, YEAR_LAST};
pub use synth::{generate_synthetic, GeneratorConfig, Group, NoiseScales};

use crate::error::Result;
use crate::rng::{Rng, Stream};
use crate::scalar::Scalar;

/// The canonical preparation pipeline: split by section (seeded), fit the
/// normalizer on the training sections only, then encode everything.
pub fn prepare_dataset<S: Scalar>(
    sections: &[SectionHistory],
    indicator: &'static IndicatorDef,
    test_fraction: f64,
    split_seed: u64,
) -> Result<(Dataset<S>, Normalizer)> {
    let mut rng = Rng::for_stream(split_seed, Stream::Split);
    let split = split_assignment(sections.len(), test_fraction, &mut rng)?;
    let train_sections = sections
        .iter()
        .zip(&split.test)
        .filter_map(|(s, &t)| (!t).then_some(s));
    let norm = Normalizer::fit(train_sections)?;
    let dataset = encode_dataset(sections, indicator, &norm, split)?;
    Ok((dataset, norm))
}
