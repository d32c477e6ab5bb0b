//! Shared fixtures for the benchmarks.

use qdefi_core::features::{build_matrix, FeatureConfig};
use qdefi_core::labeling::{LabelSpec, LabeledDataset};
use qdefi_core::market_data::{generate_gbm, CandleSeries, GbmParams};

pub fn series(n: usize) -> CandleSeries {
    generate_gbm(&GbmParams { n, seed: 7, ..GbmParams::default() }).expect("valid parameters")
}

/// Full-schema dataset on a 252-bar synthetic series.
pub fn dataset() -> (CandleSeries, LabeledDataset) {
    let s = series(252);
    let m = build_matrix(&s, &FeatureConfig::Full).expect("enough bars");
    let d = LabeledDataset::build(&s, m, &LabelSpec::default(), 1).expect("enough rows");
    (s, d)
}
