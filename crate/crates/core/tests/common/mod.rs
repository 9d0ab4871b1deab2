#![allow(dead_code)]

use std::path::PathBuf;

use qimpute::pipeline::PipelineConfig;
use qimpute::tabular::load_csv;
use qimpute::Dataset;

pub fn data_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetes.csv")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn diabetes() -> Dataset {
    load_csv(data_path(), Some("Outcome")).expect("diabetes data")
}

pub fn config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed: Some(seed),
        ..PipelineConfig::default()
    }
}
