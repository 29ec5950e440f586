//! Resolution of model arguments: preset names or JSON files.

use std::path::Path;

use twoway_core::achievability::{HanScheme, HybridScheme};
use twoway_core::coded::Configuration;
use twoway_core::models::*;
use twoway_core::region::uncoded_configuration;
use twoway_core::schema::Document;

use crate::output::CliError;

pub const CHANNEL_PRESETS: [&str; 3] = ["bmc", "dueck", "bitpipe"];
pub const SOURCE_PRESETS: [&str; 2] = ["example2", "bernoulli:p1,p2"];
pub const DISTORTION_PRESETS: [&str; 1] = ["hamming:n"];
pub const SCENARIOS: [&str; 1] = ["bmc-example2"];

pub fn load_document(path: &str) -> Result<Document, CliError> {
    let p = Path::new(path);
    if !p.exists() {
        return Err(CliError::Input(format!("{path}: no such file")));
    }
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    Document::parse(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

fn in_file<T>(path: &str, r: twoway_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("{path}: {e}")))
}

pub fn channel(spec: &str) -> Result<TwoWayChannel, CliError> {
    match spec {
        "bmc" => Ok(preset_bmc()),
        "dueck" => Ok(preset_dueck()),
        "bitpipe" | "crossed-bit-pipes" => Ok(preset_crossed_bit_pipes()),
        path => in_file(path, load_document(path)?.into_channel()),
    }
}

fn probability(text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Input(format!("not a probability: {text:?}")))
}

pub fn source(spec: &str) -> Result<JointSource, CliError> {
    if let Some(rest) = spec.strip_prefix("bernoulli:") {
        let ps: Vec<&str> = rest.split(',').collect();
        let (p1, p2) = match ps.as_slice() {
            [p] => (probability(p)?, probability(p)?),
            [p1, p2] => (probability(p1)?, probability(p2)?),
            _ => return Err(CliError::Input(format!("bad source preset {spec:?}"))),
        };
        return preset_independent_bernoulli(p1, p2).map_err(CliError::from_core);
    }
    match spec {
        "example2" | "example2-source" => Ok(preset_example2_source()),
        path => in_file(path, load_document(path)?.into_source()),
    }
}

/// `None` or `"hamming"` give Hamming distortion on `size` letters.
pub fn distortion(spec: Option<&str>, size: usize) -> Result<DistortionMeasure, CliError> {
    match spec {
        None | Some("hamming") => Ok(hamming(size)),
        Some(s) if s.starts_with("hamming:") => {
            let n: usize = s["hamming:".len()..]
                .parse()
                .map_err(|_| CliError::Input(format!("bad distortion preset {s:?}")))?;
            Ok(hamming(n))
        }
        Some(path) => in_file(path, load_document(path)?.into_distortion()),
    }
}

pub fn configuration(spec: &str) -> Result<Configuration, CliError> {
    in_file(spec, load_document(spec)?.into_configuration())
}

pub fn han(spec: &str) -> Result<HanScheme, CliError> {
    in_file(spec, load_document(spec)?.into_han())
}

pub fn hybrid(spec: &str) -> Result<HybridScheme, CliError> {
    in_file(spec, load_document(spec)?.into_hybrid())
}

/// A fully specified scenario.
pub struct Scenario {
    pub channel: TwoWayChannel,
    pub source: JointSource,
    pub d: [DistortionMeasure; 2],
    pub config: Configuration,
}

pub fn scenario(name: &str) -> Result<Scenario, CliError> {
    match name {
        "bmc-example2" => {
            let channel = preset_bmc();
            let source = preset_example2_source();
            let d = [hamming(2), hamming(2)];
            let config = uncoded_configuration(&channel, &source, &d[0], &d[1])
                .map_err(CliError::from_core)?;
            Ok(Scenario {
                channel,
                source,
                d,
                config,
            })
        }
        other => Err(CliError::Input(format!(
            "unknown scenario {other:?}; known: {}",
            SCENARIOS.join(", ")
        ))),
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("not a number: {t:?}")))
        })
        .collect()
}
