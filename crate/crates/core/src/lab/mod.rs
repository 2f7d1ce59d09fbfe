//! Randomized measurement of the norm inequalities behind the well-posedness
//! argument. Each check draws a seeded ensemble, evaluates the ratio of the
//! two sides of an inequality sample by sample, and reduces to the largest
//! ratio seen.
//!
//! Constants measured this way are empirical: they bound the true optimal
//! constant from below.

mod beta;
mod duhamel;
mod ensemble;
mod kernels;

pub use beta::{alpha_case_coverage, verify_beta_lemma, AlphaCase, AlphaCoverage, BetaLemmaCase};
pub use duhamel::{
    bilinear_ratio, bilinear_samples, verify_bilinear, verify_lem1_components, verify_linear_estimate,
    BilinearSample, TemporalProfile,
};
pub use ensemble::{ensemble_field, sample_seed};
pub use kernels::{
    riesz_extremizer_ratio, verify_heat_lp_lq, verify_hls, verify_riesz_smoothing,
};

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub parameters: Map<String, Value>,
    pub n_samples: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub bound_constant: Option<f64>,
    pub pass: bool,
}

impl EstimateReport {
    fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            parameters: Map::new(),
            n_samples: 0,
            seed,
            max_ratio: 0.0,
            bound_constant: None,
            pass: false,
        }
    }

    fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }
}

/// Largest element, NaN-propagating so a broken sample cannot hide.
fn max_ratio(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, x| {
        if m.is_nan() || x.is_nan() {
            f64::NAN
        } else {
            m.max(x)
        }
    })
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
