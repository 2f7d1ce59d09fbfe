use serde::Serialize;
use statrs::function::beta::beta;

use super::EstimateReport;
use crate::error::{Error, Result};
use crate::oracles::adaptive_quadrature;
use crate::spaces::SobolevIndex;

/// Parameters of `int_0^t (t - y)^{-b} y^{-a} dy = t^{-r} B(1 - a, 1 - b)`,
/// `r = a + b - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaLemmaCase {
    a: f64,
    b: f64,
    r: f64,
    t: f64,
}

impl BetaLemmaCase {
    pub fn new(a: f64, b: f64, t: f64) -> Result<Self> {
        let r = a + b - 1.0;
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exponents must lie in (0, 1), got a = {a}, b = {b}"
            )));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= a + b - 1 <= 1, got {r}"
            )));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        Ok(Self { a, b, r, t })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `int_0^t (t - y)^{-b} y^{-a} dy` by adaptive quadrature.
    pub fn integral(&self) -> Result<f64> {
        let (a, b) = (self.a, self.b);
        adaptive_quadrature(
            |y| y.to_upper.powf(-b) * y.to_lower.powf(-a),
            0.0,
            self.t,
            1e-11 * self.t.powf(-self.r),
        )
    }

    /// `B(1 - a, 1 - b)`.
    pub fn beta_value(&self) -> f64 {
        beta(1.0 - self.a, 1.0 - self.b)
    }

    /// `a, b` on a uniform 5 x 5 grid in `[1/2, 9/10]` (so `r` spans
    /// `[0, 4/5]`), plus the `r = 0` pairing `(7/8, 1/8)`, at each `t`.
    pub fn standard_set(times: &[f64]) -> Result<Vec<Self>> {
        let levels = [0.5, 0.6, 0.7, 0.8, 0.9];
        let mut cases = Vec::new();
        for &t in times {
            for &a in &levels {
                for &b in &levels {
                    cases.push(Self::new(a, b, t)?);
                }
            }
            cases.push(Self::new(0.875, 0.125, t)?);
        }
        Ok(cases)
    }
}

/// Checks `integral / t^{-r} = B(1 - a, 1 - b)` to `1e-8` for every case.
/// `max_ratio` is the largest `integral / (t^{-r} B)`, which is `1` when
/// the identity holds.
pub fn verify_beta_lemma(cases: &[BetaLemmaCase]) -> Result<EstimateReport> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases given".into()));
    }
    let mut worst_gap = 0.0_f64;
    let mut ratios = Vec::with_capacity(cases.len());
    for case in cases {
        let scaled = case.integral()? / case.t.powf(-case.r);
        let exact = case.beta_value();
        worst_gap = worst_gap.max((scaled - exact).abs());
        ratios.push(scaled / exact);
    }
    let grid: Vec<[f64; 3]> = cases.iter().map(|c| [c.a, c.b, c.t]).collect();
    let mut report = EstimateReport::new("beta_lemma", 0)
        .param("cases", serde_json::to_value(grid)?)
        .param("max_abs_deviation", worst_gap);
    report.n_samples = cases.len();
    report.max_ratio = super::max_ratio(ratios);
    report.bound_constant = Some(1.0);
    report.pass = worst_gap <= 1e-8;
    Ok(report)
}

/// Which branch of the bilinear argument covers `alpha`: the first for
/// `0 < alpha <= 7/16`, the second for `7/16 < alpha <= 7/8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaCase {
    First,
    Second,
}

impl AlphaCase {
    pub fn of(idx: SobolevIndex) -> Self {
        if idx.alpha() <= 7.0 / 16.0 {
            AlphaCase::First
        } else {
            AlphaCase::Second
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AlphaCase::First => "first",
            AlphaCase::Second => "second",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaCoverageEntry {
    pub s: f64,
    pub alpha: f64,
    pub case: AlphaCase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaCoverage {
    pub entries: Vec<AlphaCoverageEntry>,
    pub covers_both: bool,
}

pub fn alpha_case_coverage(indices: &[SobolevIndex]) -> AlphaCoverage {
    let entries: Vec<_> = indices
        .iter()
        .map(|idx| AlphaCoverageEntry {
            s: idx.s(),
            alpha: idx.alpha(),
            case: AlphaCase::of(*idx),
        })
        .collect();
    let covers_both = entries.iter().any(|e| e.case == AlphaCase::First)
        && entries.iter().any(|e| e.case == AlphaCase::Second);
    AlphaCoverage {
        entries,
        covers_both,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_half_gives_pi() {
        let case = BetaLemmaCase::new(0.5, 0.5, 1.0).unwrap();
        assert_eq!(case.r(), 0.0);
        assert!((case.integral().unwrap() - PI).abs() < 1e-8);
    }

    #[test]
    fn scale_invariance() {
        for (a, b) in [(0.6, 0.7), (0.9, 0.5), (0.875, 0.125)] {
            let values: Vec<f64> = [0.1, 1.0, 10.0]
                .iter()
                .map(|&t| {
                    let c = BetaLemmaCase::new(a, b, t).unwrap();
                    c.integral().unwrap() / t.powf(-c.r())
                })
                .collect();
            assert!((values[0] - values[1]).abs() < 1e-8);
            assert!((values[2] - values[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_order_pairing() {
        let case = BetaLemmaCase::new(0.875, 0.125, 3.0).unwrap();
        assert_eq!(case.r(), 0.0);
        let expected = beta(0.125, 0.875);
        assert!((case.integral().unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn case_validation() {
        assert!(BetaLemmaCase::new(0.2, 0.3, 1.0).is_err());
        assert!(BetaLemmaCase::new(1.0, 0.5, 1.0).is_err());
        assert!(BetaLemmaCase::new(0.5, 0.5, 0.0).is_err());
        assert!(verify_beta_lemma(&[]).is_err());
    }

    #[test]
    fn small_suite_passes() {
        let cases = [
            BetaLemmaCase::new(0.5, 0.5, 1.0).unwrap(),
            BetaLemmaCase::new(0.7, 0.9, 10.0).unwrap(),
        ];
        let report = verify_beta_lemma(&cases).unwrap();
        assert!(report.pass);
        assert!((report.max_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_cases() {
        let idx = |s| SobolevIndex::new(s).unwrap();
        assert_eq!(AlphaCase::of(idx(0.0)), AlphaCase::Second);
        assert_eq!(AlphaCase::of(idx(1.0)), AlphaCase::First);
        assert_eq!(AlphaCase::of(idx(0.25)), AlphaCase::First);
        assert!(alpha_case_coverage(&[idx(0.0), idx(1.0)]).covers_both);
        assert!(!alpha_case_coverage(&[idx(1.0), idx(1.5)]).covers_both);
    }
}
