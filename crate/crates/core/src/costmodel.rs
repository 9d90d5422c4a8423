//! Per-phase cost records and log-log exponent fitting.
//!
//! The fitted metric is the semiring multiplication count; additions are
//! recorded alongside but not fitted. Wall-clock time is informational.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::semiring::OpTally;
use crate::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseLabel {
    P1,
    P2,
    P3,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 3] = [PhaseLabel::P1, PhaseLabel::P2, PhaseLabel::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::P1 => "P1",
            PhaseLabel::P2 => "P2",
            PhaseLabel::P3 => "P3",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" | "1" => Ok(PhaseLabel::P1),
            "P2" | "2" => Ok(PhaseLabel::P2),
            "P3" | "3" => Ok(PhaseLabel::P3),
            _ => Err(Error::InvalidParameter(format!("unknown phase `{s}`"))),
        }
    }
}

/// Work attributed to one phase of one oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCost {
    pub phase: PhaseLabel,
    pub method: Strategy,
    pub n: usize,
    pub k: usize,
    pub tau: f64,
    pub ops: OpTally,
    pub wall_ns: u128,
}

/// Least-squares fit of `log2(count) = slope · log2(n) + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl fmt::Display for ExponentFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slope={:.6} intercept={:.6} r2={:.6} samples={}",
            self.slope,
            self.intercept,
            self.r2,
            self.samples.len()
        )
    }
}

/// Fits `(n, count)` samples. Needs at least three samples with distinct,
/// positive `n` and positive counts.
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("{} samples, need at least 3", samples.len())));
    }
    if let Some(&(n, c)) = samples.iter().find(|&&(n, c)| !(n > 0.0 && c > 0.0 && n.is_finite() && c.is_finite())) {
        return Err(Error::Fit(format!("non-positive sample (n={n}, count={c})")));
    }
    let mut ns: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("sample sizes must be distinct".into()));
    }

    let xs: Vec<f64> = samples.iter().map(|s| s.0.log2()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.log2()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ExponentFit {
        samples: samples.to_vec(),
        slope,
        intercept,
        r2,
    })
}

/// Averages counts per distinct `n` (ascending), optionally dropping the
/// smallest `n`.
pub fn mean_by_n(samples: &[(f64, f64)], drop_smallest: bool) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for (n, c) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == n => {
                last.1 += c;
                last.2 += 1;
            }
            _ => out.push((n, c, 1)),
        }
    }
    let skip = usize::from(drop_smallest && !out.is_empty());
    out.into_iter().skip(skip).map(|(n, c, t)| (n, c / t as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = [4.0f64, 8.0, 16.0, 32.0].iter().map(|&n| (n, n.powf(2.5))).collect();
        let f = fit_exponent(&s).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-9);
    }

    #[test]
    fn linear_with_constant() {
        let s: Vec<_> = [3.0f64, 10.0, 100.0].iter().map(|&n| (n, 7.0 * n)).collect();
        let f = fit_exponent(&s).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn scaling_counts_only_shifts_intercept() {
        let s = vec![(2.0, 5.0), (4.0, 19.0), (8.0, 70.0), (16.0, 260.0)];
        let a = fit_exponent(&s).unwrap();
        let scaled: Vec<_> = s.iter().map(|&(n, c)| (n, 12.0 * c)).collect();
        let b = fit_exponent(&scaled).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
        assert!((b.intercept - a.intercept - 12f64.log2()).abs() < 1e-12);
        assert!((a.r2 - b.r2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(fit_exponent(&[(2.0, 1.0), (4.0, 2.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_exponent(&[(2.0, 1.0), (4.0, 0.0), (8.0, 3.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_exponent(&[(2.0, 1.0), (2.0, 2.0), (8.0, 3.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_exponent(&[(0.0, 1.0), (2.0, 2.0), (8.0, 3.0)]), Err(Error::Fit(_))));
    }

    #[test]
    fn averaging_and_dropping() {
        let s = vec![(4.0, 2.0), (2.0, 1.0), (4.0, 4.0), (8.0, 9.0), (2.0, 3.0)];
        assert_eq!(mean_by_n(&s, false), vec![(2.0, 2.0), (4.0, 3.0), (8.0, 9.0)]);
        assert_eq!(mean_by_n(&s, true), vec![(4.0, 3.0), (8.0, 9.0)]);
    }

    #[test]
    fn phase_labels_parse() {
        assert_eq!("p3".parse::<PhaseLabel>().unwrap(), PhaseLabel::P3);
        assert_eq!("2".parse::<PhaseLabel>().unwrap(), PhaseLabel::P2);
        assert!("P4".parse::<PhaseLabel>().is_err());
    }
}
