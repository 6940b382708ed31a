//! Fairness functions over length fractions. Larger is fairer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lengths::{alpha_unchecked, PLBox};

fn variance(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    // shifted two-pass: exactly zero when all entries are equal
    let n = a.len() as f64;
    let shift = a[0];
    let mean = a.iter().map(|x| x - shift).sum::<f64>() / n;
    a.iter().map(|x| (x - shift - mean).powi(2)).sum::<f64>() / n
}

fn check_w(w: f64) -> Result<()> {
    if w > 0.0 && w <= 1.0 {
        Ok(())
    } else {
        Err(Error::Fairness(format!("w must lie in (0, 1], got {w}")))
    }
}

/// Negative population variance.
pub fn f1(alpha: &[f64]) -> f64 {
    -variance(alpha)
}

/// `-w Var(alpha) - (1 - w) sum alpha^2`.
pub fn f2(alpha: &[f64], w: f64) -> Result<f64> {
    check_w(w)?;
    Ok(-w * variance(alpha) - (1.0 - w) * alpha.iter().map(|a| a * a).sum::<f64>())
}

/// `-w Var(alpha) - (1 - w) sum v_n alpha_n^2`.
pub fn f2_imb(alpha: &[f64], w: f64, v: &[f64]) -> Result<f64> {
    check_w(w)?;
    if v.len() != alpha.len() {
        return Err(Error::Fairness(format!(
            "expected {} weights, got {}",
            alpha.len(),
            v.len()
        )));
    }
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Fairness(format!("weights must be positive, got {bad}")));
    }
    let eff: f64 = alpha.iter().zip(v).map(|(a, v)| v * a * a).sum();
    Ok(-w * variance(alpha) - (1.0 - w) * eff)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FairnessSpec {
    F1,
    F2 { w: f64 },
    F2Imb { w: f64, v: Vec<f64> },
}

impl Default for FairnessSpec {
    fn default() -> Self {
        FairnessSpec::F2 { w: 0.75 }
    }
}

impl FairnessSpec {
    pub fn validate(&self, uavs: usize) -> Result<()> {
        self.evaluate(&vec![0.0; uavs]).map(|_| ())
    }

    pub fn evaluate(&self, alpha: &[f64]) -> Result<f64> {
        match self {
            FairnessSpec::F1 => Ok(f1(alpha)),
            FairnessSpec::F2 { w } => f2(alpha, *w),
            FairnessSpec::F2Imb { w, v } => f2_imb(alpha, *w, v),
        }
    }

    /// Fairness of a tuple; tuples outside the box are extrapolated.
    pub fn score(&self, tuple: &[usize], bx: &PLBox) -> f64 {
        self.evaluate(&alpha_unchecked(tuple, bx))
            .expect("fairness spec validated before scoring")
    }

    /// Among equally fair tuples, try longer ones first. Only f1 does this:
    /// its maximum is attained by every constant-fraction tuple, and the all-hi
    /// one is the most likely to be feasible.
    pub fn prefers_long(&self) -> bool {
        matches!(self, FairnessSpec::F1)
    }

    /// Unconstrained maximizer over the box.
    pub fn argmax(&self, bx: &PLBox) -> Vec<usize> {
        match self {
            FairnessSpec::F1 => bx.hi.clone(),
            _ => bx.lo.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FairnessSpec::F1 => "f1",
            FairnessSpec::F2 { .. } => "f2",
            FairnessSpec::F2Imb { .. } => "f2imb",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(f1(&[0.7, 0.7, 0.7]), 0.0);
        assert_eq!(f1(&[0.0, 1.0]), -0.25);
        assert_eq!(f1(&[0.3]), 0.0);
        assert_eq!(f2(&[0.5, 0.5], 0.75).unwrap(), -0.125);
        assert_eq!(f2(&[0.0; 4], 0.3).unwrap(), 0.0);
        assert_eq!(f2_imb(&[0.0; 3], 0.5, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn parameter_errors() {
        assert!(f2(&[0.1], 0.0).is_err());
        assert!(f2(&[0.1], 1.5).is_err());
        assert!(f2_imb(&[0.1, 0.2], 0.5, &[1.0, 0.0]).is_err());
        assert!(f2_imb(&[0.1, 0.2], 0.5, &[1.0]).is_err());
    }

    #[test]
    fn json_shape() {
        let s: FairnessSpec =
            serde_json::from_str(r#"{"kind":"f2imb","w":0.75,"v":[10,10,1,1,1]}"#).unwrap();
        assert_eq!(
            s,
            FairnessSpec::F2Imb {
                w: 0.75,
                v: vec![10.0, 10.0, 1.0, 1.0, 1.0]
            }
        );
        assert_eq!(serde_json::to_string(&FairnessSpec::F1).unwrap(), r#"{"kind":"f1"}"#);
    }

    #[test]
    fn argmax_tuples() {
        let b = PLBox::new(vec![0, 1], vec![10, 4]).unwrap();
        assert_eq!(FairnessSpec::F1.argmax(&b), vec![10, 4]);
        assert_eq!(FairnessSpec::default().argmax(&b), vec![0, 1]);
        assert_eq!(FairnessSpec::F1.score(&[10, 4], &b), 0.0);
    }
}
