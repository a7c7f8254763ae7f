use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `w_c = N / (C · count_c)`: inverse class frequency, averaging 1 over the
/// empirical class distribution.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::Data("class_weights needs at least one class".into()));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no examples")));
    }
    let total: usize = counts.iter().sum();
    let classes = counts.len() as f64;
    Ok(counts.iter().map(|&n| total as f64 / (classes * n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassWeightMode {
    #[default]
    Balanced,
    Uniform,
}

impl ClassWeightMode {
    pub fn weights(self, counts: &[usize]) -> Result<Vec<f64>> {
        match self {
            ClassWeightMode::Balanced => class_weights(counts),
            ClassWeightMode::Uniform => Ok(vec![1.0; counts.len()]),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassWeightMode::Balanced => "balanced",
            ClassWeightMode::Uniform => "uniform",
        }
    }
}

impl fmt::Display for ClassWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassWeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(ClassWeightMode::Balanced),
            "uniform" => Ok(ClassWeightMode::Uniform),
            other => Err(Error::Config(format!("unknown class-weight mode `{other}` (balanced|uniform)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_counts() {
        // not hate, hate
        let w = class_weights(&[112_845, 36_978]).unwrap();
        assert!((w[1] - 2.0258).abs() < 1e-4, "{w:?}");
        assert!((w[0] - 0.6638).abs() < 1e-4, "{w:?}");
        let mean = (w[0] * 112_845.0 + w[1] * 36_978.0) / 149_823.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_counts_give_unit_weights() {
        assert_eq!(class_weights(&[7, 7]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn empty_class_rejected() {
        assert!(class_weights(&[3, 0]).is_err());
        assert!(ClassWeightMode::Balanced.weights(&[0, 1]).is_err());
        assert_eq!(ClassWeightMode::Uniform.weights(&[0, 1]).unwrap(), vec![1.0, 1.0]);
    }
}
