//! Power-series coefficients `ζ_k` of the supported matrix functions.
//!
//! The scaling `γ` is folded into the matrix before walking, so the streams
//! here carry the coefficients of the base function only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Coefficient source for `f(A) = Σ_k ζ_k A^k`.
///
/// Implementations must have `0 <= ζ_k <= 1`; walkers evaluate the stream
/// incrementally through [`CoefficientStream::ratio`].
pub trait CoefficientStream: Sync {
    /// `ζ_k`.
    fn coeff(&self, k: usize) -> f64;

    /// `ζ_{k+1} / ζ_k`.
    fn ratio(&self, k: usize) -> f64;

    /// `ζ_{k+1}` given `ζ_k`.
    #[inline]
    fn next_coeff(&self, k: usize, current: f64) -> f64 {
        current * self.ratio(k)
    }

    fn cursor(&self, start: usize) -> CoefficientCursor<'_, Self>
    where
        Self: Sized,
    {
        CoefficientCursor {
            stream: self,
            k: start,
            value: self.coeff(start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFunction {
    /// `e^A`, `ζ_k = 1/k!`.
    Exponential,
    /// `(I - A)^{-1}`, `ζ_k = 1`.
    Resolvent,
}

impl CoefficientStream for MatrixFunction {
    fn coeff(&self, k: usize) -> f64 {
        match self {
            MatrixFunction::Exponential => {
                // 1/k! by recurrence; underflows to 0 past k ~ 177.
                let mut c = 1.0;
                for j in 1..=k {
                    c /= j as f64;
                    if c == 0.0 {
                        break;
                    }
                }
                c
            }
            MatrixFunction::Resolvent => 1.0,
        }
    }

    fn ratio(&self, k: usize) -> f64 {
        match self {
            MatrixFunction::Exponential => 1.0 / (k + 1) as f64,
            MatrixFunction::Resolvent => 1.0,
        }
    }

    #[inline]
    fn next_coeff(&self, k: usize, current: f64) -> f64 {
        match self {
            MatrixFunction::Exponential => current / (k + 1) as f64,
            MatrixFunction::Resolvent => current,
        }
    }
}

impl MatrixFunction {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixFunction::Exponential => "exponential",
            MatrixFunction::Resolvent => "resolvent",
        }
    }
}

impl fmt::Display for MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatrixFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(MatrixFunction::Exponential),
            "resolvent" | "inverse" => Ok(MatrixFunction::Resolvent),
            other => Err(Error::invalid(format!("unknown matrix function {other:?}"))),
        }
    }
}

/// Incremental walk over `ζ_k, ζ_{k+1}, ...`.
#[derive(Debug, Clone)]
pub struct CoefficientCursor<'a, S: CoefficientStream> {
    stream: &'a S,
    k: usize,
    value: f64,
}

impl<S: CoefficientStream> CoefficientCursor<'_, S> {
    #[inline]
    pub fn index(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn advance(&mut self) {
        self.value = self.stream.next_coeff(self.k, self.value);
        self.k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_values() {
        let f = MatrixFunction::Exponential;
        assert_eq!(f.coeff(0), 1.0);
        assert_eq!(f.coeff(1), 1.0);
        assert_eq!(f.coeff(2), 0.5);
        assert_eq!(f.coeff(3), 1.0 / 6.0);
    }

    #[test]
    fn exponential_tail_underflows_cleanly() {
        let f = MatrixFunction::Exponential;
        let c = f.coeff(170);
        assert!(c > 0.0 && c.is_finite() && c < 1e-300);
        let far = f.coeff(400);
        assert_eq!(far, 0.0);
        assert!(!far.is_nan());
    }

    #[test]
    fn resolvent_is_geometric() {
        let f = MatrixFunction::Resolvent;
        assert!((0..50).all(|k| f.coeff(k) == 1.0 && f.ratio(k) == 1.0));
    }

    #[test]
    fn ratio_examples() {
        let f = MatrixFunction::Exponential;
        assert_eq!(f.ratio(0), 1.0);
        assert_eq!(f.ratio(9), 0.1);
        assert_eq!(MatrixFunction::Resolvent.ratio(5), 1.0);
    }

    #[test]
    fn recurrence_consistency() {
        let f = MatrixFunction::Exponential;
        for k in 0..180 {
            let lhs = f.coeff(k + 1);
            let rhs = f.coeff(k) / (k + 1) as f64;
            assert_eq!(lhs, rhs, "k = {k}");
            assert!(f.coeff(k) <= 1.0);
        }
    }

    #[test]
    fn cursor_tracks_direct_evaluation() {
        let f = MatrixFunction::Exponential;
        let mut c = f.cursor(2);
        for k in 2..40 {
            assert_eq!(c.index(), k);
            assert_eq!(c.value(), f.coeff(k));
            c.advance();
        }
    }

    #[test]
    fn parse_tags() {
        assert_eq!("exp".parse::<MatrixFunction>().unwrap(), MatrixFunction::Exponential);
        assert_eq!(
            "Resolvent".parse::<MatrixFunction>().unwrap(),
            MatrixFunction::Resolvent
        );
        assert!(matches!(
            "cosh".parse::<MatrixFunction>(),
            Err(Error::InvalidArgument(_))
        ));
    }
}
