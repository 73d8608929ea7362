use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A one-sided frequency band `[lo, hi)` in rad/s, `hi` possibly infinite.
///
/// Integrals over a band are mirrored onto `(-hi, -lo]` as well, so the
/// full line corresponds to `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FreqInterval {
    pub const FULL: FreqInterval = FreqInterval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || lo < 0.0 || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "frequency interval ({lo}, {hi}) must satisfy 0 <= lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }
}

impl Default for FreqInterval {
    fn default() -> Self {
        Self::FULL
    }
}

// JSON has no infinity; an unbounded upper edge is written as `null`.
#[derive(Serialize, Deserialize)]
struct FreqIntervalRepr {
    lo: f64,
    hi: Option<f64>,
}

impl Serialize for FreqInterval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FreqIntervalRepr {
            lo: self.lo,
            hi: self.hi.is_finite().then_some(self.hi),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreqInterval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FreqIntervalRepr::deserialize(d)?;
        FreqInterval::new(r.lo, r.hi.unwrap_or(f64::INFINITY)).map_err(serde::de::Error::custom)
    }
}

/// Options shared by the norm and gramian integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Factor the resolvent with the sparse LU instead of the dense one.
    pub sparse: bool,
    pub freq_interval: FreqInterval,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            sparse: false,
            freq_interval: FreqInterval::FULL,
        }
    }
}

impl QuadOptions {
    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_sparse(mut self, sparse: bool) -> Self {
        self.sparse = sparse;
        self
    }

    pub fn with_interval(mut self, interval: FreqInterval) -> Self {
        self.freq_interval = interval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        FreqInterval::new(self.freq_interval.lo, self.freq_interval.hi).map(|_| ())
    }
}
