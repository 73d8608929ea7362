//! The retarded time-delay system model.
//!
//! A system is four delayed matrix sums,
//!
//! ```text
//! x'(t) = sum_i A_i x(t - hA_i) + sum_i B_i u(t - hB_i)
//! y(t)  = sum_i C_i x(t - hC_i) + sum_i D_i u(t - hD_i)
//! ```
//!
//! each carrying its own delay list. Every sum contains a term at delay zero
//! (an explicit zero matrix is inserted when the caller omits it), delays are
//! strictly increasing and all matrices of one sum share a shape.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::options::FreqInterval;

/// One coefficient matrix together with the delay it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub matrix: DMatrix<f64>,
}

/// `sum_i M_i z(t - h_i)` with `h_0 = 0 < h_1 < ... < h_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedMatrixSum {
    terms: Vec<DelayTerm>,
}

impl DelayedMatrixSum {
    /// Validates and normalizes a list of `(delay, matrix)` pairs.
    ///
    /// `label` names the sum in error messages. `shape` is required when
    /// `terms` is empty (the sum becomes a single zero matrix) and, when
    /// given, must match every matrix.
    pub fn new(
        label: &'static str,
        terms: Vec<(f64, DMatrix<f64>)>,
        shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        let shape = match (terms.first(), shape) {
            (Some((_, m)), _) => m.shape(),
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::Dimension(format!(
                    "cannot infer the shape of the empty {label} sum"
                )))
            }
        };
        let mut out: Vec<DelayTerm> = Vec::with_capacity(terms.len() + 1);
        for (delay, matrix) in terms {
            if !delay.is_finite() || delay < 0.0 {
                return Err(Error::InvalidDelay { sum: label, delay });
            }
            if matrix.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{label} term at delay {delay} is {}x{}, expected {}x{}",
                    matrix.nrows(),
                    matrix.ncols(),
                    shape.0,
                    shape.1
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { sum: label, delay });
            }
            out.push(DelayTerm { delay, matrix });
        }
        out.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        if let Some(w) = out.windows(2).find(|w| w[0].delay == w[1].delay) {
            return Err(Error::DuplicateDelay {
                sum: label,
                delay: w[0].delay,
            });
        }
        if out.first().map_or(true, |t| t.delay != 0.0) {
            out.insert(
                0,
                DelayTerm {
                    delay: 0.0,
                    matrix: DMatrix::zeros(shape.0, shape.1),
                },
            );
        }
        Ok(Self { terms: out })
    }

    /// A single delay-free term.
    pub fn constant(matrix: DMatrix<f64>) -> Self {
        Self {
            terms: vec![DelayTerm { delay: 0.0, matrix }],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn shape(&self) -> (usize, usize) {
        self.terms[0].matrix.shape()
    }

    /// Number of delayed terms, i.e. the term count minus the delay-free one.
    pub fn delay_count(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.delay)
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.delay)
    }

    /// Sum of all coefficient matrices (the value at zero frequency).
    pub fn total(&self) -> DMatrix<f64> {
        let (r, c) = self.shape();
        self.terms
            .iter()
            .fold(DMatrix::zeros(r, c), |acc, t| acc + &t.matrix)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.matrix.iter().all(|&v| v == 0.0))
    }

    /// Applies `f` to every matrix, keeping the delays.
    pub fn map_matrices(&self, mut f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| DelayTerm {
                    delay: t.delay,
                    matrix: f(&t.matrix),
                })
                .collect(),
        }
    }
}

/// A retarded time-delay system.
#[derive(Debug, Clone, PartialEq)]
pub struct Rtds {
    a: DelayedMatrixSum,
    b: DelayedMatrixSum,
    c: DelayedMatrixSum,
    d: DelayedMatrixSum,
    pub name: Option<String>,
}

/// `(delay, matrix)` pairs as accepted by [`Rtds::new`].
pub type Terms = Vec<(f64, DMatrix<f64>)>;

impl Rtds {
    /// Builds a system from raw term lists. Empty lists (and `d = None`)
    /// become zero matrices whose shape is inferred from the other sums.
    pub fn new(a: Terms, b: Terms, c: Terms, d: Option<Terms>, name: Option<String>) -> Result<Self> {
        let d = d.unwrap_or_default();
        let n = a
            .first()
            .map(|(_, m)| m.nrows())
            .or_else(|| b.first().map(|(_, m)| m.nrows()))
            .or_else(|| c.first().map(|(_, m)| m.ncols()));
        let nu = b
            .first()
            .map(|(_, m)| m.ncols())
            .or_else(|| d.first().map(|(_, m)| m.ncols()));
        let ny = c
            .first()
            .map(|(_, m)| m.nrows())
            .or_else(|| d.first().map(|(_, m)| m.nrows()));
        let (n, nu, ny) = match (n, nu, ny) {
            (Some(n), Some(nu), Some(ny)) => (n, nu, ny),
            _ => {
                return Err(Error::Dimension(
                    "system dimensions cannot be inferred from the given terms".into(),
                ))
            }
        };
        Self::from_sums(
            DelayedMatrixSum::new("A", a, Some((n, n)))?,
            DelayedMatrixSum::new("B", b, Some((n, nu)))?,
            DelayedMatrixSum::new("C", c, Some((ny, n)))?,
            DelayedMatrixSum::new("D", d, Some((ny, nu)))?,
            name,
        )
    }

    /// Assembles a system from already-normalized sums, checking the
    /// cross-shape consistency.
    pub fn from_sums(
        a: DelayedMatrixSum,
        b: DelayedMatrixSum,
        c: DelayedMatrixSum,
        d: DelayedMatrixSum,
        name: Option<String>,
    ) -> Result<Self> {
        let (n, n2) = a.shape();
        if n != n2 {
            return Err(Error::Dimension(format!("A must be square, got {n}x{n2}")));
        }
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        let (bn, nu) = b.shape();
        let (ny, cn) = c.shape();
        if bn != n {
            return Err(Error::Dimension(format!("B has {bn} rows, expected {n}")));
        }
        if cn != n {
            return Err(Error::Dimension(format!("C has {cn} columns, expected {n}")));
        }
        if nu == 0 || ny == 0 {
            return Err(Error::Dimension(
                "input and output dimensions must be positive".into(),
            ));
        }
        if d.shape() != (ny, nu) {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {ny}x{nu}",
                d.shape().0,
                d.shape().1
            )));
        }
        Ok(Self { a, b, c, d, name })
    }

    /// Delay-free `x' = Ax + Bu, y = Cx + Du`.
    pub fn delay_free(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        Self::new(
            vec![(0.0, a)],
            vec![(0.0, b)],
            vec![(0.0, c)],
            d.map(|d| vec![(0.0, d)]),
            None,
        )
    }

    pub fn a(&self) -> &DelayedMatrixSum {
        &self.a
    }
    pub fn b(&self) -> &DelayedMatrixSum {
        &self.b
    }
    pub fn c(&self) -> &DelayedMatrixSum {
        &self.c
    }
    pub fn d(&self) -> &DelayedMatrixSum {
        &self.d
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn states(&self) -> usize {
        self.a.shape().0
    }
    pub fn inputs(&self) -> usize {
        self.b.shape().1
    }
    pub fn outputs(&self) -> usize {
        self.c.shape().0
    }

    /// `(n, n_y, n_u)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.states(), self.outputs(), self.inputs())
    }

    /// `(m_A, m_B, m_C, m_D)`.
    pub fn delay_counts(&self) -> (usize, usize, usize, usize) {
        (
            self.a.delay_count(),
            self.b.delay_count(),
            self.c.delay_count(),
            self.d.delay_count(),
        )
    }

    pub fn max_delay(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|s| s.max_delay())
            .fold(0.0, f64::max)
    }

    pub fn is_delay_free(&self) -> bool {
        self.max_delay() == 0.0
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("sys")
    }

    /// The similarity/projection `A_i -> left A_i right`, `B_i -> left B_i`,
    /// `C_i -> C_i right`. `left` is `r x n`, `right` is `n x r`.
    pub fn project(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<Self> {
        let n = self.states();
        if left.ncols() != n || right.nrows() != n || left.nrows() != right.ncols() {
            return Err(Error::Dimension(format!(
                "projection {}x{} / {}x{} does not fit a system with {n} states",
                left.nrows(),
                left.ncols(),
                right.nrows(),
                right.ncols()
            )));
        }
        Self::from_sums(
            self.a.map_matrices(|m| left * m * right),
            self.b.map_matrices(|m| left * m),
            self.c.map_matrices(|m| m * right),
            self.d.clone(),
            self.name.clone(),
        )
    }

    /// Serializes to the JSON system-file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SystemFile::from(self)).expect("plain data always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        file.try_into()
    }

    /// SHA-256 over the compact serialized system (name excluded) plus the
    /// frequency interval.
    pub fn fingerprint(&self, interval: FreqInterval) -> String {
        let mut file = SystemFile::from(self);
        file.name = None;
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&file).expect("plain data always serializes"));
        hasher.update(interval.lo.to_le_bytes());
        hasher.update(interval.hi.to_le_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn load_rtds(path: impl AsRef<Path>) -> Result<Rtds> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Rtds::from_json(&text)
}

pub fn save_rtds(sys: &Rtds, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, sys.to_json()).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    delay: f64,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(default)]
    name: Option<String>,
    a: Vec<TermFile>,
    b: Vec<TermFile>,
    c: Vec<TermFile>,
    #[serde(default)]
    d: Option<Vec<TermFile>>,
}

fn term_files(sum: &DelayedMatrixSum) -> Vec<TermFile> {
    sum.terms()
        .iter()
        .map(|t| TermFile {
            delay: t.delay,
            matrix: t
                .matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        })
        .collect()
}

impl From<&Rtds> for SystemFile {
    fn from(sys: &Rtds) -> Self {
        Self {
            name: sys.name.clone(),
            a: term_files(&sys.a),
            b: term_files(&sys.b),
            c: term_files(&sys.c),
            d: Some(term_files(&sys.d)),
        }
    }
}

fn parse_terms(label: &str, files: Vec<TermFile>) -> Result<Terms> {
    files
        .into_iter()
        .map(|t| {
            let rows = t.matrix.len();
            let cols = t.matrix.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 {
                return Err(Error::Dimension(format!(
                    "{label} term at delay {} has an empty matrix",
                    t.delay
                )));
            }
            if t.matrix.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension(format!(
                    "{label} term at delay {} has ragged rows",
                    t.delay
                )));
            }
            let m = DMatrix::from_row_iterator(rows, cols, t.matrix.into_iter().flatten());
            Ok((t.delay, m))
        })
        .collect()
}

impl TryFrom<SystemFile> for Rtds {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<Self> {
        let d = match f.d {
            Some(d) if !d.is_empty() => Some(parse_terms("D", d)?),
            _ => None,
        };
        Rtds::new(
            parse_terms("A", f.a)?,
            parse_terms("B", f.b)?,
            parse_terms("C", f.c)?,
            d,
            f.name,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    pub(crate) fn example() -> Rtds {
        Rtds::new(
            vec![
                (0.0, dmatrix![-2.0, -1.0; -1.5, -0.5]),
                (1.0, dmatrix![0.0, 0.5; 1.0, 0.0]),
            ],
            vec![(0.0, dmatrix![1.0; -1.0])],
            vec![(0.0, dmatrix![2.0, 0.2])],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn motivating_example_dimensions() {
        let sys = example();
        assert_eq!(sys.dims(), (2, 1, 1));
        assert_eq!(sys.delay_counts(), (1, 0, 0, 0));
        assert!(sys.d().is_zero());
        assert_eq!(sys.max_delay(), 1.0);
    }

    #[test]
    fn delays_are_sorted() {
        let a0 = dmatrix![-2.0, -1.0; -1.5, -0.5];
        let a1 = dmatrix![0.0, 0.5; 1.0, 0.0];
        let shuffled = Rtds::new(
            vec![(1.0, a1), (0.0, a0)],
            vec![(0.0, dmatrix![1.0; -1.0])],
            vec![(0.0, dmatrix![2.0, 0.2])],
            None,
            None,
        )
        .unwrap();
        assert_eq!(shuffled, example());
    }

    #[test]
    fn duplicate_delay_rejected() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let err = DelayedMatrixSum::new("A", vec![(0.0, i2.clone()), (0.0, i2)], None).unwrap_err();
        assert!(matches!(err, Error::DuplicateDelay { delay, .. } if delay == 0.0));
    }

    #[test]
    fn negative_and_nan_delays_rejected() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        for bad in [-0.5, f64::NAN, f64::INFINITY] {
            let err = DelayedMatrixSum::new("A", vec![(bad, i2.clone())], None).unwrap_err();
            assert!(matches!(err, Error::InvalidDelay { .. }));
        }
    }

    #[test]
    fn missing_zero_delay_inserted() {
        let s = DelayedMatrixSum::new("A", vec![(0.7, DMatrix::from_element(1, 1, -1.0))], None).unwrap();
        assert_eq!(s.terms().len(), 2);
        assert_eq!(s.terms()[0].delay, 0.0);
        assert_eq!(s.terms()[0].matrix[(0, 0)], 0.0);
        assert_eq!(s.delay_count(), 1);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let err = Rtds::new(
            vec![(0.0, DMatrix::identity(2, 2))],
            vec![(0.0, DMatrix::zeros(3, 1))],
            vec![(0.0, DMatrix::zeros(1, 2))],
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn json_round_trip() {
        let sys = example().with_name("example");
        let back = Rtds::from_json(&sys.to_json()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn absent_d_means_zero() {
        let text = r#"{"a":[{"delay":0,"matrix":[[-1]]}],"b":[{"delay":0,"matrix":[[1,2]]}],"c":[{"delay":0.5,"matrix":[[1]]}]}"#;
        let sys = Rtds::from_json(text).unwrap();
        assert_eq!(sys.dims(), (1, 1, 2));
        assert_eq!(sys.delay_counts(), (0, 0, 1, 0));
        assert!(sys.d().is_zero());
        assert!(sys.name.is_none());
    }

    #[test]
    fn negative_delay_in_file_rejected() {
        let text = r#"{"a":[{"delay":-1,"matrix":[[-1]]}],"b":[{"delay":0,"matrix":[[1]]}],"c":[{"delay":0,"matrix":[[1]]}]}"#;
        assert!(matches!(Rtds::from_json(text), Err(Error::InvalidDelay { .. })));
    }

    #[test]
    fn fingerprint_depends_on_system_and_interval() {
        let sys = example();
        let full = FreqInterval::FULL;
        let f0 = sys.fingerprint(full);
        assert_eq!(f0, example().fingerprint(full));
        assert_ne!(f0, sys.fingerprint(FreqInterval::new(0.0, 10.0).unwrap()));
        assert_eq!(f0, example().with_name("renamed").fingerprint(full));
        let scaled = example().project(&DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert_ne!(f0, scaled.fingerprint(full));
    }
}
