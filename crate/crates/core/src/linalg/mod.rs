//! Factorizations of the resolvent matrix `jw I - A(jw)`.

pub mod sparse;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::system::Rtds;
use sparse::{CscMatrix, SparseLu};

pub type C64 = Complex<f64>;

/// Diagonal-preference threshold used by the sparse pivoting.
const SPARSE_PIVOT_TOL: f64 = 0.1;

/// Per-system data needed to assemble and factor the resolvent at any
/// frequency, on either the dense or the sparse path.
pub(crate) struct ResolventPlan<'a> {
    sys: &'a Rtds,
    sparse: Option<SparsePattern>,
}

/// Union pattern of all `A_i` plus the diagonal, already permuted by RCM.
struct SparsePattern {
    perm: Vec<usize>,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    /// `term_values[t][k]`: value of `-A_t` at slot `k` of the union pattern.
    term_values: Vec<Vec<f64>>,
    delays: Vec<f64>,
    diag_slots: Vec<usize>,
}

impl SparsePattern {
    fn build(sys: &Rtds) -> Self {
        let n = sys.states();
        let terms = sys.a().terms();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(j);
            for t in terms {
                for (i, &v) in t.matrix.column(j).iter().enumerate() {
                    if v != 0.0 {
                        col.push(i);
                    }
                }
            }
            col.sort_unstable();
            col.dedup();
        }
        let mut colptr = vec![0];
        let mut rowidx = Vec::new();
        for col in &cols {
            rowidx.extend_from_slice(col);
            colptr.push(rowidx.len());
        }
        let perm = sparse::reverse_cuthill_mckee(n, &colptr, &rowidx);
        let mut pos = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pos[old] = new;
        }

        // Permuted pattern C = P A P^T: column `new` holds old column perm[new].
        let mut pcolptr = vec![0];
        let mut prowidx = Vec::with_capacity(rowidx.len());
        let mut slot_src: Vec<(usize, usize)> = Vec::with_capacity(rowidx.len());
        let mut diag_slots = vec![0; n];
        for (new_j, &old_j) in perm.iter().enumerate() {
            let mut entries: Vec<(usize, usize)> =
                cols[old_j].iter().map(|&old_i| (pos[old_i], old_i)).collect();
            entries.sort_unstable();
            for (new_i, old_i) in entries {
                if new_i == new_j {
                    diag_slots[new_j] = prowidx.len();
                }
                prowidx.push(new_i);
                slot_src.push((old_i, old_j));
            }
            pcolptr.push(prowidx.len());
        }
        let term_values = terms
            .iter()
            .map(|t| slot_src.iter().map(|&(i, j)| -t.matrix[(i, j)]).collect())
            .collect();
        Self {
            perm,
            colptr: pcolptr,
            rowidx: prowidx,
            term_values,
            delays: terms.iter().map(|t| t.delay).collect(),
            diag_slots,
        }
    }

    fn assemble(&self, omega: f64) -> CscMatrix {
        let nnz = self.rowidx.len();
        let mut values = vec![C64::new(0.0, 0.0); nnz];
        for (vals, &h) in self.term_values.iter().zip(&self.delays) {
            let e = C64::from_polar(1.0, -omega * h);
            for (v, &a) in values.iter_mut().zip(vals) {
                if a != 0.0 {
                    *v += e * a;
                }
            }
        }
        for &k in &self.diag_slots {
            values[k] += C64::new(0.0, omega);
        }
        CscMatrix {
            n: self.perm.len(),
            colptr: self.colptr.clone(),
            rowidx: self.rowidx.clone(),
            values,
        }
    }
}

impl<'a> ResolventPlan<'a> {
    pub fn new(sys: &'a Rtds, sparse: bool) -> Self {
        Self {
            sys,
            sparse: sparse.then(|| SparsePattern::build(sys)),
        }
    }

    pub fn factor(&self, omega: f64) -> Result<Resolvent<'_>> {
        match &self.sparse {
            None => {
                let n = self.sys.states();
                let a = crate::freqresp::eval_sum(self.sys.a(), omega);
                let m = Mat::<C64>::from_fn(n, n, |i, j| {
                    let d = if i == j { C64::new(0.0, omega) } else { C64::new(0.0, 0.0) };
                    d - a[(i, j)]
                });
                let lu = m.partial_piv_lu();
                let u = lu.U();
                let (lo, hi) = (0..n)
                    .map(|k| u[(k, k)].norm())
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
                if !(lo > hi * n as f64 * f64::EPSILON) || !hi.is_finite() {
                    return Err(Error::SingularResolvent { omega });
                }
                Ok(Resolvent::Dense(lu))
            }
            Some(pattern) => {
                let csc = pattern.assemble(omega);
                let lu = SparseLu::factor(&csc, SPARSE_PIVOT_TOL)
                    .ok_or(Error::SingularResolvent { omega })?;
                let (lo, hi) = lu.pivot_range();
                if !(lo > hi * f64::EPSILON) || !hi.is_finite() {
                    return Err(Error::SingularResolvent { omega });
                }
                Ok(Resolvent::Sparse {
                    lu,
                    perm: &pattern.perm,
                })
            }
        }
    }
}

/// A factored `jw I - A(jw)`.
pub(crate) enum Resolvent<'a> {
    Dense(PartialPivLu<C64>),
    Sparse { lu: SparseLu, perm: &'a [usize] },
}

impl Resolvent<'_> {
    /// `X = M^{-1} R`.
    pub fn solve(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        self.solve_impl(rhs, false)
    }

    /// `X = M^{-T} R` (plain transpose).
    pub fn solve_transpose(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &DMatrix<C64>, transpose: bool) -> DMatrix<C64> {
        let (n, k) = rhs.shape();
        match self {
            Resolvent::Dense(lu) => {
                let r = Mat::<C64>::from_fn(n, k, |i, j| rhs[(i, j)]);
                let x = if transpose { lu.solve_transpose(&r) } else { lu.solve(&r) };
                DMatrix::from_fn(n, k, |i, j| x[(i, j)])
            }
            Resolvent::Sparse { lu, perm } => {
                let mut out = DMatrix::zeros(n, k);
                let mut col = vec![C64::new(0.0, 0.0); n];
                let mut work = vec![C64::new(0.0, 0.0); n];
                for j in 0..k {
                    // P A P^T (P x) = P b for both A and A^T.
                    for (new, &old) in perm.iter().enumerate() {
                        col[new] = rhs[(old, j)];
                    }
                    if transpose {
                        lu.solve_transpose_in_place(&mut col, &mut work);
                    } else {
                        lu.solve_in_place(&mut col, &mut work);
                    }
                    for (new, &old) in perm.iter().enumerate() {
                        out[(old, j)] = col[new];
                    }
                }
                out
            }
        }
    }
}
