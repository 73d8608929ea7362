//! Sparse complex LU for the per-frequency resolvent solves.
//!
//! Left-looking Gilbert–Peierls factorization `P C = L U` of a square matrix
//! in compressed-column form, with threshold partial pivoting that prefers
//! the diagonal. The symbolic step for each column is a depth-first reach
//! through the graph of the columns of `L` already computed, so the work is
//! proportional to the arithmetic actually performed. A reverse
//! Cuthill–McKee ordering is applied symmetrically beforehand to keep banded
//! and mesh-like patterns narrow.

use std::collections::VecDeque;

use nalgebra::Complex;

type C64 = Complex<f64>;

/// Compressed-column pattern and values.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<C64>,
}

impl CscMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            cols[j].push((i, v));
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for mut col in cols {
            col.sort_by_key(|&(i, _)| i);
            for (i, v) in col {
                if rowidx.len() > *colptr.last().unwrap() && *rowidx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    rowidx.push(i);
                    values.push(v);
                }
            }
            colptr.push(rowidx.len());
        }
        Self {
            n,
            colptr,
            rowidx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `(colptr,
/// rowidx)`. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(n: usize, colptr: &[usize], rowidx: &[usize]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for &i in &rowidx[colptr[j]..colptr[j + 1]] {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A = L U` with unit-diagonal `L`. Row indices of `L` are stored in
/// pivot order; the diagonal of `U` is the last entry of each column.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<C64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<C64>,
    /// `pinv[row] = pivot position`.
    pinv: Vec<usize>,
}

const UNSET: usize = usize::MAX;

impl SparseLu {
    /// Factors `a`. `tol` in `(0, 1]` is the diagonal-preference threshold:
    /// the diagonal is kept as pivot when its magnitude is at least `tol`
    /// times the largest candidate. Returns `None` for a structurally or
    /// numerically singular matrix.
    pub fn factor(a: &CscMatrix, tol: f64) -> Option<Self> {
        let n = a.n;
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let cap = 4 * a.nnz() + n;
        let mut li = Vec::with_capacity(cap);
        let mut lx: Vec<C64> = Vec::with_capacity(cap);
        let mut ui = Vec::with_capacity(cap);
        let mut ux: Vec<C64> = Vec::with_capacity(cap);
        let mut pinv = vec![UNSET; n];
        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![UNSET; n];

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());

            // Reach of column k in the graph of L: nonzero pattern of L \ A(:,k),
            // returned in topological order in xi[top..n].
            let mut top = n;
            for &start in &a.rowidx[a.colptr[k]..a.colptr[k + 1]] {
                if mark[start] == k {
                    continue;
                }
                // Iterative DFS.
                let mut head = 0usize;
                stack[0] = start;
                while head != usize::MAX {
                    let j = stack[head];
                    let jcol = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        pstack[head] = if jcol == UNSET { 0 } else { lp[jcol] + 1 };
                    }
                    let mut done = true;
                    if jcol != UNSET {
                        let end = if jcol + 1 < lp.len() { lp[jcol + 1] } else { li.len() };
                        let mut p = pstack[head];
                        while p < end {
                            let i = li[p];
                            p += 1;
                            if mark[i] != k {
                                pstack[head] = p;
                                head += 1;
                                stack[head] = i;
                                done = false;
                                break;
                            }
                        }
                        if done {
                            pstack[head] = end;
                        }
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        head = head.wrapping_sub(1);
                    }
                }
            }

            // Numeric sparse triangular solve.
            for &i in &xi[top..n] {
                x[i] = C64::new(0.0, 0.0);
            }
            for p in a.colptr[k]..a.colptr[k + 1] {
                x[a.rowidx[p]] = a.values[p];
            }
            for px in top..n {
                let j = xi[px];
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                let end = if jcol + 1 < lp.len() { lp[jcol + 1] } else { li.len() };
                for p in lp[jcol] + 1..end {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            // Pivot selection.
            let mut ipiv = UNSET;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    let t = x[i].norm();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == UNSET || !(best > 0.0) || !best.is_finite() {
                return None;
            }
            if pinv[k] == UNSET && mark[k] == k && x[k].norm() >= best * tol {
                ipiv = k;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(C64::new(1.0, 0.0));
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = C64::new(0.0, 0.0);
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for i in li.iter_mut() {
            *i = pinv[*i];
        }
        Some(Self {
            n,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
            pinv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fill of the factors, `nnz(L) + nnz(U)`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    /// Smallest and largest `|U_kk|`.
    pub fn pivot_range(&self) -> (f64, f64) {
        (0..self.n)
            .map(|k| self.ux[self.up[k + 1] - 1].norm())
            .fold((f64::INFINITY, 0.0), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64], work: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            work[self.pinv[i]] = b[i];
        }
        // L
        for j in 0..n {
            let xj = work[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                work[self.li[p]] -= self.lx[p] * xj;
            }
        }
        // U
        for j in (0..n).rev() {
            let last = self.up[j + 1] - 1;
            work[j] /= self.ux[last];
            let xj = work[j];
            for p in self.up[j]..last {
                work[self.ui[p]] -= self.ux[p] * xj;
            }
        }
        b.copy_from_slice(&work[..n]);
    }

    /// Solves `A^T x = b` in place (plain transpose, no conjugation).
    pub fn solve_transpose_in_place(&self, b: &mut [C64], work: &mut [C64]) {
        let n = self.n;
        work[..n].copy_from_slice(b);
        // U^T
        for j in 0..n {
            let last = self.up[j + 1] - 1;
            let mut s = work[j];
            for p in self.up[j]..last {
                s -= self.ux[p] * work[self.ui[p]];
            }
            work[j] = s / self.ux[last];
        }
        // L^T
        for j in (0..n).rev() {
            let mut s = work[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                s -= self.lx[p] * work[self.li[p]];
            }
            work[j] = s;
        }
        for i in 0..n {
            b[i] = work[self.pinv[i]];
        }
    }
}
