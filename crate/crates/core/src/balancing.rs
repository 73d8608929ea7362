//! Square-root balancing and balanced truncation.
//!
//! With `W_c = L_c L_c^T`, `W_o = L_o L_o^T` and the SVD
//! `L_o^T L_c = U S V^T`, the transformation `T = L_c V S^{-1/2}` (inverse
//! `S^{-1/2} U^T L_o^T`) maps both gramians to `S`. Since the position
//! gramians transform as `T^{-1} W_c T^{-T}` and `T^T W_o T` under any state
//! similarity, the same algebra balances a delay system. Truncation keeps the
//! leading `r` balanced states. Restricting the gramian integrals to a
//! frequency band gives frequency-limited balanced truncation.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analysis::{gramians, matrix_rows, GramianKind, GramianPair};
use crate::error::{Error, Result};
use crate::freqresp::fmt_machine;
use crate::options::{FreqInterval, QuadOptions};
use crate::system::Rtds;

/// What to do when `S` has entries below `n * eps * S[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Keep only the numerically nonzero directions and log a warning.
    #[default]
    Truncate,
    Error,
}

/// Gramians, the full balancing transformation and the Hankel-like singular
/// values of one system over one frequency band. Reusable across orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingInfo {
    /// `n x r` with `r` the numerical rank (`r = n` unless truncated).
    #[serde(with = "matrix_rows")]
    pub t: DMatrix<f64>,
    /// `r x n`.
    #[serde(with = "matrix_rows")]
    pub t_inv: DMatrix<f64>,
    /// Nonincreasing, nonnegative, length `r`.
    pub hsv: Vec<f64>,
    pub gramians: GramianPair,
    pub freq_interval: FreqInterval,
    pub fingerprint: String,
    pub states: usize,
}

impl BalancingInfo {
    pub fn rank(&self) -> usize {
        self.hsv.len()
    }

    /// `hsv_i / sum(hsv)`.
    pub fn energy_fractions(&self) -> Vec<f64> {
        let total: f64 = self.hsv.iter().sum();
        self.hsv
            .iter()
            .map(|&s| if total > 0.0 { s / total } else { 0.0 })
            .collect()
    }

    /// Checks that this info was computed for `sys` over `interval`.
    pub fn check_matches(&self, sys: &Rtds, interval: FreqInterval) -> Result<()> {
        if self.states != sys.states() || self.t.nrows() != sys.states() {
            return Err(Error::InfoMismatch(format!(
                "info has {} states, system has {}",
                self.states,
                sys.states()
            )));
        }
        if self.freq_interval != interval {
            return Err(Error::InfoMismatch(format!(
                "info covers [{}, {}), requested [{}, {})",
                self.freq_interval.lo, self.freq_interval.hi, interval.lo, interval.hi
            )));
        }
        if self.fingerprint != sys.fingerprint(interval) {
            return Err(Error::InfoMismatch("system fingerprint differs".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// CSV `index,hsv,energy_fraction` (1-based index).
pub fn write_hsv_csv<W: Write>(info: &BalancingInfo, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "hsv", "energy_fraction"])?;
    for (k, (s, e)) in info.hsv.iter().zip(info.energy_fractions()).enumerate() {
        w.write_record(&[(k + 1).to_string(), fmt_machine(*s), fmt_machine(e)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// A factor `L` with `L L^T = W`: Cholesky when it succeeds, otherwise the
/// symmetric eigendecomposition with negative eigenvalues clipped to zero.
pub fn psd_factor(w: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = w.clone().cholesky() {
        let l = ch.unpack();
        if l.iter().all(|v| v.is_finite()) {
            return l;
        }
    }
    let eig = SymmetricEigen::new(w.clone());
    let scales = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut l = eig.eigenvectors;
    for (j, s) in scales.iter().enumerate() {
        l.column_mut(j).scale_mut(*s);
    }
    l
}

/// Square-root balancing transformation from a gramian pair.
/// Returns `(T, T^{-1}, hsv)`.
pub fn balancing_transform(
    wc: &DMatrix<f64>,
    wo: &DMatrix<f64>,
    policy: RankPolicy,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let n = wc.nrows();
    let lc = psd_factor(wc);
    let lo = psd_factor(wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let mut u = svd.u.expect("requested U");
    let mut v = svd.v_t.expect("requested V^T").transpose();
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| s[k].max(0.0)).collect();
    u = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    v = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);

    // Sign convention: first nonzero entry of each V column is positive.
    for j in 0..n {
        let first = v.column(j).iter().copied().find(|x| *x != 0.0).unwrap_or(0.0);
        if first < 0.0 {
            v.column_mut(j).neg_mut();
            u.column_mut(j).neg_mut();
        }
    }

    let s0 = sigma.first().copied().unwrap_or(0.0);
    if !(s0 > 0.0) {
        return Err(Error::RankDeficient { rank: 0, n });
    }
    let threshold = n as f64 * f64::EPSILON * s0;
    let rank = sigma.iter().take_while(|&&x| x > threshold).count();
    if rank < n {
        match policy {
            RankPolicy::Error => return Err(Error::RankDeficient { rank, n }),
            RankPolicy::Truncate => log::warn!(
                "balancing: gramian product has numerical rank {rank} < {n}; keeping {rank} states"
            ),
        }
    }
    let sigma = sigma[..rank].to_vec();
    let inv_sqrt: Vec<f64> = sigma.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut t = &lc * v.columns(0, rank);
    for (j, f) in inv_sqrt.iter().enumerate() {
        t.column_mut(j).scale_mut(*f);
    }
    let mut t_inv = u.columns(0, rank).transpose() * lo.transpose();
    for (i, f) in inv_sqrt.iter().enumerate() {
        t_inv.row_mut(i).scale_mut(*f);
    }
    Ok((t, t_inv, sigma))
}

/// Builds the balancing info of `sys` (gramians over `opts.freq_interval`).
pub fn balancing_info(sys: &Rtds, opts: &QuadOptions, policy: RankPolicy) -> Result<BalancingInfo> {
    let g = gramians(sys, GramianKind::Both, opts)?;
    let (t, t_inv, hsv) = balancing_transform(
        g.wc.as_ref().expect("both gramians requested"),
        g.wo.as_ref().expect("both gramians requested"),
        policy,
    )?;
    Ok(BalancingInfo {
        t,
        t_inv,
        hsv,
        freq_interval: opts.freq_interval,
        fingerprint: sys.fingerprint(opts.freq_interval),
        states: sys.states(),
        gramians: g,
    })
}

/// Balanced realization: every `A_i -> T^{-1} A_i T`, `B_i -> T^{-1} B_i`,
/// `C_i -> C_i T`; delays and `D` unchanged.
pub fn balanced_realization(sys: &Rtds, opts: &QuadOptions) -> Result<(Rtds, BalancingInfo)> {
    balanced_realization_with(sys, opts, RankPolicy::default())
}

pub fn balanced_realization_with(
    sys: &Rtds,
    opts: &QuadOptions,
    policy: RankPolicy,
) -> Result<(Rtds, BalancingInfo)> {
    let info = balancing_info(sys, opts, policy)?;
    let balanced = sys.project(&info.t_inv, &info.t)?;
    Ok((balanced, info))
}

/// A reduced model plus the info it was cut from.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub system: Rtds,
    pub info: BalancingInfo,
    /// Integrand evaluations spent by this call (zero when info was reused).
    pub evaluations: usize,
}

/// Balanced truncation to `order` states. With `info`, no gramians are
/// recomputed; the info must come from this system and frequency band.
pub fn balanced_truncation(
    sys: &Rtds,
    order: usize,
    opts: &QuadOptions,
    info: Option<&BalancingInfo>,
) -> Result<Reduction> {
    let n = sys.states();
    if order == 0 || order > n {
        return Err(Error::InvalidArgument(format!(
            "reduction order {order} must lie in 1..={n}"
        )));
    }
    let (info, evaluations) = match info {
        Some(info) => {
            info.check_matches(sys, opts.freq_interval)?;
            (info.clone(), 0)
        }
        None => {
            let info = balancing_info(sys, opts, RankPolicy::default())?;
            let evals = info.gramians.diagnostics.evaluations;
            (info, evals)
        }
    };
    if order > info.rank() {
        return Err(Error::InvalidArgument(format!(
            "reduction order {order} exceeds the numerical rank {} of the balancing",
            info.rank()
        )));
    }
    let left = info.t_inv.rows(0, order).into_owned();
    let right = info.t.columns(0, order).into_owned();
    let system = sys.project(&left, &right)?;
    Ok(Reduction {
        system,
        info,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn psd_factor_handles_semidefinite() {
        let w = dmatrix![1.0, 1.0; 1.0, 1.0];
        let l = psd_factor(&w);
        assert!((&l * l.transpose() - &w).norm() < 1e-12);
        let w = dmatrix![4.0, 2.0; 2.0, 3.0];
        let l = psd_factor(&w);
        assert!((&l * l.transpose() - &w).norm() < 1e-12);
        assert_eq!(l[(0, 1)], 0.0, "Cholesky factor is lower triangular");
    }

    #[test]
    fn balanced_pair_is_fixed_point() {
        let d = dmatrix![3.0, 0.0, 0.0; 0.0, 2.0, 0.0; 0.0, 0.0, 0.5];
        let (t, t_inv, hsv) = balancing_transform(&d, &d, RankPolicy::Error).unwrap();
        assert_eq!(hsv.len(), 3);
        for (h, want) in hsv.iter().zip([3.0, 2.0, 0.5]) {
            assert!((h - want).abs() < 1e-12);
        }
        // Orthogonal and diagonal up to sign.
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t[(i, j)].abs() - want).abs() < 1e-12);
            }
        }
        assert!((&t * &t_inv - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn transform_diagonalizes_both() {
        let wc = dmatrix![2.0, 0.3, 0.1; 0.3, 1.0, -0.2; 0.1, -0.2, 0.7];
        let wo = dmatrix![0.9, -0.1, 0.0; -0.1, 1.5, 0.4; 0.0, 0.4, 0.6];
        let (t, t_inv, hsv) = balancing_transform(&wc, &wo, RankPolicy::Error).unwrap();
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(hsv.clone()));
        assert!((&t_inv * &wc * t_inv.transpose() - &s).norm() < 1e-12);
        assert!((t.transpose() * &wo * &t - &s).norm() < 1e-12);
        assert!(hsv.windows(2).all(|w| w[0] >= w[1]));
        // V sign convention
        let lc = psd_factor(&wc);
        let v_first_row = lc.clone().try_inverse().unwrap() * &t;
        for j in 0..3 {
            let first = v_first_row.column(j).iter().copied().find(|x| x.abs() > 1e-14).unwrap();
            assert!(first > 0.0);
        }
    }

    #[test]
    fn rank_policy() {
        let wc = dmatrix![1.0, 0.0; 0.0, 0.0];
        let wo = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(matches!(
            balancing_transform(&wc, &wo, RankPolicy::Error),
            Err(Error::RankDeficient { rank: 1, n: 2 })
        ));
        let (t, t_inv, hsv) = balancing_transform(&wc, &wo, RankPolicy::Truncate).unwrap();
        assert_eq!((t.shape(), t_inv.shape(), hsv.len()), ((2, 1), (1, 2), 1));
        let zero = DMatrix::zeros(2, 2);
        assert!(matches!(
            balancing_transform(&zero, &wo, RankPolicy::Truncate),
            Err(Error::RankDeficient { rank: 0, .. })
        ));
    }

    #[test]
    fn order_out_of_range() {
        let sys = Rtds::delay_free(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0], None).unwrap();
        let opts = QuadOptions::default();
        assert!(balanced_truncation(&sys, 0, &opts, None).is_err());
        assert!(balanced_truncation(&sys, 2, &opts, None).is_err());
    }

    #[test]
    fn energy_fractions_sum_to_one() {
        let sys = Rtds::delay_free(
            dmatrix![-1.0, 0.2; 0.0, -3.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, -0.5],
            None,
        )
        .unwrap();
        let (_, info) = balanced_realization(&sys, &QuadOptions::default()).unwrap();
        let e = info.energy_fractions();
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        write_hsv_csv(&info, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,hsv,energy_fraction\n1,"));
        let back = BalancingInfo::from_json(&info.to_json()).unwrap();
        assert_eq!(back, info);
    }
}
