//! H2 norm and position gramians by direct quadrature of their
//! frequency-domain definitions.
//!
//! For real coefficient matrices the integrands are conjugate symmetric in
//! `w`, so the doubly infinite integrals are folded onto `[0, inf)`:
//!
//! ```text
//! |G|_2^2 = (1/pi) int_0^inf trace(G(jw)^* G(jw)) dw
//! W_c     = (1/pi) int_0^inf Re(G_AB(jw) G_AB(jw)^*) dw
//! W_o     = (1/pi) int_0^inf Re(G_CA(jw)^* G_CA(jw)) dw
//! ```
//!
//! A frequency interval `[lo, hi)` restricts these integrals to
//! `(-hi, -lo] U [lo, hi)`. Tolerances apply to the integral values
//! themselves (`|G|_2^2` and the gramians), including the `1/pi` factor.
//!
//! Exponential stability of the system is a precondition and is not checked.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotic::TailModel;
use crate::error::{Error, Result};
use crate::freqresp::eval_sum;
use crate::linalg::{ResolventPlan, C64};
use crate::options::{FreqInterval, QuadOptions};
use crate::quadrature::{integrate_matrix, integrate_matrix_offset, QuadConfig, QuadResult};
use crate::system::Rtds;

/// Quadrature diagnostics attached to every integral-based result.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadDiagnostics {
    pub evaluations: usize,
    pub panels: usize,
    pub abs_error_estimate: f64,
}

impl From<&QuadResult> for QuadDiagnostics {
    fn from(r: &QuadResult) -> Self {
        Self {
            evaluations: r.evaluations,
            panels: r.panels,
            abs_error_estimate: r.abs_error_estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub value: f64,
    pub diagnostics: QuadDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramianKind {
    Controllability,
    Observability,
    Both,
}

impl GramianKind {
    fn wants_c(self) -> bool {
        matches!(self, Self::Controllability | Self::Both)
    }
    fn wants_o(self) -> bool {
        matches!(self, Self::Observability | Self::Both)
    }
}

/// Controllability and/or observability gramians over one frequency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianPair {
    #[serde(with = "opt_matrix_rows")]
    pub wc: Option<DMatrix<f64>>,
    #[serde(with = "opt_matrix_rows")]
    pub wo: Option<DMatrix<f64>>,
    pub freq_interval: FreqInterval,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub diagnostics: QuadDiagnostics,
}

fn config(opts: &QuadOptions) -> QuadConfig {
    QuadConfig::with_tolerances(opts.abs_tol, opts.rel_tol)
}

fn check_converged(quantity: &'static str, r: &QuadResult) -> Result<()> {
    if r.converged {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            quantity,
            abs_error: r.abs_error_estimate,
            evaluations: r.evaluations,
            panels: r.panels,
        })
    }
}

/// `trace(G(jw)^* G(jw))` without feedthrough, on the dense path.
pub fn trace_integrand(sys: &Rtds, omega: f64) -> Result<f64> {
    trace_integrand_with(sys, omega, false)
}

/// As [`trace_integrand`], choosing the dense or sparse resolvent solve.
pub fn trace_integrand_with(sys: &Rtds, omega: f64, sparse: bool) -> Result<f64> {
    let plan = ResolventPlan::new(sys, sparse);
    trace_at(sys, &plan, omega)
}

fn trace_at(sys: &Rtds, plan: &ResolventPlan<'_>, omega: f64) -> Result<f64> {
    let x = plan.factor(omega)?.solve(&eval_sum(sys.b(), omega));
    let g = eval_sum(sys.c(), omega) * x;
    Ok(g.iter().map(|z| z.norm_sqr()).sum())
}

pub fn h2_norm(sys: &Rtds, opts: &QuadOptions) -> Result<f64> {
    h2_norm_report(sys, opts).map(|r| r.value)
}

/// H2 norm (frequency-limited when `opts.freq_interval` is not the full
/// line) together with quadrature diagnostics.
pub fn h2_norm_report(sys: &Rtds, opts: &QuadOptions) -> Result<H2Report> {
    opts.validate()?;
    if !sys.d().is_zero() {
        return Err(Error::NonzeroFeedthrough);
    }
    let plan = ResolventPlan::new(sys, opts.sparse);
    let model = TailModel::transfer(sys.a(), sys.b(), sys.c());
    let (value, diagnostics) = integrate_band(
        |w| Ok(DMatrix::from_element(1, 1, trace_at(sys, &plan, w)?)),
        |w| DMatrix::from_element(1, 1, model.eval(w).trace()),
        DMatrix::from_element(1, 1, model.half_line_integral().trace()),
        opts,
        "the H2 norm",
    )?;
    Ok(H2Report {
        value: value[(0, 0)].max(0.0).sqrt(),
        diagnostics,
    })
}

/// `(1/pi) int f` over `opts.freq_interval`.
///
/// On a half-line band the high-frequency model `m` is subtracted from the
/// integrand and its integral added back: `m_total` over `[0, inf)`, less a
/// quadrature of `m` over `[0, lo)` when `lo > 0`. The tolerances refer to
/// the assembled value.
fn integrate_band<F, M>(
    f: F,
    m: M,
    m_total: DMatrix<f64>,
    opts: &QuadOptions,
    quantity: &'static str,
) -> Result<(DMatrix<f64>, QuadDiagnostics)>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync + Send,
    M: Fn(f64) -> DMatrix<f64> + Sync + Send,
{
    let iv = opts.freq_interval;
    if iv.hi.is_finite() {
        let r = integrate_matrix(|w| Ok(f(w)? / PI), iv.lo, iv.hi, &config(opts))?;
        check_converged(quantity, &r)?;
        let diag = (&r).into();
        return Ok((r.value, diag));
    }
    let total = m_total / PI;
    let mut diag = QuadDiagnostics::default();
    let (head, cfg) = if iv.lo > 0.0 {
        let half = QuadConfig::with_tolerances(0.5 * opts.abs_tol, 0.5 * opts.rel_tol);
        let neg = -&total;
        let r = integrate_matrix_offset(|w| Ok(m(w) / PI), 0.0, iv.lo, Some(&neg), &half)?;
        check_converged(quantity, &r)?;
        diag = (&r).into();
        (total - r.value, half)
    } else {
        (total, config(opts))
    };
    let r = integrate_matrix_offset(
        |w| Ok((f(w)? - m(w)) / PI),
        iv.lo,
        f64::INFINITY,
        Some(&head),
        &cfg,
    )?;
    check_converged(quantity, &r)?;
    diag.evaluations += r.evaluations;
    diag.panels += r.panels;
    diag.abs_error_estimate += r.abs_error_estimate;
    Ok((head + r.value, diag))
}

/// `Re(X X^*)` for complex `X`.
fn real_outer(x: &DMatrix<C64>) -> DMatrix<f64> {
    let re = x.map(|z| z.re);
    let im = x.map(|z| z.im);
    &re * re.transpose() + &im * im.transpose()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn gramians(sys: &Rtds, which: GramianKind, opts: &QuadOptions) -> Result<GramianPair> {
    opts.validate()?;
    let n = sys.states();
    let plan = ResolventPlan::new(sys, opts.sparse);
    let (want_c, want_o) = (which.wants_c(), which.wants_o());
    let blocks = usize::from(want_c) + usize::from(want_o);
    let iv = opts.freq_interval;

    // Both gramians share one factorization per frequency: the integrand is
    // the side-by-side block [W_c | W_o].
    let c_model = want_c.then(|| TailModel::controllability(sys.a(), sys.b()));
    let o_model = want_o.then(|| TailModel::observability(sys.a(), sys.c()));
    let side_by_side = |parts: [Option<DMatrix<f64>>; 2]| {
        let mut out = DMatrix::zeros(n, n * blocks);
        for (k, part) in parts.into_iter().flatten().enumerate() {
            out.columns_mut(k * n, n).copy_from(&part);
        }
        out
    };
    let (value, diagnostics) = integrate_band(
        |w| {
            let lu = plan.factor(w)?;
            let wc = want_c.then(|| real_outer(&lu.solve(&eval_sum(sys.b(), w))));
            // G_CA^T = (jwI - A)^{-T} C^T
            let wo = want_o.then(|| real_outer(&lu.solve_transpose(&eval_sum(sys.c(), w).transpose())));
            Ok(side_by_side([wc, wo]))
        },
        |w| side_by_side([c_model.as_ref().map(|m| m.eval(w)), o_model.as_ref().map(|m| m.eval(w))]),
        side_by_side([
            c_model.as_ref().map(|m| m.half_line_integral()),
            o_model.as_ref().map(|m| m.half_line_integral()),
        ]),
        opts,
        "the gramians",
    )?;

    let mut col = 0;
    let wc = want_c.then(|| {
        let m = symmetrize(value.columns(col, n).into_owned());
        col += n;
        m
    });
    let wo = want_o.then(|| symmetrize(value.columns(col, n).into_owned()));
    Ok(GramianPair {
        wc,
        wo,
        freq_interval: iv,
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        diagnostics,
    })
}

/// Row-major nested arrays, the same layout as the system file.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows<E: serde::de::Error>(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>, E> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(E::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(nr, nc, rows.into_iter().flatten()))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        from_rows(Vec::<Vec<f64>>::deserialize(d)?)
    }
}

mod opt_matrix_rows {
    use super::matrix_rows::{from_rows, to_rows};
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(from_rows)
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_lag() -> Rtds {
        Rtds::delay_free(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0], None).unwrap()
    }

    #[test]
    fn scalar_h2() {
        let h2 = h2_norm(&scalar_lag(), &QuadOptions::default()).unwrap();
        assert!((h2 - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn feedthrough_is_rejected() {
        let sys = Rtds::delay_free(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0], Some(dmatrix![0.1])).unwrap();
        assert!(matches!(h2_norm(&sys, &QuadOptions::default()), Err(Error::NonzeroFeedthrough)));
    }

    #[test]
    fn scalar_gramians() {
        let g = gramians(&scalar_lag(), GramianKind::Both, &QuadOptions::default()).unwrap();
        assert!((g.wc.unwrap()[(0, 0)] - 0.5).abs() < 1e-9);
        assert!((g.wo.unwrap()[(0, 0)] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_gramian_requests() {
        let opts = QuadOptions::default();
        let c = gramians(&scalar_lag(), GramianKind::Controllability, &opts).unwrap();
        assert!(c.wc.is_some() && c.wo.is_none());
        let o = gramians(&scalar_lag(), GramianKind::Observability, &opts).unwrap();
        assert!(o.wc.is_none() && o.wo.is_some());
    }

    #[test]
    fn zero_input_gives_zero_controllability_gramian() {
        let sys = Rtds::delay_free(
            dmatrix![-1.0, 0.3; 0.0, -2.0],
            DMatrix::zeros(2, 1),
            dmatrix![1.0, 1.0],
            None,
        )
        .unwrap();
        let g = gramians(&sys, GramianKind::Controllability, &QuadOptions::default()).unwrap();
        assert_eq!(g.wc.unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_system_integrand() {
        let sys = Rtds::delay_free(DMatrix::identity(3, 3) * -1.0, DMatrix::zeros(3, 2), DMatrix::zeros(1, 3), None)
            .unwrap();
        for w in [0.0, 0.5, 10.0, 1e4] {
            assert_eq!(trace_integrand(&sys, w).unwrap(), 0.0);
            assert_eq!(trace_integrand_with(&sys, w, true).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_options() {
        let opts = QuadOptions {
            rel_tol: 0.0,
            ..QuadOptions::default()
        };
        assert!(matches!(h2_norm(&scalar_lag(), &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gramian_pair_json_round_trip() {
        let g = gramians(&scalar_lag(), GramianKind::Both, &QuadOptions::default()).unwrap();
        let back: GramianPair = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
