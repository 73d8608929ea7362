//! Adaptive Gauss–Kronrod quadrature of matrix-valued integrands.
//!
//! The interval is split into a few initial panels, each integrated with the
//! 15-point Kronrod rule and its embedded 7-point Gauss rule. A panel's
//! error is the Frobenius norm of their difference, or half the mismatch
//! between its parent's Kronrod value and the sum over it and its sibling,
//! whichever is larger; the second estimate guards against oscillatory
//! integrands aliasing both rules alike. Initial panels have no parent and
//! are always bisected once. Every round, the panels with the largest
//! errors are bisected until the remaining ones sum to at most half the
//! global tolerance. Rounds stop once the summed error meets
//! `max(abs_tol, rel_tol * |I|_F)`.
//!
//! A semi-infinite interval `[lo, inf)` is mapped to `t in [0, 1)` by
//! `w = lo + t / (1 - t)`, `dw = dt / (1 - t)^2`. Kronrod nodes never touch
//! the panel ends, so the integrand is never evaluated at infinity.
//!
//! All integrand evaluations of one round are independent and run through
//! [`crate::par`]; sums are accumulated in panel order, so results do not
//! depend on the thread count.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Hard cap on the number of live plus frozen panels.
    pub max_panels: usize,
    pub initial_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            max_panels: 10_000,
            initial_panels: 10,
        }
    }
}

impl QuadConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: DMatrix<f64>,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub panels: usize,
    pub converged: bool,
}

/// Interval in the integration variable `t` plus the map back to `w`.
#[derive(Clone, Copy)]
enum Domain {
    Finite,
    SemiInfinite { lo: f64 },
}

impl Domain {
    /// `(w(t), dw/dt)`.
    fn map(self, t: f64) -> (f64, f64) {
        match self {
            Domain::Finite => (t, 1.0),
            Domain::SemiInfinite { lo } => {
                let s = 1.0 - t;
                (lo + t / s, 1.0 / (s * s))
            }
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: DMatrix<f64>,
    error: f64,
}

fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for k in 0..7 {
        x[2 * k] = c - h * XGK[k];
        x[2 * k + 1] = c + h * XGK[k];
    }
    x[14] = c;
    x
}

fn evaluate_panels<F>(f: &F, domain: Domain, bounds: &[(f64, f64)]) -> Result<Vec<Panel>>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync + Send,
{
    let points: Vec<f64> = bounds.iter().flat_map(|&(a, b)| nodes(a, b)).collect();
    let values = par::try_map(&points, |&t| {
        let (omega, jac) = domain.map(t);
        let v = f(omega)?;
        if v.iter().any(|x| !x.is_finite()) || !jac.is_finite() {
            return Err(Error::NonFiniteIntegrand { omega });
        }
        Ok(v * jac)
    })?;
    Ok(bounds
        .iter()
        .zip(values.chunks(15))
        .map(|(&(a, b), fv)| {
            let h = 0.5 * (b - a);
            let mut kron = &fv[14] * WGK[7];
            let mut gauss = &fv[14] * WG[3];
            for k in 0..7 {
                let pair = &fv[2 * k] + &fv[2 * k + 1];
                kron += &pair * WGK[k];
                // Odd Kronrod indices are the Gauss nodes.
                if k % 2 == 1 {
                    gauss += &pair * WG[k / 2];
                }
            }
            kron *= h;
            gauss *= h;
            let error = (&kron - &gauss).norm();
            Panel {
                a,
                b,
                value: kron,
                error,
            }
        })
        .collect())
}

/// Integrates `f` over `[lo, hi)`, `hi` possibly `+inf`.
///
/// Non-convergence is reported through `converged = false`; non-finite
/// integrand values and errors raised by `f` abort immediately.
pub fn integrate_matrix<F>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync + Send,
{
    integrate_matrix_offset(f, lo, hi, None, cfg)
}

/// As [`integrate_matrix`], but the relative tolerance refers to
/// `offset + integral`. Used when the integral is one part of a larger
/// quantity. The returned value excludes the offset.
pub fn integrate_matrix_offset<F>(
    f: F,
    lo: f64,
    hi: f64,
    offset: Option<&DMatrix<f64>>,
    cfg: &QuadConfig,
) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync + Send,
{
    if !lo.is_finite() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "integration interval ({lo}, {hi}) is empty or invalid"
        )));
    }
    let (domain, ta, tb) = if hi.is_infinite() {
        (Domain::SemiInfinite { lo }, 0.0, 1.0)
    } else {
        (Domain::Finite, lo, hi)
    };
    let width = tb - ta;
    let p0 = cfg.initial_panels.max(1);
    let bounds: Vec<(f64, f64)> = (0..p0)
        .map(|k| {
            let a = ta + width * k as f64 / p0 as f64;
            let b = if k + 1 == p0 { tb } else { ta + width * (k + 1) as f64 / p0 as f64 };
            (a, b)
        })
        .collect();

    let mut evaluations = 15 * bounds.len();
    let mut active = evaluate_panels(&f, domain, &bounds)?;
    for p in &mut active {
        p.error = f64::INFINITY;
    }
    let shape = active[0].value.shape();

    loop {
        let mut total = DMatrix::<f64>::zeros(shape.0, shape.1);
        let mut error = 0.0;
        for p in &active {
            total += &p.value;
            error += p.error;
        }
        let scale = match offset {
            Some(o) => (o + &total).norm(),
            None => total.norm(),
        };
        let tol = cfg.abs_tol.max(cfg.rel_tol * scale);
        let panels = active.len();
        let finish = |converged: bool, value: DMatrix<f64>| QuadResult {
            value,
            abs_error_estimate: error,
            evaluations,
            panels,
            converged,
        };
        if error <= tol {
            return Ok(finish(true, total));
        }

        // Split the worst panels until the rest fit in half the tolerance;
        // ties go to the leftmost panel so the sequence is deterministic.
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&i, &j| active[j].error.total_cmp(&active[i].error).then(i.cmp(&j)));
        // Unsplit initial panels carry an infinite error, so all of them go.
        let mut rest = error;
        let mut chosen = vec![false; active.len()];
        for &k in &order {
            if rest <= 0.5 * tol && rest.is_finite() {
                break;
            }
            let p = &active[k];
            let mid = 0.5 * (p.a + p.b);
            if mid > p.a && mid < p.b {
                chosen[k] = true;
                if p.error.is_finite() {
                    rest -= p.error;
                }
            }
        }
        let mut split = Vec::new();
        let mut kept = Vec::new();
        for (p, pick) in active.drain(..).zip(chosen) {
            if pick {
                split.push(p);
            } else {
                kept.push(p);
            }
        }
        if split.is_empty() || panels + split.len() > cfg.max_panels {
            return Ok(finish(false, total));
        }
        let bounds: Vec<(f64, f64)> = split
            .iter()
            .flat_map(|p| {
                let mid = 0.5 * (p.a + p.b);
                [(p.a, mid), (mid, p.b)]
            })
            .collect();
        evaluations += 15 * bounds.len();
        let mut kids = evaluate_panels(&f, domain, &bounds)?;
        for (parent, pair) in split.iter().zip(kids.chunks_mut(2)) {
            let gap = (&parent.value - &pair[0].value - &pair[1].value).norm();
            for k in pair {
                k.error = k.error.max(0.5 * gap);
            }
        }
        active = kept;
        active.append(&mut kids);
        active.sort_by(|p, q| p.a.total_cmp(&q.a));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use std::f64::consts::PI;

    fn scalar(f: impl Fn(f64) -> f64 + Sync + Send) -> impl Fn(f64) -> Result<DMatrix<f64>> + Sync + Send {
        move |w| Ok(dmatrix![f(w)])
    }

    #[test]
    fn exponential_on_half_line() {
        let r = integrate_matrix(scalar(|w| (-w).exp()), 0.0, f64::INFINITY, &QuadConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.value[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lorentzian_on_half_line() {
        let r = integrate_matrix(scalar(|w| 1.0 / (1.0 + w * w)), 0.0, f64::INFINITY, &QuadConfig::default())
            .unwrap();
        assert!(r.converged);
        assert!((r.value[(0, 0)] - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn shifted_lower_limit() {
        // int_2^inf dw / (1 + w^2) = pi/2 - atan(2)
        let r = integrate_matrix(scalar(|w| 1.0 / (1.0 + w * w)), 2.0, f64::INFINITY, &QuadConfig::default())
            .unwrap();
        assert!((r.value[(0, 0)] - (PI / 2.0 - 2f64.atan())).abs() < 1e-10);
    }

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        let cfg = QuadConfig {
            initial_panels: 1,
            ..QuadConfig::default()
        };
        let r = integrate_matrix(scalar(|w| w.powi(7) - 3.0 * w * w), -1.0, 2.0, &cfg).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value[(0, 0)] - exact).abs() < 1e-13);
        // One forced bisection, then both halves are accepted.
        assert_eq!(r.evaluations, 45);
    }

    #[test]
    fn non_finite_integrand_reports_omega() {
        let err = integrate_matrix(scalar(|w| if w > 0.5 { f64::NAN } else { 1.0 }), 0.0, 1.0, &QuadConfig::default())
            .unwrap_err();
        match err {
            Error::NonFiniteIntegrand { omega } => assert!(omega > 0.5),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn panel_cap_reports_non_convergence() {
        let cfg = QuadConfig {
            max_panels: 40,
            ..QuadConfig::default()
        };
        // Strong integrable singularity: bisection cannot resolve it in 40 panels.
        let r = integrate_matrix(scalar(|w| w.powf(-0.9)), 0.0, 1.0, &cfg).unwrap();
        assert!(!r.converged);
        assert!(r.panels <= 40);
        assert!(r.abs_error_estimate > 0.0);
    }

    #[test]
    fn bad_interval() {
        assert!(integrate_matrix(scalar(|w| w), 1.0, 1.0, &QuadConfig::default()).is_err());
    }
}
