//! High-frequency models of the quadratic integrands.
//!
//! Each integrand is `Re(X X^*)` with `X(w) = (jwI - A(jw))^{-1}`-based and
//! `X = P/(jw) + Q/(jw)^2 + O(w^-3)`, where `P` and `Q` are trigonometric
//! polynomials in `w`. When `B` or `C` carry delays, `P` oscillates and the
//! integrand decays like `cos(dw)/w^2`, which adaptive quadrature on the
//! compactified half line cannot resolve. We subtract the regularized model
//!
//! ```text
//! M(w) = Re(P P^*) / (1 + w^2) + Re(j (P Q^* - Q P^*)) w / (1 + w^2)^2
//! ```
//!
//! which matches the integrand to `O(w^-4)`, and add back its integral over
//! `[0, inf)` in closed form, using
//!
//! ```text
//! int_0^inf cos(a w) / (1 + w^2) dw     = (pi/2) exp(-|a|)
//! int_0^inf w sin(a w) / (1 + w^2)^2 dw = (pi a/4) exp(-|a|)
//! ```

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use crate::linalg::C64;
use crate::system::DelayedMatrixSum;

/// `sum_k M_k exp(-j w d_k)` with real coefficients.
#[derive(Debug, Clone)]
pub(crate) struct TrigPoly {
    terms: Vec<(f64, DMatrix<f64>)>,
}

impl TrigPoly {
    pub fn from_sum(s: &DelayedMatrixSum) -> Self {
        Self {
            terms: s.terms().iter().map(|t| (t.delay, t.matrix.clone())).collect(),
        }
        .pruned()
    }

    pub fn transpose(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(d, m)| (*d, m.transpose())).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut terms: Vec<(f64, DMatrix<f64>)> = Vec::new();
        for (a, ma) in &self.terms {
            for (b, mb) in &rhs.terms {
                let d = a + b;
                let m = ma * mb;
                match terms.iter_mut().find(|(e, _)| *e == d) {
                    Some((_, acc)) => *acc += m,
                    None => terms.push((d, m)),
                }
            }
        }
        Self { terms }.pruned()
    }

    fn pruned(mut self) -> Self {
        let shape = self.terms.first().map(|(_, m)| m.shape());
        self.terms.retain(|(_, m)| m.iter().any(|&v| v != 0.0));
        if self.terms.is_empty() {
            if let Some((r, c)) = shape {
                self.terms.push((0.0, DMatrix::zeros(r, c)));
            }
        }
        self
    }

    fn eval(&self, omega: f64) -> DMatrix<C64> {
        let (r, c) = self.terms[0].1.shape();
        let mut out = DMatrix::from_element(r, c, Complex::new(0.0, 0.0));
        for (d, m) in &self.terms {
            let e = Complex::from_polar(1.0, -omega * d);
            out.zip_apply(m, |o, v| *o += e * v);
        }
        out
    }
}

/// Regularized two-term model of `Re(X X^*)` for `X ~ P/(jw) + Q/(jw)^2`.
#[derive(Debug, Clone)]
pub(crate) struct TailModel {
    p: TrigPoly,
    q: TrigPoly,
}

impl TailModel {
    pub fn new(p: TrigPoly, q: TrigPoly) -> Self {
        Self { p, q }
    }

    /// Model for `Re(G_AB G_AB^*)`.
    pub fn controllability(a: &DelayedMatrixSum, b: &DelayedMatrixSum) -> Self {
        let p = TrigPoly::from_sum(b);
        let q = TrigPoly::from_sum(a).mul(&p);
        Self::new(p, q)
    }

    /// Model for `Re(G_CA^* G_CA)`, i.e. the controllability model of the
    /// transposed system.
    pub fn observability(a: &DelayedMatrixSum, c: &DelayedMatrixSum) -> Self {
        let p = TrigPoly::from_sum(c).transpose();
        let q = TrigPoly::from_sum(a).transpose().mul(&p);
        Self::new(p, q)
    }

    /// Model for `Re(G G^*)` with `G = C (jwI - A)^{-1} B`.
    pub fn transfer(a: &DelayedMatrixSum, b: &DelayedMatrixSum, c: &DelayedMatrixSum) -> Self {
        let cp = TrigPoly::from_sum(c);
        let p = cp.mul(&TrigPoly::from_sum(b));
        let q = cp.mul(&TrigPoly::from_sum(a)).mul(&TrigPoly::from_sum(b));
        Self::new(p, q)
    }

    pub fn eval(&self, omega: f64) -> DMatrix<f64> {
        let p = self.p.eval(omega);
        let q = self.q.eval(omega);
        let (pr, pi) = (p.map(|z| z.re), p.map(|z| z.im));
        let (qr, qi) = (q.map(|z| z.re), q.map(|z| z.im));
        let lead = &pr * pr.transpose() + &pi * pi.transpose();
        // Im(P Q^*) = Pi Qr^T - Pr Qi^T
        let im_s = &pi * qr.transpose() - &pr * qi.transpose();
        let next = -(&im_s + im_s.transpose());
        let s = 1.0 + omega * omega;
        lead / s + next * (omega / (s * s))
    }

    /// `int_0^inf eval(w) dw`.
    pub fn half_line_integral(&self) -> DMatrix<f64> {
        let (r, _) = self.p.terms[0].1.shape();
        let mut out = DMatrix::zeros(r, r);
        for (dk, pk) in &self.p.terms {
            for (dl, pl) in &self.p.terms {
                out += pk * pl.transpose() * (0.5 * PI * (-(dk - dl).abs()).exp());
            }
            for (dl, ql) in &self.q.terms {
                let phi = dk - dl;
                let w = 0.25 * PI * phi * (-phi.abs()).exp();
                if w != 0.0 {
                    let m = pk * ql.transpose();
                    out += (&m + m.transpose()) * w;
                }
            }
        }
        out
    }
}
