//! Brute-force reference implementations. Nothing here calls the
//! library's quadrature, resolvent factorizations or balancing code; only
//! the system container and its accessors are shared.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtds::Rtds;

pub type C64 = Complex<f64>;

/// `|a - b| / max(|a|, |b|, eps)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::EPSILON)
}

/// Matrix version in the Frobenius norm.
pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::EPSILON)
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub production: f64,
    pub rel_error: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, oracle: f64, production: f64, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            oracle,
            production,
            rel_error: rel_err(oracle, production),
            tolerance,
        }
    }

    pub fn passes(&self) -> bool {
        self.rel_error <= self.tolerance
    }

    pub fn assert(&self) {
        assert!(self.passes(), "{self:?}");
    }
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// Solves `A W + W A^T + Q = 0` through the Kronecker form
/// `(I (x) A + A (x) I) vec(W) = -vec(Q)`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, String> {
    let n = a.nrows();
    if !is_hurwitz(a) {
        return Err("A is not Hurwitz".into());
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let x = k.lu().solve(&rhs).ok_or("singular Kronecker system")?;
    let w = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&w + w.transpose()) * 0.5)
}

/// `(Wc, Wo)` of a delay-free system from the two Lyapunov equations.
pub fn lyapunov_gramians(sys: &Rtds) -> Result<(DMatrix<f64>, DMatrix<f64>), String> {
    if !sys.is_delay_free() {
        return Err("system has delays".into());
    }
    let a = sys.a().total();
    let b = sys.b().total();
    let c = sys.c().total();
    let wc = lyapunov(&a, &(&b * b.transpose()))?;
    let wo = lyapunov(&a.transpose(), &(c.transpose() * &c))?;
    Ok((wc, wo))
}

fn complex_sum(terms: &[(f64, &DMatrix<f64>)], omega: f64) -> DMatrix<C64> {
    let (r, c) = terms[0].1.shape();
    let mut out = DMatrix::from_element(r, c, C64::new(0.0, 0.0));
    for (h, m) in terms {
        let (s, co) = (omega * h).sin_cos();
        let e = C64::new(co, -s);
        for j in 0..c {
            for i in 0..r {
                out[(i, j)] += e * m[(i, j)];
            }
        }
    }
    out
}

fn sum_terms(s: &rtds::DelayedMatrixSum) -> Vec<(f64, &DMatrix<f64>)> {
    s.terms().iter().map(|t| (t.delay, &t.matrix)).collect()
}

/// `G(jw)` by explicit inversion of `jwI - A(jw)`.
pub fn direct_transfer(sys: &Rtds, omega: f64) -> DMatrix<C64> {
    let n = sys.states();
    let a = complex_sum(&sum_terms(sys.a()), omega);
    let b = complex_sum(&sum_terms(sys.b()), omega);
    let c = complex_sum(&sum_terms(sys.c()), omega);
    let d = complex_sum(&sum_terms(sys.d()), omega);
    let m = DMatrix::from_diagonal_element(n, n, C64::new(0.0, omega)) - a;
    let inv = m.try_inverse().expect("resolvent is invertible");
    c * inv * b + d
}

fn trace_sq(g: &DMatrix<C64>) -> f64 {
    g.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct TrapezoidH2 {
    pub value: f64,
    /// Contribution of `[omega_max, inf)` from the fitted `K / w^2` decay.
    pub tail: f64,
}

/// H2 norm by composite trapezoid sums on `[0, omega_max]` plus a
/// `K / w^2` tail.
///
/// The grid is uniform within `[0, 1e-2]` and within each decade above it,
/// with `points_per_decade` intervals each. `K` is the mean of
/// `w^2 |G|_F^2` over the last decade; the decay assumption is refused when
/// the means over the two halves of that decade differ by more than 20% or
/// when
/// `|G(j omega_max)| > decay_ratio * |G(0)|`.
pub fn trapezoid_h2(sys: &Rtds, omega_max: f64, points_per_decade: usize, decay_ratio: f64) -> Result<TrapezoidH2, String> {
    let g0 = trace_sq(&direct_transfer(sys, 0.0)).sqrt();
    let gmax = trace_sq(&direct_transfer(sys, omega_max)).sqrt();
    if gmax > decay_ratio * g0 {
        return Err(format!(
            "|G(j{omega_max})| = {gmax:.3e} has not decayed below {decay_ratio:.1e} * |G(0)| = {:.3e}",
            decay_ratio * g0
        ));
    }
    let f = |w: f64| trace_sq(&direct_transfer(sys, w));
    let mut edges = vec![0.0, 1e-2];
    while *edges.last().unwrap() < omega_max {
        let next = (edges.last().unwrap() * 10.0).min(omega_max);
        edges.push(next);
    }
    let mut integral = 0.0;
    let mut last_decade = Vec::new();
    for (k, win) in edges.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        let h = (b - a) / points_per_decade as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..points_per_decade {
            let w = a + h * i as f64;
            let v = f(w);
            s += v;
            if k + 2 == edges.len() {
                last_decade.push(w * w * v);
            }
        }
        integral += s * h;
    }
    // The oscillating part of w^2 |G|^2 averages out; its mean must not drift.
    let half = last_decade.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(&last_decade[..half]), mean(&last_decade[half..]));
    if (m1 - m2).abs() > 0.2 * m1.abs().max(m2.abs()) {
        return Err(format!("w^2 |G|^2 is not settled on the last decade (half means {m1:.3e}, {m2:.3e})"));
    }
    let k_fit = last_decade.iter().sum::<f64>() / last_decade.len() as f64;
    let tail = k_fit / omega_max;
    Ok(TrapezoidH2 {
        value: ((integral + tail) / std::f64::consts::PI).sqrt(),
        tail: tail / std::f64::consts::PI,
    })
}

/// Random delay-free system with a Hurwitz `A` (spectral abscissa
/// at most -0.5).
pub fn random_hurwitz(n: usize, nu: usize, ny: usize, seed: u64) -> Rtds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new_inclusive(-1.0, 1.0).unwrap();
    let mut m = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| u.sample(&mut rng));
    let mut a = m(n, n) / (n as f64).sqrt();
    let abscissa = a
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    for i in 0..n {
        a[(i, i)] -= abscissa + 0.5;
    }
    let b = m(n, nu);
    let c = m(ny, n);
    Rtds::delay_free(a, b, c, None).unwrap()
}

/// Random RTDS that is stable for all delays: the log-norm of `A_0` plus
/// the norms of the delayed `A_i` is at most -0.3.
pub fn random_stable_rtds(n: usize, seed: u64) -> Rtds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new_inclusive(-1.0, 1.0).unwrap();
    let hd = Uniform::new(0.05, 1.0).unwrap();
    let scale = 1.0 / (n as f64).sqrt();
    let mat = |rng: &mut ChaCha8Rng, r: usize, c: usize, s: f64| DMatrix::from_fn(r, c, |_, _| s * u.sample(rng));
    let mut a0 = mat(&mut rng, n, n, scale);
    let a1 = mat(&mut rng, n, n, 0.5 * scale);
    let a2 = mat(&mut rng, n, n, 0.3 * scale);
    let (h1, h2) = (hd.sample(&mut rng), hd.sample(&mut rng) + 1.0);
    let lognorm = ((&a0 + a0.transpose()) * 0.5).symmetric_eigenvalues().max();
    let delayed = a1.clone().singular_values().max() + a2.clone().singular_values().max();
    for i in 0..n {
        a0[(i, i)] -= lognorm + delayed + 0.3;
    }
    let b0 = mat(&mut rng, n, 2, 1.0);
    let b1 = mat(&mut rng, n, 2, 0.5);
    let c0 = mat(&mut rng, 2, n, 1.0);
    let c1 = mat(&mut rng, 2, n, 0.5);
    let hb = hd.sample(&mut rng);
    let hc = hd.sample(&mut rng);
    Rtds::new(
        vec![(0.0, a0), (h1, a1), (h2, a2)],
        vec![(0.0, b0), (hb, b1)],
        vec![(0.0, c0), (hc, c1)],
        None,
        Some(format!("stable_n{n}_s{seed}")),
    )
    .unwrap()
}

/// Relative error between two complex matrices in the Frobenius norm.
pub fn rel_err_cmat(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let scale = trace_sq(a).sqrt().max(trace_sq(b).sqrt()).max(f64::EPSILON);
    diff / scale
}
