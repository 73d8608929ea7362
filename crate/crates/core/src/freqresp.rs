//! Frequency-domain evaluation: the delayed sums at `s = jw`, the transfer
//! matrix and its two resolvent factors, and sampled bode/sigma data.

use std::io::Write;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{ResolventPlan, C64};
use crate::par;
use crate::system::{DelayedMatrixSum, Rtds};

/// Grid density used when the caller does not pick one.
pub const DEFAULT_GRID_POINTS: usize = 400;

/// `sum_i M_i exp(-j w h_i)`.
pub fn eval_sum(m: &DelayedMatrixSum, omega: f64) -> DMatrix<C64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::from_element(r, c, Complex::new(0.0, 0.0));
    for t in m.terms() {
        let e = Complex::from_polar(1.0, -omega * t.delay);
        out.zip_apply(&t.matrix, |o, v| *o += e * v);
    }
    out
}

/// `G(jw) = C(jw) (jwI - A(jw))^{-1} B(jw) + D(jw)`.
pub fn transfer(sys: &Rtds, omega: f64) -> Result<DMatrix<C64>> {
    let x = g_ab(sys, omega)?;
    Ok(eval_sum(sys.c(), omega) * x + eval_sum(sys.d(), omega))
}

/// `(jwI - A(jw))^{-1} B(jw)`, `n x n_u`.
pub fn g_ab(sys: &Rtds, omega: f64) -> Result<DMatrix<C64>> {
    let plan = ResolventPlan::new(sys, false);
    Ok(plan.factor(omega)?.solve(&eval_sum(sys.b(), omega)))
}

/// `C(jw) (jwI - A(jw))^{-1}`, `n_y x n`.
pub fn g_ca(sys: &Rtds, omega: f64) -> Result<DMatrix<C64>> {
    let plan = ResolventPlan::new(sys, false);
    let ct = eval_sum(sys.c(), omega).transpose();
    Ok(plan.factor(omega)?.solve_transpose(&ct).transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqSample {
    pub omega: f64,
    pub g: DMatrix<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponse {
    pub samples: Vec<FreqSample>,
    pub system_name: String,
}

/// `points` log-spaced frequencies from `wmin` to `wmax` inclusive.
pub fn log_grid(wmin: f64, wmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(wmin > 0.0 && wmax > wmin && wmax.is_finite()) || points < 2 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < wmin < wmax and at least 2 points, got ({wmin}, {wmax}, {points})"
        )));
    }
    let (l0, l1) = (wmin.log10(), wmax.log10());
    Ok((0..points)
        .map(|k| {
            if k + 1 == points {
                wmax
            } else {
                10f64.powf(l0 + (l1 - l0) * k as f64 / (points - 1) as f64)
            }
        })
        .collect())
}

/// Samples `G(jw)` on `omegas` (strictly increasing).
pub fn freq_grid(sys: &Rtds, omegas: &[f64]) -> Result<FreqResponse> {
    if omegas.iter().any(|w| !w.is_finite()) || omegas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "frequency grid must be finite and strictly increasing".into(),
        ));
    }
    let samples = par::try_map(omegas, |&omega| {
        transfer(sys, omega).map(|g| FreqSample { omega, g })
    })?;
    Ok(FreqResponse {
        samples,
        system_name: sys.display_name().to_string(),
    })
}

/// Singular values of `G(jw)` per sample, sorted descending.
pub fn sigma_data(fr: &FreqResponse) -> Vec<(f64, Vec<f64>)> {
    fr.samples
        .iter()
        .map(|s| {
            let mut sv: Vec<f64> = s.g.singular_values().iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            (s.omega, sv)
        })
        .collect()
}

/// Bode data for one input/output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeChannel {
    pub output: usize,
    pub input: usize,
    pub magnitude_db: Vec<f64>,
    /// Unwrapped along the grid: consecutive samples differ by less than 180 degrees.
    pub phase_deg: Vec<f64>,
}

/// Per-channel magnitude (dB) and unwrapped phase (degrees). Channels are
/// ordered column-major over `(output, input)`.
pub fn bode_data(fr: &FreqResponse) -> Vec<BodeChannel> {
    let Some(first) = fr.samples.first() else {
        return Vec::new();
    };
    let (ny, nu) = first.g.shape();
    let mut out = Vec::with_capacity(ny * nu);
    for j in 0..nu {
        for i in 0..ny {
            let magnitude_db = fr.samples.iter().map(|s| 20.0 * s.g[(i, j)].norm().log10()).collect();
            let raw: Vec<f64> = fr.samples.iter().map(|s| s.g[(i, j)].arg().to_degrees()).collect();
            out.push(BodeChannel {
                output: i,
                input: j,
                magnitude_db,
                phase_deg: unwrap_degrees(&raw),
            });
        }
    }
    out
}

fn unwrap_degrees(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (k, &p) in raw.iter().enumerate() {
        if k > 0 {
            let prev = raw[k - 1];
            let jump = p - prev;
            offset -= 360.0 * (jump / 360.0).round();
        }
        out.push(p + offset);
    }
    out
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_machine(v: f64) -> String {
    format!("{v:.16e}")
}

fn channel_suffixes(ny: usize, nu: usize) -> Vec<String> {
    (0..nu)
        .flat_map(|j| (0..ny).map(move |i| format!("{}{}", i + 1, j + 1)))
        .collect()
}

/// CSV `omega,re_11,im_11,re_21,...`, channels column-major over `(i, j)`.
pub fn write_freq_csv<W: Write>(fr: &FreqResponse, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = fr.samples.first() else {
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        return Ok(());
    };
    let (ny, nu) = first.g.shape();
    let mut header = vec!["omega".to_string()];
    for s in channel_suffixes(ny, nu) {
        header.push(format!("re_{s}"));
        header.push(format!("im_{s}"));
    }
    w.write_record(&header)?;
    for s in &fr.samples {
        let mut rec = vec![fmt_machine(s.omega)];
        for j in 0..nu {
            for i in 0..ny {
                rec.push(fmt_machine(s.g[(i, j)].re));
                rec.push(fmt_machine(s.g[(i, j)].im));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// CSV `omega,sv_1,...,sv_k` (descending singular values).
pub fn write_sigma_csv<W: Write>(fr: &FreqResponse, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let data = sigma_data(fr);
    if let Some((_, sv)) = data.first() {
        let mut header = vec!["omega".to_string()];
        header.extend((1..=sv.len()).map(|k| format!("sv_{k}")));
        w.write_record(&header)?;
    }
    for (omega, sv) in data {
        let mut rec = vec![fmt_machine(omega)];
        rec.extend(sv.into_iter().map(fmt_machine));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// CSV `omega,mag_db_11,phase_deg_11,...`, channels column-major.
pub fn write_bode_csv<W: Write>(fr: &FreqResponse, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let channels = bode_data(fr);
    let mut header = vec!["omega".to_string()];
    for ch in &channels {
        header.push(format!("mag_db_{}{}", ch.output + 1, ch.input + 1));
        header.push(format!("phase_deg_{}{}", ch.output + 1, ch.input + 1));
    }
    w.write_record(&header)?;
    for (k, s) in fr.samples.iter().enumerate() {
        let mut rec = vec![fmt_machine(s.omega)];
        for ch in &channels {
            rec.push(fmt_machine(ch.magnitude_db[k]));
            rec.push(fmt_machine(ch.phase_deg[k]));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
