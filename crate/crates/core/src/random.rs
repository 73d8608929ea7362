//! Reproducible random delay systems for scaling studies.
//!
//! The generator is ChaCha8 seeded with [`rand_chacha::ChaCha8Rng::seed_from_u64`],
//! whose stream is specified independently of platform and word size. Draw
//! order is fixed: `A` terms (delay 0 first, then the three delayed terms,
//! each delay drawn before its matrix), then `B`, then `C`; matrices are
//! filled row by row.

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::system::{Rtds, Terms};

pub const RANDOM_IO: usize = 3;
pub const RANDOM_DELAYS: usize = 3;

/// Random RTDS with `n` states, 3 inputs and outputs, three positive delays
/// per `A`, `B`, `C` sum drawn independently from `(0, 1)`, entries uniform on
/// `[-3, 3]`, and `3 I` subtracted from `A_0`. `D` is zero.
///
/// The shift does not guarantee exponential stability for larger `n`.
pub fn random_rtds(n: usize, seed: u64) -> Result<Rtds> {
    if n == 0 {
        return Err(Error::InvalidArgument("random_rtds needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry = Uniform::new_inclusive(-3.0, 3.0).expect("valid range");
    let matrix = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
        let v: Vec<f64> = (0..r * c).map(|_| entry.sample(rng)).collect();
        DMatrix::from_row_slice(r, c, &v)
    };

    let sum = |rng: &mut ChaCha8Rng, r: usize, c: usize| -> Terms {
        let mut terms = vec![(0.0, matrix(rng, r, c))];
        while terms.len() <= RANDOM_DELAYS {
            let h = open_unit(rng);
            // Coincident delays are astronomically unlikely; redraw if one occurs.
            if terms.iter().any(|(d, _)| *d == h) {
                continue;
            }
            terms.push((h, matrix(rng, r, c)));
        }
        terms
    };

    let mut a = sum(&mut rng, n, n);
    for i in 0..n {
        a[0].1[(i, i)] -= 3.0;
    }
    let b = sum(&mut rng, n, RANDOM_IO);
    let c = sum(&mut rng, RANDOM_IO, n);
    Rtds::new(a, b, c, None, Some(format!("random_n{n}_s{seed}")))
}

/// Uniform on the open interval `(0, 1)`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    let u = Uniform::new(0.0, 1.0).expect("valid range");
    loop {
        let h: f64 = u.sample(rng);
        if h > 0.0 {
            return h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_counts() {
        let sys = random_rtds(10, 42).unwrap();
        assert_eq!(sys.dims(), (10, 3, 3));
        assert_eq!(sys.delay_counts(), (3, 3, 3, 0));
        for h in sys.a().delays().chain(sys.b().delays()).chain(sys.c().delays()) {
            assert!((0.0..1.0).contains(&h));
        }
        assert!(sys.d().is_zero());
    }

    #[test]
    fn scalar_a0_range() {
        for seed in 0..50 {
            let a0 = random_rtds(1, seed).unwrap().a().terms()[0].matrix[(0, 0)];
            assert!((-6.0..=0.0).contains(&a0), "{a0}");
        }
    }

    #[test]
    fn deterministic() {
        let a = random_rtds(7, 3).unwrap();
        let b = random_rtds(7, 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_json(), random_rtds(7, 4).unwrap().to_json());
    }

    #[test]
    fn zero_states_rejected() {
        assert!(random_rtds(0, 1).is_err());
    }
}
