//! Faddeeva function w(z) = e^{−z²} erfc(−iz) in the closed upper half plane.
//!
//! Rational approximation of Weideman (SIAM J. Numer. Anal. 31, 1994) with
//! N = 32 terms, accurate to about 1e-13 relative for Im z ≥ 0.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::scalar::Real;

const N: usize = 32;

struct Coefficients {
    l: f64,
    a: [f64; N],
}

fn coefficients() -> &'static Coefficients {
    static COEFFS: OnceLock<Coefficients> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let m = 2 * N;
        let l = (N as f64 / std::f64::consts::SQRT_2).sqrt();
        let samples: Vec<(f64, f64)> = (1..2 * m)
            .map(|i| {
                let k = i as f64 - m as f64;
                let t = l * (k * std::f64::consts::PI / (2.0 * m as f64)).tan();
                (k, (-t * t).exp() * (l * l + t * t))
            })
            .collect();
        let mut a = [0.0; N];
        for (n, an) in a.iter_mut().enumerate() {
            // f is even in k, so the DFT reduces to a cosine sum
            let n = (n + 1) as f64;
            let sum: f64 = samples
                .iter()
                .map(|&(k, f)| f * (std::f64::consts::PI * k * n / m as f64).cos())
                .sum();
            *an = sum / (2 * m) as f64;
        }
        Coefficients { l, a }
    })
}

/// w(z) for Im z ≥ 0.
pub fn faddeeva<T: Real>(z: Complex<T>) -> Complex<T> {
    let c = coefficients();
    let l = T::lit(c.l);
    let iz = Complex::new(-z.im, z.re);
    let denom = Complex::new(l, T::zero()) - iz;
    let zz = (Complex::new(l, T::zero()) + iz) / denom;
    let mut p = Complex::new(T::zero(), T::zero());
    for &an in c.a.iter().rev() {
        p = p * zz + Complex::new(T::lit(an), T::zero());
    }
    let inv_sqrt_pi = T::lit(1.0 / std::f64::consts::PI.sqrt());
    p * T::lit(2.0) / (denom * denom) + Complex::new(inv_sqrt_pi, T::zero()) / denom
}
