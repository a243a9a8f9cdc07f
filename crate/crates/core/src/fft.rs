//! Discrete Fourier transform used by the spectral backend.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform with
//! precomputed twiddles. Any other length falls back to a direct O(N^2) sum
//! over a precomputed root table, which is exact but slow; prefer powers of two.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Radix2 {
        bitrev: Vec<usize>,
        // exp(-2 pi i k / n) for k in 0..n/2
        twiddles: Vec<Complex64>,
    },
    Direct {
        // exp(-2 pi i k / n) for k in 0..n
        roots: Vec<Complex64>,
    },
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let kind = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            let bitrev = (0..n)
                .map(|i| {
                    if bits == 0 {
                        0
                    } else {
                        i.reverse_bits() >> (usize::BITS - bits)
                    }
                })
                .collect();
            let twiddles = (0..n / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            PlanKind::Radix2 { bitrev, twiddles }
        } else {
            let roots = (0..n)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            PlanKind::Direct { roots }
        };
        Self { n, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform: X_k = sum_j x_j exp(-2 pi i jk/N).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Forward transform of a real signal.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spectrum);
        spectrum.into_iter().map(|z| z.re).collect()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "FFT buffer length mismatch");
        match &self.kind {
            PlanKind::Radix2 { bitrev, twiddles } => {
                for (i, &j) in bitrev.iter().enumerate() {
                    if i < j {
                        data.swap(i, j);
                    }
                }
                let n = self.n;
                let mut len = 2;
                while len <= n {
                    let half = len / 2;
                    let stride = n / len;
                    for start in (0..n).step_by(len) {
                        for k in 0..half {
                            let mut w = twiddles[k * stride];
                            if inverse {
                                w = w.conj();
                            }
                            let a = data[start + k];
                            let b = data[start + k + half] * w;
                            data[start + k] = a + b;
                            data[start + k + half] = a - b;
                        }
                    }
                    len <<= 1;
                }
            }
            PlanKind::Direct { roots } => {
                let n = self.n;
                let input = data.to_vec();
                for (k, out) in data.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, &x) in input.iter().enumerate() {
                        let w = roots[(j * k) % n];
                        acc += x * if inverse { w.conj() } else { w };
                    }
                    *out = acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn sample(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new((j as f64 * 0.37).sin() + 0.1 * j as f64, (j as f64 * 1.3).cos()))
            .collect()
    }

    #[test]
    fn radix2_matches_naive_sum() {
        for n in [1, 2, 8, 64] {
            let x = sample(n);
            let mut y = x.clone();
            FftPlan::new(n).forward(&mut y);
            let expect = naive_dft(&x);
            for (a, b) in y.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-11, "n = {n}");
            }
        }
    }

    #[test]
    fn direct_fallback_matches_naive_sum() {
        let x = sample(12);
        let mut y = x.clone();
        FftPlan::new(12).forward(&mut y);
        for (a, b) in y.iter().zip(&naive_dft(&x)) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn inverse_round_trip() {
        for n in [16, 10] {
            let x = sample(n);
            let plan = FftPlan::new(n);
            let mut y = x.clone();
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}
