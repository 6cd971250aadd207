//! Mixed-radix decimation-in-time FFT for arbitrary lengths.
//!
//! The length is factored into primes; each stage runs a generic radix-`p`
//! butterfly. Prime lengths degrade to an O(N²) evaluation, which is fine at
//! the signal lengths used here (`4·l`, at most a few hundred).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Forward transform plan for one length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let twiddles = (0..n)
            .map(|k| {
                let phase = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(phase), libm::sin(phase))
            })
            .collect();
        Self {
            n,
            factors: factorize(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward DFT: `X[k] = Σ_t x[t]·exp(−2πi·kt/N)`.
    pub fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(input.len(), self.n, "input length does not match plan");
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.factors.iter().copied().max().unwrap_or(1)];
        self.work(&mut out, input, 0, 1, &self.factors, &mut scratch);
        out
    }

    /// Forward DFT of a real signal.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&buf)
    }

    fn work(
        &self,
        out: &mut [Complex64],
        input: &[Complex64],
        offset: usize,
        fstride: usize,
        factors: &[usize],
        scratch: &mut [Complex64],
    ) {
        let p = factors[0];
        let m = out.len() / p;
        if m == 1 {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = input[offset + k * fstride];
            }
        } else {
            for (q, chunk) in out.chunks_mut(m).enumerate() {
                self.work(chunk, input, offset + q * fstride, fstride * p, &factors[1..], scratch);
            }
        }
        self.butterfly(out, fstride, p, m, scratch);
    }

    fn butterfly(&self, out: &mut [Complex64], fstride: usize, p: usize, m: usize, scratch: &mut [Complex64]) {
        let n = self.n;
        for u in 0..m {
            for q in 0..p {
                scratch[q] = out[u + q * m];
            }
            for q1 in 0..p {
                let k = u + q1 * m;
                let step = (fstride * k) % n;
                let mut acc = scratch[0];
                let mut tw = 0usize;
                for s in &scratch[1..p] {
                    tw += step;
                    if tw >= n {
                        tw -= n;
                    }
                    acc += s * self.twiddles[tw];
                }
                out[k] = acc;
            }
        }
    }
}

/// Prime factors of `n`, radix 4 preferred over pairs of 2s, ascending otherwise.
fn factorize(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    while n.is_multiple_of(4) {
        factors.push(4);
        n /= 4;
    }
    let mut p = 2;
    while n > 1 {
        while n.is_multiple_of(p) {
            factors.push(p);
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
        if p * p > n && n > 1 {
            factors.push(n);
            break;
        }
    }
    if factors.is_empty() {
        factors.push(1);
    }
    factors
}
