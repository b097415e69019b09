//! Cached 3D complex FFTs on `n³` cubes.
//!
//! Lines along the two strided axes are gathered into per-plane buffers
//! before transforming. Forward is unnormalized, inverse carries the `1/n³`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

pub fn plan(n: usize) -> Arc<Fft3> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft3 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

pub fn real_to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

impl Fft3 {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "FFT buffer has the wrong length");
        let scratch_len = fft.get_inplace_scratch_len();
        // k axis: contiguous lines
        data.par_chunks_mut(n * n).for_each(|slab| {
            let mut scratch = vec![Complex64::default(); scratch_len];
            fft.process_with_scratch(slab, &mut scratch);
        });
        // j axis: transpose each i-slab, transform rows, transpose back
        data.par_chunks_mut(n * n).for_each(|slab| {
            let mut buf = vec![Complex64::default(); n * n];
            let mut scratch = vec![Complex64::default(); scratch_len];
            transpose(slab, &mut buf, n);
            fft.process_with_scratch(&mut buf, &mut scratch);
            transpose(&buf, slab, n);
        });
        // i axis: gather each j-plane as k-major lines along i
        let base = SharedPtr(data.as_mut_ptr());
        (0..n).into_par_iter().for_each(|j| {
            let ptr = base;
            let mut buf = vec![Complex64::default(); n * n];
            let mut scratch = vec![Complex64::default(); scratch_len];
            for i in 0..n {
                // SAFETY: plane j touches only indices (i*n + j)*n + k, disjoint across j
                let row = unsafe { std::slice::from_raw_parts(ptr.0.add((i * n + j) * n), n) };
                for k in 0..n {
                    buf[k * n + i] = row[k];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..n {
                let row = unsafe { std::slice::from_raw_parts_mut(ptr.0.add((i * n + j) * n), n) };
                for k in 0..n {
                    row[k] = buf[k * n + i];
                }
            }
        });
    }

    /// Forward transforms of two real arrays with one complex FFT.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut z: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.forward(&mut z);
        let neg = |i: usize| (n - i) % n;
        // z holds A + iB; split mode pairs (m, -m) in place, A stays in z
        let mut fb = vec![Complex64::default(); z.len()];
        let half = Complex64::new(0.0, -0.5);
        for i in 0..n {
            for j in 0..n {
                let row = (i * n + j) * n;
                let mrow = (neg(i) * n + neg(j)) * n;
                for k in 0..n {
                    let a = row + k;
                    let b = mrow + neg(k);
                    if b < a {
                        continue;
                    }
                    let p = z[a];
                    let q = z[b].conj();
                    let fa = (p + q) * 0.5;
                    let fbv = (p - q) * half;
                    z[a] = fa;
                    z[b] = fa.conj();
                    fb[a] = fbv;
                    fb[b] = fbv.conj();
                }
            }
        }
        (z, fb)
    }

    /// Inverse transforms of two Hermitian spectra, real parts only.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.inverse(&mut z);
        (
            z.iter().map(|c| c.re).collect(),
            z.iter().map(|c| c.im).collect(),
        )
    }

    pub fn forward_real(&self, a: &[f64]) -> Vec<Complex64> {
        let mut z = real_to_complex(a);
        self.forward(&mut z);
        z
    }

    pub fn inverse_real(&self, a: &[Complex64]) -> Vec<f64> {
        let mut z = a.to_vec();
        self.inverse(&mut z);
        z.into_iter().map(|c| c.re).collect()
    }
}

#[derive(Clone, Copy)]
struct SharedPtr(*mut Complex64);
unsafe impl Send for SharedPtr {}
unsafe impl Sync for SharedPtr {}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn naive_dft(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); data.len()];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut acc = Complex64::default();
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                let ph = -2.0 * PI * ((a * i + b * j + c * k) as f64) / n as f64;
                                acc += data[(i * n + j) * n + k] * Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                    out[(a * n + b) * n + c] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let want = naive_dft(&data, n);
        let mut got = data.clone();
        plan(n).forward(&mut got);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
        plan(n).inverse(&mut got);
        for (g, w) in got.iter().zip(&data) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn real_pair_split() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = plan(n);
        let (fa, fb) = p.forward_real_pair(&a, &b);
        let (ea, eb) = (p.forward_real(&a), p.forward_real(&b));
        for i in 0..512 {
            assert!((fa[i] - ea[i]).norm() < 1e-12);
            assert!((fb[i] - eb[i]).norm() < 1e-12);
        }
        let (ra, rb) = p.inverse_real_pair(&fa, &fb);
        for i in 0..512 {
            assert!((ra[i] - a[i]).abs() < 1e-14);
            assert!((rb[i] - b[i]).abs() < 1e-14);
        }
    }
}
