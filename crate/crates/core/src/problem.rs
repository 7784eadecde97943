//! Seeded generation of sensing problems `b = A x* + w`.
//!
//! Randomness comes from ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! Normal deviates use the Marsaglia polar method (both outputs of each
//! accepted pair are used, in order). A problem draws its signal, matrix and
//! noise from three independent sub-seeds, `sub_seed(seed, 1..=3)`, where
//! `sub_seed` is the SplitMix64 finalizer applied to
//! `seed ^ stream * 0x9E3779B97F4A7C15`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const STREAM_SIGNAL: u64 = 1;
const STREAM_MATRIX: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Derives an independent 64-bit seed for `stream` from `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviates by the Marsaglia polar method.
#[derive(Debug, Clone)]
pub struct PolarGaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> PolarGaussian<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = libm::sqrt(-2.0 * libm::log(s) / s);
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn next_scaled(&mut self, std_dev: f64) -> f64 {
        std_dev * self.next_standard()
    }
}

/// An `m × n` matrix of i.i.d. `N(0, sigma²)` entries, filled row-major.
pub fn generate_gaussian_matrix(m: usize, n: usize, sigma: f64, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("matrix dimensions must be positive"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(
            "sigma must be finite and nonnegative",
        ));
    }
    let mut g = PolarGaussian::new(seeded_rng(seed));
    let data = (0..m * n).map(|_| g.next_scaled(sigma)).collect();
    DenseMatrix::from_row_major(m, n, data)
}

/// A length-`n` vector with exactly `k` entries of ±1 at uniformly chosen
/// distinct positions, each sign an independent fair coin.
pub fn generate_spike_signal(n: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    if k > n {
        return Err(Error::InvalidArgument("sparsity k exceeds dimension n"));
    }
    let mut rng = seeded_rng(seed);
    let mut x = vec![0.0; n];
    let mut positions = index::sample(&mut rng, n, k).into_vec();
    positions.sort_unstable();
    for p in positions {
        x[p] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    }
    Ok(x)
}

/// Shape and noise parameters of a generated problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Standard deviation of the entries of `A`.
    pub sigma: f64,
    /// Standard deviation of the additive noise.
    pub sigma_w: f64,
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("m and n must be positive"));
        }
        if self.k > self.m {
            return Err(Error::InvalidArgument("k must not exceed m"));
        }
        if self.m > self.n {
            return Err(Error::InvalidArgument("m must not exceed n"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument("sigma must be positive"));
        }
        if !(self.sigma_w >= 0.0) || !self.sigma_w.is_finite() {
            return Err(Error::InvalidArgument("sigma_w must be nonnegative"));
        }
        Ok(())
    }

    /// Noise bound with `delta² = m sigma_w²`.
    pub fn delta(&self) -> f64 {
        libm::sqrt(self.m as f64 * self.sigma_w * self.sigma_w)
    }
}

/// A sensing instance: matrix, observation, optional ground truth and noise
/// bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_true: Option<Vec<f64>>,
    pub delta: f64,
    pub sigma: f64,
    pub sigma_w: f64,
    pub seed: u64,
}

impl SensingProblem {
    /// Wraps externally supplied data; `sigma`/`sigma_w`/`seed` are metadata
    /// only and may be set afterwards.
    pub fn new(a: DenseMatrix, b: Vec<f64>, x_true: Option<Vec<f64>>, delta: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension("b must have one entry per row of A"));
        }
        if a.rows() > a.cols() {
            return Err(Error::Dimension("A must have m <= n"));
        }
        if let Some(x) = &x_true {
            if x.len() != a.cols() {
                return Err(Error::Dimension(
                    "x_true must have one entry per column of A",
                ));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("x_true"));
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(
                "delta must be finite and nonnegative",
            ));
        }
        Ok(Self {
            a,
            b,
            x_true,
            delta,
            sigma: 1.0,
            sigma_w: 0.0,
            seed: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }
}

/// Generates `b = A x* + w` with a ±1 spike signal `x*`, Gaussian `A` and
/// white Gaussian `w`; sets `delta = sqrt(m) sigma_w`.
pub fn generate_problem(params: &ProblemParams, seed: u64) -> Result<SensingProblem> {
    params.validate()?;
    let ProblemParams {
        n,
        m,
        k,
        sigma,
        sigma_w,
    } = *params;
    let x_true = generate_spike_signal(n, k, sub_seed(seed, STREAM_SIGNAL))?;
    let a = generate_gaussian_matrix(m, n, sigma, sub_seed(seed, STREAM_MATRIX))?;
    let mut noise = PolarGaussian::new(seeded_rng(sub_seed(seed, STREAM_NOISE)));
    let mut b = a.mul_vec(&x_true);
    if sigma_w > 0.0 {
        for bi in b.iter_mut() {
            *bi += noise.next_scaled(sigma_w);
        }
    }
    Ok(SensingProblem {
        a,
        b,
        x_true: Some(x_true),
        delta: params.delta(),
        sigma,
        sigma_w,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, sub};

    #[test]
    fn gaussian_matrix_variance_at_reference_size() {
        let a = generate_gaussian_matrix(100, 256, 1.0, 42).unwrap();
        assert_eq!((a.rows(), a.cols()), (100, 256));
        let n = a.as_slice().len() as f64;
        let mean = a.as_slice().iter().sum::<f64>() / n;
        let var = a
            .as_slice()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        assert!((var - 1.0).abs() < 0.1, "sample variance {var}");
    }

    #[test]
    fn zero_sigma_gives_zero_matrix() {
        let a = generate_gaussian_matrix(2, 2, 0.0, 1).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            generate_gaussian_matrix(5, 7, 1.3, 9).unwrap(),
            generate_gaussian_matrix(5, 7, 1.3, 9).unwrap()
        );
        assert_ne!(
            generate_gaussian_matrix(5, 7, 1.3, 9).unwrap(),
            generate_gaussian_matrix(5, 7, 1.3, 10).unwrap()
        );
        assert_eq!(
            generate_spike_signal(50, 7, 3).unwrap(),
            generate_spike_signal(50, 7, 3).unwrap()
        );
    }

    #[test]
    fn spike_signal_shapes() {
        let x = generate_spike_signal(256, 24, 5).unwrap();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 24);
        assert!(x.iter().all(|v| *v == 0.0 || v.abs() == 1.0));
        assert!(generate_spike_signal(5, 0, 5)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(generate_spike_signal(3, 3, 5)
            .unwrap()
            .iter()
            .all(|v| v.abs() == 1.0));
        assert!(generate_spike_signal(3, 4, 5).is_err());
    }

    #[test]
    fn spike_signs_are_mixed() {
        let x = generate_spike_signal(1000, 400, 8).unwrap();
        let pos = x.iter().filter(|v| **v > 0.0).count();
        assert!((150..250).contains(&pos), "{pos} positive of 400");
    }

    #[test]
    fn problem_delta_follows_noise_variance() {
        for (var, want) in [(0.0225, 2.25), (0.2025, 20.25)] {
            let p = ProblemParams {
                n: 256,
                m: 100,
                k: 24,
                sigma: 1.0,
                sigma_w: libm::sqrt(var),
            };
            let prob = generate_problem(&p, 3).unwrap();
            assert!((prob.delta * prob.delta - want).abs() < 1e-12);
            assert_eq!(prob.b.len(), 100);
        }
    }

    #[test]
    fn noiseless_problem_is_exact() {
        let p = ProblemParams {
            n: 40,
            m: 20,
            k: 4,
            sigma: 1.0,
            sigma_w: 0.0,
        };
        let prob = generate_problem(&p, 3).unwrap();
        assert_eq!(prob.delta, 0.0);
        let clean = prob.a.mul_vec(prob.x_true.as_ref().unwrap());
        assert_eq!(clean, prob.b);
    }

    #[test]
    fn noise_level_is_plausible() {
        let p = ProblemParams {
            n: 400,
            m: 400,
            k: 10,
            sigma: 1.0,
            sigma_w: 0.5,
        };
        let prob = generate_problem(&p, 77).unwrap();
        let w = sub(&prob.b, &prob.a.mul_vec(prob.x_true.as_ref().unwrap()));
        let ratio = norm2(&w) / prob.delta;
        assert!((0.9..1.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn params_validation() {
        let ok = ProblemParams {
            n: 10,
            m: 5,
            k: 2,
            sigma: 1.0,
            sigma_w: 0.1,
        };
        assert!(ok.validate().is_ok());
        assert!(ProblemParams { k: 6, ..ok }.validate().is_err());
        assert!(ProblemParams { m: 11, k: 2, ..ok }.validate().is_err());
        assert!(ProblemParams { sigma: 0.0, ..ok }.validate().is_err());
        assert!(ProblemParams {
            sigma_w: -1.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let s: Vec<u64> = (1..=3).map(|i| sub_seed(7, i)).collect();
        assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
        assert_eq!(sub_seed(7, 1), sub_seed(7, 1));
    }
}
