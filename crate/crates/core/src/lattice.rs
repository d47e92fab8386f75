//! Randomly shifted rank-1 lattice rules mapped to `ℝ^d` through `Φ⁻¹`,
//! and a plain Monte Carlo baseline with the same reporting.
//!
//! Shift `k` of a run with seed `s` is drawn from stream `k` of
//! `ChaCha20Rng::seed_from_u64(s)`, so every shift is reproducible on its
//! own and the result does not depend on how shifts are scheduled.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::normal;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid generating vector: {0}")]
    InvalidVector(String),
    #[error("cannot parse generating vector: {0}")]
    ParseError(String),
    #[error("integrand returned {value} at {x:?}")]
    NonFiniteSample { x: Vec<f64>, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorSource {
    File(PathBuf),
    Korobov(u64),
    /// The embedded vector shipped with the crate.
    Shipped,
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingVector {
    pub z: Vec<u64>,
    pub n: u64,
    pub source: VectorSource,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl GeneratingVector {
    pub fn new(z: Vec<u64>, n: u64, source: VectorSource) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::InvalidVector("N must be positive".into()));
        }
        for (j, &zj) in z.iter().enumerate() {
            if n > 1 && !(1..n).contains(&zj) {
                return Err(LatticeError::InvalidVector(format!("z_{} = {zj} outside [1, {n})", j + 1)));
            }
            if gcd(zj, n) != 1 {
                return Err(LatticeError::InvalidVector(format!("gcd(z_{} = {zj}, {n}) != 1", j + 1)));
            }
        }
        Ok(Self { z, n, source })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// The rule with `n` points of an embedded sequence: `z mod n`, for
    /// `n` dividing `self.n`.
    pub fn reduce_to(&self, n: u64) -> Result<Self, LatticeError> {
        if n == self.n {
            return Ok(self.clone());
        }
        if n == 0 || self.n % n != 0 {
            return Err(LatticeError::InvalidVector(format!("N = {n} does not divide {}", self.n)));
        }
        let z = self.z.iter().map(|z| z % n).collect();
        Self::new(z, n, self.source.clone())
    }

    /// The first `d` components.
    pub fn truncate(&self, d: usize) -> Result<Self, LatticeError> {
        if d > self.dim() {
            return Err(LatticeError::InvalidVector(format!(
                "vector has {} components, {d} requested",
                self.dim()
            )));
        }
        Ok(Self {
            z: self.z[..d].to_vec(),
            n: self.n,
            source: self.source.clone(),
        })
    }
}

impl fmt::Display for GeneratingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z: Vec<String> = self.z.iter().map(|v| v.to_string()).collect();
        write!(f, "N={}\nz={}", self.n, z.join(","))
    }
}

/// `z = (1, a, a² mod N, …, a^{d-1} mod N)`.
pub fn korobov_vector(a: u64, n: u64, d: usize) -> Result<GeneratingVector, LatticeError> {
    if n == 0 || gcd(a % n.max(1), n) != 1 {
        return Err(LatticeError::InvalidVector(format!("gcd({a}, {n}) != 1")));
    }
    let mut z = Vec::with_capacity(d);
    let mut p = 1 % n;
    for _ in 0..d {
        z.push(if n == 1 { 0 } else { p });
        p = ((p as u128 * a as u128) % n as u128) as u64;
    }
    if n == 1 {
        return Ok(GeneratingVector { z, n, source: VectorSource::Korobov(a) });
    }
    GeneratingVector::new(z, n, VectorSource::Korobov(a))
}

/// Parse `N=<int>` and `z=<comma-separated ints>` lines.
pub fn parse_vector(text: &str) -> Result<GeneratingVector, LatticeError> {
    let mut n = None;
    let mut z = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| LatticeError::ParseError(format!("expected key=value, got `{line}`")))?;
        match key.trim() {
            "N" => {
                n = Some(
                    value
                        .trim()
                        .parse::<u64>()
                        .map_err(|e| LatticeError::ParseError(format!("N: {e}")))?,
                )
            }
            "z" => {
                z = Some(
                    value
                        .split(',')
                        .map(|v| v.trim().parse::<u64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| LatticeError::ParseError(format!("z: {e}")))?,
                )
            }
            other => return Err(LatticeError::ParseError(format!("unknown key `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| LatticeError::ParseError("missing N".into()))?;
    let z = z.ok_or_else(|| LatticeError::ParseError("missing z".into()))?;
    GeneratingVector::new(z, n, VectorSource::Given)
}

pub fn load_vector(path: &Path) -> Result<GeneratingVector, LatticeError> {
    let text = std::fs::read_to_string(path).map_err(|e| LatticeError::ParseError(format!("{}: {e}", path.display())))?;
    let mut v = parse_vector(&text)?;
    v.source = VectorSource::File(path.to_path_buf());
    Ok(v)
}

const SHIPPED_VECTOR: &str = include_str!("../data/lattice-33002-1024-1048576.txt");

/// Smallest `N` the shipped sequence was constructed for.
pub const SHIPPED_MIN_N: u64 = 1 << 10;

/// The shipped embedded vector: 32 components, `N = 2^20`, constructed
/// for `N = 2^10 … 2^20`.
pub fn shipped_vector() -> GeneratingVector {
    let mut v = parse_vector(SHIPPED_VECTOR).expect("shipped vector parses");
    v.source = VectorSource::Shipped;
    v
}

/// The shipped vector when it was built for `(n, d)`, otherwise
/// [`korobov_search`].
pub fn default_vector(n: u64, d: usize) -> Result<GeneratingVector, LatticeError> {
    let shipped = shipped_vector();
    if d <= shipped.dim() && n.is_power_of_two() && n >= SHIPPED_MIN_N && n <= shipped.n {
        shipped.truncate(d)?.reduce_to(n)
    } else {
        korobov_search(n, d)
    }
}

/// Error of the unshifted lattice on `∏_j (1 + γ_j 2π² B₂(u_j))` with
/// `γ_j = j⁻²`; the integrand has mean one and is smooth and periodic.
fn training_error(z: &[u64], n: u64) -> f64 {
    // 2π² B₂(u) with B₂(u) = u² - u + 1/6
    let b2 = |u: f64| 2.0 * std::f64::consts::PI.powi(2) * (u * u - u + 1.0 / 6.0);
    let mut sum = 0.0;
    for k in 0..n {
        let mut prod = 1.0;
        for (j, &zj) in z.iter().enumerate() {
            let u = ((k as u128 * zj as u128) % n as u128) as f64 / n as f64;
            prod *= 1.0 + b2(u) / ((j + 1) * (j + 1)) as f64;
        }
        sum += prod;
    }
    (sum / n as f64 - 1.0).abs()
}

/// Largest number of Korobov parameters tried by [`korobov_search`].
pub const KOROBOV_CANDIDATES: u64 = 512;

/// Korobov vector minimizing the training error over up to 512 parameters
/// `a`, evenly spread over those coprime to `n`. Results are cached per `(n, d)`.
pub fn korobov_search(n: u64, d: usize) -> Result<GeneratingVector, LatticeError> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), u64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&a) = cache.lock().map_err(|_| LatticeError::InvalidConfig("cache poisoned".into()))?.get(&(n, d)) {
        return korobov_vector(a, n, d);
    }
    if n < 3 {
        return korobov_vector(1, n, d);
    }
    let coprime: Vec<u64> = (2..n).filter(|&a| gcd(a, n) == 1).collect();
    let take = (coprime.len() as u64).min(KOROBOV_CANDIDATES) as usize;
    let candidates: Vec<u64> = (0..take).map(|i| coprime[i * coprime.len() / take]).collect();
    let scored: Vec<(f64, u64)> = candidates
        .par_iter()
        .map(|&a| {
            let z = korobov_vector(a, n, d).map(|v| v.z).unwrap_or_default();
            (training_error(&z, n), a)
        })
        .collect();
    let best = scored
        .iter()
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .map(|&(_, a)| a)
        .unwrap_or(1);
    if let Ok(mut c) = cache.lock() {
        c.insert((n, d), best);
    }
    korobov_vector(best, n, d)
}

/// Point `k` of the shifted lattice: `frac(k z / N + Δ)`.
fn point(vector: &GeneratingVector, shift: &[f64], k: u64, out: &mut [f64]) {
    let n = vector.n;
    for (j, (&zj, &dj)) in vector.z.iter().zip(shift).enumerate() {
        let base = ((k as u128 * zj as u128) % n as u128) as f64 / n as f64;
        let u = base + dj;
        out[j] = if u >= 1.0 { u - 1.0 } else { u };
    }
}

pub fn lattice_points(vector: &GeneratingVector, shift: &[f64]) -> Result<Vec<Vec<f64>>, LatticeError> {
    if shift.len() != vector.dim() {
        return Err(LatticeError::InvalidConfig(format!(
            "shift has {} components, vector {}",
            shift.len(),
            vector.dim()
        )));
    }
    if shift.iter().any(|s| !(0.0..1.0).contains(s)) {
        return Err(LatticeError::InvalidConfig("shift components must lie in [0, 1)".into()));
    }
    Ok((0..vector.n)
        .map(|k| {
            let mut p = vec![0.0; vector.dim()];
            point(vector, shift, k, &mut p);
            p
        })
        .collect())
}

/// Result of `m` independent randomizations of an equal-weight rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedRuleRun {
    /// `None` for Monte Carlo runs.
    pub vector: Option<GeneratingVector>,
    pub n: u64,
    pub m: usize,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub rms_error: f64,
}

impl ShiftedRuleRun {
    fn from_estimates(vector: Option<GeneratingVector>, n: u64, seed: u64, estimates: Vec<f64>) -> Self {
        let m = estimates.len();
        let mean = estimates.iter().sum::<f64>() / m as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        Self {
            vector,
            n,
            m,
            seed,
            estimates,
            mean,
            rms_error: (var / m as f64).sqrt(),
        }
    }
}

fn shift_rng(seed: u64, k: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// The shift used for randomization `k`.
pub fn shift(seed: u64, k: usize, d: usize) -> Vec<f64> {
    let mut rng = shift_rng(seed, k);
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn check_m(m: usize) -> Result<(), LatticeError> {
    if m < 2 {
        return Err(LatticeError::InvalidConfig(format!("need at least 2 shifts for an error estimate, got {m}")));
    }
    Ok(())
}

/// Randomly shifted lattice estimate of `∫ f ρ` with a fallible integrand.
pub fn try_qmc_estimate<F, E>(f: F, vector: &GeneratingVector, m: usize, seed: u64) -> Result<ShiftedRuleRun, E>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: From<LatticeError> + Send,
{
    check_m(m)?;
    let d = vector.dim();
    let n = vector.n;
    // only exact zeros (degenerate shifts) are moved; clamping a whole
    // boundary band would cut off tail mass
    let nudge = 0.5 / n as f64;
    let estimates = (0..m)
        .into_par_iter()
        .map(|k| {
            let delta = shift(seed, k, d);
            let mut u = vec![0.0; d];
            let mut x = vec![0.0; d];
            let mut sum = 0.0;
            for i in 0..n {
                point(vector, &delta, i, &mut u);
                for j in 0..d {
                    x[j] = normal::inv_cdf(if u[j] <= 0.0 { nudge } else { u[j] }).unwrap_or(0.0);
                }
                let v = f(&x)?;
                if !v.is_finite() {
                    return Err(LatticeError::NonFiniteSample { x: x.clone(), value: v }.into());
                }
                sum += v;
            }
            Ok(sum / n as f64)
        })
        .collect::<Result<Vec<f64>, E>>()?;
    Ok(ShiftedRuleRun::from_estimates(Some(vector.clone()), n, seed, estimates))
}

pub fn qmc_estimate<F>(f: F, vector: &GeneratingVector, m: usize, seed: u64) -> Result<ShiftedRuleRun, LatticeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    try_qmc_estimate(|x| Ok::<_, LatticeError>(f(x)), vector, m, seed)
}

/// `m` independent plain Monte Carlo means of `n` standard normal points.
pub fn try_mc_estimate<F, E>(f: F, d: usize, n: u64, m: usize, seed: u64) -> Result<ShiftedRuleRun, E>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: From<LatticeError> + Send,
{
    check_m(m)?;
    if n == 0 {
        return Err(LatticeError::InvalidConfig("N must be positive".into()).into());
    }
    let estimates = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng = shift_rng(seed, k);
            let mut x = vec![0.0; d];
            let mut sum = 0.0;
            for _ in 0..n {
                for xj in x.iter_mut() {
                    // uniform on the open interval (0, 1)
                    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                    *xj = normal::inv_cdf(u).unwrap_or(0.0);
                }
                let v = f(&x)?;
                if !v.is_finite() {
                    return Err(LatticeError::NonFiniteSample { x: x.clone(), value: v }.into());
                }
                sum += v;
            }
            Ok(sum / n as f64)
        })
        .collect::<Result<Vec<f64>, E>>()?;
    Ok(ShiftedRuleRun::from_estimates(None, n, seed, estimates))
}

pub fn mc_estimate<F>(f: F, d: usize, n: u64, m: usize, seed: u64) -> Result<ShiftedRuleRun, LatticeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    try_mc_estimate(|x| Ok::<_, LatticeError>(f(x)), d, n, m, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_examples() {
        let v = GeneratingVector::new(vec![1], 4, VectorSource::Given).unwrap();
        let p = lattice_points(&v, &[0.0]).unwrap();
        assert_eq!(p, vec![vec![0.0], vec![0.25], vec![0.5], vec![0.75]]);

        let v = GeneratingVector::new(vec![1, 3], 8, VectorSource::Given).unwrap();
        let p = lattice_points(&v, &[0.0, 0.0]).unwrap();
        for (k, pk) in p.iter().enumerate() {
            assert_eq!(pk[0], k as f64 / 8.0);
            assert_eq!(pk[1], ((3 * k) % 8) as f64 / 8.0);
        }
        let shifted = lattice_points(&v, &[0.5, 0.5]).unwrap();
        for (a, b) in p.iter().zip(&shifted) {
            for j in 0..2 {
                assert_eq!(b[j], (a[j] + 0.5) % 1.0);
            }
        }
    }

    #[test]
    fn lattice_shift_permutes_the_point_set() {
        let v = GeneratingVector::new(vec![1, 5, 3], 16, VectorSource::Given).unwrap();
        let base = lattice_points(&v, &[0.0; 3]).unwrap();
        let k = 7u64;
        let delta: Vec<f64> = v.z.iter().map(|&z| ((k * z) % 16) as f64 / 16.0).collect();
        let mut moved = lattice_points(&v, &delta).unwrap();
        let mut base = base;
        let key = |p: &Vec<f64>| p.iter().map(|x| (x * 16.0).round() as u64).collect::<Vec<_>>();
        base.sort_by_key(key);
        moved.sort_by_key(key);
        assert_eq!(base, moved);
    }

    #[test]
    fn vector_validation() {
        assert!(GeneratingVector::new(vec![2], 8, VectorSource::Given).is_err());
        assert!(GeneratingVector::new(vec![8], 8, VectorSource::Given).is_err());
        assert!(GeneratingVector::new(vec![0], 8, VectorSource::Given).is_err());
        assert_eq!(korobov_vector(3, 8, 3).unwrap().z, vec![1, 3, 1]);
        assert_eq!(korobov_vector(1, 64, 4).unwrap().z, vec![1, 1, 1, 1]);
        assert!(korobov_vector(4, 8, 2).is_err());
    }

    #[test]
    fn parse_examples() {
        let v = parse_vector("N=16\nz=1,7,5").unwrap();
        assert_eq!((v.n, v.z.clone()), (16, vec![1, 7, 5]));
        assert_eq!(parse_vector(&v.to_string()).unwrap().z, v.z);
        assert!(matches!(parse_vector("N=16"), Err(LatticeError::ParseError(_))));
        assert!(matches!(parse_vector("N=x\nz=1"), Err(LatticeError::ParseError(_))));
        assert!(matches!(parse_vector("N=16\nz=2"), Err(LatticeError::InvalidVector(_))));
    }

    #[test]
    fn estimates_of_simple_integrands() {
        let v = default_vector(1 << 10, 4).unwrap();
        let one = qmc_estimate(|_| 1.0, &v, 8, 1).unwrap();
        assert_eq!(one.mean, 1.0);
        assert_eq!(one.rms_error, 0.0);
        let lin = qmc_estimate(|x| x[0], &v, 16, 2).unwrap();
        assert!(lin.mean.abs() <= 3.0 * lin.rms_error.max(1e-15), "{lin:?}");
        let sq = qmc_estimate(|x| x.iter().map(|t| t * t).sum(), &v, 16, 3).unwrap();
        assert!((sq.mean - 4.0).abs() <= 3.0 * sq.rms_error, "{} ± {}", sq.mean, sq.rms_error);

        let mc_sq = mc_estimate(|x| x.iter().map(|t| t * t).sum(), 4, 1 << 10, 16, 3).unwrap();
        assert!((mc_sq.mean - 4.0).abs() <= 4.0 * mc_sq.rms_error);
        assert!(sq.rms_error < mc_sq.rms_error);
        let mc_one = mc_estimate(|_| 1.0, 3, 100, 4, 0).unwrap();
        assert_eq!((mc_one.mean, mc_one.rms_error), (1.0, 0.0));
    }

    #[test]
    fn runs_are_reproducible() {
        let v = korobov_search(256, 3).unwrap();
        let f = |x: &[f64]| (x[0] + x[1] * x[2]).sin();
        let a = qmc_estimate(f, &v, 8, 42).unwrap();
        let b = qmc_estimate(f, &v, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = qmc_estimate(f, &v, 8, 43).unwrap();
        assert_ne!(a.estimates, c.estimates);
        assert_eq!(shift(9, 3, 4), shift(9, 3, 4));
        assert_ne!(shift(9, 3, 4), shift(9, 4, 4));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let v = korobov_vector(3, 8, 1).unwrap();
        let r = qmc_estimate(|_| f64::NAN, &v, 2, 0);
        assert!(matches!(r, Err(LatticeError::NonFiniteSample { .. })));
        assert!(matches!(qmc_estimate(|_| 1.0, &v, 1, 0), Err(LatticeError::InvalidConfig(_))));
    }

    #[test]
    fn shipped_vector_reduces_to_smaller_rules() {
        let v = shipped_vector();
        assert_eq!((v.n, v.dim()), (1 << 20, 32));
        let small = default_vector(1 << 10, 5).unwrap();
        assert_eq!(small.n, 1 << 10);
        assert!(small.z.iter().zip(&v.z).all(|(a, b)| *a == b % 1024));
        assert!(v.reduce_to(1000).is_err());
        assert_eq!(default_vector(1000, 3).unwrap(), korobov_search(1000, 3).unwrap());
        assert_eq!(default_vector(512, 3).unwrap(), korobov_search(512, 3).unwrap());
    }

    #[test]
    fn korobov_search_beats_a_poor_choice() {
        let n = 1 << 9;
        let best = korobov_search(n, 5).unwrap();
        let poor = korobov_vector(1, n, 5).unwrap();
        assert!(training_error(&best.z, n) < training_error(&poor.z, n));
        assert_eq!(korobov_search(n, 5).unwrap(), best);
    }
}
