//! Variance schedules and the closed-form forward diffusion step
//! `z_t = √ᾱ_t · z_0 + √(1 − ᾱ_t) · ε`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Parallelism};
use crate::synthetic::standard_normal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("schedule has no steps")]
    Empty,
    #[error("beta at step {step} is {beta}, expected a value in (0, 1)")]
    BadBeta { step: usize, beta: f64 },
    #[error("cumulative product stops decreasing at step {step}")]
    NotDecreasing { step: usize },
    #[error("cumulative product underflows to zero at step {step}")]
    Underflow { step: usize },
    #[error("timestep {t} outside 0..={max}")]
    StepOutOfRange { t: usize, max: usize },
    #[error("latent lengths differ: z0 has {z0}, eps has {eps}")]
    LengthMismatch { z0: usize, eps: usize },
    #[error("latent contains a non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T, E = NoiseError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VarianceSchedule {
    betas: Vec<f64>,
    /// `alpha_bars[t]` for `t = 0..=T`, with `alpha_bars[0] = 1`.
    alpha_bars: Vec<f64>,
}

impl VarianceSchedule {
    /// `betas[i]` is β_{i+1}.
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(NoiseError::Empty);
        }
        let mut alpha_bars = Vec::with_capacity(betas.len() + 1);
        alpha_bars.push(1.0);
        let mut acc = 1.0;
        for (i, &beta) in betas.iter().enumerate() {
            let step = i + 1;
            if !(beta > 0.0 && beta < 1.0) {
                return Err(NoiseError::BadBeta { step, beta });
            }
            let next = acc * (1.0 - beta);
            if next <= 0.0 {
                return Err(NoiseError::Underflow { step });
            }
            if next >= acc {
                return Err(NoiseError::NotDecreasing { step });
            }
            acc = next;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn constant(beta: f64, steps: usize) -> Result<Self> {
        Self::new(vec![beta; steps])
    }

    /// β evenly spaced from `start` to `end` inclusive.
    pub fn linear(start: f64, end: f64, steps: usize) -> Result<Self> {
        let betas = match steps {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(betas)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bars.get(t).copied().ok_or(NoiseError::StepOutOfRange {
            t,
            max: self.steps(),
        })
    }
}

impl Default for VarianceSchedule {
    /// Linear β from 1e-4 to 0.02 over 1000 steps.
    fn default() -> Self {
        Self::linear(1e-4, 0.02, 1000).expect("default schedule is valid")
    }
}

impl TryFrom<Vec<f64>> for VarianceSchedule {
    type Error = NoiseError;
    fn try_from(betas: Vec<f64>) -> Result<Self> {
        Self::new(betas)
    }
}

impl From<VarianceSchedule> for Vec<f64> {
    fn from(s: VarianceSchedule) -> Self {
        s.betas
    }
}

/// `alpha_bar` on a schedule.
pub fn alpha_bar(schedule: &VarianceSchedule, t: usize) -> Result<f64> {
    schedule.alpha_bar(t)
}

/// Flattened latent with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    values: Vec<f64>,
}

impl LatentTensor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NoiseError::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    /// I.i.d. standard normal entries, identical for every parallelism mode.
    pub fn standard_normal(len: usize, seed: u64, mode: Parallelism) -> Self {
        Self {
            values: standard_normal(len, seed, mode),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn forward_noise(
    z0: &LatentTensor,
    t: usize,
    eps: &LatentTensor,
    schedule: &VarianceSchedule,
) -> Result<LatentTensor> {
    forward_noise_with(z0, t, eps, schedule, Parallelism::default())
}

pub fn forward_noise_with(
    z0: &LatentTensor,
    t: usize,
    eps: &LatentTensor,
    schedule: &VarianceSchedule,
    mode: Parallelism,
) -> Result<LatentTensor> {
    if z0.len() != eps.len() {
        return Err(NoiseError::LengthMismatch {
            z0: z0.len(),
            eps: eps.len(),
        });
    }
    let ab = schedule.alpha_bar(t)?;
    if t == 0 {
        return Ok(z0.clone());
    }
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut out = vec![0.0; z0.len()];
    par::for_each_chunk_mut(&mut out, 1 << 15, mode, |offset, chunk| {
        let zs = &z0.values[offset..offset + chunk.len()];
        let es = &eps.values[offset..offset + chunk.len()];
        for ((o, z), e) in chunk.iter_mut().zip(zs).zip(es) {
            *o = a * z + b * e;
        }
    });
    Ok(LatentTensor { values: out })
}

/// `(t, ᾱ_t)` rows sampled every `stride` steps, always including `T`.
pub fn alpha_bar_table(schedule: &VarianceSchedule, stride: usize) -> Vec<(usize, f64)> {
    let stride = stride.max(1);
    let mut rows: Vec<(usize, f64)> = (0..=schedule.steps())
        .step_by(stride)
        .map(|t| (t, schedule.alpha_bars[t]))
        .collect();
    if rows.last().map(|r| r.0) != Some(schedule.steps()) {
        rows.push((schedule.steps(), schedule.alpha_bars[schedule.steps()]));
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_schedule_product() {
        let s = VarianceSchedule::constant(0.1, 3).unwrap();
        assert!((s.alpha_bar(3).unwrap() - 0.729).abs() <= 1e-15);
        assert_eq!(s.alpha_bar(0).unwrap(), 1.0);
        assert_eq!(
            s.alpha_bar(4),
            Err(NoiseError::StepOutOfRange { t: 4, max: 3 })
        );
    }

    #[test]
    fn rejects_bad_schedules() {
        assert_eq!(VarianceSchedule::new(vec![]), Err(NoiseError::Empty));
        assert!(matches!(
            VarianceSchedule::new(vec![0.1, 1.0]),
            Err(NoiseError::BadBeta { step: 2, .. })
        ));
        assert!(matches!(
            VarianceSchedule::new(vec![0.0]),
            Err(NoiseError::BadBeta { step: 1, .. })
        ));
        assert!(matches!(
            VarianceSchedule::new(vec![f64::NAN]),
            Err(NoiseError::BadBeta { .. })
        ));
        // 1 - 1e-17 rounds to 1, so ᾱ would stall
        assert!(matches!(
            VarianceSchedule::new(vec![1e-17]),
            Err(NoiseError::NotDecreasing { step: 1 })
        ));
    }

    #[test]
    fn default_schedule_strictly_decreasing() {
        let s = VarianceSchedule::default();
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.betas()[0], 1e-4);
        assert!((s.betas()[999] - 0.02).abs() < 1e-15);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!(s.alpha_bar(1000).unwrap() > 0.0);
    }

    #[test]
    fn matches_sequential_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let betas: Vec<f64> = (0..500).map(|_| rng.random_range(1e-5..0.05)).collect();
        let s = VarianceSchedule::new(betas.clone()).unwrap();
        let mut acc = 1.0f64;
        for (t, b) in betas.iter().enumerate() {
            acc *= 1.0 - b;
            let got = s.alpha_bar(t + 1).unwrap();
            assert!(((got - acc) / acc).abs() <= 1e-15);
        }
    }

    #[test]
    fn special_cases() {
        let s = VarianceSchedule::default();
        let z0 = LatentTensor::standard_normal(100, 1, Parallelism::Sequential);
        let zero = LatentTensor::zeros(100);
        let zt = forward_noise(&z0, 400, &zero, &s).unwrap();
        let a = s.alpha_bar(400).unwrap().sqrt();
        for (x, z) in zt.values().iter().zip(z0.values()) {
            assert_eq!(*x, a * z);
        }
        let eps = LatentTensor::standard_normal(100, 2, Parallelism::Sequential);
        assert_eq!(forward_noise(&z0, 0, &eps, &s).unwrap(), z0);
        assert_eq!(
            forward_noise(&z0, 1, &LatentTensor::zeros(3), &s),
            Err(NoiseError::LengthMismatch { z0: 100, eps: 3 })
        );
        assert!(matches!(
            LatentTensor::new(vec![0.0, f64::INFINITY]),
            Err(NoiseError::NonFinite(1))
        ));
    }

    #[test]
    fn variance_is_preserved() {
        let n = 1_000_000;
        let s = VarianceSchedule::default();
        let z0 = LatentTensor::standard_normal(n, 10, Parallelism::default());
        let eps = LatentTensor::standard_normal(n, 11, Parallelism::default());
        for t in [1, 250, 1000] {
            let zt = forward_noise(&z0, t, &eps, &s).unwrap();
            let mean = zt.values().iter().sum::<f64>() / n as f64;
            let var = zt.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((0.99..=1.01).contains(&var), "t={t}: {var}");
        }
    }

    #[test]
    fn modes_agree() {
        let s = VarianceSchedule::default();
        let z0 = LatentTensor::standard_normal(100_000, 4, Parallelism::Sequential);
        let eps = LatentTensor::standard_normal(100_000, 5, Parallelism::Sequential);
        assert_eq!(
            forward_noise_with(&z0, 77, &eps, &s, Parallelism::Sequential).unwrap(),
            forward_noise_with(&z0, 77, &eps, &s, Parallelism::Rayon).unwrap()
        );
    }

    #[test]
    fn table_includes_endpoints() {
        let s = VarianceSchedule::constant(0.1, 5).unwrap();
        let rows = alpha_bar_table(&s, 2);
        assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 2, 4, 5]);
    }

    #[test]
    fn serde_uses_betas() {
        let s = VarianceSchedule::constant(0.2, 2).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[0.2,0.2]");
        let back: VarianceSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<VarianceSchedule>("[1.5]").is_err());
    }

    proptest! {
        #[test]
        fn superposition(
            seed in any::<u64>(),
            t in 0usize..=1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let s = VarianceSchedule::default();
            let n = 64;
            let g = |k| LatentTensor::standard_normal(n, seed.wrapping_add(k), Parallelism::Sequential);
            let (z1, e1, z2, e2) = (g(0), g(1), g(2), g(3));
            let mix = |x: &LatentTensor, y: &LatentTensor| {
                LatentTensor::new(x.values().iter().zip(y.values()).map(|(p, q)| a * p + b * q).collect()).unwrap()
            };
            let lhs = forward_noise(&mix(&z1, &z2), t, &mix(&e1, &e2), &s).unwrap();
            let r1 = forward_noise(&z1, t, &e1, &s).unwrap();
            let r2 = forward_noise(&z2, t, &e2, &s).unwrap();
            for i in 0..n {
                let rhs = a * r1.values()[i] + b * r2.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
