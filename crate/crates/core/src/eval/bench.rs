//! Wall-clock cost of one forward pass of the action head, in the clear
//! and under secret sharing. Dealing happens before the clock starts.

use std::time::Instant;

use super::policy::navigation_blocks;
use super::EvalError;
use crate::dealer::WeightMode;
use crate::mpc::{EngineConfig, Schedule};
use crate::nn::cipher::forward_cipher;
use crate::nn::fixed::FixedModel;
use crate::nn::{NnError, Scalar, Sequential, Tensor};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub batch: usize,
    pub repeats: usize,
    /// Best-of-repeats seconds per plaintext forward in single precision, the
    /// precision the plaintext networks train in.
    pub plain: f64,
    /// The same in double precision.
    pub plain_f64: f64,
    /// `(parties, best-of-repeats seconds per secure forward)`.
    pub secure: Vec<(usize, f64)>,
}

impl BenchReport {
    pub fn slowdown(&self, parties: usize) -> Option<f64> {
        self.secure.iter().find(|(p, _)| *p == parties).map(|(_, s)| s / self.plain)
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "batch={} repeats={} plaintext_s={:.6e} plaintext_f64_s={:.6e}",
            self.batch, self.repeats, self.plain, self.plain_f64
        );
        for &(p, t) in &self.secure {
            s.push_str(&format!(" p{p}_s={t:.6e} p{p}_slowdown={:.1}", t / self.plain));
        }
        s
    }
}

/// Sub-millisecond timings are noisy, so the clear pass gets ten times the
/// repeats of the secure one. One untimed warm-up call comes first.
fn plain_time<T: Scalar>(head: &Sequential<T>, x: &Tensor<T>, repeats: usize) -> Result<f64, EvalError> {
    std::hint::black_box(head.forward(x)?);
    let mut best = f64::INFINITY;
    for _ in 0..10 * repeats {
        let t = Instant::now();
        std::hint::black_box(head.forward(std::hint::black_box(x))?);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

pub fn bench_inference(
    head: &Sequential<f64>,
    fixed: &FixedModel,
    features: &Tensor<f64>,
    parties: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<BenchReport, EvalError> {
    let repeats = repeats.max(1);
    let plain = plain_time(&head.cast::<f32>(), &features.cast::<f32>(), repeats)?;
    let plain_f64 = plain_time(head, features, repeats)?;
    let mut secure = Vec::new();
    for &p in parties {
        let mut best = f64::INFINITY;
        for r in 0..repeats {
            let engine = EngineConfig::new(p, fixed.cfg(), rng::derive(seed, "bench", r as u64)).map_err(NnError::from)?;
            let out = forward_cipher(fixed, features, &navigation_blocks(p), engine, WeightMode::Public, Schedule::RoundRobin)?;
            best = best.min(out.online.as_secs_f64());
        }
        secure.push((p, best));
    }
    Ok(BenchReport {
        batch: features.rows(),
        repeats,
        plain,
        plain_f64,
        secure,
    })
}
