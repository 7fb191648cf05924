//! Linear probe that tries to tell from a camera feature (or from one
//! party's share of it) whether that camera sees an obstacle.

use rand::seq::SliceRandom;

use super::EvalError;
use crate::nn::spec::{CAMERAS, VIEW_FEATURE};
use crate::pipeline::Navigator;
use crate::ring::FixedConfig;
use crate::rng;
use crate::sharing::split_additive;
use crate::world::render::{lane, render};
use crate::world::World;

/// Camera features with their obstacle labels, balanced between classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeData {
    pub features: Vec<[f64; VIEW_FEATURE]>,
    pub labels: Vec<bool>,
}

/// Whether any obstacle sits in the lane watched by corner `camera`.
pub fn camera_sees_obstacle(world: &World, camera: usize) -> bool {
    lane(world, camera)
        .map(|(cells, _)| cells.iter().flatten().any(|&c| world.obstacle_at(c).is_some()))
        .unwrap_or(false)
}

/// Walks `worlds` camera by camera, keeping samples until both classes
/// hold `per_class`.
pub fn probe_data<T: crate::nn::Scalar>(nav: &Navigator<T>, worlds: &[World], per_class: usize) -> Result<ProbeData, EvalError> {
    let mut out = ProbeData {
        features: Vec::new(),
        labels: Vec::new(),
    };
    let mut counts = [0usize; 2];
    for w in worlds {
        for c in 0..CAMERAS {
            let label = camera_sees_obstacle(w, c);
            if counts[label as usize] >= per_class {
                continue;
            }
            counts[label as usize] += 1;
            let img = render(w, c)?;
            let f = nav.encode_images(&[&img])?;
            out.features.push(std::array::from_fn(|i| f.data()[i].to_f64().unwrap()));
            out.labels.push(label);
        }
        if counts == [per_class, per_class] {
            break;
        }
    }
    Ok(out)
}

/// Features scaled into `[-1, 1]` by their largest magnitude.
pub fn normalize_plain(features: &[[f64; VIEW_FEATURE]]) -> Vec<[f64; VIEW_FEATURE]> {
    let max = features.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let s = if max > 0.0 { 1.0 / max } else { 1.0 };
    features.iter().map(|f| f.map(|v| v * s)).collect()
}

/// One party's arithmetic share of each fixed-point feature, decoded as a
/// signed value and divided by `2^63 * 2^-frac_bits` so it lands in `[-1, 1)`.
pub fn normalized_shares(features: &[[f64; VIEW_FEATURE]], parties: usize, party: usize, cfg: FixedConfig, seed: u64) -> Result<Vec<[f64; VIEW_FEATURE]>, EvalError> {
    let mut r = rng::stream(rng::derive(seed, "probe-shares", 0), 0);
    let scale = 2f64.powi(63) / 2f64.powi(cfg.frac_bits() as i32);
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let enc = cfg.encode_slice(f).map_err(crate::nn::NnError::from)?;
        let shares = split_additive(&enc, parties, &mut r);
        let mine = &shares[party];
        out.push(std::array::from_fn(|i| cfg.decode::<f64>(mine[i]) / scale));
    }
    Ok(out)
}

/// Logistic regression by full-batch gradient descent.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    pub w: [f64; VIEW_FEATURE],
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearProbe {
    pub fn fit(x: &[[f64; VIEW_FEATURE]], y: &[bool], iterations: usize, lr: f64) -> Self {
        let mut p = LinearProbe {
            w: [0.0; VIEW_FEATURE],
            b: 0.0,
        };
        let n = x.len().max(1) as f64;
        for _ in 0..iterations {
            let mut gw = [0.0; VIEW_FEATURE];
            let mut gb = 0.0;
            for (xi, &yi) in x.iter().zip(y) {
                let err = sigmoid(p.score(xi)) - yi as u8 as f64;
                for (g, v) in gw.iter_mut().zip(xi) {
                    *g += err * v;
                }
                gb += err;
            }
            for (w, g) in p.w.iter_mut().zip(&gw) {
                *w -= lr * g / n;
            }
            p.b -= lr * gb / n;
        }
        p
    }

    pub fn score(&self, x: &[f64; VIEW_FEATURE]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn accuracy(&self, x: &[[f64; VIEW_FEATURE]], y: &[bool]) -> f64 {
        let hits = x.iter().zip(y).filter(|(xi, &yi)| (self.score(xi) > 0.0) == yi).count();
        hits as f64 / x.len().max(1) as f64
    }
}

pub const PROBE_ITERATIONS: usize = 500;
pub const PROBE_LR: f64 = 1.0;

/// Held-out accuracy of a probe trained on a seeded half of the samples.
pub fn privacy_attack(x: &[[f64; VIEW_FEATURE]], y: &[bool], seed: u64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(&mut rng::stream(rng::derive(seed, "probe-split", 0), 0));
    let (train, test) = idx.split_at(idx.len() / 2);
    let pick = |ids: &[usize]| -> (Vec<[f64; VIEW_FEATURE]>, Vec<bool>) { (ids.iter().map(|&i| x[i]).collect(), ids.iter().map(|&i| y[i]).collect()) };
    let (tx, ty) = pick(train);
    let (vx, vy) = pick(test);
    LinearProbe::fit(&tx, &ty, PROBE_ITERATIONS, PROBE_LR).accuracy(&vx, &vy)
}

/// Labels permuted with a seeded shuffle.
pub fn shuffled_labels(y: &[bool], seed: u64) -> Vec<bool> {
    let mut out = y.to_vec();
    out.shuffle(&mut rng::stream(rng::derive(seed, "probe-shuffle", 0), 0));
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackReport {
    pub samples: usize,
    pub plain: f64,
    pub share: f64,
    pub shuffled: f64,
}

impl AttackReport {
    pub fn to_line(&self) -> String {
        format!(
            "samples={} plaintext_accuracy={:.4} share_accuracy={:.4} shuffled_accuracy={:.4}",
            self.samples, self.plain, self.share, self.shuffled
        )
    }
}

/// Probe accuracy on plaintext features, on one share of them, and on
/// plaintext features with shuffled labels.
pub fn attack_report(data: &ProbeData, parties: usize, cfg: FixedConfig, seed: u64) -> Result<AttackReport, EvalError> {
    let plain = normalize_plain(&data.features);
    let shares = normalized_shares(&data.features, parties, parties - 1, cfg, seed)?;
    Ok(AttackReport {
        samples: data.labels.len(),
        plain: privacy_attack(&plain, &data.labels, seed),
        share: privacy_attack(&shares, &data.labels, seed),
        shuffled: privacy_attack(&plain, &shuffled_labels(&data.labels, seed), seed),
    })
}
