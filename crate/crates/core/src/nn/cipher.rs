//! Secret-shared forward pass of a fixed-point network with argmax reveal.
//!
//! Input columns are split into blocks, each secret-shared by the party that
//! owns it. Weights are public by default; in [`WeightMode::Shared`] party 0
//! shares them as well.

use super::fixed::FixedModel;
use super::kernels::im2col;
use super::model::conv_geom;
use super::{LayerSpec, NnError, Tensor};
use crate::dealer::{budget_estimate, BudgetCounts, WeightMode};
use crate::mpc::{self, CommStats, EngineConfig, MpcError, PartyCtx, Schedule, Session, Shared};
use crate::ring::Ring64;
use std::time::{Duration, Instant};

/// A run of consecutive input columns held in the clear by one party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputBlock {
    pub len: usize,
    pub owner: usize,
}

impl InputBlock {
    /// Block `i` goes to party `i mod P`.
    pub fn round_robin(lens: &[usize], parties: usize) -> Vec<InputBlock> {
        lens.iter()
            .enumerate()
            .map(|(i, &len)| InputBlock { len, owner: i % parties })
            .collect()
    }
}

/// What the caller learns from one secure forward pass.
#[derive(Debug)]
pub struct CipherOutput {
    /// Revealed argmax per row, agreed by all parties.
    pub actions: Vec<usize>,
    /// Each party's own share of the logits, `[batch, outputs]`.
    pub logit_shares: Vec<Shared>,
    pub stats: Vec<CommStats>,
    pub consumed: BudgetCounts,
    /// Wall time of the online phase; dealing is excluded.
    pub online: Duration,
}

struct PartyInput {
    blocks: Vec<Option<Vec<Ring64>>>,
    weights: Option<Vec<Option<(Vec<Ring64>, Vec<Ring64>)>>>,
}

/// Runs the network under secret sharing on `features` (`[batch, inputs]`),
/// whose columns are cut into consecutive `blocks`.
pub fn forward_cipher(
    model: &FixedModel,
    features: &Tensor<f64>,
    blocks: &[InputBlock],
    engine: EngineConfig,
    weights: WeightMode,
    schedule: Schedule,
) -> Result<CipherOutput, NnError> {
    let batch = features.rows();
    let width = model.input_len();
    if blocks.iter().any(|b| b.owner >= engine.parties) {
        return Err(NnError::Shape(format!("block owner out of range for {} parties", engine.parties)));
    }
    if features.row_len() != width || blocks.iter().map(|b| b.len).sum::<usize>() != width {
        return Err(NnError::Shape(format!(
            "features {:?} and blocks {blocks:?} for input width {width}",
            features.shape()
        )));
    }
    if engine.cfg != model.cfg() {
        return Err(NnError::Shape("engine and model use different fixed-point formats".into()));
    }
    let parties = engine.parties;
    let enc = model.cfg().encode_slice(features.data())?;
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut off = 0;
    for b in blocks {
        offsets.push(off);
        off += b.len;
    }
    let inputs: Vec<PartyInput> = (0..parties)
        .map(|p| PartyInput {
            blocks: blocks
                .iter()
                .zip(&offsets)
                .map(|(b, &start)| {
                    let len = b.len;
                    (b.owner == p).then(|| {
                        (0..batch)
                            .flat_map(|r| enc[r * width + start..r * width + start + len].iter().copied())
                            .collect()
                    })
                })
                .collect(),
            weights: (p == 0 && weights == WeightMode::Shared).then(|| {
                model
                    .params()
                    .iter()
                    .map(|fp| fp.as_ref().map(|fp| (fp.w_t.clone(), fp.b.clone())))
                    .collect()
            }),
        })
        .collect();
    let budget = budget_estimate(model.specs(), batch, parties, weights, true);
    let expected = budget.counts();
    let blocks = blocks.to_vec();
    let dealt = Session::new(engine).deal(&budget)?;
    let clock = Instant::now();
    let out = dealt.run(inputs, schedule, |mut ctx, input| {
            let blocks = blocks.clone();
            async move {
                let r = party_program(&mut ctx, model, input, &blocks, batch, weights).await;
                (ctx, r)
            }
        })?;
    let online = clock.elapsed();
    for consumed in &out.consumed {
        if *consumed != expected {
            return Err(MpcError::Budget {
                estimated: expected,
                consumed: *consumed,
            }
            .into());
        }
    }
    let mut logit_shares = Vec::with_capacity(parties);
    let mut actions: Option<Vec<usize>> = None;
    for (logits, acts) in out.outputs {
        match &actions {
            Some(a) if *a != acts => {
                return Err(MpcError::Protocol {
                    phase: "argmax".into(),
                    detail: "parties revealed different actions".into(),
                }
                .into())
            }
            _ => actions = Some(acts),
        }
        logit_shares.push(logits);
    }
    Ok(CipherOutput {
        actions: actions.unwrap_or_default(),
        logit_shares,
        stats: out.stats,
        consumed: expected,
        online,
    })
}

/// Adds a per-column (or per-channel) bias held either publicly (leader adds
/// it) or as a sharing.
enum Bias<'a> {
    Public(&'a [Ring64]),
    Shared(Vec<Ring64>),
}

impl Bias<'_> {
    fn add_at(&self, leader: bool, idx: usize, v: &mut Ring64) {
        match self {
            Bias::Public(b) if leader => *v += b[idx],
            Bias::Public(_) => {}
            Bias::Shared(b) => *v += b[idx],
        }
    }
}

async fn party_program(
    ctx: &mut PartyCtx,
    model: &FixedModel,
    input: PartyInput,
    blocks: &[InputBlock],
    batch: usize,
    weights: WeightMode,
) -> Result<(Shared, Vec<usize>), MpcError> {
    ctx.set_phase("input");
    let mut parts = Vec::with_capacity(blocks.len());
    for (b, data) in blocks.iter().zip(&input.blocks) {
        parts.push(mpc::share_input(ctx, b.owner, data.as_deref(), vec![batch, b.len]).await?);
    }
    let width: usize = blocks.iter().map(|b| b.len).sum();
    let mut x = Vec::with_capacity(batch * width);
    for r in 0..batch {
        for (part, len) in parts.iter().zip(blocks.iter().map(|b| b.len)) {
            x.extend_from_slice(&part.data[r * len..(r + 1) * len]);
        }
    }
    let mut x = Shared::new(x, vec![batch, width])?;

    // Secret weights are shared up front, before any layer runs.
    let mut shared_w: Vec<Option<(Shared, Vec<Ring64>)>> = Vec::new();
    if weights == WeightMode::Shared {
        ctx.set_phase("weights");
        for (i, spec) in model.specs().iter().enumerate() {
            shared_w.push(match spec.weight_shape() {
                Some((rows, cols)) => {
                    let mine = input.weights.as_ref().and_then(|w| w[i].as_ref());
                    let w = mpc::share_input(ctx, 0, mine.map(|m| m.0.as_slice()), vec![cols, rows]).await?;
                    let b = mpc::share_input(ctx, 0, mine.map(|m| m.1.as_slice()), vec![rows]).await?;
                    Some((w, b.data))
                }
                None => None,
            });
        }
    }

    let leader = ctx.is_leader();
    for (i, spec) in model.specs().iter().enumerate() {
        ctx.set_phase(format!("layer {i} {spec}"));
        let fp = model.params()[i].as_ref();
        let bias = match (weights, fp) {
            (_, None) => None,
            (WeightMode::Public, Some(fp)) => Some(Bias::Public(&fp.b)),
            (WeightMode::Shared, Some(_)) => Some(Bias::Shared(shared_w[i].as_ref().unwrap().1.clone())),
        };
        x = match *spec {
            LayerSpec::Relu { .. } => mpc::relu(ctx, &x).await?,
            LayerSpec::Linear { outputs, .. } => {
                let mut y = match weights {
                    WeightMode::Public => mpc::matmul_public(ctx, &x, &fp.unwrap().w_t, outputs, None).await?,
                    WeightMode::Shared => mpc::matmul_shared(ctx, &x, &shared_w[i].as_ref().unwrap().0, None).await?,
                };
                let bias = bias.unwrap();
                for row in y.data.chunks_mut(outputs) {
                    for (o, v) in row.iter_mut().enumerate() {
                        bias.add_at(leader, o, v);
                    }
                }
                y
            }
            LayerSpec::Conv { out_channels, .. } => {
                let g = conv_geom(spec).unwrap();
                let (pos, patch) = (g.positions(), g.patch());
                let in_len = spec.input_len();
                let mut cols = Vec::with_capacity(batch * pos * patch);
                let mut buf = Vec::with_capacity(pos * patch);
                for r in 0..batch {
                    im2col(&x.data[r * in_len..(r + 1) * in_len], &g, &mut buf);
                    cols.extend_from_slice(&buf);
                }
                let cols = Shared::new(cols, vec![batch * pos, patch])?;
                let prod = match weights {
                    WeightMode::Public => mpc::matmul_public(ctx, &cols, &fp.unwrap().w_t, out_channels, None).await?,
                    WeightMode::Shared => mpc::matmul_shared(ctx, &cols, &shared_w[i].as_ref().unwrap().0, None).await?,
                };
                let bias = bias.unwrap();
                let out_len = spec.output_len();
                let mut y = vec![Ring64::ZERO; batch * out_len];
                for r in 0..batch {
                    for q in 0..pos {
                        for c in 0..out_channels {
                            let mut v = prod.data[(r * pos + q) * out_channels + c];
                            bias.add_at(leader, c, &mut v);
                            y[r * out_len + c * pos + q] = v;
                        }
                    }
                }
                Shared::new(y, vec![batch, out_len])?
            }
        };
    }
    ctx.set_phase("argmax");
    let actions = mpc::argmax_reveal(ctx, &x).await?;
    Ok((x, actions))
}
