//! Sign test, ReLU and argmax-with-reveal.

use super::arith::{add, mul, open, sub};
use super::binary::{a2b_planes, public_bits};
use super::{MpcError, PartyCtx, Shared};
use crate::dealer::{packed_words, Request};
use crate::ring::Ring64;

/// Additive sharing of `[signed(x) < 0]` as ring values 0/1.
///
/// The sign bit comes from the adder; a daBit moves it back to arithmetic
/// form: open `m = b ^ r`, then `b = m + r - 2mr` is local because `m` is public.
pub async fn ltz(ctx: &mut PartyCtx, x: &Shared) -> Result<Shared, MpcError> {
    let n = x.len();
    let planes = a2b_planes(ctx, x).await?;
    let msb = &planes[63];
    let dabit = ctx.take_dabit(n)?;
    ctx.mark_consumed(dabit.id, &Request::DaBit { n })?;
    let masked: Vec<u64> = msb.iter().zip(&dabit.bin).map(|(b, r)| b ^ r).collect();
    let all = ctx.net.broadcast("dabit", masked).await?;
    let mut m = vec![0u64; packed_words(n)];
    for part in &all {
        if part.len() != m.len() {
            return Err(MpcError::Transport("opened daBit mask has wrong length"));
        }
        for (o, p) in m.iter_mut().zip(part) {
            *o ^= p;
        }
    }
    let public_m = public_bits(ctx, &m, n);
    let data = (0..n)
        .map(|i| {
            let mi = Ring64((m[i / 64] >> (i % 64)) & 1);
            let r = dabit.arith[i];
            public_m[i] + r - Ring64(2) * mi * r
        })
        .collect();
    Ok(Shared {
        data,
        shape: x.shape.clone(),
    })
}

/// `max(0, x)` as `x * (1 - [x < 0])`; exact.
pub async fn relu(ctx: &mut PartyCtx, x: &Shared) -> Result<Shared, MpcError> {
    let neg = ltz(ctx, x).await?;
    let keep = Shared {
        data: neg
            .data
            .iter()
            .map(|&b| if ctx.is_leader() { Ring64::ONE - b } else { -b })
            .collect(),
        shape: neg.shape.clone(),
    };
    mul(ctx, x, &keep).await
}

/// Row-wise argmax of `logits` (`[rows, width]` or a single vector); only the
/// winning indices are opened. Ties go to the lower index.
pub async fn argmax_reveal(ctx: &mut PartyCtx, logits: &Shared) -> Result<Vec<usize>, MpcError> {
    let (rows, width) = match logits.shape[..] {
        [w] => (1, w),
        [r, w] => (r, w),
        _ => return Err(MpcError::Shape(format!("argmax over {:?}", logits.shape))),
    };
    if width == 0 {
        return Err(MpcError::Shape("argmax over an empty vector".into()));
    }
    let column = |j: usize| Shared {
        data: (0..rows).map(|r| logits.data[r * width + j]).collect(),
        shape: vec![rows],
    };
    let mut best = column(0);
    let mut index = Shared::zeros(vec![rows]);
    for j in 1..width {
        let cand = column(j);
        // 1 iff best < cand: strictly larger candidates win.
        let take = ltz(ctx, &sub(&best, &cand)?).await?;
        let idx_delta: Vec<Ring64> = index
            .data
            .iter()
            .map(|&v| if ctx.is_leader() { Ring64(j as u64) - v } else { -v })
            .collect();
        let mut deltas = sub(&cand, &best)?.data;
        deltas.extend(idx_delta);
        let mut gate = take.data.clone();
        gate.extend_from_slice(&take.data);
        let prod = mul(ctx, &Shared::vector(deltas), &Shared::vector(gate)).await?;
        let (dv, di) = prod.data.split_at(rows);
        best = add(&best, &Shared::vector(dv.to_vec()))?;
        index = add(&index, &Shared::vector(di.to_vec()))?;
    }
    let opened = open(ctx, &index).await?;
    opened
        .into_iter()
        .map(|v| {
            let i = v.0 as usize;
            if i < width {
                Ok(i)
            } else {
                Err(MpcError::Protocol {
                    phase: "argmax".into(),
                    detail: format!("opened index {} out of range", v.0),
                })
            }
        })
        .collect()
}
