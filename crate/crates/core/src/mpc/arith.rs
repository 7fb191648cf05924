//! Arithmetic-share protocols.

use super::{MpcError, PartyCtx, Shared};
use crate::dealer::{ring_matmul, BeaverShare, Request};
use crate::ring::{trunc_correction, trunc_offset, Ring64};

fn same_shape(x: &Shared, y: &Shared) -> Result<(), MpcError> {
    if x.shape != y.shape {
        return Err(MpcError::Shape(format!("{:?} vs {:?}", x.shape, y.shape)));
    }
    Ok(())
}

fn to_words(v: &[Ring64]) -> Vec<u64> {
    v.iter().map(|r| r.0).collect()
}

fn sum_words(all: &[Vec<u64>], len: usize) -> Result<Vec<Ring64>, MpcError> {
    let mut acc = vec![Ring64::ZERO; len];
    for part in all {
        if part.len() != len {
            return Err(MpcError::Transport("opened vector has wrong length"));
        }
        for (a, &w) in acc.iter_mut().zip(part) {
            *a += Ring64(w);
        }
    }
    Ok(acc)
}

pub fn add(x: &Shared, y: &Shared) -> Result<Shared, MpcError> {
    same_shape(x, y)?;
    Ok(Shared {
        data: x.data.iter().zip(&y.data).map(|(&a, &b)| a + b).collect(),
        shape: x.shape.clone(),
    })
}

pub fn sub(x: &Shared, y: &Shared) -> Result<Shared, MpcError> {
    same_shape(x, y)?;
    Ok(Shared {
        data: x.data.iter().zip(&y.data).map(|(&a, &b)| a - b).collect(),
        shape: x.shape.clone(),
    })
}

/// Adds a public vector; only the leader (party 0) changes its share.
pub fn add_public(ctx: &PartyCtx, x: &Shared, c: &[Ring64]) -> Result<Shared, MpcError> {
    if c.len() != x.len() {
        return Err(MpcError::Shape(format!("public addend of {} for {} elements", c.len(), x.len())));
    }
    let mut out = x.clone();
    if ctx.is_leader() {
        for (o, &v) in out.data.iter_mut().zip(c) {
            *o += v;
        }
    }
    Ok(out)
}

pub fn mul_public_scalar(x: &Shared, s: Ring64) -> Shared {
    Shared {
        data: x.data.iter().map(|&v| v * s).collect(),
        shape: x.shape.clone(),
    }
}

/// Reveals `x` to every party.
pub async fn open(ctx: &mut PartyCtx, x: &Shared) -> Result<Vec<Ring64>, MpcError> {
    let all = ctx.net.broadcast("open", to_words(&x.data)).await?;
    sum_words(&all, x.len())
}

/// `owner` secret-shares `values` among all parties; everyone else passes `None`.
pub async fn share_input(
    ctx: &mut PartyCtx,
    owner: usize,
    values: Option<&[Ring64]>,
    shape: Vec<usize>,
) -> Result<Shared, MpcError> {
    let len: usize = shape.iter().product();
    if ctx.id() == owner {
        let values = values.ok_or(MpcError::Transport("input owner supplied no values"))?;
        if values.len() != len {
            return Err(MpcError::Shape(format!("input of {} for shape {shape:?}", values.len())));
        }
        let mut mine = values.to_vec();
        let mut outgoing = vec![Vec::new(); ctx.parties()];
        for (peer, slot) in outgoing.iter_mut().enumerate() {
            if peer == owner {
                continue;
            }
            let share: Vec<u64> = (0..len).map(|_| ctx.next_u64()).collect();
            for (m, &s) in mine.iter_mut().zip(&share) {
                *m -= Ring64(s);
            }
            *slot = share;
        }
        ctx.net.scatter("input", owner, Some(outgoing)).await?;
        Shared::new(mine, shape)
    } else {
        let words = ctx
            .net
            .scatter("input", owner, None)
            .await?
            .ok_or(MpcError::Transport("missing input share"))?;
        if words.len() != len {
            return Err(MpcError::Transport("input share has wrong length"));
        }
        Shared::new(words.into_iter().map(Ring64).collect(), shape)
    }
}

/// Elementwise product using the next dealt Beaver triple.
pub async fn mul(ctx: &mut PartyCtx, x: &Shared, y: &Shared) -> Result<Shared, MpcError> {
    let t = ctx.take_beaver(x.len())?;
    mul_with(ctx, x, y, &t).await
}

/// Elementwise product with an explicit triple. One broadcast round.
pub async fn mul_with(ctx: &mut PartyCtx, x: &Shared, y: &Shared, t: &BeaverShare) -> Result<Shared, MpcError> {
    same_shape(x, y)?;
    let n = x.len();
    if t.a.len() != n {
        return Err(MpcError::Shape(format!("triple of {} for {n} elements", t.a.len())));
    }
    ctx.mark_consumed(t.id, &Request::Beaver { n })?;
    let mut masked = Vec::with_capacity(2 * n);
    masked.extend(x.data.iter().zip(&t.a).map(|(&v, &a)| (v - a).0));
    masked.extend(y.data.iter().zip(&t.b).map(|(&v, &b)| (v - b).0));
    let opened = sum_words(&ctx.net.broadcast("beaver", masked).await?, 2 * n)?;
    let (eps, sig) = opened.split_at(n);
    let leader = ctx.is_leader();
    let data = (0..n)
        .map(|i| {
            let mut z = t.c[i] + eps[i] * t.b[i] + t.a[i] * sig[i];
            if leader {
                z += eps[i] * sig[i];
            }
            z
        })
        .collect();
    Ok(Shared {
        data,
        shape: x.shape.clone(),
    })
}

/// Divides by `2^frac_bits` using the next truncation pair. One broadcast round.
///
/// The result is within one unit of `floor(x / 2^f)` whenever `|x| <= 2^48`.
pub async fn truncate(ctx: &mut PartyCtx, x: &Shared) -> Result<Shared, MpcError> {
    let n = x.len();
    let pair = ctx.take_trunc(n)?;
    ctx.mark_consumed(pair.id, &Request::Trunc { n })?;
    let cfg = ctx.cfg();
    let leader = ctx.is_leader();
    let masked: Vec<u64> = x
        .data
        .iter()
        .zip(&pair.r)
        .map(|(&v, &r)| {
            let mut m = v + r;
            if leader {
                m += trunc_offset();
            }
            m.0
        })
        .collect();
    let opened = sum_words(&ctx.net.broadcast("trunc", masked).await?, n)?;
    let shift = cfg.frac_bits();
    let data = opened
        .iter()
        .zip(&pair.r_shifted)
        .map(|(&c, &rs)| {
            let public = if leader {
                Ring64(c.0 >> shift) - trunc_correction(cfg)
            } else {
                Ring64::ZERO
            };
            public - rs
        })
        .collect();
    Ok(Shared {
        data,
        shape: x.shape.clone(),
    })
}

fn matrix_dims(x: &Shared) -> Result<(usize, usize), MpcError> {
    match x.shape[..] {
        [m, k] => Ok((m, k)),
        _ => Err(MpcError::Shape(format!("expected a matrix, got {:?}", x.shape))),
    }
}

/// `x (m x k) * w (k x n)` with public fixed-point weights, rescaled, plus an
/// optional public bias. Local apart from the truncation round.
pub async fn matmul_public(
    ctx: &mut PartyCtx,
    x: &Shared,
    w: &[Ring64],
    n: usize,
    bias: Option<&[Ring64]>,
) -> Result<Shared, MpcError> {
    let (m, k) = matrix_dims(x)?;
    if w.len() != k * n {
        return Err(MpcError::Shape(format!("weights of {} for {k}x{n}", w.len())));
    }
    let product = Shared {
        data: ring_matmul(&x.data, w, m, k, n),
        shape: vec![m, n],
    };
    let out = truncate(ctx, &product).await?;
    add_bias(ctx, out, bias, n)
}

fn add_bias(ctx: &PartyCtx, mut out: Shared, bias: Option<&[Ring64]>, n: usize) -> Result<Shared, MpcError> {
    if let Some(b) = bias {
        if b.len() != n {
            return Err(MpcError::Shape(format!("bias of {} for width {n}", b.len())));
        }
        if ctx.is_leader() {
            for row in out.data.chunks_mut(n) {
                for (v, &bv) in row.iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
    }
    Ok(out)
}

/// `x (m x k) * w (k x n)` with secret-shared weights via one matrix triple.
pub async fn matmul_shared(
    ctx: &mut PartyCtx,
    x: &Shared,
    w: &Shared,
    bias: Option<&[Ring64]>,
) -> Result<Shared, MpcError> {
    let (m, k) = matrix_dims(x)?;
    let (k2, n) = matrix_dims(w)?;
    if k != k2 {
        return Err(MpcError::Shape(format!("{:?} x {:?}", x.shape, w.shape)));
    }
    let t = ctx.take_matrix(m, k, n)?;
    ctx.mark_consumed(t.id, &Request::Matrix { m, k, n })?;
    let mut masked = Vec::with_capacity(m * k + k * n);
    masked.extend(x.data.iter().zip(&t.a).map(|(&v, &a)| (v - a).0));
    masked.extend(w.data.iter().zip(&t.b).map(|(&v, &b)| (v - b).0));
    let opened = sum_words(&ctx.net.broadcast("matrix-beaver", masked).await?, m * k + k * n)?;
    let (eps, sig) = opened.split_at(m * k);
    let mut z = t.c.clone();
    for v in [ring_matmul(eps, &t.b, m, k, n), ring_matmul(&t.a, sig, m, k, n)] {
        for (zi, vi) in z.iter_mut().zip(v) {
            *zi += vi;
        }
    }
    if ctx.is_leader() {
        for (zi, vi) in z.iter_mut().zip(ring_matmul(eps, sig, m, k, n)) {
            *zi += vi;
        }
    }
    let out = truncate(ctx, &Shared { data: z, shape: vec![m, n] }).await?;
    add_bias(ctx, out, bias, n)
}
