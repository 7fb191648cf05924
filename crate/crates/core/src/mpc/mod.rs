//! Secure computation among `P` semi-honest parties over Z/2^64.
//!
//! Every party runs the same async program against its own [`PartyCtx`]; the
//! only channel between parties is the round-based [`transport`]. Protocols:
//!
//! * linear ops on additive shares are local;
//! * multiplication uses dealer-issued Beaver triples (one opening round);
//! * fixed-point rescaling uses truncation pairs (one opening round);
//! * comparisons convert to XOR sharing with a ripple-carry adder over bit
//!   planes (63 AND rounds per addition) and come back via daBits.
//!
//! Correlated randomness must be dealt before inputs are shared: a
//! [`Session`] only becomes runnable once [`Session::deal`] has produced the
//! per-party pools.

pub mod arith;
pub mod binary;
pub mod compare;
pub mod party;
pub mod runner;
pub mod transport;

use std::future::Future;

use thiserror::Error;

use crate::dealer::{self, Budget, BudgetCounts, PartyPool, RandKind};
use crate::ring::{FixedConfig, Ring64};
use crate::rng;
use crate::sharing::{self, SessionId, ShareError};

pub use arith::{add, add_public, matmul_public, matmul_shared, mul, mul_public_scalar, mul_with, open, share_input, sub, truncate};
pub use binary::{a2b, and, and_with, xor, BinShared};
pub use compare::{argmax_reveal, ltz, relu};
pub use party::PartyCtx;
pub use runner::Schedule;
pub use transport::{CommStats, TraceEntry};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("{kind} pool exhausted during {phase}")]
    Exhausted { kind: RandKind, phase: String },
    #[error("{kind} #{index} consumed twice")]
    Reused { kind: RandKind, index: u64 },
    #[error("protocol error in {phase}: {detail}")]
    Protocol { phase: String, detail: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("transport failure: {0}")]
    Transport(&'static str),
    #[error("party {party} expected round {expected}, received round {got}")]
    Desync { party: usize, expected: u64, got: u64 },
    #[error("no party can make progress")]
    Deadlock,
    #[error("randomness budget mismatch: estimated {estimated:?}, consumed {consumed:?}")]
    Budget {
        estimated: BudgetCounts,
        consumed: BudgetCounts,
    },
    #[error(transparent)]
    Share(#[from] ShareError),
    #[error(transparent)]
    Dealer(#[from] dealer::DealerError),
}

/// This party's additive share of a ring tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shared {
    pub data: Vec<Ring64>,
    pub shape: Vec<usize>,
}

impl Shared {
    pub fn new(data: Vec<Ring64>, shape: Vec<usize>) -> Result<Self, MpcError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(MpcError::Shape(format!("{shape:?} vs {} elements", data.len())));
        }
        Ok(Shared { data, shape })
    }

    pub fn vector(data: Vec<Ring64>) -> Self {
        let n = data.len();
        Shared { data, shape: vec![n] }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        Shared {
            data: vec![Ring64::ZERO; shape.iter().product()],
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Engine parameters fixed for one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub parties: usize,
    pub cfg: FixedConfig,
    pub seed: u64,
    pub session: SessionId,
}

impl EngineConfig {
    pub fn new(parties: usize, cfg: FixedConfig, seed: u64) -> Result<Self, MpcError> {
        sharing::check_parties(parties)?;
        Ok(EngineConfig {
            parties,
            cfg,
            seed,
            session: SessionId(rng::derive(seed, "session", 0)),
        })
    }
}

/// A session before the dealer has run. Only [`DealtSession`] can execute.
#[derive(Debug)]
pub struct Session {
    engine: EngineConfig,
}

/// Per-party outputs of one run together with communication and
/// randomness accounting.
#[derive(Debug)]
pub struct RunOutput<O> {
    pub outputs: Vec<O>,
    pub stats: Vec<CommStats>,
    pub consumed: Vec<BudgetCounts>,
    pub leftover: Vec<BudgetCounts>,
    pub traces: Vec<Vec<TraceEntry>>,
    /// Received messages per party, when the view log is enabled.
    pub views: Vec<Vec<(usize, Vec<u64>)>>,
}

pub struct DealtSession {
    engine: EngineConfig,
    pools: Vec<PartyPool>,
    trace: bool,
    view_log: bool,
}

impl Session {
    pub fn new(engine: EngineConfig) -> Self {
        Session { engine }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.engine
    }

    /// Runs the trusted dealer for `budget`.
    pub fn deal(self, budget: &Budget) -> Result<DealtSession, MpcError> {
        let mut dealer_rng = rng::stream(rng::derive(self.engine.seed, "dealer", 0), 0);
        let pools = dealer::deal(budget, self.engine.parties, self.engine.session, self.engine.cfg, &mut dealer_rng)?;
        Ok(DealtSession {
            engine: self.engine,
            pools,
            trace: false,
            view_log: false,
        })
    }

    /// Uses pools dealt earlier (for example loaded from disk).
    pub fn with_pools(self, pools: Vec<PartyPool>) -> Result<DealtSession, MpcError> {
        if pools.len() != self.engine.parties
            || pools
                .iter()
                .enumerate()
                .any(|(i, p)| p.party_id != i || p.parties != self.engine.parties || p.cfg != self.engine.cfg)
        {
            return Err(MpcError::Protocol {
                phase: "setup".into(),
                detail: "pools do not match the session".into(),
            });
        }
        Ok(DealtSession {
            engine: self.engine,
            pools,
            trace: false,
            view_log: false,
        })
    }
}

impl DealtSession {
    pub fn config(&self) -> &EngineConfig {
        &self.engine
    }

    pub fn pools(&self) -> &[PartyPool] {
        &self.pools
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn with_view_log(mut self) -> Self {
        self.view_log = true;
        self
    }

    /// Executes `program` once per party. `inputs[p]` is handed to party `p` only.
    pub fn run<I, O, F, Fut>(self, inputs: Vec<I>, schedule: Schedule, program: F) -> Result<RunOutput<O>, MpcError>
    where
        I: Send,
        O: Send,
        F: Fn(PartyCtx, I) -> Fut + Sync,
        Fut: Future<Output = (PartyCtx, Result<O, MpcError>)> + Send,
    {
        let engine = self.engine;
        let ctxs: Vec<PartyCtx> = transport::network(engine.parties)
            .into_iter()
            .zip(self.pools)
            .enumerate()
            .map(|(p, (net, pool))| {
                let party_rng = rng::stream(rng::derive(engine.seed, "party", p as u64), 0);
                let mut ctx = PartyCtx::new(net, pool, engine.cfg, party_rng);
                if self.trace {
                    ctx.enable_trace();
                }
                if self.view_log {
                    ctx.enable_view_log();
                }
                ctx
            })
            .collect();
        let results = runner::run_parties(ctxs, inputs, schedule, program)?;
        let mut out = RunOutput {
            outputs: Vec::new(),
            stats: Vec::new(),
            consumed: Vec::new(),
            leftover: Vec::new(),
            traces: Vec::new(),
            views: Vec::new(),
        };
        for (mut ctx, o) in results {
            out.stats.push(ctx.stats());
            out.consumed.push(ctx.consumed());
            out.leftover.push(ctx.remaining());
            out.traces.push(ctx.take_trace());
            out.views.push(ctx.take_view());
            out.outputs.push(o);
        }
        Ok(out)
    }
}

/// Sums per-party shares. Only for tests and tools holding every share.
pub fn reconstruct(parts: &[Shared]) -> Vec<Ring64> {
    let mut acc = vec![Ring64::ZERO; parts.first().map_or(0, |p| p.len())];
    for p in parts {
        for (a, &v) in acc.iter_mut().zip(&p.data) {
            *a += v;
        }
    }
    acc
}
