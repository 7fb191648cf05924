use std::collections::HashSet;

use rand::RngCore;

use super::transport::{CommStats, Endpoint, TraceEntry};
use super::MpcError;
use crate::dealer::{
    BeaverShare, BinTripleShare, Correlated, DaBitShare, MatrixTripleShare, PartyPool, RandId, RandKind, Request,
    TruncPairShare,
};
use crate::ring::FixedConfig;
use crate::rng::SessionRng;

/// One party's view of a protocol run: its own dealt randomness, its own
/// network endpoint, its own RNG. Nothing here refers to another party's state.
pub struct PartyCtx {
    id: usize,
    parties: usize,
    cfg: FixedConfig,
    pub(crate) net: Endpoint,
    pool: PartyPool,
    consumed: HashSet<RandId>,
    consumed_counts: crate::dealer::BudgetCounts,
    pub(crate) rng: SessionRng,
    phase: String,
}

impl PartyCtx {
    pub fn new(net: Endpoint, pool: PartyPool, cfg: FixedConfig, rng: SessionRng) -> Self {
        PartyCtx {
            id: net.id(),
            parties: net.parties(),
            cfg,
            net,
            pool,
            consumed: HashSet::new(),
            consumed_counts: Default::default(),
            rng,
            phase: String::from("setup"),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn cfg(&self) -> FixedConfig {
        self.cfg
    }

    pub fn is_leader(&self) -> bool {
        self.id == 0
    }

    pub fn stats(&self) -> CommStats {
        self.net.stats()
    }

    pub fn enable_trace(&mut self) {
        self.net.enable_trace();
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        self.net.take_trace()
    }

    pub fn enable_view_log(&mut self) {
        self.net.enable_view_log();
    }

    pub fn take_view(&mut self) -> Vec<(usize, Vec<u64>)> {
        self.net.take_view()
    }

    pub fn set_phase(&mut self, phase: impl Into<String>) {
        self.phase = phase.into();
    }

    pub fn phase(&self) -> &str {
        &self.phase
    }

    pub fn remaining(&self) -> crate::dealer::BudgetCounts {
        self.pool.remaining()
    }

    pub fn consumed(&self) -> crate::dealer::BudgetCounts {
        self.consumed_counts
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Records `id` as used; a second use of the same object is an error.
    pub(crate) fn mark_consumed(&mut self, id: RandId, req: &Request) -> Result<(), MpcError> {
        if !self.consumed.insert(id) {
            return Err(MpcError::Reused {
                kind: id.kind,
                index: id.index,
            });
        }
        self.consumed_counts.add_request(req);
        Ok(())
    }

    fn pop(&mut self, kind: RandKind, want: Request) -> Result<Correlated, MpcError> {
        let item = self.pool.pop(kind).ok_or_else(|| MpcError::Exhausted {
            kind,
            phase: self.phase.clone(),
        })?;
        if item.request() != want {
            return Err(MpcError::Protocol {
                phase: self.phase.clone(),
                detail: format!("dealt {:?} but protocol needs {:?}", item.request(), want),
            });
        }
        Ok(item)
    }

    pub fn take_beaver(&mut self, n: usize) -> Result<BeaverShare, MpcError> {
        match self.pop(RandKind::Beaver, Request::Beaver { n })? {
            Correlated::Beaver(t) => Ok(t),
            _ => unreachable!(),
        }
    }

    pub fn take_matrix(&mut self, m: usize, k: usize, n: usize) -> Result<MatrixTripleShare, MpcError> {
        match self.pop(RandKind::MatrixTriple, Request::Matrix { m, k, n })? {
            Correlated::Matrix(t) => Ok(t),
            _ => unreachable!(),
        }
    }

    pub fn take_bin(&mut self, lanes: usize) -> Result<BinTripleShare, MpcError> {
        match self.pop(RandKind::BinTriple, Request::BinAnd { lanes })? {
            Correlated::Bin(t) => Ok(t),
            _ => unreachable!(),
        }
    }

    pub fn take_dabit(&mut self, n: usize) -> Result<DaBitShare, MpcError> {
        match self.pop(RandKind::DaBit, Request::DaBit { n })? {
            Correlated::DaBit(t) => Ok(t),
            _ => unreachable!(),
        }
    }

    pub fn take_trunc(&mut self, n: usize) -> Result<TruncPairShare, MpcError> {
        match self.pop(RandKind::TruncPair, Request::Trunc { n })? {
            Correlated::Trunc(t) => Ok(t),
            _ => unreachable!(),
        }
    }
}
