//! Drivers that execute one async program per party.
//!
//! [`Schedule::RoundRobin`] polls every party in id order on the calling
//! thread; [`Schedule::Threaded`] gives each party its own OS thread. Party
//! programs only talk through their endpoints, so both produce the same
//! transcripts and outputs.

use std::future::Future;
use std::pin::Pin;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::task::{Context, Poll, Wake, Waker};

use super::party::PartyCtx;
use super::MpcError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    #[default]
    RoundRobin,
    Threaded,
}

struct Flag(AtomicBool);

impl Wake for Flag {
    fn wake(self: Arc<Self>) {
        self.0.store(true, Ordering::SeqCst);
    }

    fn wake_by_ref(self: &Arc<Self>) {
        self.0.store(true, Ordering::SeqCst);
    }
}

type PartyFuture<'a, O> = Pin<Box<dyn Future<Output = (PartyCtx, Result<O, MpcError>)> + Send + 'a>>;

/// Runs `program` once per party and returns the contexts with each party's result.
pub fn run_parties<I, O, F, Fut>(
    ctxs: Vec<PartyCtx>,
    inputs: Vec<I>,
    schedule: Schedule,
    program: F,
) -> Result<Vec<(PartyCtx, O)>, MpcError>
where
    I: Send,
    O: Send,
    F: Fn(PartyCtx, I) -> Fut + Sync,
    Fut: Future<Output = (PartyCtx, Result<O, MpcError>)> + Send,
{
    if ctxs.len() != inputs.len() {
        return Err(MpcError::Transport("one input per party required"));
    }
    let results = match schedule {
        Schedule::RoundRobin => {
            let futs: Vec<PartyFuture<'_, O>> = ctxs
                .into_iter()
                .zip(inputs)
                .map(|(c, i)| Box::pin(program(c, i)) as PartyFuture<'_, O>)
                .collect();
            round_robin(futs)?
        }
        Schedule::Threaded => std::thread::scope(|scope| {
            let handles: Vec<_> = ctxs
                .into_iter()
                .zip(inputs)
                .map(|(c, i)| {
                    let program = &program;
                    scope.spawn(move || {
                        let (mut ctx, res) = futures::executor::block_on(program(c, i));
                        if res.is_err() {
                            // Unblock peers still waiting on this party.
                            ctx.net.close();
                        }
                        (ctx, res)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("party thread panicked"))
                .collect::<Vec<_>>()
        }),
    };
    let mut out = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (ctx, res) in results {
        match res {
            Ok(o) => out.push((ctx, o)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn round_robin<O>(mut futs: Vec<PartyFuture<'_, O>>) -> Result<Vec<(PartyCtx, Result<O, MpcError>)>, MpcError> {
    let flag = Arc::new(Flag(AtomicBool::new(false)));
    let waker = Waker::from(flag.clone());
    let mut cx = Context::from_waker(&waker);
    let mut done: Vec<Option<(PartyCtx, Result<O, MpcError>)>> = futs.iter().map(|_| None).collect();
    let mut remaining = futs.len();
    while remaining > 0 {
        flag.0.store(false, Ordering::SeqCst);
        let mut progressed = false;
        for (i, fut) in futs.iter_mut().enumerate() {
            if done[i].is_some() {
                continue;
            }
            if let Poll::Ready(r) = fut.as_mut().poll(&mut cx) {
                let failed = r.1.is_err();
                done[i] = Some(r);
                remaining -= 1;
                progressed = true;
                if failed {
                    // Peers of a failed party would wait forever; stop here.
                    return Ok(finish_with_failure(done));
                }
            }
        }
        if !progressed && !flag.0.load(Ordering::SeqCst) {
            return Err(MpcError::Deadlock);
        }
    }
    Ok(done.into_iter().map(|d| d.unwrap()).collect())
}

fn finish_with_failure<O>(done: Vec<Option<(PartyCtx, Result<O, MpcError>)>>) -> Vec<(PartyCtx, Result<O, MpcError>)> {
    done.into_iter().flatten().collect()
}
