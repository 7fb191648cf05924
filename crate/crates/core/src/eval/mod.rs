//! Closed-loop rollouts, navigation metrics, the inference benchmark and
//! the share-indistinguishability attack.

pub mod attack;
pub mod bench;
mod policy;

use std::fmt::Write as _;

use thiserror::Error;

use crate::nn::NnError;
use crate::world::bfs::{classify_detour, path_len};
use crate::world::{Action, Outcome, World, WorldError, MAX_STEPS};

pub use policy::{navigation_blocks, Head, NetPolicy, OraclePolicy, RandomWalk, StopPolicy};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("policy returned {got} actions for {want} worlds")]
    ActionCount { got: usize, want: usize },
    #[error("world {0} has no obstacle-free path")]
    Unsolvable(u64),
}

/// A policy acting on several worlds at once (one action per world).
pub trait Policy {
    fn act(&mut self, worlds: &[&World]) -> Result<Vec<Action>, EvalError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    Success,
    CrashObstacle,
    CrashWall,
    /// Stopped off the goal or ran out of steps.
    NoCrashFailure,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Success => "success",
            Termination::CrashObstacle => "crash_obstacle",
            Termination::CrashWall => "crash_wall",
            Termination::NoCrashFailure => "no_crash_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RolloutResult {
    pub seed: u64,
    pub outcome: Termination,
    /// Moves taken.
    pub path_length: usize,
    /// Moves on the shortest obstacle-avoiding path.
    pub optimal_length: usize,
    pub detour: bool,
    pub actions: Vec<Action>,
}

/// Runs every world to termination in lockstep; the policy sees only the
/// worlds still running.
pub fn rollout_batch(policy: &mut dyn Policy, worlds: Vec<World>, max_steps: usize) -> Result<Vec<RolloutResult>, EvalError> {
    let mut results = Vec::with_capacity(worlds.len());
    for w in &worlds {
        let blocked = w.obstacle_cells();
        let optimal = w.oracle_actions().ok_or(EvalError::Unsolvable(w.seed))?;
        results.push(RolloutResult {
            seed: w.seed,
            outcome: Termination::NoCrashFailure,
            path_length: 0,
            optimal_length: path_len(&optimal),
            detour: classify_detour(w.layout(), w.agent, w.goal, &blocked).ok_or(EvalError::Unsolvable(w.seed))?,
            actions: Vec::new(),
        });
    }
    let mut worlds = worlds;
    let mut active: Vec<usize> = (0..worlds.len()).collect();
    for _ in 0..max_steps {
        if active.is_empty() {
            break;
        }
        let view: Vec<&World> = active.iter().map(|&i| &worlds[i]).collect();
        let actions = policy.act(&view)?;
        if actions.len() != active.len() {
            return Err(EvalError::ActionCount {
                got: actions.len(),
                want: active.len(),
            });
        }
        let mut still = Vec::with_capacity(active.len());
        for (&i, &a) in active.iter().zip(&actions) {
            let r = &mut results[i];
            r.actions.push(a);
            match worlds[i].step(a) {
                Outcome::Moved => {
                    r.path_length += 1;
                    still.push(i);
                }
                Outcome::ReachedGoal => r.outcome = Termination::Success,
                Outcome::Stopped => r.outcome = Termination::NoCrashFailure,
                Outcome::CrashWall => r.outcome = Termination::CrashWall,
                Outcome::CrashObstacle => r.outcome = Termination::CrashObstacle,
            }
        }
        active = still;
    }
    Ok(results)
}

/// Closed-loop episode of one world.
pub fn rollout(policy: &mut dyn Policy, world: World, max_steps: usize) -> Result<RolloutResult, EvalError> {
    Ok(rollout_batch(policy, vec![world], max_steps)?.remove(0))
}

/// Rolls out `worlds` in chunks of `chunk` with the default step limit.
pub fn evaluate(policy: &mut dyn Policy, worlds: &[World], chunk: usize) -> Result<Vec<RolloutResult>, EvalError> {
    let mut out = Vec::with_capacity(worlds.len());
    for part in worlds.chunks(chunk.max(1)) {
        out.extend(rollout_batch(policy, part.to_vec(), MAX_STEPS)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricsReport {
    pub policy: String,
    pub trials: usize,
    pub detour_trials: usize,
    pub successes: usize,
    pub detour_successes: usize,
    pub crash_obstacle: usize,
    pub crash_wall: usize,
    pub no_crash_failure: usize,
    /// Successes whose path was as short as the obstacle-aware optimum.
    pub optimal_successes: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl MetricsReport {
    pub fn from_results(policy: &str, results: &[RolloutResult]) -> Self {
        let mut m = MetricsReport {
            policy: policy.to_string(),
            trials: results.len(),
            ..Default::default()
        };
        for r in results {
            m.detour_trials += r.detour as usize;
            match r.outcome {
                Termination::Success => {
                    m.successes += 1;
                    m.detour_successes += r.detour as usize;
                    m.optimal_successes += (r.path_length == r.optimal_length) as usize;
                }
                Termination::CrashObstacle => m.crash_obstacle += 1,
                Termination::CrashWall => m.crash_wall += 1,
                Termination::NoCrashFailure => m.no_crash_failure += 1,
            }
        }
        m
    }

    pub fn success_rate(&self) -> f64 {
        ratio(self.successes, self.trials)
    }

    pub fn detour_rate(&self) -> f64 {
        ratio(self.detour_successes, self.detour_trials)
    }

    pub fn no_detour_rate(&self) -> f64 {
        ratio(self.successes - self.detour_successes, self.trials - self.detour_trials)
    }

    pub fn efficiency(&self) -> f64 {
        ratio(self.optimal_successes, self.successes)
    }

    /// One `key=value` line.
    pub fn to_line(&self) -> String {
        format!(
            "policy={} trials={} detour_trials={} success={:.4} detour={:.4} no_detour={:.4} successes={} crash_obstacle={} crash_wall={} no_crash_failure={} efficiency={:.4}",
            self.policy,
            self.trials,
            self.detour_trials,
            self.success_rate(),
            self.detour_rate(),
            self.no_detour_rate(),
            self.successes,
            self.crash_obstacle,
            self.crash_wall,
            self.no_crash_failure,
            self.efficiency()
        )
    }
}

/// Side-by-side success, failure and efficiency table.
pub fn table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:>8} {:>10} {:>8} {:>10} {:>10} {:>9} {:>10}",
        "policy", "detour", "no-detour", "overall", "crash-obs", "crash-wall", "no-crash", "efficiency"
    );
    for m in reports {
        let _ = writeln!(
            s,
            "{:<18} {:>7.1}% {:>9.1}% {:>7.1}% {:>10} {:>10} {:>9} {:>9.1}%",
            m.policy,
            100.0 * m.detour_rate(),
            100.0 * m.no_detour_rate(),
            100.0 * m.success_rate(),
            m.crash_obstacle,
            m.crash_wall,
            m.no_crash_failure,
            100.0 * m.efficiency()
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bucket {
    pub optimal_length: usize,
    pub successes: usize,
    pub failures: usize,
}

/// Success and failure counts per optimal path length, ascending.
pub fn path_length_histogram(results: &[RolloutResult]) -> Vec<Bucket> {
    let max = results.iter().map(|r| r.optimal_length).max().unwrap_or(0);
    let mut buckets: Vec<Bucket> = (0..=max)
        .map(|l| Bucket {
            optimal_length: l,
            successes: 0,
            failures: 0,
        })
        .collect();
    for r in results {
        let b = &mut buckets[r.optimal_length];
        if r.outcome == Termination::Success {
            b.successes += 1;
        } else {
            b.failures += 1;
        }
    }
    buckets.retain(|b| b.successes + b.failures > 0);
    buckets
}

pub fn histogram_csv(policy: &str, buckets: &[Bucket]) -> String {
    let mut s = String::from("policy,optimal_length,successes,failures\n");
    for b in buckets {
        let _ = writeln!(s, "{policy},{},{},{}", b.optimal_length, b.successes, b.failures);
    }
    s
}
