use std::time::Duration;

use rand::seq::SliceRandom;

use super::{EvalError, Policy};
use crate::dealer::WeightMode;
use crate::mpc::{EngineConfig, Schedule};
use crate::nn::cipher::{forward_cipher, InputBlock};
use crate::nn::fixed::FixedModel;
use crate::nn::spec::CAMERAS;
use crate::nn::{Sequential, Tensor};
use crate::pipeline::{Navigator, BLOCKS};
use crate::rng;
use crate::world::render::{render, CameraImage, AGENT_CAMERA};
use crate::world::{Action, Dir, World, GRID};

/// Shortest obstacle-avoiding path, recomputed from the current cell.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn act(&mut self, worlds: &[&World]) -> Result<Vec<Action>, EvalError> {
        worlds
            .iter()
            .map(|w| {
                w.oracle_actions()
                    .map(|a| a[0])
                    .ok_or(EvalError::Unsolvable(w.seed))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StopPolicy;

impl Policy for StopPolicy {
    fn act(&mut self, worlds: &[&World]) -> Result<Vec<Action>, EvalError> {
        Ok(vec![Action::Stop; worlds.len()])
    }
}

/// Uniform over moves onto road cells, skipping an obstacle directly in
/// view. Stops on the goal or when nothing is legal.
#[derive(Clone, Copy, Debug)]
pub struct RandomWalk {
    pub seed: u64,
}

impl RandomWalk {
    pub fn legal_moves(world: &World) -> Vec<Dir> {
        Dir::ALL
            .into_iter()
            .filter(|&d| match world.agent.offset(d) {
                Some(next) if world.layout().is_road(next) => !(d == world.facing && world.obstacle_at(next).is_some()),
                _ => false,
            })
            .collect()
    }

    pub fn choose(&self, world: &World) -> Action {
        if world.agent == world.goal {
            return Action::Stop;
        }
        let moves = Self::legal_moves(world);
        let mut r = rng::stream(rng::derive(self.seed, "random-walk", world.seed), world.steps as u64);
        moves.choose(&mut r).map_or(Action::Stop, |&d| Action::Move(d))
    }
}

impl Policy for RandomWalk {
    fn act(&mut self, worlds: &[&World]) -> Result<Vec<Action>, EvalError> {
        Ok(worlds.iter().map(|w| self.choose(w)).collect())
    }
}

/// Input ownership under secret sharing: the agent (party 0) holds its own
/// view and the map; cameras are spread over the remaining parties.
pub fn navigation_blocks(parties: usize) -> Vec<InputBlock> {
    BLOCKS
        .iter()
        .enumerate()
        .map(|(i, &len)| InputBlock {
            len,
            owner: if i < CAMERAS && parties > 1 { 1 + i % (parties - 1) } else { 0 },
        })
        .collect()
}

/// How the action head is evaluated on locally encoded features.
#[derive(Clone, Debug)]
pub enum Head {
    /// The navigator's own head in its own precision.
    Own,
    Real(Sequential<f64>),
    Fixed(FixedModel),
    Cipher {
        model: FixedModel,
        parties: usize,
        seed: u64,
    },
}

/// Encoders run locally per observation owner; the head runs per `Head`.
#[derive(Clone, Debug)]
pub struct NetPolicy {
    pub nav: Navigator<f32>,
    pub head: Head,
    calls: u64,
    /// Summed online time of secure forwards, and how many ran.
    pub secure_time: Duration,
    pub secure_calls: usize,
}

impl NetPolicy {
    pub fn new(nav: Navigator<f32>, head: Head) -> Self {
        NetPolicy {
            nav,
            head,
            calls: 0,
            secure_time: Duration::ZERO,
            secure_calls: 0,
        }
    }

    pub fn features(&self, worlds: &[&World]) -> Result<Tensor<f32>, EvalError> {
        let mut cams: Vec<CameraImage> = Vec::new();
        let mut views = Vec::new();
        let mut maps = Vec::new();
        for w in worlds {
            if self.nav.inputs.uses_cameras() {
                for c in 0..CAMERAS {
                    cams.push(render(w, c)?);
                }
            }
            if self.nav.inputs.uses_agent_view() {
                views.push(render(w, AGENT_CAMERA)?);
            }
            maps.push(w.map_grid());
        }
        let cams: Vec<&CameraImage> = cams.iter().collect();
        let views: Vec<&CameraImage> = views.iter().collect();
        let maps: Vec<&[u8; GRID * GRID]> = maps.iter().collect();
        Ok(self.nav.bundles(&cams, &views, &maps)?)
    }
}

impl Policy for NetPolicy {
    fn act(&mut self, worlds: &[&World]) -> Result<Vec<Action>, EvalError> {
        let x = self.features(worlds)?;
        let call = self.calls;
        self.calls += 1;
        let picks = match &self.head {
            Head::Own => self.nav.head.forward(&x)?.argmax_rows(),
            Head::Real(h) => h.forward(&x.cast())?.argmax_rows(),
            Head::Fixed(m) => m.forward_real(&x.cast())?.argmax_rows(),
            Head::Cipher { model, parties, seed } => {
                let engine = EngineConfig::new(*parties, model.cfg(), rng::derive(*seed, "rollout-step", call))
                    .map_err(crate::nn::NnError::from)?;
                let out = forward_cipher(
                    model,
                    &x.cast(),
                    &navigation_blocks(*parties),
                    engine,
                    WeightMode::Public,
                    Schedule::RoundRobin,
                )?;
                self.secure_time += out.online;
                self.secure_calls += 1;
                out.actions
            }
        };
        Ok(picks.into_iter().map(|i| Action::from_index(i).unwrap()).collect())
    }
}
