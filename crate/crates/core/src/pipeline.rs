//! Teacher-forced training data and the two training stages.
//!
//! Stage 1 trains view encoder, map encoder and action head end to end in
//! floating point. Stage 2 freezes both encoders, extracts feature bundles
//! once, rounds them to the fixed-point grid and fits a freshly initialised
//! head on them; that head is what runs under secret sharing.

use rand::seq::SliceRandom;

use crate::nn::spec::{self, ACTIONS, BUNDLE_LEN, CAMERAS, MAP_CELLS, MAP_FEATURE, VIEW_FEATURE};
use crate::nn::{masked_mse, Grads, NnError, Scalar, Sequential, Tensor};
use crate::ring::FixedConfig;
use crate::rng;
use crate::world::dataset::EpisodeRecord;
use crate::world::render::{render, CameraImage, AGENT_CAMERA, IMAGE_LEN};
use crate::world::{Action, World, WorldError, GRID};

/// Feature blocks of a bundle, in order: four corner cameras, agent view, map.
pub const BLOCKS: [usize; 6] = [VIEW_FEATURE, VIEW_FEATURE, VIEW_FEATURE, VIEW_FEATURE, VIEW_FEATURE, MAP_FEATURE];
const AGENT_OFFSET: usize = CAMERAS * VIEW_FEATURE;
const MAP_OFFSET: usize = AGENT_OFFSET + VIEW_FEATURE;

/// Which observations a policy may use. Absent blocks are zero-filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inputs {
    MapOnly,
    FirstPerson,
    Multiview,
}

impl Inputs {
    pub fn uses_cameras(self) -> bool {
        self == Inputs::Multiview
    }

    pub fn uses_agent_view(self) -> bool {
        self != Inputs::MapOnly
    }
}

/// Map grid codes scaled into `[0, 1]`.
pub fn map_input<T: Scalar>(grid: &[u8; GRID * GRID]) -> [T; MAP_CELLS] {
    let three = T::from(3.0).unwrap();
    std::array::from_fn(|i| T::from(grid[i]).unwrap() / three)
}

/// Everything needed to replay one training episode under teacher forcing.
#[derive(Clone, Debug)]
pub struct Episode {
    pub record: EpisodeRecord,
    pub cameras: Vec<CameraImage>,
    /// Agent view before each action.
    pub views: Vec<CameraImage>,
    /// Map grid before each action.
    pub maps: Vec<[u8; GRID * GRID]>,
}

impl Episode {
    pub fn from_record(record: &EpisodeRecord) -> Result<Self, WorldError> {
        let mut world = record.world();
        let cameras = (0..CAMERAS).map(|c| render(&world, c)).collect::<Result<Vec<_>, _>>()?;
        let mut views = Vec::with_capacity(record.actions.len());
        let mut maps = Vec::with_capacity(record.actions.len());
        for &a in &record.actions {
            views.push(render(&world, AGENT_CAMERA)?);
            maps.push(world.map_grid());
            world.step(a);
        }
        Ok(Episode {
            record: record.clone(),
            cameras,
            views,
            maps,
        })
    }

    pub fn len(&self) -> usize {
        self.record.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.actions.is_empty()
    }
}

pub fn episodes(records: &[EpisodeRecord]) -> Result<Vec<Episode>, WorldError> {
    records.iter().map(Episode::from_record).collect()
}

/// View encoder, map encoder and action head.
#[derive(Clone, Debug, PartialEq)]
pub struct Navigator<T> {
    pub view: Sequential<T>,
    pub map: Sequential<T>,
    pub head: Sequential<T>,
    pub inputs: Inputs,
}

fn image_tensor<T: Scalar>(images: &[&CameraImage]) -> Tensor<T> {
    let mut data = Vec::with_capacity(images.len() * IMAGE_LEN);
    for img in images {
        data.extend(img.to_unit::<T>());
    }
    Tensor::new(data, vec![images.len(), IMAGE_LEN]).unwrap()
}

fn map_tensor<T: Scalar>(maps: &[&[u8; GRID * GRID]]) -> Tensor<T> {
    let mut data = Vec::with_capacity(maps.len() * MAP_CELLS);
    for m in maps {
        data.extend(map_input::<T>(m));
    }
    Tensor::new(data, vec![maps.len(), MAP_CELLS]).unwrap()
}

/// He-uniform weight gain; with a gain of 1 the four-layer stacks start
/// on a long loss plateau under plain SGD.
pub const HE_GAIN: f64 = 2.449_489_742_783_178;

impl<T: Scalar> Navigator<T> {
    pub fn init(inputs: Inputs, seed: u64, g: f64) -> Result<Self, NnError> {
        let mut r = rng::stream(rng::derive(seed, "navigator-init", 0), 0);
        Ok(Navigator {
            view: Sequential::init_with_gain(spec::view_encoder(), &mut r, g)?,
            map: Sequential::init_with_gain(spec::map_encoder(), &mut r, g)?,
            head: Sequential::init_with_gain(spec::action_classifier(), &mut r, g)?,
            inputs,
        })
    }

    pub fn encode_images(&self, images: &[&CameraImage]) -> Result<Tensor<T>, NnError> {
        self.view.forward(&image_tensor(images))
    }

    pub fn encode_maps(&self, maps: &[&[u8; GRID * GRID]]) -> Result<Tensor<T>, NnError> {
        self.map.forward(&map_tensor(maps))
    }

    /// Feature bundles `[n, 288]` for `n` situations. `cameras` holds four
    /// rows per situation; blocks the policy may not use stay zero.
    pub fn bundles(
        &self,
        cameras: &[&CameraImage],
        views: &[&CameraImage],
        maps: &[&[u8; GRID * GRID]],
    ) -> Result<Tensor<T>, NnError> {
        let n = maps.len();
        let cams = if self.inputs.uses_cameras() {
            Some(self.encode_images(cameras)?)
        } else {
            None
        };
        let agent = if self.inputs.uses_agent_view() {
            Some(self.encode_images(views)?)
        } else {
            None
        };
        let map = self.encode_maps(maps)?;
        Ok(assemble(n, cams.as_ref().map(|c| c.data()), agent.as_ref().map(|a| a.data()), map.data(), |i| i))
    }

    pub fn cast<U: Scalar>(&self) -> Navigator<U> {
        Navigator {
            view: self.view.cast(),
            map: self.map.cast(),
            head: self.head.cast(),
            inputs: self.inputs,
        }
    }
}

/// Lays out `n` bundles. Row `r` takes the camera features of world
/// `world_of(r)` (four consecutive rows of `cams`).
fn assemble<T: Scalar>(
    n: usize,
    cams: Option<&[T]>,
    agent: Option<&[T]>,
    map: &[T],
    world_of: impl Fn(usize) -> usize,
) -> Tensor<T> {
    let mut x = vec![T::zero(); n * BUNDLE_LEN];
    for (r, row) in x.chunks_mut(BUNDLE_LEN).enumerate() {
        if let Some(c) = cams {
            let w = world_of(r);
            row[..AGENT_OFFSET].copy_from_slice(&c[w * AGENT_OFFSET..(w + 1) * AGENT_OFFSET]);
        }
        if let Some(a) = agent {
            row[AGENT_OFFSET..MAP_OFFSET].copy_from_slice(&a[r * VIEW_FEATURE..(r + 1) * VIEW_FEATURE]);
        }
        row[MAP_OFFSET..].copy_from_slice(&map[r * MAP_FEATURE..(r + 1) * MAP_FEATURE]);
    }
    Tensor::new(x, vec![n, BUNDLE_LEN]).unwrap()
}

fn one_hot<T: Scalar>(actions: impl Iterator<Item = Action>) -> Tensor<T> {
    let mut data = Vec::new();
    for a in actions {
        let mut row = [T::zero(); ACTIONS];
        row[a.index()] = T::one();
        data.extend_from_slice(&row);
    }
    let rows = data.len() / ACTIONS;
    Tensor::new(data, vec![rows, ACTIONS]).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Episodes per minibatch in stage 1, bundle rows in stage 2.
    pub batch: usize,
    pub seed: u64,
    /// Weight init bound is `init_gain / sqrt(fan_in)`.
    pub init_gain: f64,
    /// Rescale each step's gradient to at most this global norm.
    pub clip_norm: Option<f64>,
}

/// Scales every gradient set by one common factor so their joint norm is at most `max`.
fn clip<T: Scalar>(sets: &mut [&mut Grads<T>], max: Option<f64>) {
    let Some(max) = max else { return };
    let sq: f64 = sets.iter().map(|g| g.norm().to_f64().unwrap().powi(2)).sum();
    let norm = sq.sqrt();
    if norm > max {
        let k = T::from(max / norm).unwrap();
        for g in sets.iter_mut() {
            g.scale(k);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
}

fn check_loss<T: Scalar>(loss: T, step: usize) -> Result<f64, NnError> {
    let l = loss.to_f64().unwrap_or(f64::NAN);
    if l.is_finite() {
        Ok(l)
    } else {
        Err(NnError::Diverged { step, loss: l })
    }
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(rng::derive(seed, "epoch-order", epoch as u64), 0));
    order
}

/// Stage 1: all three networks trained end to end with masked MSE.
///
/// Episodes end at their stop action, so every materialised step is
/// unmasked; nothing after the stop token is ever fed to the loss.
pub fn train_end_to_end<T: Scalar>(
    train: &[Episode],
    inputs: Inputs,
    cfg: &SgdConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Navigator<T>, NnError> {
    let mut nav = Navigator::<T>::init(inputs, cfg.seed, cfg.init_gain)?;
    let lr = T::from(cfg.lr).unwrap();
    let mut gv = nav.view.zero_grads();
    let mut gm = nav.map.zero_grads();
    let mut gh = nav.head.zero_grads();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(train.len(), cfg.seed, epoch);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let eps: Vec<&Episode> = chunk.iter().map(|&i| &train[i]).collect();
            let mut world_of = Vec::new();
            for (w, e) in eps.iter().enumerate() {
                world_of.extend(std::iter::repeat_n(w, e.len()));
            }
            let n = world_of.len();
            let cam_imgs: Vec<&CameraImage> = eps.iter().flat_map(|e| e.cameras.iter()).collect();
            let view_imgs: Vec<&CameraImage> = eps.iter().flat_map(|e| e.views.iter()).collect();
            let maps: Vec<&[u8; GRID * GRID]> = eps.iter().flat_map(|e| e.maps.iter()).collect();

            let cam_pass = if inputs.uses_cameras() {
                Some(nav.view.forward_cached(&image_tensor(&cam_imgs))?)
            } else {
                None
            };
            let view_pass = if inputs.uses_agent_view() {
                Some(nav.view.forward_cached(&image_tensor(&view_imgs))?)
            } else {
                None
            };
            let (map_feat, map_acts) = nav.map.forward_cached(&map_tensor(&maps))?;
            let x = assemble(
                n,
                cam_pass.as_ref().map(|p| p.0.data()),
                view_pass.as_ref().map(|p| p.0.data()),
                map_feat.data(),
                |r| world_of[r],
            );
            let (pred, head_acts) = nav.head.forward_cached(&x)?;
            let target = one_hot::<T>(eps.iter().flat_map(|e| e.record.actions.iter().copied()));
            let (loss, dy) = masked_mse(&pred, &target, &vec![true; n])?;
            total += check_loss(loss, step)?;
            batches += 1;

            gv.zero();
            gm.zero();
            gh.zero();
            let dx = nav.head.backward(&head_acts, dy, &mut gh, true)?.unwrap();
            let mut dcam = vec![T::zero(); eps.len() * AGENT_OFFSET];
            let mut dagent = Vec::with_capacity(n * VIEW_FEATURE);
            let mut dmap = Vec::with_capacity(n * MAP_FEATURE);
            for (r, row) in dx.data().chunks(BUNDLE_LEN).enumerate() {
                let w = world_of[r];
                for (d, &g) in dcam[w * AGENT_OFFSET..(w + 1) * AGENT_OFFSET].iter_mut().zip(&row[..AGENT_OFFSET]) {
                    *d += g;
                }
                dagent.extend_from_slice(&row[AGENT_OFFSET..MAP_OFFSET]);
                dmap.extend_from_slice(&row[MAP_OFFSET..]);
            }
            if let Some((_, acts)) = &cam_pass {
                let d = Tensor::new(dcam, vec![eps.len() * CAMERAS, VIEW_FEATURE])?;
                nav.view.backward(acts, d, &mut gv, false)?;
            }
            if let Some((_, acts)) = &view_pass {
                nav.view.backward(acts, Tensor::new(dagent, vec![n, VIEW_FEATURE])?, &mut gv, false)?;
            }
            nav.map.backward(&map_acts, Tensor::new(dmap, vec![n, MAP_FEATURE])?, &mut gm, false)?;
            if !(gv.is_finite() && gm.is_finite() && gh.is_finite()) {
                return Err(NnError::Diverged {
                    step,
                    loss: f64::NAN,
                });
            }
            clip(&mut [&mut gv, &mut gm, &mut gh], cfg.clip_norm);
            nav.view.sgd_step(&gv, lr);
            nav.map.sgd_step(&gm, lr);
            nav.head.sgd_step(&gh, lr);
            step += 1;
        }
        on_epoch(&EpochLog {
            epoch,
            loss: total / batches.max(1) as f64,
        });
    }
    Ok(nav)
}

/// Teacher-forced feature bundles and action labels for every step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFeatures {
    pub x: Tensor<f64>,
    pub labels: Vec<usize>,
    /// Episode index of each row.
    pub episode: Vec<usize>,
}

/// Runs the frozen encoders over every step. With `grid`, features are
/// rounded to that fixed-point format, as the secure head will see them.
pub fn extract_features<T: Scalar>(
    nav: &Navigator<T>,
    data: &[Episode],
    grid: Option<FixedConfig>,
) -> Result<StepFeatures, NnError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut episode = Vec::new();
    for chunk_start in (0..data.len()).step_by(64) {
        let eps = &data[chunk_start..(chunk_start + 64).min(data.len())];
        let cams: Vec<&CameraImage> = eps.iter().flat_map(|e| e.cameras.iter()).collect();
        let views: Vec<&CameraImage> = eps.iter().flat_map(|e| e.views.iter()).collect();
        let maps: Vec<&[u8; GRID * GRID]> = eps.iter().flat_map(|e| e.maps.iter()).collect();
        let mut world_of = Vec::new();
        for (w, e) in eps.iter().enumerate() {
            world_of.extend(std::iter::repeat_n(w, e.len()));
            labels.extend(e.record.actions.iter().map(|a| a.index()));
            episode.extend(std::iter::repeat_n(chunk_start + w, e.len()));
        }
        let cam_feat = if nav.inputs.uses_cameras() {
            Some(nav.encode_images(&cams)?)
        } else {
            None
        };
        let agent = if nav.inputs.uses_agent_view() {
            Some(nav.encode_images(&views)?)
        } else {
            None
        };
        let map = nav.encode_maps(&maps)?;
        let x = assemble(
            maps.len(),
            cam_feat.as_ref().map(|c| c.data()),
            agent.as_ref().map(|a| a.data()),
            map.data(),
            |r| world_of[r],
        );
        rows.extend(x.data().iter().map(|v| v.to_f64().unwrap()));
    }
    if let Some(cfg) = grid {
        for v in rows.iter_mut() {
            *v = cfg.decode::<f64>(cfg.encode(*v)?);
        }
    }
    let n = labels.len();
    Ok(StepFeatures {
        x: Tensor::new(rows, vec![n, BUNDLE_LEN])?,
        labels,
        episode,
    })
}

/// Stage 2: a fresh head fitted on frozen, pre-extracted features.
pub fn train_head(
    features: &StepFeatures,
    cfg: &SgdConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Sequential<f64>, NnError> {
    let mut r = rng::stream(rng::derive(cfg.seed, "head-init", 0), 0);
    let mut head = Sequential::<f64>::init_with_gain(spec::action_classifier(), &mut r, cfg.init_gain)?;
    let mut grads = head.zero_grads();
    let n = features.labels.len();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(n, cfg.seed ^ 0x5eed, epoch);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut x = Vec::with_capacity(chunk.len() * BUNDLE_LEN);
            for &i in chunk {
                x.extend_from_slice(features.x.row(i));
            }
            let x = Tensor::new(x, vec![chunk.len(), BUNDLE_LEN])?;
            let target = one_hot::<f64>(chunk.iter().map(|&i| Action::from_index(features.labels[i]).unwrap()));
            let (pred, acts) = head.forward_cached(&x)?;
            let (loss, dy) = masked_mse(&pred, &target, &vec![true; chunk.len()])?;
            total += check_loss(loss, step)?;
            batches += 1;
            grads.zero();
            head.backward(&acts, dy, &mut grads, false)?;
            clip(&mut [&mut grads], cfg.clip_norm);
            head.sgd_step(&grads, cfg.lr);
            step += 1;
        }
        on_epoch(&EpochLog {
            epoch,
            loss: total / batches.max(1) as f64,
        });
    }
    Ok(head)
}

/// Fraction of teacher-forced steps whose predicted action matches the label.
pub fn step_accuracy(head: &Sequential<f64>, features: &StepFeatures) -> Result<f64, NnError> {
    if features.labels.is_empty() {
        return Ok(0.0);
    }
    let pred = head.forward(&features.x)?.argmax_rows();
    let hits = pred.iter().zip(&features.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / features.labels.len() as f64)
}

/// The four corner camera images of `world`.
pub fn cameras_of(world: &World) -> Result<Vec<CameraImage>, WorldError> {
    (0..CAMERAS).map(|c| render(world, c)).collect()
}

impl<T: Scalar> Navigator<T> {
    /// Writes the three networks as checkpoint entries `view`, `map`, `head`.
    pub fn save(&self, path: &std::path::Path) -> Result<(), NnError> {
        crate::nn::checkpoint::save(path, &[("view", &self.view), ("map", &self.map), ("head", &self.head)])
    }

    pub fn load(path: &std::path::Path, inputs: Inputs) -> Result<Self, NnError> {
        let mut models = crate::nn::checkpoint::load::<T>(path)?;
        let mut take = |name: &str| {
            models
                .iter()
                .position(|(n, _)| n == name)
                .map(|i| models.swap_remove(i).1)
                .ok_or_else(|| NnError::Checkpoint(format!("no model named {name}")))
        };
        Ok(Navigator {
            view: take("view")?,
            map: take("map")?,
            head: take("head")?,
            inputs,
        })
    }
}
