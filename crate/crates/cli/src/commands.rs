//! The five pipeline steps. Each reads its inputs from and writes its
//! artifacts under `out_dir`, so any step can be rerun on its own.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use privnav::eval::attack::{attack_report, probe_data, AttackReport};
use privnav::eval::bench::{bench_inference, BenchReport};
use privnav::eval::{evaluate, histogram_csv, path_length_histogram, table, Head, MetricsReport, NetPolicy, Policy, RandomWalk, RolloutResult};
use privnav::nn::fixed::FixedModel;
use privnav::nn::Tensor;
use privnav::pipeline::{episodes, extract_features, step_accuracy, train_end_to_end, train_head, Inputs, Navigator, SgdConfig, StepFeatures};
use privnav::rng;
use privnav::world::dataset::{gen_dataset, read_records, world_seed, write_records, EpisodeRecord, Split};
use privnav::world::{actions_to_string, StartFacing, World};

use crate::config::{Baseline, RunConfig};
use crate::{version, Fail};

/// Where each artifact lives under `out_dir`.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Layout {
            root: cfg.out_dir.clone(),
        }
    }

    pub fn records(&self, split: Split, facing: StartFacing) -> PathBuf {
        let name = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let suffix = if facing == StartFacing::Fixed { "_det" } else { "" };
        self.root.join("data").join(format!("{name}{suffix}.txt"))
    }

    pub fn model(&self, b: Baseline) -> PathBuf {
        let name = if b.uses_secure_head() { "secure" } else { b.name() };
        self.root.join("models").join(format!("{name}.ck"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Fail::Missing {
            path: path.to_path_buf(),
            hint: hint.to_string(),
        }
        .into())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Report preamble: version, command and the resolved configuration.
pub fn header(cfg: &RunConfig, command: &str) -> String {
    let mut s = format!("# privnav {}\n# command: {command}\n", version());
    for line in cfg.to_toml().lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn load_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    require(path, "run `privnav gen-data` with the same config first")?;
    read_records(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))
}

pub fn gen_data(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let mut written = Vec::new();
    for facing in [StartFacing::Random, StartFacing::Fixed] {
        for (split, n) in [(Split::Train, cfg.n_train), (Split::Test, cfg.n_test)] {
            let recs = gen_dataset(n, cfg.seed, split, facing);
            let path = layout.records(split, facing);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_records(&path, &recs).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn stage_one(cfg: &RunConfig) -> SgdConfig {
    SgdConfig {
        lr: cfg.lr,
        epochs: cfg.epochs,
        batch: cfg.batch,
        seed: rng::derive(cfg.seed, "stage-one", 0),
        init_gain: cfg.init_gain,
        clip_norm: cfg.clip(),
    }
}

fn stage_two(cfg: &RunConfig) -> SgdConfig {
    SgdConfig {
        lr: cfg.head_lr,
        epochs: cfg.head_epochs,
        batch: cfg.cipher_batch,
        seed: rng::derive(cfg.seed, "stage-two", 0),
        init_gain: cfg.init_gain,
        clip_norm: cfg.clip(),
    }
}

/// Trains the network behind `b`; returns the path of the checkpoint.
pub fn train(cfg: &RunConfig, b: Baseline) -> Result<Option<PathBuf>> {
    let layout = Layout::new(cfg);
    let mut log = header(cfg, &format!("train {b}"));
    let out = layout.model(b);
    if let Some(inputs) = b.stage_one_inputs() {
        let recs = load_records(&layout.records(Split::Train, b.facing()))?;
        let data = episodes(&recs)?;
        let clock = Instant::now();
        let nav = train_end_to_end::<f32>(&data, inputs, &stage_one(cfg), |e| {
            eprintln!("[{b}] epoch {:>4} loss {:.6} ({:.0?})", e.epoch, e.loss, clock.elapsed());
            let _ = writeln!(log, "epoch={} loss={:.6}", e.epoch, e.loss);
        })?;
        std::fs::create_dir_all(out.parent().unwrap())?;
        nav.save(&out)?;
        write(&layout.report(&format!("train_{b}.txt")), &log)?;
        return Ok(Some(out));
    }
    if !b.uses_secure_head() {
        eprintln!("[{b}] nothing to train");
        return Ok(None);
    }
    let source = layout.model(Baseline::PlaintextCam);
    require(&source, "run `privnav train --baseline plaintext_cam` first")?;
    let nav = Navigator::<f32>::load(&source, Inputs::Multiview)?;
    let grid = Some(cfg.fixed());
    let train_eps = episodes(&load_records(&layout.records(Split::Train, StartFacing::Random))?)?;
    let test_eps = episodes(&load_records(&layout.records(Split::Test, StartFacing::Random))?)?;
    let feats = extract_features(&nav, &train_eps, grid)?;
    let held_out = extract_features(&nav, &test_eps, grid)?;
    let clock = Instant::now();
    let head = train_head(&feats, &stage_two(cfg), |e| {
        if e.epoch % 10 == 9 || e.epoch + 1 == cfg.head_epochs {
            eprintln!("[secure head] epoch {:>4} loss {:.6} ({:.0?})", e.epoch, e.loss, clock.elapsed());
        }
        let _ = writeln!(log, "epoch={} loss={:.6}", e.epoch, e.loss);
    })?;
    let before = step_accuracy(&nav.head.cast(), &held_out)?;
    let after = step_accuracy(&head, &held_out)?;
    let fixed_acc = fixed_step_accuracy(&FixedModel::quantize(&head, cfg.fixed())?, &held_out)?;
    let _ = writeln!(
        log,
        "held_out_steps={} end_to_end_accuracy={before:.4} secure_head_accuracy={after:.4} secure_head_fixed_accuracy={fixed_acc:.4}",
        held_out.labels.len()
    );
    let secure = Navigator {
        view: nav.view.cast::<f64>(),
        map: nav.map.cast::<f64>(),
        head,
        inputs: Inputs::Multiview,
    };
    std::fs::create_dir_all(out.parent().unwrap())?;
    secure.save(&out)?;
    write(&layout.report("train_secure.txt"), &log)?;
    Ok(Some(out))
}

fn fixed_step_accuracy(model: &FixedModel, f: &StepFeatures) -> Result<f64> {
    let pred = model.forward_real(&f.x)?.argmax_rows();
    Ok(pred.iter().zip(&f.labels).filter(|(p, l)| p == l).count() as f64 / f.labels.len().max(1) as f64)
}

/// Trains every row of the comparison in dependency order.
pub fn train_all(cfg: &RunConfig) -> Result<()> {
    for b in [
        Baseline::MapOnly,
        Baseline::FirstPerson,
        Baseline::FirstPersonDet,
        Baseline::PlaintextCam,
        Baseline::SecurePlain,
    ] {
        train(cfg, b)?;
    }
    Ok(())
}

/// Secure-head navigator (f32 encoders) and its fixed-point head.
pub fn secure_models(cfg: &RunConfig) -> Result<(Navigator<f32>, privnav::nn::Sequential<f64>, FixedModel)> {
    let path = Layout::new(cfg).model(Baseline::SecurePlain);
    require(&path, "run `privnav train --baseline mpc2` first")?;
    let nav = Navigator::<f64>::load(&path, Inputs::Multiview)?;
    let fixed = FixedModel::quantize(&nav.head, cfg.fixed())?;
    Ok((nav.cast::<f32>(), nav.head, fixed))
}

fn policy_for(cfg: &RunConfig, b: Baseline) -> Result<Box<dyn Policy>> {
    let layout = Layout::new(cfg);
    if b == Baseline::Random {
        return Ok(Box::new(RandomWalk {
            seed: rng::derive(cfg.seed, "random-walk", 0),
        }));
    }
    if let Some(inputs) = b.stage_one_inputs() {
        let path = layout.model(b);
        require(&path, &format!("run `privnav train --baseline {b}` first"))?;
        return Ok(Box::new(NetPolicy::new(Navigator::<f32>::load(&path, inputs)?, Head::Own)));
    }
    let (nav, head, fixed) = secure_models(cfg)?;
    let h = match b.secure_parties() {
        Some(parties) => Head::Cipher {
            model: fixed,
            parties,
            seed: rng::derive(cfg.seed, "secure-rollout", parties as u64),
        },
        None => Head::Real(head),
    };
    Ok(Box::new(NetPolicy::new(nav, h)))
}

/// Test worlds regenerated from the test records.
pub fn test_worlds(cfg: &RunConfig, facing: StartFacing) -> Result<Vec<World>> {
    Ok(load_records(&Layout::new(cfg).records(Split::Test, facing))?
        .iter()
        .map(|r| r.world())
        .collect())
}

pub struct EvalOutcome {
    pub report: MetricsReport,
    pub results: Vec<RolloutResult>,
    pub seconds_per_step: f64,
}

/// Rolls out `b` on the test worlds and writes its report, histogram and
/// per-world trajectories.
pub fn eval(cfg: &RunConfig, b: Baseline) -> Result<EvalOutcome> {
    let layout = Layout::new(cfg);
    let worlds = test_worlds(cfg, b.facing())?;
    let mut policy = policy_for(cfg, b)?;
    let clock = Instant::now();
    let results = evaluate(policy.as_mut(), &worlds, cfg.eval_chunk)?;
    let elapsed = clock.elapsed().as_secs_f64();
    let steps: usize = results.iter().map(|r| r.actions.len()).sum();
    let report = MetricsReport::from_results(b.name(), &results);
    let mut text = header(cfg, &format!("eval {b}"));
    text.push_str(&table(std::slice::from_ref(&report)));
    text.push_str(&report.to_line());
    text.push('\n');
    write(&layout.report(&format!("eval_{b}.txt")), &text)?;
    write(
        &layout.report(&format!("histogram_{b}.csv")),
        &histogram_csv(b.name(), &path_length_histogram(&results)),
    )?;
    let mut traj = header(cfg, &format!("eval {b}"));
    for r in &results {
        let _ = writeln!(
            traj,
            "seed={} outcome={} path={} optimal={} detour={} actions={}",
            r.seed,
            r.outcome.name(),
            r.path_length,
            r.optimal_length,
            r.detour as u8,
            actions_to_string(&r.actions)
        );
    }
    write(&layout.report(&format!("rollouts_{b}.txt")), &traj)?;
    Ok(EvalOutcome {
        report,
        results,
        seconds_per_step: elapsed / steps.max(1) as f64,
    })
}

/// Evaluates every row and writes the combined comparison table.
pub fn eval_all(cfg: &RunConfig) -> Result<Vec<EvalOutcome>> {
    let mut outs = Vec::new();
    for b in Baseline::ALL {
        let o = eval(cfg, b)?;
        eprintln!("{}  ({:.2e} s per policy step)", o.report.to_line(), o.seconds_per_step);
        outs.push(o);
    }
    let reports: Vec<MetricsReport> = outs.iter().map(|o| o.report.clone()).collect();
    let mut text = header(cfg, "eval --all-baselines");
    text.push_str(&table(&reports));
    for r in &reports {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    write(&Layout::new(cfg).report("eval_all.txt"), &text)?;
    Ok(outs)
}

/// First `rows` teacher-forced test bundles under the secure encoders.
pub fn test_bundles(cfg: &RunConfig, nav: &Navigator<f32>, rows: usize) -> Result<Tensor<f64>> {
    let recs = load_records(&Layout::new(cfg).records(Split::Test, StartFacing::Random))?;
    let mut taken = 0;
    let mut needed = Vec::new();
    for r in &recs {
        if taken >= rows {
            break;
        }
        taken += r.actions.len();
        needed.push(r.clone());
    }
    let f = extract_features(nav, &episodes(&needed)?, Some(cfg.fixed()))?;
    if f.labels.len() < rows {
        anyhow::bail!("only {} test bundles available, {rows} requested", f.labels.len());
    }
    let width = f.x.row_len();
    Ok(Tensor::new(f.x.data()[..rows * width].to_vec(), vec![rows, width])?)
}

pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    let (nav, head, fixed) = secure_models(cfg)?;
    let x = test_bundles(cfg, &nav, cfg.bench_batch)?;
    let mut parties = vec![2, 5];
    if !parties.contains(&cfg.parties) {
        parties.push(cfg.parties);
    }
    let report = bench_inference(&head, &fixed, &x, &parties, cfg.bench_repeats, rng::derive(cfg.seed, "bench", 0))?;
    let mut text = header(cfg, "bench");
    text.push_str(&report.to_line());
    text.push('\n');
    write(&Layout::new(cfg).report("bench.txt"), &text)?;
    Ok(report)
}

/// Worlds for the probe, drawn from the test seed range.
pub fn probe_worlds(cfg: &RunConfig, count: usize) -> Vec<World> {
    (0..count as u64)
        .map(|i| World::generate(world_seed(cfg.seed, Split::Test, (1 << 31) + i), StartFacing::Random))
        .collect()
}

pub fn attack(cfg: &RunConfig) -> Result<AttackReport> {
    let (nav, _, _) = secure_models(cfg)?;
    // Four cameras per world and obstacles on a minority of lanes.
    let worlds = probe_worlds(cfg, cfg.attack_per_class * 2);
    let data = probe_data(&nav, &worlds, cfg.attack_per_class)?;
    if data.labels.len() != 2 * cfg.attack_per_class {
        anyhow::bail!("probe collected only {} samples", data.labels.len());
    }
    let report = attack_report(&data, cfg.parties, cfg.fixed(), rng::derive(cfg.seed, "attack", 0))?;
    let mut text = header(cfg, "attack");
    text.push_str(&report.to_line());
    text.push('\n');
    write(&Layout::new(cfg).report("attack.txt"), &text)?;
    Ok(report)
}
