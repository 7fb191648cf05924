//! Run configuration: built-in defaults, then a flat TOML file, then
//! command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use privnav::pipeline::{Inputs, HE_GAIN};
use privnav::ring::FixedConfig;
use privnav::world::StartFacing;
use serde::{Deserialize, Serialize};

use crate::Fail;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Baseline {
    Random,
    MapOnly,
    FirstPerson,
    FirstPersonDet,
    PlaintextCam,
    /// The secure head evaluated in the clear.
    SecurePlain,
    Mpc2,
    Mpc5,
}

impl Baseline {
    pub const ALL: [Baseline; 8] = [
        Baseline::Random,
        Baseline::MapOnly,
        Baseline::FirstPerson,
        Baseline::FirstPersonDet,
        Baseline::PlaintextCam,
        Baseline::SecurePlain,
        Baseline::Mpc2,
        Baseline::Mpc5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::MapOnly => "map_only",
            Baseline::FirstPerson => "first_person",
            Baseline::FirstPersonDet => "first_person_det",
            Baseline::PlaintextCam => "plaintext_cam",
            Baseline::SecurePlain => "secure_plain",
            Baseline::Mpc2 => "mpc2",
            Baseline::Mpc5 => "mpc5",
        }
    }

    pub fn facing(self) -> StartFacing {
        if self == Baseline::FirstPersonDet {
            StartFacing::Fixed
        } else {
            StartFacing::Random
        }
    }

    /// Inputs of the network trained end to end for this row, if any.
    pub fn stage_one_inputs(self) -> Option<Inputs> {
        match self {
            Baseline::Random | Baseline::SecurePlain | Baseline::Mpc2 | Baseline::Mpc5 => None,
            Baseline::MapOnly => Some(Inputs::MapOnly),
            Baseline::FirstPerson | Baseline::FirstPersonDet => Some(Inputs::FirstPerson),
            Baseline::PlaintextCam => Some(Inputs::Multiview),
        }
    }

    /// Whether this row uses the frozen-encoder head trained in stage 2.
    pub fn uses_secure_head(self) -> bool {
        matches!(self, Baseline::SecurePlain | Baseline::Mpc2 | Baseline::Mpc5)
    }

    pub fn secure_parties(self) -> Option<usize> {
        match self {
            Baseline::Mpc2 => Some(2),
            Baseline::Mpc5 => Some(5),
            _ => None,
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fully resolved settings of one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Party count for the attack's share split; also benchmarked.
    pub parties: usize,
    pub frac_bits: u32,
    pub n_train: usize,
    pub n_test: usize,
    /// End-to-end stage: learning rate, epochs, episodes per minibatch.
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub init_gain: f64,
    /// Largest global gradient norm per step; 0 turns clipping off.
    pub clip_norm: f64,
    /// Secure-head stage: learning rate, epochs, rows per minibatch.
    pub head_lr: f64,
    pub head_epochs: usize,
    pub cipher_batch: usize,
    pub baseline: Baseline,
    pub out_dir: PathBuf,
    /// Worlds rolled out in lockstep.
    pub eval_chunk: usize,
    pub bench_batch: usize,
    pub bench_repeats: usize,
    pub attack_per_class: usize,
    pub desk_scale: bool,
}

/// Keys a config file may set; everything is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub parties: Option<usize>,
    pub frac_bits: Option<u32>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub init_gain: Option<f64>,
    pub clip_norm: Option<f64>,
    pub head_lr: Option<f64>,
    pub head_epochs: Option<usize>,
    pub cipher_batch: Option<usize>,
    pub baseline: Option<Baseline>,
    pub out_dir: Option<PathBuf>,
    pub eval_chunk: Option<usize>,
    pub bench_batch: Option<usize>,
    pub bench_repeats: Option<usize>,
    pub attack_per_class: Option<usize>,
    pub desk_scale: Option<bool>,
}

/// Values given on the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parties: Option<usize>,
    pub baseline: Option<Baseline>,
    pub desk_scale: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Full-size settings.
    pub fn paper() -> Self {
        RunConfig {
            seed: 1,
            parties: 2,
            frac_bits: 16,
            n_train: 15_000,
            n_test: 2_250,
            lr: 0.01,
            epochs: 600,
            batch: 100,
            init_gain: HE_GAIN,
            clip_norm: 5.0,
            head_lr: 0.01,
            head_epochs: 600,
            cipher_batch: 500,
            baseline: Baseline::Mpc2,
            out_dir: PathBuf::from("runs"),
            eval_chunk: 250,
            bench_batch: 100,
            bench_repeats: 5,
            attack_per_class: 1_000,
            desk_scale: false,
        }
    }

    /// Laptop-sized settings: 2,000 training and 250 test episodes.
    pub fn desk() -> Self {
        RunConfig {
            n_train: 2_000,
            n_test: 250,
            lr: 0.05,
            epochs: 40,
            batch: 8,
            head_lr: 0.05,
            head_epochs: 50,
            cipher_batch: 64,
            desk_scale: true,
            ..Self::paper()
        }
    }

    /// Defaults, then `file`, then `cli`. The desk profile is the base when
    /// either the file or the command line asks for it.
    pub fn resolve(file: Option<&ConfigFile>, cli: &Overrides) -> Result<Self, Fail> {
        let desk = cli.desk_scale || file.and_then(|f| f.desk_scale).unwrap_or(false);
        let mut c = if desk { Self::desk() } else { Self::paper() };
        if let Some(f) = file {
            macro_rules! take {
                ($($k:ident),*) => {$(if let Some(v) = f.$k.clone() { c.$k = v; })*};
            }
            take!(seed, parties, frac_bits, n_train, n_test, lr, epochs, batch, init_gain, clip_norm, head_lr, head_epochs, cipher_batch, baseline, out_dir, eval_chunk, bench_batch, bench_repeats, attack_per_class);
        }
        c.desk_scale = desk;
        if let Some(v) = cli.seed {
            c.seed = v;
        }
        if let Some(v) = cli.parties {
            c.parties = v;
        }
        if let Some(v) = cli.baseline {
            c.baseline = v;
        }
        if let Some(v) = &cli.out_dir {
            c.out_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: Option<&Path>, cli: &Overrides) -> Result<Self, Fail> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Fail::Config(format!("cannot read {}: {e}", p.display())))?;
                Some(parse_file(&text)?)
            }
            None => None,
        };
        Self::resolve(file.as_ref(), cli)
    }

    pub fn validate(&self) -> Result<(), Fail> {
        let bad = |m: String| Err(Fail::Config(m));
        if !(2..=16).contains(&self.parties) {
            return bad(format!("parties must lie in 2..=16, got {}", self.parties));
        }
        if let Err(e) = FixedConfig::new(self.frac_bits) {
            return bad(e.to_string());
        }
        if self.n_train < 2 || !self.n_train.is_multiple_of(2) {
            return bad(format!("n_train must be even and at least 2, got {}", self.n_train));
        }
        if self.n_test < 2 || !self.n_test.is_multiple_of(2) {
            return bad(format!("n_test must be even and at least 2, got {}", self.n_test));
        }
        for (k, v) in [("lr", self.lr), ("head_lr", self.head_lr), ("init_gain", self.init_gain)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be a positive number, got {v}"));
            }
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return bad(format!("clip_norm must be 0 or positive, got {}", self.clip_norm));
        }
        for (k, v) in [
            ("epochs", self.epochs),
            ("batch", self.batch),
            ("head_epochs", self.head_epochs),
            ("cipher_batch", self.cipher_batch),
            ("eval_chunk", self.eval_chunk),
            ("bench_batch", self.bench_batch),
            ("bench_repeats", self.bench_repeats),
            ("attack_per_class", self.attack_per_class),
        ] {
            if v == 0 {
                return bad(format!("{k} must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn clip(&self) -> Option<f64> {
        (self.clip_norm > 0.0).then_some(self.clip_norm)
    }

    pub fn fixed(&self) -> FixedConfig {
        FixedConfig::new(self.frac_bits).expect("validated")
    }

    /// The resolved settings as a config file that reproduces them.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

pub fn parse_file(text: &str) -> Result<ConfigFile, Fail> {
    toml::from_str(text).map_err(|e| Fail::Config(e.to_string()))
}
