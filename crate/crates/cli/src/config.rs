//! Flat `key = value` run configuration. Values come from the defaults, then
//! an optional config file, then command-line overrides; unknown keys are
//! rejected at every stage.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pursuit_core::encoder::UpdateRule;
use pursuit_core::pursuit::{Model, Solver};
use pursuit_core::training::{OnlineConfig, Regime, TrainConfig};
use sha2::{Digest, Sha256};

/// A value that round-trips through the config text format.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self> {
                s.parse::<$t>().with_context(|| format!("cannot parse {s:?}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(usize, u64, f64, bool, String, Model, Regime);

impl ConfigValue for Option<PathBuf> {
    fn parse_value(s: &str) -> Result<Self> {
        Ok((!s.is_empty()).then(|| PathBuf::from(s)))
    }
    fn render(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

impl ConfigValue for PathBuf {
    fn parse_value(s: &str) -> Result<Self> {
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_value(s: &str) -> Result<Self> {
        s.split(',').map(|p| p.trim().parse::<usize>().with_context(|| format!("bad list entry {p:?}"))).collect()
    }
    fn render(&self) -> String {
        self.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for Solver {
    fn parse_value(s: &str) -> Result<Self> {
        match s {
            "ista" => Ok(Solver::Ista),
            "cod" => Ok(Solver::Cod),
            _ => bail!("unknown solver {s:?} (ista or cod)"),
        }
    }
    fn render(&self) -> String {
        match self {
            Solver::Ista => "ista",
            Solver::Cod => "cod",
        }
        .into()
    }
}

impl ConfigValue for UpdateRule {
    fn parse_value(s: &str) -> Result<Self> {
        match s {
            "proximal" => Ok(UpdateRule::Proximal),
            "cd" => Ok(UpdateRule::CoordinateDescent),
            _ => bail!("unknown update rule {s:?} (proximal or cd)"),
        }
    }
    fn render(&self) -> String {
        match self {
            UpdateRule::Proximal => "proximal",
            UpdateRule::CoordinateDescent => "cd",
        }
        .into()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $key:ident: $ty:ty = $default:expr;)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $key: $ty,)*
            explicit: BTreeSet<&'static str>,
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* explicit: BTreeSet::new() }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// Sets `key` from its text form. Hyphens in keys read as
            /// underscores.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let key = key.replace('-', "_");
                let value = value.trim();
                match key.as_str() {
                    $(stringify!($key) => {
                        self.$key = <$ty as ConfigValue>::parse_value(value)
                            .with_context(|| format!("config key {key}"))?;
                        self.explicit.insert(stringify!($key));
                    })*
                    _ => bail!("unknown config key {key:?}"),
                }
                Ok(())
            }

            /// Every key with its rendered value, in declaration order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($key), self.$key.render())),*]
            }
        }
    };
}

run_config! {
    /// Pursuit model: lasso, group, tree, rpca or rnmf.
    model: Model = Model::Lasso;
    /// Data matrix, one sample per column.
    data: Option<PathBuf> = None;
    dictionary: Option<PathBuf> = None;
    /// Starting encoder for `train`.
    encoder: Option<PathBuf> = None;
    /// Group structure text file; otherwise contiguous groups of `group_size`.
    groups: Option<PathBuf> = None;
    /// Supervised targets: the signal, or the clean part for robust models.
    target: Option<PathBuf> = None;
    /// Outlier part of supervised targets for robust models.
    target_outliers: Option<PathBuf> = None;
    out_dir: PathBuf = PathBuf::from("out");
    /// Matrix output format: bin or csv.
    matrix_format: String = "bin".into();
    seed: u64 = 0;
    lambda: f64 = 0.1;
    lambda_star: f64 = 0.1;
    depth: usize = 5;
    solver: Solver = Solver::Ista;
    rule: UpdateRule = UpdateRule::Proximal;
    tol: f64 = 1e-8;
    max_iters: usize = 10_000;
    regime: Regime = Regime::Unsupervised;
    batch: usize = 32;
    mu0: f64 = 0.05;
    t0: usize = 1000;
    epochs: usize = 30;
    rho: f64 = 1.0;
    margin: f64 = 1.0;
    train_decoder: bool = false;
    /// Held-out fraction of the samples.
    validation: f64 = 0.2;
    depths: Vec<usize> = vec![1, 2, 3, 5, 7, 10, 15, 20, 35, 50, 70];
    /// Generator for `gen`: lasso, group, lowrank, separation, class or stream.
    kind: String = "lasso".into();
    m: usize = 20;
    q: usize = 50;
    n: usize = 1000;
    sparsity: usize = 5;
    rank: usize = 5;
    sigma: f64 = 0.05;
    outlier_fraction: f64 = 0.05;
    mismatch: f64 = 0.0;
    nonneg: bool = false;
    classes: usize = 3;
    /// Regimes in a generated stream.
    regimes: usize = 3;
    group_size: usize = 4;
    /// Leaf-group weight of tree structures; parents weigh 1.
    leaf_weight: f64 = 0.5;
    window: usize = 1000;
    step: usize = 100;
    refresh: usize = 500;
}

impl RunConfig {
    /// Whether `key` was set by a file or an override.
    pub fn is_set(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            self.set(k.trim(), v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies `--key value` and `--key=value` pairs. A key followed by
    /// another key or by nothing is a boolean switch.
    pub fn apply_args(&mut self, args: &[String]) -> Result<()> {
        let mut i = 0;
        while i < args.len() {
            let Some(flag) = args[i].strip_prefix("--") else {
                bail!("expected --key, got {:?}", args[i]);
            };
            if let Some((k, v)) = flag.split_once('=') {
                self.set(k, v)?;
                i += 1;
            } else if i + 1 < args.len() && !args[i + 1].starts_with("--") {
                self.set(flag, &args[i + 1])?;
                i += 2;
            } else {
                self.set(flag, "true")?;
                i += 1;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if !(self.validation >= 0.0 && self.validation < 1.0) {
            bail!("validation must lie in [0, 1)");
        }
        if !matches!(self.matrix_format.as_str(), "bin" | "csv") {
            bail!("matrix_format must be bin or csv");
        }
        if self.depth == 0 {
            bail!("depth must be positive");
        }
        Ok(())
    }

    /// Canonical text of the resolved configuration for `command`. The
    /// output directory is left out: it names where results go, not what
    /// they are.
    pub fn canonical(&self, command: &str) -> String {
        let mut out = format!("command={command}\n");
        for (k, v) in self.entries().into_iter().filter(|(k, _)| *k != "out_dir") {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// SHA-256 of [`RunConfig::canonical`], in hex.
    pub fn hash(&self, command: &str) -> String {
        let digest = Sha256::digest(self.canonical(command).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch: self.batch,
            mu0: self.mu0,
            t0: self.t0,
            epochs: self.epochs,
            rho: self.rho,
            margin: self.margin,
            seed: self.seed,
            train_decoder: self.train_decoder,
        }
    }

    /// `base` with every explicitly set training key replaced.
    pub fn train_over(&self, base: &TrainConfig) -> TrainConfig {
        let mut t = base.clone();
        macro_rules! take {
            ($($k:ident),*) => {$( if self.is_set(stringify!($k)) { t.$k = self.$k.clone(); } )*};
        }
        take!(batch, mu0, t0, epochs, rho, margin, seed, train_decoder);
        t
    }

    pub fn online_over(&self, base: &OnlineConfig) -> OnlineConfig {
        let mut o = base.clone();
        o.train = self.train_over(&base.train);
        if self.is_set("depth") {
            o.depth = self.depth;
        }
        if self.is_set("rule") {
            o.rule = self.rule;
        }
        macro_rules! take {
            ($($k:ident),*) => {$( if self.is_set(stringify!($k)) { o.$k = self.$k; } )*};
        }
        take!(window, step, refresh);
        o
    }
}
