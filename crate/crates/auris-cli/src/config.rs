//! Run configuration: a flat key–value file, flag overrides, and the
//! content hashes that tie artifacts to the settings that produced them.
//!
//! Two hashes matter. The *feature* hash covers only the keys that shape
//! front-end output (rates, windows, filter banks); feature caches are
//! keyed by it. The *pipeline* hash additionally covers corpus, split,
//! model and training keys — everything that determines learned
//! parameters — and is embedded in checkpoints so evaluation can refuse
//! a configuration that does not match the model it is loading.
//! Presentation-only keys (report grouping, fusion inputs, task naming)
//! stay outside the pipeline hash: they change what is printed, not what
//! was learned.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use auris_core::dataset::SplitScheme;
use auris_core::dsp::PatchOverlap;
use auris_core::error::{Error, Result};
use auris_core::eval::{FuseMode, IcbhiTask};
use auris_core::models::CombinerKind;
use auris_core::rng::fnv1a64;
use auris_core::training::{TrainConfig, STREAM_NAMES};

/// Which classifier family a run trains and evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Four-block single-stream CNN.
    Baseline,
    /// Six-block single-stream CNN with a mixture-of-experts head.
    CnnMoe,
    /// Two-convolution lightweight network (the distillation target).
    Student,
    /// Three-stream encoder with a dense decoder.
    EncoderMlp,
    /// Three-stream encoder with a mixture-of-experts decoder.
    EncoderMoe,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::CnnMoe => "cnn-moe",
            ModelKind::Student => "student",
            ModelKind::EncoderMlp => "encoder-mlp",
            ModelKind::EncoderMoe => "encoder-moe",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "baseline" => Ok(ModelKind::Baseline),
            "cnn-moe" => Ok(ModelKind::CnnMoe),
            "student" => Ok(ModelKind::Student),
            "encoder-mlp" => Ok(ModelKind::EncoderMlp),
            "encoder-moe" => Ok(ModelKind::EncoderMoe),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected baseline, cnn-moe, student, \
                 encoder-mlp or encoder-moe)"
            ))),
        }
    }

    /// True for the three-stream encoder families.
    pub fn is_encoder(self) -> bool {
        matches!(self, ModelKind::EncoderMlp | ModelKind::EncoderMoe)
    }
}

/// Everything a run needs, resolved to concrete values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Corpus.
    pub corpus_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub classes: usize,
    pub per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    // Split.
    pub split: String,
    pub split_group: String,
    pub test_fold: Option<usize>,
    // Front-ends.
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub gamma_filters: usize,
    pub cqt_bins: usize,
    pub cqt_bins_per_octave: u32,
    pub cqt_f_min: f64,
    pub patch_width: usize,
    pub patch_overlap: String,
    pub stream: String,
    // Model.
    pub model: ModelKind,
    pub experts: usize,
    pub combiner: String,
    // Training.
    pub epochs: usize,
    pub decoder_epochs: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub l2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_kl_triplet: f64,
    pub margin: f64,
    pub gamma_distill: f64,
    pub mixup: bool,
    pub seed: u64,
    pub teacher: String,
    // Presentation (outside the pipeline hash).
    pub group_by: String,
    pub icbhi_task: String,
    pub fuse_mode: String,
    pub inputs: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: PathBuf::from("corpus"),
            manifest: None,
            classes: 3,
            per_class: 20,
            duration_s: 3.0,
            sample_rate: 16000,
            split: "fraction:60".into(),
            split_group: String::new(),
            test_fold: None,
            window: 1024,
            hop: 256,
            n_fft: 1024,
            mels: 64,
            f_min: 50.0,
            f_max: 7800.0,
            gamma_filters: 64,
            cqt_bins: 64,
            cqt_bins_per_octave: 12,
            cqt_f_min: 50.0,
            patch_width: 64,
            patch_overlap: "half".into(),
            stream: "log-mel".into(),
            model: ModelKind::Baseline,
            experts: 10,
            combiner: "sum".into(),
            epochs: 8,
            decoder_epochs: None,
            batch_size: 12,
            lr: 1e-3,
            l2: 1e-3,
            alpha: 1.0 / 3.0,
            beta: 1.0,
            gamma_kl_triplet: 0.2,
            margin: 0.3,
            gamma_distill: 0.5,
            mixup: true,
            seed: 0,
            teacher: String::new(),
            group_by: String::new(),
            icbhi_task: String::new(),
            fuse_mode: "mean".into(),
            inputs: String::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "config key `{key}`: expected `true` or `false`, got `{value}`"
        ))),
    }
}

impl RunConfig {
    /// Loads a config file (defaults when `path` is `None`) and applies
    /// flag overrides on top; flags win over file values.
    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "config line {} is not `key = value`: `{line}`",
                        lineno + 1
                    ))
                })?;
                cfg.apply(key.trim(), value.trim())?;
            }
        }
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one key–value pair.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus_dir" => self.corpus_dir = PathBuf::from(value),
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "classes" => self.classes = parse(key, value)?,
            "per_class" => self.per_class = parse(key, value)?,
            "duration_s" => self.duration_s = parse(key, value)?,
            "sample_rate" => self.sample_rate = parse(key, value)?,
            "split" => self.split = value.to_string(),
            "split_group" => self.split_group = value.to_string(),
            "test_fold" => self.test_fold = Some(parse(key, value)?),
            "window" => self.window = parse(key, value)?,
            "hop" => self.hop = parse(key, value)?,
            "n_fft" => self.n_fft = parse(key, value)?,
            "mels" => self.mels = parse(key, value)?,
            "f_min" => self.f_min = parse(key, value)?,
            "f_max" => self.f_max = parse(key, value)?,
            "gamma_filters" => self.gamma_filters = parse(key, value)?,
            "cqt_bins" => self.cqt_bins = parse(key, value)?,
            "cqt_bins_per_octave" => self.cqt_bins_per_octave = parse(key, value)?,
            "cqt_f_min" => self.cqt_f_min = parse(key, value)?,
            "patch_width" => self.patch_width = parse(key, value)?,
            "patch_overlap" => self.patch_overlap = value.to_string(),
            "stream" => self.stream = value.to_string(),
            "model" => self.model = ModelKind::from_tag(value)?,
            "experts" => self.experts = parse(key, value)?,
            "combiner" => self.combiner = value.to_string(),
            "epochs" => self.epochs = parse(key, value)?,
            "decoder_epochs" => self.decoder_epochs = Some(parse(key, value)?),
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma_kl_triplet" => self.gamma_kl_triplet = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "gamma_distill" => self.gamma_distill = parse(key, value)?,
            "mixup" => self.mixup = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "teacher" => self.teacher = value.to_string(),
            "group_by" => self.group_by = value.to_string(),
            "icbhi_task" => self.icbhi_task = value.to_string(),
            "fuse_mode" => self.fuse_mode = value.to_string(),
            "inputs" => self.inputs = value.to_string(),
            other => {
                return Err(Error::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    /// Cross-field checks for values that parse but cannot work together.
    fn validate(&self) -> Result<()> {
        self.scheme()?;
        self.overlap()?;
        self.combiner_kind()?;
        self.fuse_kind()?;
        if !self.icbhi_task.is_empty() {
            self.icbhi()?;
        }
        if !STREAM_NAMES.contains(&self.stream.as_str()) {
            return Err(Error::Config(format!(
                "unknown stream `{}` (expected one of {})",
                self.stream,
                STREAM_NAMES.join(", ")
            )));
        }
        if self.model.is_encoder()
            && !(self.mels == self.gamma_filters && self.mels == self.cqt_bins)
        {
            return Err(Error::Config(format!(
                "encoder models need all three streams the same height, got \
                 mels={}, gamma_filters={}, cqt_bins={}",
                self.mels, self.gamma_filters, self.cqt_bins
            )));
        }
        self.train_config().validate()?;
        Ok(())
    }

    /// The manifest path: explicit, or `corpus_dir/manifest.csv`.
    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.corpus_dir.join("manifest.csv"))
    }

    /// Parses the `split` key (`fraction:60` or `kfold:5`).
    pub fn scheme(&self) -> Result<SplitScheme> {
        let (kind, arg) = self.split.split_once(':').ok_or_else(|| {
            Error::Config(format!(
                "split `{}` must look like `fraction:60` or `kfold:5`",
                self.split
            ))
        })?;
        match kind {
            "fraction" => Ok(SplitScheme::Fraction { train_pct: parse("split", arg)? }),
            "kfold" => Ok(SplitScheme::KFold { k: parse("split", arg)? }),
            other => Err(Error::Config(format!(
                "unknown split scheme `{other}` (expected fraction or kfold)"
            ))),
        }
    }

    /// The fold evaluated as the test side: explicit `test_fold`, else
    /// fold 1 for fractional splits (fold 0 is the training side) and
    /// fold 0 for k-fold.
    pub fn resolved_test_fold(&self) -> Result<usize> {
        if let Some(f) = self.test_fold {
            return Ok(f);
        }
        Ok(match self.scheme()? {
            SplitScheme::Fraction { .. } => 1,
            _ => 0,
        })
    }

    pub fn overlap(&self) -> Result<PatchOverlap> {
        match self.patch_overlap.as_str() {
            "none" => Ok(PatchOverlap::None),
            "half" => Ok(PatchOverlap::Half),
            other => Err(Error::Config(format!(
                "patch_overlap `{other}` must be `none` or `half`"
            ))),
        }
    }

    pub fn combiner_kind(&self) -> Result<CombinerKind> {
        CombinerKind::from_tag(&self.combiner)
    }

    pub fn fuse_kind(&self) -> Result<FuseMode> {
        match self.fuse_mode.as_str() {
            "mean" => Ok(FuseMode::Mean),
            "sum" => Ok(FuseMode::Sum),
            other => Err(Error::Config(format!("fuse_mode `{other}` must be `mean` or `sum`"))),
        }
    }

    /// The respiratory task named by `icbhi_task`, when set.
    pub fn icbhi(&self) -> Result<IcbhiTask> {
        self.icbhi_task.parse()
    }

    /// Metadata keys for grouped report tables.
    pub fn group_keys(&self) -> Vec<&str> {
        self.group_by.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    /// Prediction files for fusion.
    pub fn input_files(&self) -> Vec<PathBuf> {
        self.inputs
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect()
    }

    /// The training hyperparameters carried by this run.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            l2: self.l2,
            alpha: self.alpha,
            beta: self.beta,
            gamma_kl_triplet: self.gamma_kl_triplet,
            margin: self.margin,
            gamma_distill: self.gamma_distill,
            mixup: self.mixup,
            seed: self.seed,
        }
    }

    /// Decoder-phase hyperparameters: same as training, with an optional
    /// separate epoch budget.
    pub fn decoder_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.decoder_epochs.unwrap_or(self.epochs),
            ..self.train_config()
        }
    }

    /// Key–value lines for every setting, in a fixed order, with resolved
    /// defaults written out. This text *is* the configuration identity:
    /// config.txt holds it and the hashes digest subsets of it.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("alpha", self.alpha.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("beta", self.beta.to_string()),
            ("classes", self.classes.to_string()),
            ("combiner", self.combiner.clone()),
            ("corpus_dir", self.corpus_dir.display().to_string()),
            ("cqt_bins", self.cqt_bins.to_string()),
            ("cqt_bins_per_octave", self.cqt_bins_per_octave.to_string()),
            ("cqt_f_min", self.cqt_f_min.to_string()),
            (
                "decoder_epochs",
                self.decoder_epochs.unwrap_or(self.epochs).to_string(),
            ),
            ("duration_s", self.duration_s.to_string()),
            ("epochs", self.epochs.to_string()),
            ("experts", self.experts.to_string()),
            ("f_max", self.f_max.to_string()),
            ("f_min", self.f_min.to_string()),
            ("fuse_mode", self.fuse_mode.clone()),
            ("gamma_distill", self.gamma_distill.to_string()),
            ("gamma_filters", self.gamma_filters.to_string()),
            ("gamma_kl_triplet", self.gamma_kl_triplet.to_string()),
            ("group_by", self.group_by.clone()),
            ("hop", self.hop.to_string()),
            ("icbhi_task", self.icbhi_task.clone()),
            ("inputs", self.inputs.clone()),
            ("l2", self.l2.to_string()),
            ("lr", self.lr.to_string()),
            ("manifest", self.manifest_path().display().to_string()),
            ("margin", self.margin.to_string()),
            ("mels", self.mels.to_string()),
            ("mixup", self.mixup.to_string()),
            ("model", self.model.tag().to_string()),
            ("n_fft", self.n_fft.to_string()),
            ("patch_overlap", self.patch_overlap.clone()),
            ("patch_width", self.patch_width.to_string()),
            ("per_class", self.per_class.to_string()),
            ("sample_rate", self.sample_rate.to_string()),
            ("seed", self.seed.to_string()),
            ("split", self.split.clone()),
            ("split_group", self.split_group.clone()),
            (
                "test_fold",
                self.resolved_test_fold().map(|f| f.to_string()).unwrap_or_default(),
            ),
            ("stream", self.stream.clone()),
            ("teacher", self.teacher.clone()),
            ("window", self.window.to_string()),
        ]
    }

    /// Keys that change what is printed but not what is learned.
    const PRESENTATION_KEYS: [&'static str; 4] =
        ["fuse_mode", "group_by", "icbhi_task", "inputs"];

    /// Keys that shape front-end output; feature caches key on these.
    const FEATURE_KEYS: [&'static str; 11] = [
        "cqt_bins",
        "cqt_bins_per_octave",
        "cqt_f_min",
        "f_max",
        "f_min",
        "gamma_filters",
        "hop",
        "mels",
        "n_fft",
        "sample_rate",
        "window",
    ];

    fn hash_of(&self, keep: impl Fn(&str) -> bool) -> u64 {
        let mut text = String::new();
        for (key, value) in self.entries() {
            if keep(key) {
                let _ = writeln!(text, "{key} = {value}");
            }
        }
        fnv1a64(text.as_bytes())
    }

    /// Digest of the settings that determine learned parameters and the
    /// evaluation split. Checkpoints carry it; evaluation compares it.
    pub fn pipeline_hash(&self) -> u64 {
        self.hash_of(|k| !Self::PRESENTATION_KEYS.contains(&k))
    }

    /// Digest of the front-end settings; feature caches are stored under it.
    pub fn features_hash(&self) -> u64 {
        self.hash_of(|k| Self::FEATURE_KEYS.contains(&k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_cfg(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_load_and_validate() {
        let cfg = RunConfig::load(None, None).unwrap();
        assert_eq!(cfg.model, ModelKind::Baseline);
        assert_eq!(cfg.resolved_test_fold().unwrap(), 1);
        assert_eq!(cfg.manifest_path(), PathBuf::from("corpus/manifest.csv"));
    }

    #[test]
    fn file_values_land_and_flags_win() {
        let f = write_cfg("seed = 11\nmodel = encoder-moe\nepochs = 3\n# comment\n\nmixup = false\n");
        let cfg = RunConfig::load(Some(f.path()), Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.model, ModelKind::EncoderMoe);
        assert_eq!(cfg.epochs, 3);
        assert!(!cfg.mixup);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_configuration_errors() {
        let f = write_cfg("window = 5\n");
        assert!(RunConfig::load(Some(f.path()), None).unwrap_err().is_config());
        let f = write_cfg("epochs = soon\n");
        assert!(RunConfig::load(Some(f.path()), None).unwrap_err().is_config());
        let f = write_cfg("model = transformer\n");
        let err = RunConfig::load(Some(f.path()), None).unwrap_err();
        assert!(err.to_string().contains("transformer"));
    }

    #[test]
    fn hashes_separate_pipeline_from_presentation() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.group_by = "device".into();
        assert_eq!(a.pipeline_hash(), b.pipeline_hash());
        assert_ne!(
            fnv1a64(a.canonical().as_bytes()),
            fnv1a64(b.canonical().as_bytes())
        );
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.pipeline_hash(), c.pipeline_hash());
        assert_eq!(a.features_hash(), c.features_hash());
        let mut d = a.clone();
        d.hop = 128;
        assert_ne!(a.features_hash(), d.features_hash());
    }

    #[test]
    fn split_and_fold_resolution() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.scheme().unwrap(), SplitScheme::Fraction { train_pct: 60.0 });
        cfg.split = "kfold:5".into();
        assert_eq!(cfg.scheme().unwrap(), SplitScheme::KFold { k: 5 });
        assert_eq!(cfg.resolved_test_fold().unwrap(), 0);
        cfg.test_fold = Some(3);
        assert_eq!(cfg.resolved_test_fold().unwrap(), 3);
        cfg.split = "stratified:3".into();
        assert!(cfg.scheme().unwrap_err().is_config());
    }

    #[test]
    fn encoder_models_demand_equal_stream_heights() {
        let f = write_cfg("model = encoder-mlp\nmels = 64\ngamma_filters = 32\n");
        let err = RunConfig::load(Some(f.path()), None).unwrap_err();
        assert!(err.to_string().contains("same height"));
    }
}
