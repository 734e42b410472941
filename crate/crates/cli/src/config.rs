//! INI system configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section and key is checked against [`KNOWN_KEYS`]; anything
//! else is rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use asmt_core::corpus::CleanParams;
use asmt_core::decoder::WeightGrid;
use asmt_core::pipeline::TrainOptions;
use asmt_core::{DecoderConfig, Heuristic, ScriptRange, Smoothing, Weights};
use ini::Ini;

pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("corpus", &["source", "target", "source_lang", "target_lang"]),
    ("prep", &["min_len", "max_len", "max_ratio"]),
    ("lm", &["order", "smoothing", "k"]),
    ("align", &["iterations", "null", "heuristic"]),
    ("phrase", &["max_len"]),
    ("decoder", &["beam"]),
    ("weights", &["lm", "tm_fwd", "tm_rev", "word_penalty"]),
    ("translit", &["enabled", "table", "target_script"]),
    ("tuning", &["lm", "tm_fwd", "tm_rev", "word_penalty"]),
    ("output", &["dir"]),
    ("model", &["lm", "phrase_table", "truecase"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPaths {
    pub lm: PathBuf,
    pub phrase_table: PathBuf,
    pub truecase: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub ini: Ini,
    pub source: PathBuf,
    pub target: PathBuf,
    pub source_lang: String,
    pub target_lang: String,
    pub train: TrainOptions,
    pub decoder: DecoderConfig,
    pub weights: Weights,
    pub translit_enabled: bool,
    pub translit_table: Option<PathBuf>,
    pub target_script: ScriptRange,
    pub grid: WeightGrid,
    pub output_dir: PathBuf,
    pub model: Option<ModelPaths>,
}

struct Reader<'a> {
    ini: &'a Ini,
    base: PathBuf,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
    }

    fn required(&self, section: &str, key: &str) -> Result<&str> {
        self.raw(section, key)
            .ok_or_else(|| anyhow!("missing required key {section}.{key}"))
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| anyhow!("invalid value {v:?} for {section}.{key}: {e}")),
        }
    }

    fn flag(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.raw(section, key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => bail!("invalid boolean {v:?} for {section}.{key}"),
        }
    }

    fn path(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn list(&self, section: &str, key: &str, default: f64) -> Result<Vec<f64>> {
        match self.raw(section, key) {
            None => Ok(vec![default]),
            Some(v) => v
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| anyhow!("invalid value {s:?} in {section}.{key}: {e}"))
                })
                .collect(),
        }
    }
}

fn check_keys(ini: &Ini) -> Result<()> {
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((k, _)) = props.iter().next() {
                bail!("key {k:?} outside any section");
            }
            continue;
        };
        let Some((_, keys)) = KNOWN_KEYS.iter().find(|(s, _)| *s == section) else {
            bail!("unknown section [{section}]");
        };
        for (k, _) in props.iter() {
            if !keys.contains(&k) {
                bail!("unknown key {section}.{k}");
            }
        }
    }
    Ok(())
}

fn parse_smoothing(name: &str, k: f64) -> Result<Smoothing> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "none" => Ok(Smoothing::None),
        "add_k" | "addk" => Ok(Smoothing::AddK(k)),
        "witten_bell" | "wittenbell" => Ok(Smoothing::WittenBell),
        other => bail!("unknown smoothing {other:?} (expected none, add_k or witten_bell)"),
    }
}

fn default_script(target_lang: &str) -> ScriptRange {
    match target_lang.to_ascii_lowercase().as_str() {
        "as" | "asm" | "assamese" => ScriptRange::assamese(),
        _ => ScriptRange::latin(),
    }
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_ini(ini, path)
    }

    pub fn from_ini(ini: Ini, path: &Path) -> Result<Self> {
        check_keys(&ini)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let r = Reader { ini: &ini, base };

        let source = r.path(r.required("corpus", "source")?);
        let target = r.path(r.required("corpus", "target")?);
        let source_lang = r.parse("corpus", "source_lang", "src".to_owned())?;
        let target_lang = r.parse("corpus", "target_lang", "tgt".to_owned())?;

        let clean_defaults = CleanParams::default();
        let clean = CleanParams {
            min_len: r.parse("prep", "min_len", clean_defaults.min_len)?,
            max_len: r.parse("prep", "max_len", clean_defaults.max_len)?,
            max_ratio: r.parse("prep", "max_ratio", clean_defaults.max_ratio)?,
        };
        clean.validate().context("[prep]")?;

        let defaults = TrainOptions::default();
        let smoothing = match r.raw("lm", "smoothing") {
            None => defaults.smoothing,
            Some(name) => parse_smoothing(name, r.parse("lm", "k", 1.0)?)?,
        };
        let heuristic = match r.raw("align", "heuristic") {
            None => defaults.heuristic,
            Some(h) => h.parse::<Heuristic>().map_err(|e| anyhow!("align.heuristic: {e}"))?,
        };
        let train = TrainOptions {
            lm_order: r.parse("lm", "order", defaults.lm_order)?,
            smoothing,
            em_iterations: r.parse("align", "iterations", defaults.em_iterations)?,
            use_null: r.flag("align", "null", defaults.use_null)?,
            heuristic,
            max_phrase_len: r.parse("phrase", "max_len", defaults.max_phrase_len)?,
            clean,
        };
        if train.lm_order < 1 {
            bail!("lm.order must be at least 1");
        }
        if train.em_iterations < 1 {
            bail!("align.iterations must be at least 1");
        }
        if train.max_phrase_len < 1 {
            bail!("phrase.max_len must be at least 1");
        }

        let beam = match r.raw("decoder", "beam") {
            Some(v) if v.eq_ignore_ascii_case("inf") || v.eq_ignore_ascii_case("unlimited") => usize::MAX,
            _ => r.parse("decoder", "beam", DecoderConfig::default().beam_size)?,
        };
        if beam < 1 {
            bail!("decoder.beam must be at least 1");
        }
        let decoder = DecoderConfig {
            beam_size: beam,
            max_phrase_len: train.max_phrase_len,
            ..Default::default()
        };

        let wd = Weights::default();
        let weights = Weights::new(
            r.parse("weights", "lm", wd.lm)?,
            r.parse("weights", "tm_fwd", wd.tm_fwd)?,
            r.parse("weights", "tm_rev", wd.tm_rev)?,
            r.parse("weights", "word_penalty", wd.word_penalty)?,
        )
        .context("[weights]")?;

        let grid = WeightGrid {
            lm: r.list("tuning", "lm", weights.lm)?,
            tm_fwd: r.list("tuning", "tm_fwd", weights.tm_fwd)?,
            tm_rev: r.list("tuning", "tm_rev", weights.tm_rev)?,
            word_penalty: r.list("tuning", "word_penalty", weights.word_penalty)?,
        };

        let target_script = match r.raw("translit", "target_script") {
            None => default_script(&target_lang),
            Some(name) => ScriptRange::by_name(name).ok_or_else(|| anyhow!("unknown script {name:?}"))?,
        };

        let model = match ini.section(Some("model")) {
            None => None,
            Some(_) => Some(ModelPaths {
                lm: r.path(r.required("model", "lm")?),
                phrase_table: r.path(r.required("model", "phrase_table")?),
                truecase: r.path(r.required("model", "truecase")?),
            }),
        };

        Ok(SystemConfig {
            source,
            target,
            source_lang,
            target_lang,
            train,
            decoder,
            weights,
            translit_enabled: r.flag("translit", "enabled", true)?,
            translit_table: r.raw("translit", "table").map(|p| r.path(p)),
            target_script,
            grid,
            output_dir: r.path(r.raw("output", "dir").unwrap_or("model")),
            model,
            ini,
        })
    }
}

fn absolute(p: &Path) -> String {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}

/// The config written next to the trained artifacts: the original settings
/// with absolute input paths, the output directory set to `.` and a
/// `[model]` section naming the artifacts.
pub fn run_config(cfg: &SystemConfig, model_files: &[(&str, &str)]) -> Ini {
    let mut ini = cfg.ini.clone();
    ini.with_section(Some("corpus"))
        .set("source", absolute(&cfg.source))
        .set("target", absolute(&cfg.target));
    if let Some(t) = &cfg.translit_table {
        ini.with_section(Some("translit")).set("table", absolute(t));
    }
    ini.with_section(Some("output")).set("dir", ".");
    ini.delete(Some("model"));
    for (k, v) in model_files {
        ini.with_section(Some("model")).set(*k, *v);
    }
    ini
}

/// The same config with the `[weights]` section replaced.
pub fn with_weights(cfg: &SystemConfig, w: &Weights) -> Ini {
    let mut ini = cfg.ini.clone();
    ini.with_section(Some("weights"))
        .set("lm", w.lm.to_string())
        .set("tm_fwd", w.tm_fwd.to_string())
        .set("tm_rev", w.tm_rev.to_string())
        .set("word_penalty", w.word_penalty.to_string());
    ini
}
