//! Experiment runner: configuration resolution and deterministic CSV
//! emission.
//!
//! Precedence is flags over config file over defaults. Every output file
//! starts with `# config_hash=<hex>` and the resolved config line, so a run
//! can be replayed byte-for-byte; all parallel fan-out uses derived seeds
//! and count reductions, making outputs independent of worker count.

mod experiments;

use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::population::PopulationKind;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad config keys or values: exit code 1.
    #[error("usage: {0}")]
    Usage(String),
    /// Missing or malformed input data, unwritable outputs: exit code 2.
    #[error("data: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ToyComparison,
    SweepIterations,
    SweepDepth,
    XorCertify,
    ComonotoneCertify,
    StumpPlateau,
    Backtest,
    SynthPanel,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ToyComparison => "toy",
            ExperimentKind::SweepIterations => "sweep-m",
            ExperimentKind::SweepDepth => "sweep-depth",
            ExperimentKind::XorCertify => "xor",
            ExperimentKind::ComonotoneCertify => "comono",
            ExperimentKind::StumpPlateau => "plateau",
            ExperimentKind::Backtest => "backtest",
            ExperimentKind::SynthPanel => "synth-panel",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "toy" => ExperimentKind::ToyComparison,
            "sweep-m" => ExperimentKind::SweepIterations,
            "sweep-depth" => ExperimentKind::SweepDepth,
            "xor" => ExperimentKind::XorCertify,
            "comono" => ExperimentKind::ComonotoneCertify,
            "plateau" => ExperimentKind::StumpPlateau,
            "backtest" => ExperimentKind::Backtest,
            "synth-panel" => ExperimentKind::SynthPanel,
            _ => return None,
        })
    }
}

/// Unresolved option bag: what the flags and the config file each provide.
/// `None` means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub n: Option<usize>,
    pub mc: Option<usize>,
    pub depths: Option<Vec<usize>>,
    pub m_list: Option<Vec<usize>>,
    pub panel: Option<PathBuf>,
    pub months: Option<usize>,
    pub stocks: Option<usize>,
    pub factors: Option<usize>,
    pub cutoff: Option<i64>,
    pub n_long: Option<usize>,
    pub n_short: Option<usize>,
    pub cost_rate: Option<f64>,
    pub steps_max: Option<usize>,
    pub deep_depth: Option<usize>,
    pub pop: Option<String>,
    pub trees: Option<usize>,
    pub stumps: Option<usize>,
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "seeds",
    "out",
    "workers",
    "n",
    "mc",
    "depths",
    "m_list",
    "panel",
    "months",
    "stocks",
    "factors",
    "cutoff",
    "n_long",
    "n_short",
    "cost_rate",
    "steps_max",
    "deep_depth",
    "pop",
    "trees",
    "stumps",
];

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn suggest_key(unknown: &str) -> Option<&'static str> {
    KNOWN_KEYS
        .iter()
        .map(|k| (edit_distance(unknown, k), *k))
        .filter(|(d, _)| *d <= 3)
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k)
}

/// Parse a TOML config file into an override bag; unknown keys are rejected
/// with a nearest-key suggestion.
pub fn parse_config_file(path: &std::path::Path) -> Result<ConfigOverrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut out = ConfigOverrides::default();
    for (key, value) in &table {
        let type_err =
            |want: &str| CliError::Usage(format!("config key `{key}`: expected {want}, got {value}"));
        let as_usize = || -> Result<usize, CliError> {
            value
                .as_integer()
                .filter(|v| *v >= 0)
                .map(|v| v as usize)
                .ok_or_else(|| type_err("a non-negative integer"))
        };
        match key.as_str() {
            "experiment" => {
                out.experiment =
                    Some(value.as_str().ok_or_else(|| type_err("a string"))?.to_string())
            }
            "seed" => {
                let v = value.as_integer().ok_or_else(|| type_err("an integer"))?;
                out.seed = Some(v as u64);
            }
            "seeds" => out.seeds = Some(as_usize()?),
            "out" => {
                out.out = Some(PathBuf::from(
                    value.as_str().ok_or_else(|| type_err("a path string"))?,
                ))
            }
            "workers" => out.workers = Some(as_usize()?),
            "n" => out.n = Some(as_usize()?),
            "mc" => out.mc = Some(as_usize()?),
            "depths" | "m_list" => {
                let arr = value
                    .as_array()
                    .ok_or_else(|| type_err("an integer array"))?;
                let mut v = Vec::with_capacity(arr.len());
                for item in arr {
                    v.push(
                        item.as_integer()
                            .filter(|x| *x >= 0)
                            .map(|x| x as usize)
                            .ok_or_else(|| type_err("an integer array"))?,
                    );
                }
                if key == "depths" {
                    out.depths = Some(v);
                } else {
                    out.m_list = Some(v);
                }
            }
            "panel" => {
                out.panel = Some(PathBuf::from(
                    value.as_str().ok_or_else(|| type_err("a path string"))?,
                ))
            }
            "months" => out.months = Some(as_usize()?),
            "stocks" => out.stocks = Some(as_usize()?),
            "factors" => out.factors = Some(as_usize()?),
            "cutoff" => {
                out.cutoff = Some(value.as_integer().ok_or_else(|| type_err("an integer"))?)
            }
            "n_long" => out.n_long = Some(as_usize()?),
            "n_short" => out.n_short = Some(as_usize()?),
            "cost_rate" => {
                out.cost_rate = Some(
                    value
                        .as_float()
                        .or_else(|| value.as_integer().map(|v| v as f64))
                        .ok_or_else(|| type_err("a number"))?,
                )
            }
            "steps_max" => out.steps_max = Some(as_usize()?),
            "deep_depth" => out.deep_depth = Some(as_usize()?),
            "pop" => {
                out.pop = Some(value.as_str().ok_or_else(|| type_err("a string"))?.to_string())
            }
            "trees" => out.trees = Some(as_usize()?),
            "stumps" => out.stumps = Some(as_usize()?),
            unknown => {
                let mut msg = format!("unknown config key `{unknown}`");
                if let Some(s) = suggest_key(unknown) {
                    msg.push_str(&format!("; did you mean `{s}`?"));
                }
                return Err(CliError::Usage(msg));
            }
        }
    }
    Ok(out)
}

/// Merge flag overrides into file overrides (flags win) and resolve against
/// per-experiment defaults.
pub fn resolve_config(
    experiment: ExperimentKind,
    flags: &ConfigOverrides,
    file: &ConfigOverrides,
) -> Result<ExperimentConfig, CliError> {
    if let Some(file_exp) = &file.experiment {
        match ExperimentKind::from_name(file_exp) {
            None => {
                return Err(CliError::Usage(format!(
                    "config file experiment `{file_exp}` is not a known experiment"
                )))
            }
            Some(k) if k != experiment => {
                return Err(CliError::Usage(format!(
                    "conflicting experiment: subcommand says `{}`, config file says `{file_exp}`",
                    experiment.name()
                )))
            }
            _ => {}
        }
    }
    let pick = |a: &Option<usize>, b: &Option<usize>, default: usize| a.or(*b).unwrap_or(default);
    use ExperimentKind::*;
    let default_seeds = match experiment {
        ToyComparison => 20,
        SweepIterations | SweepDepth => 10,
        _ => 1,
    };
    let default_n = match experiment {
        StumpPlateau => 1000,
        _ => 500,
    };
    let default_mc = match experiment {
        StumpPlateau => 50_000,
        _ => 100_000,
    };
    let default_depths: Vec<usize> = match experiment {
        SweepIterations => vec![5],
        SweepDepth => (1..=8).collect(),
        Backtest => vec![1, 2, 4],
        _ => vec![1, 2, 3],
    };
    let default_m_list: Vec<usize> = match experiment {
        SweepIterations => (1..=250).collect(),
        SweepDepth => vec![250],
        Backtest => vec![10, 50, 100],
        _ => vec![],
    };
    let pop_name = flags
        .pop
        .clone()
        .or_else(|| file.pop.clone())
        .unwrap_or_else(|| "xor2".to_string());
    let plateau_pop = match pop_name.as_str() {
        "xor2" => PopulationKind::XorK(2),
        "xor3" => PopulationKind::XorK(3),
        "ring" => PopulationKind::Ring2d,
        "diagonal" => PopulationKind::Diagonal2d,
        "half_plane" => PopulationKind::HalfPlane2d,
        "parity" => PopulationKind::Parity6d,
        other => {
            return Err(CliError::Usage(format!(
                "invalid config field pop=`{other}` (expected xor2|xor3|ring|diagonal|half_plane|parity)"
            )))
        }
    };
    let cfg = ExperimentConfig {
        experiment,
        global_seed: flags.seed.or(file.seed).unwrap_or(42),
        n_seeds: pick(&flags.seeds, &file.seeds, default_seeds),
        n: pick(&flags.n, &file.n, default_n),
        mc_samples: pick(&flags.mc, &file.mc, default_mc),
        depths: flags
            .depths
            .clone()
            .or_else(|| file.depths.clone())
            .unwrap_or(default_depths),
        m_list: flags
            .m_list
            .clone()
            .or_else(|| file.m_list.clone())
            .unwrap_or(default_m_list),
        out_dir: flags
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        workers: flags.workers.or(file.workers),
        panel: flags.panel.clone().or_else(|| file.panel.clone()),
        months: pick(&flags.months, &file.months, 60),
        stocks: pick(&flags.stocks, &file.stocks, 100),
        factors: pick(&flags.factors, &file.factors, 8),
        cutoff: flags.cutoff.or(file.cutoff),
        n_long: pick(&flags.n_long, &file.n_long, 10),
        n_short: pick(&flags.n_short, &file.n_short, 10),
        cost_rate: flags.cost_rate.or(file.cost_rate).unwrap_or(0.0015),
        steps_max: pick(&flags.steps_max, &file.steps_max, 1000),
        deep_depth: pick(&flags.deep_depth, &file.deep_depth, 2),
        plateau_pop,
        trees: pick(&flags.trees, &file.trees, 100),
        stumps: pick(&flags.stumps, &file.stumps, 100),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub global_seed: u64,
    pub n_seeds: usize,
    pub n: usize,
    pub mc_samples: usize,
    pub depths: Vec<usize>,
    pub m_list: Vec<usize>,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub panel: Option<PathBuf>,
    pub months: usize,
    pub stocks: usize,
    pub factors: usize,
    pub cutoff: Option<i64>,
    pub n_long: usize,
    pub n_short: usize,
    pub cost_rate: f64,
    pub steps_max: usize,
    pub deep_depth: usize,
    pub plateau_pop: PopulationKind,
    pub trees: usize,
    pub stumps: usize,
}

impl ExperimentConfig {
    /// Defaults for an experiment, as if run with no flags or file.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        resolve_config(
            experiment,
            &ConfigOverrides::default(),
            &ConfigOverrides::default(),
        )
        .expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: String| {
            Err(CliError::Usage(format!(
                "invalid config field {field}: {why}"
            )))
        };
        if self.n_seeds == 0 {
            return bad("seeds", "must be >= 1".into());
        }
        if self.n == 0 {
            return bad("n", "must be >= 1".into());
        }
        if self.mc_samples == 0 {
            return bad("mc", "must be >= 1".into());
        }
        use ExperimentKind::*;
        if matches!(self.experiment, SweepIterations | SweepDepth | Backtest) {
            if self.depths.is_empty() || self.depths.contains(&0) {
                return bad(
                    "depths",
                    format!("must be non-empty positive, got {:?}", self.depths),
                );
            }
            if self.m_list.is_empty() || self.m_list.contains(&0) {
                return bad(
                    "m_list",
                    format!("must be non-empty positive, got {:?}", self.m_list),
                );
            }
        }
        if self.experiment == StumpPlateau {
            if self.steps_max == 0 {
                return bad("steps_max", "must be >= 1".into());
            }
            if self.deep_depth < 2 {
                return bad("deep_depth", "companion depth must be >= 2".into());
            }
        }
        if self.experiment == Backtest {
            if self.n_long == 0 {
                return bad("n_long", "must be >= 1".into());
            }
            if self.cost_rate < 0.0 {
                return bad("cost_rate", "must be >= 0".into());
            }
        }
        if matches!(self.experiment, Backtest | SynthPanel) {
            if self.factors < 3 {
                return bad("factors", "need >= 3 factors".into());
            }
            if self.months < 2 || self.stocks < 2 {
                return bad("months", "need >= 2 months and >= 2 stocks".into());
            }
            if let Some(c) = self.cutoff {
                if c < 1 || c >= self.months as i64 {
                    return bad("cutoff", format!("must lie in [1, months), got {c}"));
                }
            }
        }
        Ok(())
    }

    /// Canonical one-line rendering; the replay hash is over this string.
    pub fn canonical_string(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "experiment={} seed={} seeds={} n={} mc={} depths={} m_list={} panel={} months={} stocks={} factors={} cutoff={} n_long={} n_short={} cost_rate={} steps_max={} deep_depth={} pop={} trees={} stumps={}",
            self.experiment.name(),
            self.global_seed,
            self.n_seeds,
            self.n,
            self.mc_samples,
            list(&self.depths),
            list(&self.m_list),
            self.panel
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
            self.months,
            self.stocks,
            self.factors,
            self.cutoff
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
            self.n_long,
            self.n_short,
            self.cost_rate,
            self.steps_max,
            self.deep_depth,
            self.plateau_pop,
            self.trees,
            self.stumps
        )
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [hash {}]", self.canonical_string(), self.config_hash())
    }
}

/// Run an experiment, writing its output files under `out_dir`. Returns the
/// list of files written.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| {
        CliError::Data(format!(
            "cannot create output directory {}: {e}",
            config.out_dir.display()
        ))
    })?;
    println!("resolved config: {config}");
    let go = || -> Result<Vec<PathBuf>, CliError> {
        use ExperimentKind::*;
        match config.experiment {
            ToyComparison => experiments::run_toy(config),
            SweepIterations => experiments::run_sweep_m(config),
            SweepDepth => experiments::run_sweep_depth(config),
            XorCertify => experiments::run_xor_certify(config),
            ComonotoneCertify => experiments::run_comono_certify(config),
            StumpPlateau => experiments::run_plateau(config),
            Backtest => experiments::run_backtest(config),
            SynthPanel => experiments::run_synth_panel(config),
        }
    };
    match config.workers {
        None => go(),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("workers: {e}")))?;
            pool.install(go)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ConfigOverrides {
            n: Some(500),
            ..Default::default()
        };
        let flags = ConfigOverrides {
            n: Some(200),
            ..Default::default()
        };
        let cfg = resolve_config(ExperimentKind::ToyComparison, &flags, &file).unwrap();
        assert_eq!(cfg.n, 200);
        let cfg =
            resolve_config(ExperimentKind::ToyComparison, &ConfigOverrides::default(), &file).unwrap();
        assert_eq!(cfg.n, 500);
    }

    #[test]
    fn toy_defaults_match_documentation() {
        let cfg = ExperimentConfig::defaults(ExperimentKind::ToyComparison);
        assert_eq!(cfg.n, 500);
        assert_eq!(cfg.mc_samples, 100_000);
        assert_eq!(cfg.n_seeds, 20);
        assert_eq!(cfg.global_seed, 42);
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let dir = std::env::temp_dir().join(format!("ionboost-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "depthz = [1, 2]\n").unwrap();
        match parse_config_file(&path) {
            Err(CliError::Usage(msg)) => {
                assert!(msg.contains("depthz"), "{msg}");
                assert!(msg.contains("did you mean `depths`"), "{msg}");
            }
            other => panic!("expected usage error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn conflicting_experiment_reports_both_sources() {
        let file = ConfigOverrides {
            experiment: Some("sweep-m".into()),
            ..Default::default()
        };
        match resolve_config(ExperimentKind::ToyComparison, &ConfigOverrides::default(), &file) {
            Err(CliError::Usage(msg)) => {
                assert!(msg.contains("toy"), "{msg}");
                assert!(msg.contains("sweep-m"), "{msg}");
            }
            other => panic!("expected conflict error, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_is_a_usage_error() {
        let dir = std::env::temp_dir().join(format!("ionboost-cfg2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "n = \"five hundred\"\n").unwrap();
        match parse_config_file(&path) {
            Err(CliError::Usage(msg)) => assert!(msg.contains('n'), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::defaults(ExperimentKind::ToyComparison);
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.global_seed = 43;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::SweepIterations);
        cfg.m_list.clear();
        match cfg.validate() {
            Err(CliError::Usage(msg)) => assert!(msg.contains("m_list"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
    }
}
