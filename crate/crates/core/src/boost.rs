//! AdaBoost.M1 over decision-tree base learners.
//!
//! Stage m fits a tree to the weighted sample, computes the weighted error
//! `err_m`, the log odds `alpha_m = ln((1 - err_m)/err_m)`, and multiplies
//! the weights of misclassified points by `exp(nu * alpha_m)`. The ensemble
//! margin is `sum_m nu * alpha_m * g_m(x)` and the classifier is its sign
//! (exactly 0 maps to +1). `nu = 1` is the unshrunk algorithm; smaller
//! values shrink both the weight update and the margin accumulation.

use std::fmt::Write as _;

use thiserror::Error;

use crate::population::{sign, Label, TrainingSet};
use crate::tree::{fit_tree, DecisionTree, TreeError};

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("parse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    /// Number of boosting iterations M.
    pub n_steps: usize,
    /// Depth budget of each base tree.
    pub max_depth: usize,
    /// Shrinkage nu in (0, 1]; multiplies alpha in both the weight update
    /// and the margin.
    pub learning_rate: f64,
    /// Weighted errors are clipped into [eps, 1 - eps] before the log odds
    /// so alpha stays finite.
    pub err_clip_epsilon: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_steps: 50,
            max_depth: 4,
            learning_rate: 1.0,
            err_clip_epsilon: 1e-10,
        }
    }
}

impl BoostConfig {
    pub fn new(n_steps: usize, max_depth: usize) -> Self {
        BoostConfig {
            n_steps,
            max_depth,
            ..Default::default()
        }
    }

    pub fn with_learning_rate(mut self, nu: f64) -> Self {
        self.learning_rate = nu;
        self
    }

    pub fn validate(&self) -> Result<(), BoostError> {
        if self.n_steps == 0 {
            return Err(BoostError::InvalidConfig("n_steps must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(BoostError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(BoostError::InvalidConfig(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.err_clip_epsilon > 0.0 && self.err_clip_epsilon < 0.5) {
            return Err(BoostError::InvalidConfig(format!(
                "err_clip_epsilon must lie in (0, 0.5), got {}",
                self.err_clip_epsilon
            )));
        }
        Ok(())
    }
}

/// One boosting stage: the fitted base tree and its log-odds coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostStage {
    pub alpha: f64,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    stages: Vec<BoostStage>,
    config: BoostConfig,
    /// Training error of the sign of the accumulated margin after each
    /// stage.
    train_error_curve: Vec<f64>,
    dimension: usize,
}

/// Run AdaBoost.M1 on `t`.
///
/// Early termination (not an error): a stage with unclipped weighted error 0
/// is recorded with clipped alpha and boosting stops; a stage with unclipped
/// error >= 0.5 after the first is discarded and boosting stops.
pub fn fit_adaboost(t: &TrainingSet, cfg: &BoostConfig) -> Result<BoostedEnsemble, BoostError> {
    cfg.validate()?;
    let n = t.len();
    if n == 0 {
        return Err(BoostError::Tree(TreeError::EmptyTrainingSet));
    }
    let nu = cfg.learning_rate;
    let mut weights = vec![1.0 / n as f64; n];
    let mut margins = vec![0.0f64; n];
    let mut stages: Vec<BoostStage> = Vec::with_capacity(cfg.n_steps);
    let mut curve: Vec<f64> = Vec::with_capacity(cfg.n_steps);
    let mut predictions: Vec<Label> = vec![0; n];

    for _m in 0..cfg.n_steps {
        let tree = fit_tree(t, &weights, cfg.max_depth)?;
        for i in 0..n {
            predictions[i] = tree.predict(t.point(i));
        }
        let weight_sum: f64 = weights.iter().sum();
        let err_mass: f64 = (0..n)
            .filter(|&i| predictions[i] != t.label(i))
            .map(|i| weights[i])
            .sum();
        let err_raw = err_mass / weight_sum;

        if err_raw >= 0.5 && !stages.is_empty() {
            break;
        }
        let err = err_raw.clamp(cfg.err_clip_epsilon, 1.0 - cfg.err_clip_epsilon);
        let alpha = ((1.0 - err) / err).ln();

        for i in 0..n {
            margins[i] += nu * alpha * f64::from(predictions[i]);
        }
        let train_error = (0..n)
            .filter(|&i| sign(margins[i]) != t.label(i))
            .count() as f64
            / n as f64;
        stages.push(BoostStage { alpha, tree });
        curve.push(train_error);

        if err_raw == 0.0 {
            break;
        }
        for i in 0..n {
            if predictions[i] != t.label(i) {
                weights[i] *= (nu * alpha).exp();
            }
        }
        // Renormalize so weights cannot overflow over long runs; fitting and
        // the error ratio are scale-invariant, so this changes nothing else.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    }

    Ok(BoostedEnsemble {
        stages,
        config: cfg.clone(),
        train_error_curve: curve,
        dimension: t.dimension(),
    })
}

impl BoostedEnsemble {
    /// Assemble an ensemble from explicit stages, mainly for synthetic
    /// ensembles in certification sweeps and tests. The train error curve is
    /// left empty.
    pub fn from_stages(stages: Vec<BoostStage>, config: BoostConfig, dimension: usize) -> Self {
        BoostedEnsemble {
            stages,
            config,
            train_error_curve: Vec::new(),
            dimension,
        }
    }

    pub fn stages(&self) -> &[BoostStage] {
        &self.stages
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn train_error_curve(&self) -> &[f64] {
        &self.train_error_curve
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The margin `sum_m nu * alpha_m * g_m(x)`.
    pub fn predict_margin(&self, x: &[f64]) -> f64 {
        let nu = self.config.learning_rate;
        self.stages
            .iter()
            .map(|s| nu * s.alpha * f64::from(s.tree.predict(x)))
            .sum()
    }

    /// Sign of the margin; exactly 0 maps to +1.
    pub fn predict_label(&self, x: &[f64]) -> Label {
        sign(self.predict_margin(x))
    }

    /// Label of every stage prefix `m = 1..=M`. The last entry equals
    /// [`BoostedEnsemble::predict_label`].
    pub fn staged_labels(&self, x: &[f64]) -> Vec<Label> {
        let nu = self.config.learning_rate;
        let mut margin = 0.0;
        self.stages
            .iter()
            .map(|s| {
                margin += nu * s.alpha * f64::from(s.tree.predict(x));
                sign(margin)
            })
            .collect()
    }

    /// True when the final classifier has zero training error on `t`.
    pub fn interpolates(&self, t: &TrainingSet) -> bool {
        (0..t.len()).all(|i| self.predict_label(t.point(i)) == t.label(i))
    }

    /// Text serialization: a config header, then one `stage <alpha>` line
    /// followed by the stage's tree in the tree text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "adaboost n_steps={} max_depth={} learning_rate={} err_clip_epsilon={} stages={}",
            self.config.n_steps,
            self.config.max_depth,
            self.config.learning_rate,
            self.config.err_clip_epsilon,
            self.stages.len()
        );
        for s in &self.stages {
            let _ = writeln!(out, "stage {}", s.alpha);
            out.push_str(&s.tree.to_text());
        }
        out
    }

    /// Parse the format written by [`BoostedEnsemble::to_text`]. The train
    /// error curve is a fitting byproduct and is not serialized; it parses
    /// back empty.
    pub fn from_text(text: &str) -> Result<Self, BoostError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| BoostError::Parse("empty".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("adaboost") {
            return Err(BoostError::Parse(format!("bad header: {header}")));
        }
        let mut kv = std::collections::HashMap::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| BoostError::Parse(format!("bad header field: {f}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| BoostError::Parse(format!("header missing {k}")))
        };
        let config = BoostConfig {
            n_steps: get("n_steps")?
                .parse()
                .map_err(|e| BoostError::Parse(format!("n_steps: {e}")))?,
            max_depth: get("max_depth")?
                .parse()
                .map_err(|e| BoostError::Parse(format!("max_depth: {e}")))?,
            learning_rate: get("learning_rate")?
                .parse()
                .map_err(|e| BoostError::Parse(format!("learning_rate: {e}")))?,
            err_clip_epsilon: get("err_clip_epsilon")?
                .parse()
                .map_err(|e| BoostError::Parse(format!("err_clip_epsilon: {e}")))?,
        };
        let n_stages: usize = get("stages")?
            .parse()
            .map_err(|e| BoostError::Parse(format!("stages: {e}")))?;

        let rest: Vec<&str> = lines.collect();
        let mut stages = Vec::with_capacity(n_stages);
        let mut at = 0usize;
        let mut dimension = 0usize;
        for _ in 0..n_stages {
            let stage_line = rest
                .get(at)
                .ok_or_else(|| BoostError::Parse("missing stage line".into()))?;
            let alpha: f64 = stage_line
                .strip_prefix("stage ")
                .ok_or_else(|| BoostError::Parse(format!("bad stage line: {stage_line}")))?
                .parse()
                .map_err(|e| BoostError::Parse(format!("alpha: {e}")))?;
            at += 1;
            // A tree block runs from its header to the line before the next
            // `stage ` line (or the end).
            let start = at;
            while at < rest.len() && !rest[at].starts_with("stage ") {
                at += 1;
            }
            let tree_text = rest[start..at].join("\n");
            let tree = DecisionTree::from_text(&tree_text)
                .map_err(|e| BoostError::Parse(e.to_string()))?;
            dimension = tree.dimension();
            stages.push(BoostStage { alpha, tree });
        }
        Ok(BoostedEnsemble {
            stages,
            config,
            train_error_curve: Vec::new(),
            dimension,
        })
    }
}
