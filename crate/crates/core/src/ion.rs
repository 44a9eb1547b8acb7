//! Monte Carlo estimation of the influence of noise (ION).
//!
//! ION of a method on a training set `T` is the probability, over fresh
//! draws of `X`, that the classifier trained on `T` disagrees with the
//! classifier trained on the purified set `T_p` (labels replaced by the
//! Bayes rule). Low ION means the method localizes the noise points.
//!
//! All estimates in one report share a single Monte Carlo X-stream: paired
//! comparisons ride on common random numbers. Evaluation fans out over
//! fixed-size chunks with per-chunk derived seeds, so the merged counts are
//! independent of worker count.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baseline::{fit_1nn, BaselineError, NearestNeighbor};
use crate::boost::{fit_adaboost, BoostConfig, BoostError, BoostedEnsemble};
use crate::population::{Label, Population, TrainingSet};
use crate::seed::rng_for;

const MC_CHUNK: usize = 8192;

#[derive(Debug, Error)]
pub enum IonError {
    #[error("mc_samples must be >= 1")]
    ZeroMcSamples,
    #[error("training set dimension {got} does not match population dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("probability {name} = {value} out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// A fully specified training procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    AdaBoost(BoostConfig),
    OneNn,
}

impl MethodSpec {
    pub fn name(&self) -> String {
        match self {
            MethodSpec::AdaBoost(cfg) => format!(
                "adaboost_d{}_m{}_lr{}",
                cfg.max_depth, cfg.n_steps, cfg.learning_rate
            ),
            MethodSpec::OneNn => "1nn".to_string(),
        }
    }

    pub fn train(&self, t: &TrainingSet) -> Result<TrainedModel, IonError> {
        match self {
            MethodSpec::AdaBoost(cfg) => Ok(TrainedModel::AdaBoost(fit_adaboost(t, cfg)?)),
            MethodSpec::OneNn => Ok(TrainedModel::OneNn(fit_1nn(t)?)),
        }
    }
}

/// A classifier produced by a [`MethodSpec`].
#[derive(Debug, Clone)]
pub enum TrainedModel {
    AdaBoost(BoostedEnsemble),
    OneNn(NearestNeighbor),
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            TrainedModel::AdaBoost(ens) => ens.predict_label(x),
            TrainedModel::OneNn(m) => m.predict(x),
        }
    }

    pub fn training_error(&self, t: &TrainingSet) -> f64 {
        let wrong = (0..t.len())
            .filter(|&i| self.predict(t.point(i)) != t.label(i))
            .count();
        wrong as f64 / t.len() as f64
    }
}

/// Monte Carlo estimates for one (method, training set) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IonReport {
    /// P_X{ f_T(X) != f_Tp(X) }.
    pub ion_hat: f64,
    /// P{ f_T(X) != Y } over fresh labeled draws.
    pub test_error_hat: f64,
    /// P_X{ f_T(X) != f_B(X) }.
    pub bayes_disagreement_hat: f64,
    /// Training error of f_T on T.
    pub training_error: f64,
    pub mc_samples: usize,
    /// 95% normal-approximation half width for `ion_hat`.
    pub half_width_95: f64,
}

impl IonReport {
    pub fn csv_header() -> &'static str {
        "method,pop,n,seed,ion_hat,test_error_hat,bayes_disagreement_hat,training_error,mc_samples,half_width_95"
    }

    pub fn csv_row(&self, method: &str, pop: &str, n: usize, seed: u64) -> String {
        format!(
            "{method},{pop},{n},{seed},{},{},{},{},{},{}",
            self.ion_hat,
            self.test_error_hat,
            self.bayes_disagreement_hat,
            self.training_error,
            self.mc_samples,
            self.half_width_95
        )
    }
}

/// Auxiliary disagreement estimated on the same stream; used by the
/// triangle-inequality diagnostics and method comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct IonDetail {
    pub report: IonReport,
    /// P_X{ f_Tp(X) != f_B(X) }: how far the purified-trained classifier is
    /// from the Bayes rule.
    pub purified_bayes_disagreement_hat: f64,
}

/// 95% half width of a binomial proportion estimate.
pub fn half_width_95(p_hat: f64, n: usize) -> f64 {
    1.96 * (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Monte Carlo standard error of a binomial proportion estimate.
pub fn standard_error(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// The Bayes-representation identity: with label noise independent of X,
/// test error = q + (1 - 2q) * P_X{ f != f_B } for any classifier f.
pub fn test_error_from_bayes_disagreement(q: f64, bayes_disagreement: f64) -> Result<f64, IonError> {
    if !(0.0..0.5).contains(&q) {
        return Err(IonError::OutOfRange {
            name: "q",
            value: q,
        });
    }
    if !(0.0..=1.0).contains(&bayes_disagreement) {
        return Err(IonError::OutOfRange {
            name: "bayes_disagreement",
            value: bayes_disagreement,
        });
    }
    Ok(q + (1.0 - 2.0 * q) * bayes_disagreement)
}

struct Counts {
    ion: u64,
    test_err: u64,
    bayes_dis: u64,
    purified_bayes_dis: u64,
}

/// Estimate ION and companions for `method` on `t` drawn from `pop`.
///
/// Trains `f_T` on `t` and `f_Tp` on the purified twin with the same method,
/// then evaluates both on `mc_samples` fresh draws.
pub fn estimate_ion(
    method: &MethodSpec,
    pop: &Population,
    t: &TrainingSet,
    mc_samples: usize,
    seed: u64,
) -> Result<IonReport, IonError> {
    estimate_ion_detailed(method, pop, t, mc_samples, seed).map(|d| d.report)
}

/// [`estimate_ion`] plus the purified-vs-Bayes disagreement on the same
/// stream.
pub fn estimate_ion_detailed(
    method: &MethodSpec,
    pop: &Population,
    t: &TrainingSet,
    mc_samples: usize,
    seed: u64,
) -> Result<IonDetail, IonError> {
    if mc_samples == 0 {
        return Err(IonError::ZeroMcSamples);
    }
    if t.dimension() != pop.dimension() {
        return Err(IonError::DimensionMismatch {
            expected: pop.dimension(),
            got: t.dimension(),
        });
    }
    let f_t = method.train(t)?;
    let f_tp = method.train(&pop.purify(t))?;
    let training_error = f_t.training_error(t);

    let n_chunks = mc_samples.div_ceil(MC_CHUNK);
    let totals = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(mc_samples - start);
            let mut rng = rng_for(seed, "ion-mc", chunk as u64);
            let mut x = vec![0.0f64; pop.dimension()];
            let mut c = Counts {
                ion: 0,
                test_err: 0,
                bayes_dis: 0,
                purified_bayes_dis: 0,
            };
            for _ in 0..len {
                pop.sample_x(&mut rng, &mut x);
                let theta = pop.bayes_label(&x);
                let y = if rng.gen::<f64>() < pop.bayes_error() {
                    -theta
                } else {
                    theta
                };
                let a = f_t.predict(&x);
                let b = f_tp.predict(&x);
                if a != b {
                    c.ion += 1;
                }
                if a != y {
                    c.test_err += 1;
                }
                if a != theta {
                    c.bayes_dis += 1;
                }
                if b != theta {
                    c.purified_bayes_dis += 1;
                }
            }
            c
        })
        .reduce(
            || Counts {
                ion: 0,
                test_err: 0,
                bayes_dis: 0,
                purified_bayes_dis: 0,
            },
            |a, b| Counts {
                ion: a.ion + b.ion,
                test_err: a.test_err + b.test_err,
                bayes_dis: a.bayes_dis + b.bayes_dis,
                purified_bayes_dis: a.purified_bayes_dis + b.purified_bayes_dis,
            },
        );

    let m = mc_samples as f64;
    let ion_hat = totals.ion as f64 / m;
    Ok(IonDetail {
        report: IonReport {
            ion_hat,
            test_error_hat: totals.test_err as f64 / m,
            bayes_disagreement_hat: totals.bayes_dis as f64 / m,
            training_error,
            mc_samples,
            half_width_95: half_width_95(ion_hat, mc_samples),
        },
        purified_bayes_disagreement_hat: totals.purified_bayes_dis as f64 / m,
    })
}

/// Ordered comparison of two methods on one training set, common random
/// numbers across the pair.
#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub report_a: IonReport,
    pub report_b: IonReport,
    /// ION(a) < ION(b)?
    pub a_ion_lower: bool,
    /// test error(a) < test error(b)?
    pub a_test_error_lower: bool,
}

pub fn compare_methods(
    a: &MethodSpec,
    b: &MethodSpec,
    pop: &Population,
    t: &TrainingSet,
    mc_samples: usize,
    seed: u64,
) -> Result<MethodComparison, IonError> {
    let ra = estimate_ion(a, pop, t, mc_samples, seed)?;
    let rb = estimate_ion(b, pop, t, mc_samples, seed)?;
    Ok(MethodComparison {
        a_ion_lower: ra.ion_hat < rb.ion_hat,
        a_test_error_lower: ra.test_error_hat < rb.test_error_hat,
        report_a: ra,
        report_b: rb,
    })
}

/// Per-prefix curves for one boosted pair: entry `m` holds the training
/// error, Monte Carlo test error, and ION of the classifier after `m + 1`
/// stages. Prefixes past an early-stopped ensemble reuse its final margin.
#[derive(Debug, Clone)]
pub struct StagedCurves {
    pub train_error: Vec<f64>,
    pub test_error: Vec<f64>,
    pub ion: Vec<f64>,
    pub mc_samples: usize,
}

/// Evaluate ION and test error for every stage prefix of an AdaBoost pair
/// trained on `t` and its purified twin, sharing one Monte Carlo stream.
///
/// Far cheaper than calling [`estimate_ion`] once per prefix: each ensemble
/// is trained once and every tree is evaluated once per Monte Carlo point.
pub fn estimate_ion_staged(
    cfg: &BoostConfig,
    pop: &Population,
    t: &TrainingSet,
    mc_samples: usize,
    seed: u64,
) -> Result<StagedCurves, IonError> {
    if mc_samples == 0 {
        return Err(IonError::ZeroMcSamples);
    }
    if t.dimension() != pop.dimension() {
        return Err(IonError::DimensionMismatch {
            expected: pop.dimension(),
            got: t.dimension(),
        });
    }
    let ens_t = fit_adaboost(t, cfg)?;
    let ens_tp = fit_adaboost(&pop.purify(t), cfg)?;
    let max_m = cfg.n_steps;
    let nu = cfg.learning_rate;

    // Training error per prefix: the recorded curve, extended flat if the
    // run stopped early.
    let mut train_error: Vec<f64> = ens_t.train_error_curve().to_vec();
    let last = *train_error.last().unwrap_or(&1.0);
    train_error.resize(max_m, last);

    let n_chunks = mc_samples.div_ceil(MC_CHUNK);
    let (ion_counts, err_counts) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(mc_samples - start);
            let mut rng = rng_for(seed, "ion-mc", chunk as u64);
            let mut x = vec![0.0f64; pop.dimension()];
            let mut ion = vec![0u64; max_m];
            let mut err = vec![0u64; max_m];
            for _ in 0..len {
                pop.sample_x(&mut rng, &mut x);
                let theta = pop.bayes_label(&x);
                let y = if rng.gen::<f64>() < pop.bayes_error() {
                    -theta
                } else {
                    theta
                };
                let mut margin_t = 0.0f64;
                let mut margin_tp = 0.0f64;
                for m in 0..max_m {
                    if let Some(s) = ens_t.stages().get(m) {
                        margin_t += nu * s.alpha * f64::from(s.tree.predict(&x));
                    }
                    if let Some(s) = ens_tp.stages().get(m) {
                        margin_tp += nu * s.alpha * f64::from(s.tree.predict(&x));
                    }
                    let lt = crate::population::sign(margin_t);
                    if lt != crate::population::sign(margin_tp) {
                        ion[m] += 1;
                    }
                    if lt != y {
                        err[m] += 1;
                    }
                }
            }
            (ion, err)
        })
        .reduce(
            || (vec![0u64; max_m], vec![0u64; max_m]),
            |(mut ia, mut ea), (ib, eb)| {
                for (a, b) in ia.iter_mut().zip(&ib) {
                    *a += b;
                }
                for (a, b) in ea.iter_mut().zip(&eb) {
                    *a += b;
                }
                (ia, ea)
            },
        );

    let m = mc_samples as f64;
    Ok(StagedCurves {
        train_error,
        test_error: err_counts.iter().map(|&c| c as f64 / m).collect(),
        ion: ion_counts.iter().map(|&c| c as f64 / m).collect(),
        mc_samples,
    })
}

/// Monte Carlo test error of the Bayes classifier itself on the shared
/// stream layout; converges to q and serves as the baseline row of the toy
/// comparison table.
pub fn bayes_test_error(pop: &Population, mc_samples: usize, seed: u64) -> f64 {
    assert!(mc_samples > 0);
    let n_chunks = mc_samples.div_ceil(MC_CHUNK);
    let wrong: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(mc_samples - start);
            let mut rng = rng_for(seed, "ion-mc", chunk as u64);
            let mut x = vec![0.0f64; pop.dimension()];
            let mut c = 0u64;
            for _ in 0..len {
                pop.sample_x(&mut rng, &mut x);
                // The Bayes prediction is theta; it errs exactly on flips.
                if rng.gen::<f64>() < pop.bayes_error() {
                    c += 1;
                }
            }
            c
        })
        .sum();
    wrong as f64 / mc_samples as f64
}

/// Monte Carlo test error of every stage prefix of one ensemble, padded to
/// `pad_to` entries with the final value (an early-stopped ensemble's
/// classifier no longer changes). Same chunked-stream scheme as
/// [`estimate_ion`], so results are worker-count independent.
pub fn staged_test_error(
    ens: &BoostedEnsemble,
    pop: &Population,
    pad_to: usize,
    mc_samples: usize,
    seed: u64,
) -> Vec<f64> {
    assert!(mc_samples > 0);
    let n_stages = ens.stages().len().max(1);
    let nu = ens.config().learning_rate;
    let n_chunks = mc_samples.div_ceil(MC_CHUNK);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(mc_samples - start);
            let mut rng = rng_for(seed, "ion-mc", chunk as u64);
            let mut x = vec![0.0f64; pop.dimension()];
            let mut err = vec![0u64; n_stages];
            for _ in 0..len {
                pop.sample_x(&mut rng, &mut x);
                let theta = pop.bayes_label(&x);
                let y = if rng.gen::<f64>() < pop.bayes_error() {
                    -theta
                } else {
                    theta
                };
                let mut margin = 0.0f64;
                for (m, s) in ens.stages().iter().enumerate() {
                    margin += nu * s.alpha * f64::from(s.tree.predict(&x));
                    if crate::population::sign(margin) != y {
                        err[m] += 1;
                    }
                }
                if ens.stages().is_empty() && crate::population::sign(0.0) != y {
                    err[0] += 1;
                }
            }
            err
        })
        .reduce(
            || vec![0u64; n_stages],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    let mut out: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / mc_samples as f64)
        .collect();
    let last = *out.last().unwrap();
    out.resize(pad_to.max(out.len()), last);
    out
}
