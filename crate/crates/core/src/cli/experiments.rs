//! The experiment implementations behind the CLI subcommands.
//!
//! Each writer sorts its rows deterministically and prefixes the file with
//! the replay header, so reruns with the same config are byte-identical.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::{CliError, ExperimentConfig};
use crate::backtest::{
    auc, generate_synthetic_panel, label_cross_section, load_panel, performance_summary,
    preprocess, run_strategy, split_by_month, LabeledPanel, StrategyConfig, StrategyMode,
};
use crate::boost::{fit_adaboost, BoostConfig};
use crate::counterexample::{
    agreement_with_xor_f64, check_comonotonic, decompose_stump_ensemble, exact_agreement_with_xor,
    random_stump_ensemble, random_tree, stump_boost_plateau, GridClassifier,
};
use crate::ion::{bayes_test_error, estimate_ion, estimate_ion_staged, MethodSpec};
use crate::population::{Population, PopulationKind};
use crate::seed::{derive_seed, rng_for};
use crate::tree::explicit_xor2_tree;

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

/// Write one output file: replay header, column header, then rows.
fn write_csv(
    config: &ExperimentConfig,
    name: &str,
    columns: &str,
    rows: &[String],
) -> Result<PathBuf, CliError> {
    let path = config.out_dir.join(name);
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "# config_hash={}", config.config_hash())?;
        writeln!(w, "# {}", config.canonical_string())?;
        writeln!(w, "{columns}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    };
    emit(&mut w).map_err(data_err)?;
    Ok(path)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-seed reports for the three toy methods, averaged into a table that
/// mirrors the (method, ION, training error, test error) layout.
pub fn run_toy(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let pop = Population::new(PopulationKind::HalfPlane2d, 0.1).expect("valid toy population");
    let ada = MethodSpec::AdaBoost(BoostConfig::new(50, 4));
    let per_seed: Vec<(f64, crate::ion::IonReport, crate::ion::IonReport)> = (0..config.n_seeds)
        .into_par_iter()
        .map(|idx| {
            let sample_seed = derive_seed(config.global_seed, "toy-sample", idx as u64);
            let mc_seed = derive_seed(config.global_seed, "toy-mc", idx as u64);
            let (t, _) = pop.sample(config.n, sample_seed);
            let bayes = bayes_test_error(&pop, config.mc_samples, mc_seed);
            let nn = estimate_ion(&MethodSpec::OneNn, &pop, &t, config.mc_samples, mc_seed)
                .expect("toy estimation");
            let ab =
                estimate_ion(&ada, &pop, &t, config.mc_samples, mc_seed).expect("toy estimation");
            (bayes, nn, ab)
        })
        .collect();

    let mut detail = Vec::with_capacity(config.n_seeds * 2);
    for (idx, (_, nn, ab)) in per_seed.iter().enumerate() {
        let seed = derive_seed(config.global_seed, "toy-sample", idx as u64);
        detail.push(nn.csv_row("1nn", "half_plane_2d", config.n, seed));
        detail.push(ab.csv_row(&ada.name(), "half_plane_2d", config.n, seed));
    }
    let reports = write_csv(
        config,
        "toy_reports.csv",
        crate::ion::IonReport::csv_header(),
        &detail,
    )?;

    let bayes_err = mean(&per_seed.iter().map(|r| r.0).collect::<Vec<_>>());
    let agg = |f: &dyn Fn(&crate::ion::IonReport) -> f64, pick_nn: bool| -> f64 {
        mean(
            &per_seed
                .iter()
                .map(|(_, nn, ab)| f(if pick_nn { nn } else { ab }))
                .collect::<Vec<_>>(),
        )
    };
    let rows = vec![
        format!("bayes,,,{bayes_err}"),
        format!(
            "1nn,{},{},{}",
            agg(&|r| r.ion_hat, true),
            agg(&|r| r.training_error, true),
            agg(&|r| r.test_error_hat, true)
        ),
        format!(
            "adaboost_d4_m50,{},{},{}",
            agg(&|r| r.ion_hat, false),
            agg(&|r| r.training_error, false),
            agg(&|r| r.test_error_hat, false)
        ),
    ];
    let table = write_csv(
        config,
        "toy_table.csv",
        "method,ion,training_error,test_error",
        &rows,
    )?;
    Ok(vec![table, reports])
}

fn staged_means(
    config: &ExperimentConfig,
    depth: usize,
    n_steps: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pop = Population::new(PopulationKind::Parity6d, 0.1).expect("valid sweep population");
    let cfg = BoostConfig::new(n_steps, depth);
    let curves: Vec<crate::ion::StagedCurves> = (0..config.n_seeds)
        .into_par_iter()
        .map(|idx| {
            let sample_seed = derive_seed(config.global_seed, "sweep-sample", idx as u64);
            let mc_seed = derive_seed(config.global_seed, "sweep-mc", idx as u64);
            let (t, _) = pop.sample(config.n, sample_seed);
            estimate_ion_staged(&cfg, &pop, &t, config.mc_samples, mc_seed)
                .expect("sweep estimation")
        })
        .collect();
    let avg = |get: &dyn Fn(&crate::ion::StagedCurves) -> &Vec<f64>| -> Vec<f64> {
        (0..n_steps)
            .map(|m| mean(&curves.iter().map(|c| get(c)[m]).collect::<Vec<_>>()))
            .collect()
    };
    (
        avg(&|c| &c.train_error),
        avg(&|c| &c.test_error),
        avg(&|c| &c.ion),
    )
}

/// Iteration sweep on the 6-d parity population at fixed depth.
pub fn run_sweep_m(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let depth = config.depths[0];
    let max_m = *config.m_list.iter().max().expect("validated non-empty");
    let (train, test, ion) = staged_means(config, depth, max_m);
    let mut ms = config.m_list.clone();
    ms.sort_unstable();
    ms.dedup();
    let rows: Vec<String> = ms
        .iter()
        .map(|&m| format!("{m},{},{},{}", train[m - 1], test[m - 1], ion[m - 1]))
        .collect();
    let path = write_csv(
        config,
        "sweep_m.csv",
        "m,training_error,test_error,ion",
        &rows,
    )?;
    Ok(vec![path])
}

/// Depth sweep on the 6-d parity population at fixed iteration count.
pub fn run_sweep_depth(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = *config.m_list.iter().max().expect("validated non-empty");
    let mut depths = config.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let rows: Vec<String> = depths
        .iter()
        .map(|&d| {
            let (train, test, ion) = staged_means(config, d, m);
            format!("{d},{},{},{}", train[m - 1], test[m - 1], ion[m - 1])
        })
        .collect();
    let path = write_csv(
        config,
        "sweep_depth.csv",
        "depth,training_error,test_error,ion",
        &rows,
    )?;
    Ok(vec![path])
}

/// Exact-agreement certification of depth-capped trees against the
/// next-order XOR, plus the explicit XOR tree as a positive control.
pub fn run_xor_certify(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for &k in &[1usize, 2, 3] {
        for t_idx in 0..config.trees {
            let seed = derive_seed(config.global_seed, &format!("xor-tree-k{k}"), t_idx as u64);
            let tree = random_tree(k + 1, k, seed);
            let grid = GridClassifier::from_tree(&tree).map_err(data_err)?;
            let agreement = agreement_with_xor_f64(&grid, k + 1).map_err(data_err)?;
            let exact = exact_agreement_with_xor(&grid, k + 1).map_err(data_err)?;
            let exact_half = exact
                == num_rational::BigRational::new(1.into(), 2.into());
            rows.push(format!(
                "depth_le_{k}_vs_xor_{},{t_idx},{},{agreement},{exact_half}",
                k + 1,
                tree.depth()
            ));
        }
    }
    let control = GridClassifier::from_tree(&explicit_xor2_tree()).map_err(data_err)?;
    let control_agreement = agreement_with_xor_f64(&control, 2).map_err(data_err)?;
    rows.push(format!(
        "explicit_xor2_tree_vs_xor_2,0,2,{control_agreement},false"
    ));
    let path = write_csv(
        config,
        "xor_agreement.csv",
        "case,tree_index,tree_depth,agreement,exact_half",
        &rows,
    )?;
    Ok(vec![path])
}

/// Stump-ensemble decomposition and comonotonicity certification, plus the
/// three non-comonotonic geometries with printed witnesses.
pub fn run_comono_certify(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for idx in 0..config.stumps {
        let seed = derive_seed(config.global_seed, "comono-ensemble", idx as u64);
        let ens = random_stump_ensemble(2, 12, seed);
        let form = decompose_stump_ensemble(&ens).map_err(data_err)?;
        let mut rng = rng_for(config.global_seed, "comono-probe", idx as u64);
        let mut x = [0.0f64; 2];
        let mut max_err = 0.0f64;
        let pop = Population::new(PopulationKind::HalfPlane2d, 0.0).expect("probe population");
        for _ in 0..1000 {
            pop.sample_x(&mut rng, &mut x);
            let err = (form.evaluate(&x) - ens.predict_margin(&x)).abs();
            if err > max_err {
                max_err = err;
            }
        }
        let grid = GridClassifier::from_ensemble(&ens).map_err(data_err)?;
        let verdict = check_comonotonic(&grid);
        rows.push(format!(
            "stump_ensemble,{idx},{max_err},{},,",
            verdict.is_comonotonic
        ));
    }

    let mut geometry = |name: &str, grid: GridClassifier| {
        let verdict = check_comonotonic(&grid);
        match &verdict.witness {
            Some(w) => {
                println!("{name}: NOT comonotonic; witness {w}");
                rows.push(format!(
                    "{name},0,,{},{},{}",
                    verdict.is_comonotonic, w.axis, w.boundary
                ));
            }
            None => {
                println!("{name}: comonotonic");
                rows.push(format!("{name},0,,{},,", verdict.is_comonotonic));
            }
        }
    };
    geometry(
        "xor2_grid",
        GridClassifier::from_tree(&explicit_xor2_tree()).map_err(data_err)?,
    );
    let ring = Population::new(PopulationKind::Ring2d, 0.0).expect("ring population");
    geometry("ring_grid", GridClassifier::rasterize(&ring, 40).map_err(data_err)?);
    let diag = Population::new(PopulationKind::Diagonal2d, 0.0).expect("diagonal population");
    geometry(
        "diagonal_grid",
        GridClassifier::rasterize(&diag, 40).map_err(data_err)?,
    );

    let path = write_csv(
        config,
        "comono.csv",
        "case,index,margin_reconstruction_max_abs_err,is_comonotonic,witness_axis,witness_boundary",
        &rows,
    )?;
    Ok(vec![path])
}

/// Stump-vs-deep test error curves on a non-comonotonic population.
pub fn run_plateau(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let pop = Population::new(config.plateau_pop, 0.0)
        .map_err(|e| CliError::Usage(format!("pop: {e}")))?;
    let curve = stump_boost_plateau(
        &pop,
        config.n,
        config.steps_max,
        config.deep_depth,
        config.mc_samples,
        config.global_seed,
    )
    .map_err(data_err)?;
    let rows: Vec<String> = (0..config.steps_max)
        .map(|m| {
            format!(
                "{},{},{}",
                m + 1,
                curve.stump_test_error[m],
                curve.deep_test_error[m]
            )
        })
        .collect();
    let path = write_csv(
        config,
        "plateau.csv",
        "m,stump_test_error,deep_test_error",
        &rows,
    )?;
    Ok(vec![path])
}

struct GridCell {
    depth: usize,
    m: usize,
    train_auc: f64,
    train_err: f64,
    test_auc: f64,
    test_err: f64,
}

fn margins_for(ens: &crate::boost::BoostedEnsemble, panel: &LabeledPanel) -> Vec<f64> {
    panel
        .panel
        .rows
        .iter()
        .map(|r| {
            let x: Vec<f64> = r.factors.iter().map(|f| f.unwrap_or(0.0)).collect();
            ens.predict_margin(&x)
        })
        .collect()
}

fn error_rate(margins: &[f64], labels: &[crate::population::Label]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .filter(|(m, &l)| crate::population::sign(**m) != l)
        .count() as f64
        / labels.len() as f64
}

/// Hyperparameter grid plus strategy simulation on a factor panel
/// (synthetic unless `--panel` points at a CSV).
pub fn run_backtest(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let raw = match &config.panel {
        Some(path) => load_panel(path).map_err(data_err)?,
        None => generate_synthetic_panel(
            config.months,
            config.stocks,
            config.factors,
            derive_seed(config.global_seed, "panel", 0),
        )
        .map_err(data_err)?,
    };
    let (clean, report) = preprocess(&raw).map_err(data_err)?;
    if !report.dropped_columns.is_empty() || report.filled_cells > 0 {
        println!(
            "preprocess: dropped columns {:?}, filled {} cells, dropped {} untradable rows",
            report.dropped_columns, report.filled_cells, report.dropped_untradable_rows
        );
    }
    let labeled = label_cross_section(&clean).map_err(data_err)?;
    let months = labeled.panel.months();
    let cutoff = config
        .cutoff
        .unwrap_or_else(|| months[(months.len() * 7 / 10).saturating_sub(1)]);
    let (train, test) = split_by_month(&labeled, cutoff).map_err(data_err)?;
    let train_set = train.to_training_set().map_err(data_err)?;

    // Depth x iterations hyperparameter grid; shrinkage 0.1 is this
    // pipeline's convention for panel fits.
    let mut grid_tasks = Vec::new();
    for &depth in &config.depths {
        for &m in &config.m_list {
            grid_tasks.push((depth, m));
        }
    }
    let mut cells: Vec<GridCell> = grid_tasks
        .par_iter()
        .map(|&(depth, m)| {
            let cfg = BoostConfig::new(m, depth).with_learning_rate(0.1);
            let ens = fit_adaboost(&train_set, &cfg).expect("non-empty training split");
            let train_margins = margins_for(&ens, &train);
            let test_margins = margins_for(&ens, &test);
            GridCell {
                depth,
                m,
                train_auc: auc(&train_margins, &train.labels).unwrap_or(f64::NAN),
                train_err: error_rate(&train_margins, &train.labels),
                test_auc: auc(&test_margins, &test.labels).unwrap_or(f64::NAN),
                test_err: error_rate(&test_margins, &test.labels),
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.depth, c.m));
    let rows: Vec<String> = cells
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{},{}",
                c.depth, c.m, c.train_auc, c.train_err, c.test_auc, c.test_err
            )
        })
        .collect();
    let grid_path = write_csv(
        config,
        "auc_grid.csv",
        "max_depth,n_steps,train_auc,train_err,test_auc,test_err",
        &rows,
    )?;

    // Pick the best in-sample cell (highest train AUC; ties toward the
    // simpler model), retrain, and simulate both strategy modes.
    let best = cells
        .iter()
        .max_by(|a, b| {
            a.train_auc
                .partial_cmp(&b.train_auc)
                .unwrap()
                .then_with(|| b.depth.cmp(&a.depth))
                .then_with(|| b.m.cmp(&a.m))
        })
        .expect("non-empty grid");
    println!(
        "selected model: max_depth={} n_steps={} (train AUC {:.4})",
        best.depth, best.m, best.train_auc
    );
    let ens = fit_adaboost(
        &train_set,
        &BoostConfig::new(best.m, best.depth).with_learning_rate(0.1),
    )
    .expect("non-empty training split");

    let ls_cfg = StrategyConfig {
        n_long: config.n_long,
        n_short: config.n_short,
        cost_rate: config.cost_rate,
        mode: StrategyMode::LongShort,
    };
    let lo_cfg = StrategyConfig {
        mode: StrategyMode::LongOnly,
        ..ls_cfg.clone()
    };
    let ls = run_strategy(&ens, &test, &ls_cfg).map_err(data_err)?;
    let lo = run_strategy(&ens, &test, &lo_cfg).map_err(data_err)?;

    let equity_rows: Vec<String> = ls
        .months
        .iter()
        .map(|m| format!("{},{},{},{}", m.month_id, m.gross_return, m.net_return, m.equity))
        .collect();
    let equity_path = write_csv(
        config,
        "equity_curve.csv",
        "month_id,gross,net,equity",
        &equity_rows,
    )?;

    let ls_summary = performance_summary(&ls.net_returns()).map_err(data_err)?;
    let lo_summary = performance_summary(&lo.net_returns()).map_err(data_err)?;
    let summary_rows = vec![
        format!("long_short,{}", ls_summary.csv_row()),
        format!("long_only,{}", lo_summary.csv_row()),
    ];
    let summary_path = write_csv(
        config,
        "summary.csv",
        "mode,win_rate,sharpe,avg_return,std,max_drawdown",
        &summary_rows,
    )?;
    Ok(vec![grid_path, equity_path, summary_path])
}

/// Emit a synthetic panel in the input CSV schema (loadable back; the
/// replay header lines start with `#` and are skipped by the loader).
pub fn run_synth_panel(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let panel = generate_synthetic_panel(
        config.months,
        config.stocks,
        config.factors,
        derive_seed(config.global_seed, "panel", 0),
    )
    .map_err(data_err)?;
    let mut body = Vec::new();
    panel.write_csv(&mut body).map_err(data_err)?;
    let path = config.out_dir.join("panel.csv");
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# config_hash={}", config.config_hash()).map_err(data_err)?;
    writeln!(w, "# {}", config.canonical_string()).map_err(data_err)?;
    w.write_all(&body).map_err(data_err)?;
    Ok(vec![path])
}
