//! Equal-weighted long-only / long-short strategy simulation and
//! performance metrics.
//!
//! Per test month, stocks rank by ensemble margin; the top `n_long` are
//! held long equal-weight and (in long-short mode) the bottom `n_short`
//! short equal-weight. The long-short gross return is `mean(long) -
//! mean(short)`, the dollar-neutral unit-gross-per-leg convention. Costs
//! charge `cost_rate` per fully replaced name fraction per leg, with month
//! one counting as a full entry.

use std::collections::HashSet;

use thiserror::Error;

use crate::backtest::panel::{LabeledPanel, PanelError};
use crate::boost::BoostedEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyMode {
    LongOnly,
    LongShort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub n_long: usize,
    pub n_short: usize,
    /// Cost per fully replaced name fraction per leg (0.0015 = 15 bps).
    pub cost_rate: f64,
    pub mode: StrategyMode,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            n_long: 50,
            n_short: 50,
            cost_rate: 0.0015,
            mode: StrategyMode::LongShort,
        }
    }
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("n_long must be >= 1")]
    NoLongLeg,
    #[error("cost_rate must be >= 0")]
    NegativeCost,
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("need at least 2 monthly returns, got {0}")]
    TooFewMonths(usize),
}

/// One month of simulated strategy activity.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthRecord {
    pub month_id: i64,
    pub gross_return: f64,
    pub net_return: f64,
    /// Compounded equity after this month, starting from 1.0.
    pub equity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub months: Vec<MonthRecord>,
}

impl StrategyResult {
    pub fn net_returns(&self) -> Vec<f64> {
        self.months.iter().map(|m| m.net_return).collect()
    }
}

/// Strategy metrics over monthly returns: win rate, annualized mean and
/// standard deviation (sample, n-1), Sharpe at zero risk-free rate, and the
/// maximum peak-to-trough drawdown of the compounded equity curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSummary {
    pub win_rate: f64,
    pub sharpe: f64,
    pub avg_return: f64,
    pub std: f64,
    pub max_drawdown: f64,
}

impl PerformanceSummary {
    pub fn csv_header() -> &'static str {
        "win_rate,sharpe,avg_return,std,max_drawdown"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.win_rate, self.sharpe, self.avg_return, self.std, self.max_drawdown
        )
    }
}

/// Simulate the strategy on contiguous test months.
///
/// Margin ties rank by ticker so holdings are deterministic. Errors if any
/// month has fewer stocks than the active legs need.
pub fn run_strategy(
    ens: &BoostedEnsemble,
    test: &LabeledPanel,
    cfg: &StrategyConfig,
) -> Result<StrategyResult, StrategyError> {
    if cfg.n_long == 0 {
        return Err(StrategyError::NoLongLeg);
    }
    if cfg.cost_rate < 0.0 {
        return Err(StrategyError::NegativeCost);
    }
    let n_short = match cfg.mode {
        StrategyMode::LongOnly => 0,
        StrategyMode::LongShort => cfg.n_short,
    };
    let months = test.panel.months();
    let mut records = Vec::with_capacity(months.len());
    let mut equity = 1.0f64;
    let mut prev_long: Option<HashSet<String>> = None;
    let mut prev_short: Option<HashSet<String>> = None;

    for m in months {
        let mut scored: Vec<(usize, f64)> = test
            .panel
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.month_id == m)
            .map(|(i, r)| {
                let factors: Vec<f64> = r.factors.iter().map(|f| f.unwrap_or(0.0)).collect();
                (i, ens.predict_margin(&factors))
            })
            .collect();
        let needed = cfg.n_long + n_short;
        if scored.len() < needed {
            return Err(StrategyError::Panel(PanelError::MonthTooSmall {
                month_id: m,
                count: scored.len(),
                needed,
            }));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| test.panel.rows[a.0].ticker.cmp(&test.panel.rows[b.0].ticker))
        });
        let long: Vec<usize> = scored[..cfg.n_long].iter().map(|&(i, _)| i).collect();
        let short: Vec<usize> = if n_short > 0 {
            scored[scored.len() - n_short..]
                .iter()
                .map(|&(i, _)| i)
                .collect()
        } else {
            Vec::new()
        };

        let mean_ret = |ids: &[usize]| -> f64 {
            ids.iter()
                .map(|&i| test.panel.rows[i].next_return)
                .sum::<f64>()
                / ids.len() as f64
        };
        let gross = match cfg.mode {
            StrategyMode::LongOnly => mean_ret(&long),
            StrategyMode::LongShort => mean_ret(&long) - mean_ret(&short),
        };

        let names = |ids: &[usize]| -> HashSet<String> {
            ids.iter()
                .map(|&i| test.panel.rows[i].ticker.clone())
                .collect()
        };
        let long_names = names(&long);
        let short_names = names(&short);
        let turnover = |current: &HashSet<String>, prev: &Option<HashSet<String>>| -> f64 {
            if current.is_empty() {
                return 0.0;
            }
            match prev {
                // Month one is a full entry.
                None => 1.0,
                Some(p) => {
                    let changed = current.difference(p).count();
                    changed as f64 / current.len() as f64
                }
            }
        };
        let cost =
            cfg.cost_rate * (turnover(&long_names, &prev_long) + turnover(&short_names, &prev_short));
        let net = gross - cost;
        equity *= 1.0 + net;
        records.push(MonthRecord {
            month_id: m,
            gross_return: gross,
            net_return: net,
            equity,
        });
        prev_long = Some(long_names);
        prev_short = Some(short_names);
    }
    Ok(StrategyResult { months: records })
}

/// Metrics over a monthly return series. Annualization is arithmetic:
/// mean x 12, std x sqrt(12). Zero variance reports Sharpe as +/-infinity
/// (the documented sentinel).
pub fn performance_summary(monthly_returns: &[f64]) -> Result<PerformanceSummary, StrategyError> {
    let n = monthly_returns.len();
    if n < 2 {
        return Err(StrategyError::TooFewMonths(n));
    }
    let nf = n as f64;
    let win_rate = monthly_returns.iter().filter(|&&r| r > 0.0).count() as f64 / nf;
    let mean = monthly_returns.iter().sum::<f64>() / nf;
    // An all-equal series is exactly the documented zero-variance case;
    // detecting it by equality avoids reporting accumulated rounding dust
    // as a tiny standard deviation.
    let degenerate = monthly_returns.windows(2).all(|w| w[0] == w[1]);
    let monthly_std = if degenerate {
        0.0
    } else {
        (monthly_returns
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / (nf - 1.0))
            .sqrt()
    };
    let avg_return = mean * 12.0;
    let std = monthly_std * 12.0f64.sqrt();
    let sharpe = if std == 0.0 {
        if avg_return >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        avg_return / std
    };
    // Max drawdown over the compounded curve, peak seeded at the initial
    // equity of 1.
    let mut equity = 1.0f64;
    let mut peak = 1.0f64;
    let mut max_drawdown = 0.0f64;
    for r in monthly_returns {
        equity *= 1.0 + r;
        if equity > peak {
            peak = equity;
        }
        let dd = (peak - equity) / peak;
        if dd > max_drawdown {
            max_drawdown = dd;
        }
    }
    Ok(PerformanceSummary {
        win_rate,
        sharpe,
        avg_return,
        std,
        max_drawdown,
    })
}
