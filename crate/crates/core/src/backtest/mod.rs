//! Cross-sectional factor pipeline: panel ingestion and preprocessing,
//! next-month-return labeling, AUC evaluation, and an equal-weighted
//! long/short strategy simulator with turnover-based transaction costs.

mod auc;
mod panel;
mod strategy;
mod synth;

pub use auc::{auc, AucError};
pub use panel::{
    label_cross_section, load_panel, load_panel_from, preprocess, split_by_month, FactorPanel,
    LabeledPanel, PanelError, PanelRow, PreprocessReport,
};
pub use strategy::{
    performance_summary, run_strategy, MonthRecord, PerformanceSummary, StrategyConfig,
    StrategyError, StrategyMode, StrategyResult,
};
pub use synth::{
    generate_synthetic_panel, generate_synthetic_panel_cfg, SynthError, SynthPanelConfig,
};
