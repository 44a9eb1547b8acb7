//! Factor panel loading, preprocessing, labeling, and splitting.
//!
//! Input CSV schema (header required):
//! `month_id,ticker,tradable,next_return,f_<name1>,...,f_<nameK>`
//! with missing factor cells encoded as empty strings. `next_return` is the
//! return realized over the month FOLLOWING `month_id`.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::population::{Label, TrainingSet};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("factor columns must be prefixed `f_`, found `{0}`")]
    BadFactorColumn(String),
    #[error("duplicate (month_id, ticker) key: ({month_id}, {ticker})")]
    DuplicateKey { month_id: i64, ticker: String },
    #[error("row {row}, column `{column}`: unparseable value `{value}`")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("every factor column was dropped by preprocessing")]
    AllFactorsDropped,
    #[error("panel is empty after filtering")]
    EmptyPanel,
    #[error("month {month_id} has {count} stocks; need at least {needed}")]
    MonthTooSmall {
        month_id: i64,
        count: usize,
        needed: usize,
    },
    #[error("cutoff {cutoff} leaves an empty {side} split")]
    EmptySplit { cutoff: i64, side: &'static str },
    #[error("panel still has missing cells; run preprocess first")]
    MissingCells,
}

/// One stock-month observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub month_id: i64,
    pub ticker: String,
    pub tradable: bool,
    pub next_return: f64,
    /// Aligned with `FactorPanel::factor_names`; `None` marks a missing
    /// cell.
    pub factors: Vec<Option<f64>>,
}

/// Monthly cross-sectional factor data with unique (month, ticker) keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub factor_names: Vec<String>,
    pub rows: Vec<PanelRow>,
}

/// What preprocessing did: which factor columns were dropped for
/// missingness and how many cells were zero-filled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessReport {
    pub dropped_columns: Vec<String>,
    pub filled_cells: usize,
    pub dropped_untradable_rows: usize,
}

impl FactorPanel {
    pub fn months(&self) -> Vec<i64> {
        let mut m: Vec<i64> = self
            .rows
            .iter()
            .map(|r| r.month_id)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        m.sort_unstable();
        m
    }

    pub fn has_missing_cells(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.factors.iter().any(|f| f.is_none()))
    }

    /// Write in the input CSV schema.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<(), std::io::Error> {
        let mut header = vec![
            "month_id".to_string(),
            "ticker".to_string(),
            "tradable".to_string(),
            "next_return".to_string(),
        ];
        header.extend(self.factor_names.iter().map(|n| format!("f_{n}")));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let factors: Vec<String> = r
                .factors
                .iter()
                .map(|f| f.map(|v| format!("{v}")).unwrap_or_default())
                .collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.month_id,
                r.ticker,
                r.tradable,
                r.next_return,
                factors.join(",")
            )?;
        }
        Ok(())
    }
}

/// Load and validate a panel CSV. Leading lines starting with `#` (replay
/// headers written by the experiment runner) are skipped.
pub fn load_panel(path: &Path) -> Result<FactorPanel, PanelError> {
    let file = std::fs::File::open(path)?;
    load_panel_from(file)
}

pub fn load_panel_from<R: std::io::Read>(mut reader: R) -> Result<FactorPanel, PanelError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(body.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| PanelError::Csv(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    for (i, required) in ["month_id", "ticker", "tradable", "next_return"]
        .iter()
        .enumerate()
    {
        if cols.get(i) != Some(required) {
            return Err(PanelError::MissingColumn(required));
        }
    }
    let mut factor_names = Vec::new();
    for c in &cols[4..] {
        match c.strip_prefix("f_") {
            Some(name) if !name.is_empty() => factor_names.push(name.to_string()),
            _ => return Err(PanelError::BadFactorColumn(c.to_string())),
        }
    }

    let mut rows = Vec::new();
    let mut seen: HashSet<(i64, String)> = HashSet::new();
    for (idx, record) in rdr.records().enumerate() {
        let row_no = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| PanelError::Csv(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |column: &str, value: &str| PanelError::BadValue {
            row: row_no,
            column: column.to_string(),
            value: value.to_string(),
        };
        let month_id: i64 = field(0)
            .parse()
            .map_err(|_| bad("month_id", field(0)))?;
        let ticker = field(1).to_string();
        let tradable: bool = field(2)
            .parse()
            .map_err(|_| bad("tradable", field(2)))?;
        let next_return: f64 = field(3)
            .parse()
            .map_err(|_| bad("next_return", field(3)))?;
        let mut factors = Vec::with_capacity(factor_names.len());
        for (j, name) in factor_names.iter().enumerate() {
            let raw = field(4 + j);
            if raw.is_empty() {
                factors.push(None);
            } else {
                factors.push(Some(
                    raw.parse::<f64>()
                        .map_err(|_| bad(&format!("f_{name}"), raw))?,
                ));
            }
        }
        if !seen.insert((month_id, ticker.clone())) {
            return Err(PanelError::DuplicateKey { month_id, ticker });
        }
        rows.push(PanelRow {
            month_id,
            ticker,
            tradable,
            next_return,
            factors,
        });
    }
    Ok(FactorPanel { factor_names, rows })
}

/// Preprocess: drop untradable rows, drop factor columns with more than 10%
/// missing cells (measured after the row drop), and zero-fill the rest.
pub fn preprocess(panel: &FactorPanel) -> Result<(FactorPanel, PreprocessReport), PanelError> {
    let kept_rows: Vec<&PanelRow> = panel.rows.iter().filter(|r| r.tradable).collect();
    let dropped_untradable_rows = panel.rows.len() - kept_rows.len();
    if kept_rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let n = kept_rows.len() as f64;
    let mut keep_col = Vec::with_capacity(panel.factor_names.len());
    let mut dropped_columns = Vec::new();
    for (j, name) in panel.factor_names.iter().enumerate() {
        let missing = kept_rows.iter().filter(|r| r.factors[j].is_none()).count();
        if missing as f64 / n > 0.10 {
            keep_col.push(false);
            dropped_columns.push(name.clone());
        } else {
            keep_col.push(true);
        }
    }
    if !keep_col.iter().any(|&k| k) {
        return Err(PanelError::AllFactorsDropped);
    }
    let factor_names: Vec<String> = panel
        .factor_names
        .iter()
        .zip(&keep_col)
        .filter(|(_, &k)| k)
        .map(|(n, _)| n.clone())
        .collect();
    let mut filled_cells = 0usize;
    let rows: Vec<PanelRow> = kept_rows
        .into_iter()
        .map(|r| {
            let factors: Vec<Option<f64>> = r
                .factors
                .iter()
                .zip(&keep_col)
                .filter(|(_, &k)| k)
                .map(|(f, _)| {
                    Some(f.unwrap_or_else(|| {
                        filled_cells += 1;
                        0.0
                    }))
                })
                .collect();
            PanelRow {
                factors,
                ticker: r.ticker.clone(),
                ..*r
            }
        })
        .collect();
    Ok((
        FactorPanel { factor_names, rows },
        PreprocessReport {
            dropped_columns,
            filled_cells,
            dropped_untradable_rows,
        },
    ))
}

/// A panel with the cross-sectional +1/-1 labels attached.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub panel: FactorPanel,
    /// Aligned with `panel.rows`.
    pub labels: Vec<Label>,
}

impl LabeledPanel {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Flatten into a training set over the factor columns. Requires a
    /// preprocessed (fully filled) panel.
    pub fn to_training_set(&self) -> Result<TrainingSet, PanelError> {
        let rows: Vec<Vec<f64>> = self
            .panel
            .rows
            .iter()
            .map(|r| {
                r.factors
                    .iter()
                    .map(|f| f.ok_or(PanelError::MissingCells))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?;
        TrainingSet::from_rows(rows, self.labels.clone()).map_err(|_| PanelError::EmptyPanel)
    }
}

/// Label each month's cross-section by next-month return rank: top half +1,
/// bottom half -1. With an odd count the median stock goes to -1; return
/// ties break by ticker order.
pub fn label_cross_section(panel: &FactorPanel) -> Result<LabeledPanel, PanelError> {
    let months = panel.months();
    let mut labels = vec![0 as Label; panel.rows.len()];
    for m in months {
        let mut idx: Vec<usize> = (0..panel.rows.len())
            .filter(|&i| panel.rows[i].month_id == m)
            .collect();
        if idx.len() < 2 {
            return Err(PanelError::MonthTooSmall {
                month_id: m,
                count: idx.len(),
                needed: 2,
            });
        }
        idx.sort_by(|&a, &b| {
            let ra = &panel.rows[a];
            let rb = &panel.rows[b];
            rb.next_return
                .partial_cmp(&ra.next_return)
                .unwrap()
                .then_with(|| ra.ticker.cmp(&rb.ticker))
        });
        let positives = idx.len() / 2;
        for (rank, &i) in idx.iter().enumerate() {
            labels[i] = if rank < positives { 1 } else { -1 };
        }
    }
    Ok(LabeledPanel {
        panel: panel.clone(),
        labels,
    })
}

/// Split by month: train gets `month_id <= cutoff`, test gets the rest.
pub fn split_by_month(
    labeled: &LabeledPanel,
    cutoff: i64,
) -> Result<(LabeledPanel, LabeledPanel), PanelError> {
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (r, &l) in labeled.panel.rows.iter().zip(&labeled.labels) {
        if r.month_id <= cutoff {
            train_rows.push(r.clone());
            train_labels.push(l);
        } else {
            test_rows.push(r.clone());
            test_labels.push(l);
        }
    }
    if train_rows.is_empty() {
        return Err(PanelError::EmptySplit {
            cutoff,
            side: "train",
        });
    }
    if test_rows.is_empty() {
        return Err(PanelError::EmptySplit {
            cutoff,
            side: "test",
        });
    }
    let mk = |rows, labels| LabeledPanel {
        panel: FactorPanel {
            factor_names: labeled.panel.factor_names.clone(),
            rows,
        },
        labels,
    };
    Ok((mk(train_rows, train_labels), mk(test_rows, test_labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_csv() -> &'static str {
        "month_id,ticker,tradable,next_return,f_mom,f_val\n\
         1,AAA,true,0.05,0.1,0.2\n\
         1,BBB,true,0.02,-0.3,\n\
         1,CCC,true,-0.01,0.5,0.1\n\
         1,DDD,true,-0.03,0.2,0.4\n\
         2,AAA,true,0.01,0.3,0.3\n\
         2,BBB,true,0.04,-0.1,0.2\n\
         2,CCC,false,0.00,0.0,0.0\n\
         2,DDD,true,-0.02,0.1,\n"
    }

    #[test]
    fn loads_a_small_panel() {
        let p = load_panel_from(small_csv().as_bytes()).unwrap();
        assert_eq!(p.rows.len(), 8);
        assert_eq!(p.factor_names, vec!["mom", "val"]);
        assert!(p.has_missing_cells());
        assert_eq!(p.rows[1].factors[1], None);
    }

    #[test]
    fn duplicate_key_is_reported() {
        let csv = "month_id,ticker,tradable,next_return,f_a\n1,AAA,true,0.1,0\n1,AAA,true,0.2,0\n";
        match load_panel_from(csv.as_bytes()) {
            Err(PanelError::DuplicateKey { month_id, ticker }) => {
                assert_eq!(month_id, 1);
                assert_eq!(ticker, "AAA");
            }
            other => panic!("expected duplicate key error, got {other:?}"),
        }
    }

    #[test]
    fn bad_value_names_row_and_column() {
        let csv = "month_id,ticker,tradable,next_return,f_a\n1,AAA,true,oops,0\n";
        match load_panel_from(csv.as_bytes()) {
            Err(PanelError::BadValue { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "next_return");
                assert_eq!(value, "oops");
            }
            other => panic!("expected bad value error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_column_is_rejected() {
        let csv = "month_id,name,tradable,next_return,f_a\n";
        assert!(matches!(
            load_panel_from(csv.as_bytes()),
            Err(PanelError::MissingColumn("ticker"))
        ));
        let csv2 = "month_id,ticker,tradable,next_return,factor\n";
        assert!(matches!(
            load_panel_from(csv2.as_bytes()),
            Err(PanelError::BadFactorColumn(_))
        ));
    }

    #[test]
    fn preprocess_drops_and_fills() {
        // 20 rows; f_a missing in 3/20 = 15% -> dropped; f_b missing in
        // 1/20 = 5% -> kept, filled with 0.
        let mut csv = String::from("month_id,ticker,tradable,next_return,f_a,f_b\n");
        for i in 0..20 {
            let a = if i < 3 { "" } else { "1.0" };
            let b = if i == 0 { "" } else { "2.0" };
            csv.push_str(&format!("1,T{i:02},true,0.0{},{a},{b}\n", i % 7));
        }
        let p = load_panel_from(csv.as_bytes()).unwrap();
        let (out, report) = preprocess(&p).unwrap();
        assert_eq!(report.dropped_columns, vec!["a"]);
        assert_eq!(report.filled_cells, 1);
        assert_eq!(out.factor_names, vec!["b"]);
        assert_eq!(out.rows[0].factors[0], Some(0.0));
        assert!(!out.has_missing_cells());
    }

    #[test]
    fn preprocess_is_identity_on_clean_panels() {
        let csv = "month_id,ticker,tradable,next_return,f_a\n\
                   1,AAA,true,0.1,0.5\n\
                   1,BBB,true,0.2,-0.5\n";
        let p = load_panel_from(csv.as_bytes()).unwrap();
        let (out, report) = preprocess(&p).unwrap();
        assert_eq!(out, p);
        assert_eq!(report, PreprocessReport::default());
    }

    #[test]
    fn preprocess_drops_untradable_rows() {
        let p = load_panel_from(small_csv().as_bytes()).unwrap();
        let (out, report) = preprocess(&p).unwrap();
        assert_eq!(report.dropped_untradable_rows, 1);
        assert!(out.rows.iter().all(|r| r.tradable));
        assert_eq!(out.rows.len(), 7);
    }

    #[test]
    fn all_factors_dropped_is_an_error() {
        let mut csv = String::from("month_id,ticker,tradable,next_return,f_a\n");
        for i in 0..10 {
            csv.push_str(&format!("1,T{i},true,0.01,\n"));
        }
        let p = load_panel_from(csv.as_bytes()).unwrap();
        assert!(matches!(preprocess(&p), Err(PanelError::AllFactorsDropped)));
    }

    #[test]
    fn labeling_a_one_stock_month_is_an_error() {
        let csv = "month_id,ticker,tradable,next_return,f_a\n\
                   1,AAA,true,0.1,0.5\n\
                   1,BBB,true,0.2,-0.5\n\
                   2,AAA,true,0.1,0.5\n";
        let p = load_panel_from(csv.as_bytes()).unwrap();
        assert!(matches!(
            label_cross_section(&p),
            Err(PanelError::MonthTooSmall {
                month_id: 2,
                count: 1,
                ..
            })
        ));
    }

    #[test]
    fn labels_split_even_months_in_half() {
        let p = load_panel_from(small_csv().as_bytes()).unwrap();
        let (p, _) = preprocess(&p).unwrap();
        let labeled = label_cross_section(&p).unwrap();
        // Month 1 returns: AAA 5%, BBB 2%, CCC -1%, DDD -3%.
        let month1: Vec<(String, Label)> = labeled
            .panel
            .rows
            .iter()
            .zip(&labeled.labels)
            .filter(|(r, _)| r.month_id == 1)
            .map(|(r, &l)| (r.ticker.clone(), l))
            .collect();
        assert_eq!(
            month1,
            vec![
                ("AAA".to_string(), 1),
                ("BBB".to_string(), 1),
                ("CCC".to_string(), -1),
                ("DDD".to_string(), -1)
            ]
        );
        // Month 2 has 3 tradable stocks: 1 positive, 2 negative.
        let pos = labeled
            .panel
            .rows
            .iter()
            .zip(&labeled.labels)
            .filter(|(r, &l)| r.month_id == 2 && l == 1)
            .count();
        assert_eq!(pos, 1);
    }

    #[test]
    fn odd_month_median_goes_negative() {
        let mut csv = String::from("month_id,ticker,tradable,next_return,f_a\n");
        for (t, r) in [("A", 0.05), ("B", 0.03), ("C", 0.01), ("D", -0.01), ("E", -0.02)] {
            csv.push_str(&format!("1,{t},true,{r},0\n"));
        }
        let p = load_panel_from(csv.as_bytes()).unwrap();
        let labeled = label_cross_section(&p).unwrap();
        let pos = labeled.labels.iter().filter(|&&l| l == 1).count();
        let neg = labeled.labels.iter().filter(|&&l| l == -1).count();
        assert_eq!((pos, neg), (2, 3));
    }

    #[test]
    fn return_ties_break_by_ticker() {
        let csv = "month_id,ticker,tradable,next_return,f_a\n\
                   1,ZZZ,true,0.01,0\n\
                   1,AAA,true,0.01,0\n";
        let p = load_panel_from(csv.as_bytes()).unwrap();
        let labeled = label_cross_section(&p).unwrap();
        // AAA sorts first on the tie, so it takes the +1.
        let by_ticker: std::collections::HashMap<&str, Label> = labeled
            .panel
            .rows
            .iter()
            .zip(&labeled.labels)
            .map(|(r, &l)| (r.ticker.as_str(), l))
            .collect();
        assert_eq!(by_ticker["AAA"], 1);
        assert_eq!(by_ticker["ZZZ"], -1);
    }

    #[test]
    fn labeling_balance_invariant() {
        let p = crate::backtest::generate_synthetic_panel(24, 31, 5, 77).unwrap();
        let labeled = label_cross_section(&p).unwrap();
        for m in labeled.panel.months() {
            let (mut pos, mut neg) = (0i64, 0i64);
            for (r, &l) in labeled.panel.rows.iter().zip(&labeled.labels) {
                if r.month_id == m {
                    if l == 1 {
                        pos += 1;
                    } else {
                        neg += 1;
                    }
                }
            }
            assert!((pos - neg).abs() <= 1, "month {m}: {pos} vs {neg}");
        }
    }

    #[test]
    fn split_partitions_months() {
        let p = crate::backtest::generate_synthetic_panel(10, 6, 3, 4).unwrap();
        let labeled = label_cross_section(&p).unwrap();
        let (train, test) = split_by_month(&labeled, 7).unwrap();
        assert_eq!(train.panel.months(), (1..=7).collect::<Vec<i64>>());
        assert_eq!(test.panel.months(), vec![8, 9, 10]);
        assert_eq!(train.len() + test.len(), labeled.len());
        assert!(split_by_month(&labeled, 10).is_err());
        assert!(split_by_month(&labeled, 0).is_err());
    }

    #[test]
    fn panel_csv_round_trip() {
        let p = load_panel_from(small_csv().as_bytes()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = load_panel_from(&buf[..]).unwrap();
        assert_eq!(p, back);
    }
}
