//! Information criteria, per-sample selection tables and count matrices.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::gof::GofReport;
use crate::mixture::ModelSpec;

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * loglik
}

/// Hannan-Quinn criterion; needs `n ≥ 3` so that `ln ln n > 0`.
pub fn hqc(loglik: f64, k: usize, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("HQC needs n >= 3, got {n}")));
    }
    Ok(2.0 * k as f64 * (n as f64).ln().ln() - 2.0 * loglik)
}

/// The six selection columns, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ks,
    Cm,
    Ad,
    Aic,
    Bic,
    Hqc,
}

impl Criterion {
    pub const ALL: [Criterion; 6] =
        [Criterion::Ks, Criterion::Cm, Criterion::Ad, Criterion::Aic, Criterion::Bic, Criterion::Hqc];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Ks => "ks",
            Criterion::Cm => "cm",
            Criterion::Ad => "ad",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Hqc => "hqc",
        }
    }
}

/// Criterion values of an estimable model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub hqc: f64,
    pub ks: f64,
    pub cm: f64,
    pub ad: f64,
}

impl Scores {
    /// ICs from `(loglik, k, n)` and the GoF distances.
    pub fn new(loglik: f64, k: usize, n: usize, gof: &GofReport) -> Result<Self> {
        Ok(Self {
            loglik,
            aic: aic(loglik, k),
            bic: bic(loglik, k, n),
            hqc: hqc(loglik, k, n)?,
            ks: gof.ks,
            cm: gof.cm,
            ad: gof.ad,
        })
    }

    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Ks => self.ks,
            Criterion::Cm => self.cm,
            Criterion::Ad => self.ad,
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
            Criterion::Hqc => self.hqc,
        }
    }
}

/// One model's line in a selection table. `scores` is `None` for models
/// that could not be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub model: ModelSpec,
    pub k: usize,
    pub n: usize,
    pub scores: Option<Scores>,
    pub flags: Vec<String>,
    pub argmin: Vec<Criterion>,
}

impl SelectionRow {
    pub fn estimable(model: ModelSpec, n: usize, scores: Scores, flags: Vec<String>) -> Self {
        Self { model, k: model.k(), n, scores: Some(scores), flags, argmin: Vec::new() }
    }

    pub fn not_estimable(model: ModelSpec, n: usize, reason: &str) -> Self {
        Self {
            model,
            k: model.k(),
            n,
            scores: None,
            flags: vec![format!("not_estimable: {reason}")],
            argmin: Vec::new(),
        }
    }

    /// Row for a fit scored on its own sample.
    pub fn from_fit(fit: &FittedModel, gof: &GofReport) -> Result<Self> {
        let scores = Scores::new(fit.loglik, fit.k(), fit.n, gof)?;
        let mut flags: Vec<String> = fit.flags.iter().map(|f| f.as_str().to_string()).collect();
        if gof.ad_clamped {
            flags.push("ad_clamped".into());
        }
        Ok(Self::estimable(fit.spec, fit.n, scores, flags))
    }
}

/// Criteria for all candidate models on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub label: String,
    pub rows: Vec<SelectionRow>,
}

fn tie_break(a: &SelectionRow, b: &SelectionRow) -> Ordering {
    a.k.cmp(&b.k).then_with(|| a.model.name().cmp(&b.model.name()))
}

impl SelectionTable {
    /// Builds the table and marks the per-criterion minima.
    pub fn new(label: impl Into<String>, rows: Vec<SelectionRow>) -> Self {
        let mut t = Self { label: label.into(), rows };
        t.mark_argmin();
        t
    }

    fn mark_argmin(&mut self) {
        for row in &mut self.rows {
            row.argmin.clear();
        }
        for c in Criterion::ALL {
            if let Some(i) = self.argmin_index(c) {
                self.rows[i].argmin.push(c);
            }
        }
    }

    fn argmin_index(&self, c: Criterion) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.scores.map(|s| (i, s.get(c))))
            .filter(|(_, v)| v.is_finite())
            .min_by(|(i, a), (j, b)| a.total_cmp(b).then_with(|| tie_break(&self.rows[*i], &self.rows[*j])))
            .map(|(i, _)| i)
    }

    /// Model selected by criterion `c`, if any row is estimable.
    pub fn argmin(&self, c: Criterion) -> Option<ModelSpec> {
        self.rows.iter().find(|r| r.argmin.contains(&c)).map(|r| r.model)
    }
}

/// Per-model counts of argmin wins across tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix {
    pub rows: Vec<CountRow>,
    pub total: [usize; 6],
    pub n_tables: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub model: ModelSpec,
    pub k: usize,
    /// Counts in [`Criterion::ALL`] order.
    pub counts: [usize; 6],
}

/// Sums argmin flags over tables; rows follow the order of first
/// appearance.
pub fn summarize_counts(tables: &[SelectionTable]) -> Result<CountMatrix> {
    if tables.is_empty() {
        return Err(Error::InvalidParams("no selection tables to summarize".into()));
    }
    let mut order: Vec<ModelSpec> = Vec::new();
    let mut counts: BTreeMap<ModelSpec, [usize; 6]> = BTreeMap::new();
    for t in tables {
        for r in &t.rows {
            if !counts.contains_key(&r.model) {
                order.push(r.model);
                counts.insert(r.model, [0; 6]);
            }
            let c = counts.get_mut(&r.model).expect("inserted above");
            for (j, crit) in Criterion::ALL.iter().enumerate() {
                if r.argmin.contains(crit) {
                    c[j] += 1;
                }
            }
        }
    }
    let rows: Vec<CountRow> =
        order.iter().map(|m| CountRow { model: *m, k: m.k(), counts: counts[m] }).collect();
    let mut total = [0; 6];
    for r in &rows {
        for j in 0..6 {
            total[j] += r.counts[j];
        }
    }
    Ok(CountMatrix { rows, total, n_tables: tables.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Family;
    use proptest::prelude::*;

    fn scores(loglik: f64, k: usize, n: usize, gof: f64) -> Scores {
        Scores::new(loglik, k, n, &GofReport { ks: gof, cm: gof, ad: gof, n, ad_clamped: false }).unwrap()
    }

    #[test]
    fn formulas_by_hand() {
        assert_eq!(aic(-100.0, 2), 204.0);
        assert_eq!(bic(-100.0, 2, 7), 2.0 * 7f64.ln() + 200.0);
        assert!((hqc(0.0, 14, 100_000).unwrap() - 28.0 * (100_000f64).ln().ln()).abs() < 1e-12);
        assert!(hqc(0.0, 2, 2).is_err());
    }

    #[test]
    fn argmin_and_ties() {
        let n = 1000;
        let rows = vec![
            SelectionRow::estimable(ModelSpec::new(Family::Ln3), n, scores(-500.0, 8, n, 0.01), vec![]),
            SelectionRow::estimable(ModelSpec::new(Family::Ln), n, scores(-600.0, 2, n, 0.05), vec![]),
            SelectionRow::not_estimable(ModelSpec::new(Family::Gb2), n, "no start"),
        ];
        let t = SelectionTable::new("s", rows);
        for c in Criterion::ALL {
            assert_eq!(t.argmin(c), Some(ModelSpec::new(Family::Ln3)));
        }
        assert!(t.rows[2].argmin.is_empty());
        // exact tie goes to smaller k, then name
        let rows = vec![
            SelectionRow::estimable(ModelSpec::new(Family::Ll2), n, scores(-500.0, 5, n, 0.02), vec![]),
            SelectionRow::estimable(ModelSpec::new(Family::Ln2), n, scores(-500.0, 5, n, 0.02), vec![]),
            SelectionRow::estimable(ModelSpec::new(Family::Ln3), n, scores(-500.0, 8, n, 0.02), vec![]),
        ];
        let t = SelectionTable::new("tie", rows);
        assert_eq!(t.argmin(Criterion::Ks), Some(ModelSpec::new(Family::Ll2)));
    }

    #[test]
    fn counts_single_table() {
        let n = 1000;
        let rows = ModelSpec::all(false)
            .into_iter()
            .map(|m| {
                let ll = if m.family == Family::Ln3 { -100.0 } else { -1000.0 };
                let g = if m.family == Family::Ln3 { 0.001 } else { 0.1 };
                SelectionRow::estimable(m, n, scores(ll, m.k(), n, g), vec![])
            })
            .collect();
        let c = summarize_counts(&[SelectionTable::new("one", rows)]).unwrap();
        assert_eq!(c.rows.len(), 17);
        for r in &c.rows {
            let expect = if r.model.family == Family::Ln3 { [1; 6] } else { [0; 6] };
            assert_eq!(r.counts, expect, "{}", r.model);
        }
        assert_eq!(c.total, [1; 6]);
    }

    proptest! {
        #[test]
        fn bic_minus_aic(ll in -1e6f64..0.0, k in 1usize..20, n in 3usize..1_000_000) {
            let d = bic(ll, k, n) - aic(ll, k);
            let expect = k as f64 * ((n as f64).ln() - 2.0);
            prop_assert!((d - expect).abs() <= 1e-9 * ll.abs().max(1.0));
        }

        #[test]
        fn penalty_ordering(ll in -1e5f64..0.0, k in 1usize..20, n in 16usize..1_000_000) {
            prop_assert!(aic(ll, k) <= hqc(ll, k, n).unwrap() + 1e-9);
            prop_assert!(hqc(ll, k, n).unwrap() <= bic(ll, k, n) + 1e-9);
        }

        #[test]
        fn argmin_shift_invariant(lls in proptest::collection::vec(-1e4f64..-1.0, 4), shift in -1e3f64..1e3) {
            let n = 5000;
            let specs = [Family::Ln, Family::Ln2, Family::Ln3, Family::Ll2];
            let build = |s: f64| {
                let rows = specs
                    .iter()
                    .zip(&lls)
                    .map(|(f, ll)| SelectionRow::estimable(ModelSpec::new(*f), n, scores(ll + s, f.k(), n, 0.1), vec![]))
                    .collect();
                SelectionTable::new("x", rows)
            };
            let (a, b) = (build(0.0), build(shift));
            for c in [Criterion::Aic, Criterion::Bic, Criterion::Hqc] {
                prop_assert_eq!(a.argmin(c), b.argmin(c));
            }
        }
    }
}
