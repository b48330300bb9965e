//! Tabular exports: the diversity grid, the cross-dataset matrix and figure
//! series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::CrossDatasetCell;

/// One evaluated (relation count, training size, test negative fraction) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rel_types: usize,
    pub data_size: usize,
    pub neg_fraction: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// A point of a figure series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub const GRID_LONG_HEADER: &str = "rel_types\tdata_size\tneg_fraction\tf1\tprecision\trecall";

pub fn grid_long_tsv(rows: &[GridRow]) -> String {
    let mut out = String::from(GRID_LONG_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.rel_types,
            r.data_size,
            r.neg_fraction,
            num(r.f1),
            num(r.precision),
            num(r.recall)
        )
        .expect("string write");
    }
    out
}

/// One row per (rel_types, data_size) in first-appearance order; an F1, P, R
/// column triple per negative fraction, ascending.
pub fn grid_wide_tsv(rows: &[GridRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoResults);
    }
    let fractions: Vec<f64> = {
        let mut f: Vec<f64> = rows.iter().map(|r| r.neg_fraction).collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    };
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut cells: BTreeMap<(usize, usize, u64), &GridRow> = BTreeMap::new();
    for r in rows {
        let key = (r.rel_types, r.data_size);
        if !keys.contains(&key) {
            keys.push(key);
        }
        if cells.insert((r.rel_types, r.data_size, r.neg_fraction.to_bits()), r).is_some() {
            return Err(Error::InvalidConfig(format!(
                "duplicate grid cell rel_types={} data_size={} neg_fraction={}",
                r.rel_types, r.data_size, r.neg_fraction
            )));
        }
    }
    let mut out = String::from("rel_types\tdata_size");
    for f in &fractions {
        write!(out, "\tf1@{f}\tp@{f}\tr@{f}").expect("string write");
    }
    out.push('\n');
    for (rel, size) in keys {
        write!(out, "{rel}\t{size}").expect("string write");
        for f in &fractions {
            let cell = cells.get(&(rel, size, f.to_bits())).ok_or_else(|| {
                Error::InvalidConfig(format!("grid row rel_types={rel} data_size={size} lacks neg_fraction={f}"))
            })?;
            write!(out, "\t{}\t{}\t{}", num(cell.f1), num(cell.precision), num(cell.recall)).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

pub const MATRIX_LONG_HEADER: &str = "train\ttest\tk\tscore";

pub fn matrix_long_tsv(cells: &[CrossDatasetCell]) -> String {
    let mut out = String::from(MATRIX_LONG_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(out, "{}\t{}\t{}\t{}", c.train_id, c.test_id, c.k, num(c.score)).expect("string write");
    }
    out
}

/// One block per k: a `K=k` row, then a row per test set with a column per
/// training set, both in sorted order.
pub fn matrix_wide_tsv(cells: &[CrossDatasetCell]) -> Result<String> {
    if cells.is_empty() {
        return Err(Error::NoResults);
    }
    let trains: BTreeSet<&str> = cells.iter().map(|c| c.train_id.as_str()).collect();
    let tests: BTreeSet<&str> = cells.iter().map(|c| c.test_id.as_str()).collect();
    let ks: BTreeSet<usize> = cells.iter().map(|c| c.k).collect();
    let index: BTreeMap<(&str, &str, usize), f64> =
        cells.iter().map(|c| ((c.train_id.as_str(), c.test_id.as_str(), c.k), c.score)).collect();
    let mut out = String::from("test/train");
    for t in &trains {
        write!(out, "\t{t}").expect("string write");
    }
    out.push('\n');
    for k in ks {
        writeln!(out, "K={k}").expect("string write");
        for test in &tests {
            out.push_str(test);
            for train in &trains {
                let score = index.get(&(*train, *test, k)).ok_or_else(|| {
                    Error::InvalidConfig(format!("matrix lacks cell train={train} test={test} k={k}"))
                })?;
                write!(out, "\t{}", num(*score)).expect("string write");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn series_csv(points: &[SeriesPoint]) -> String {
    let mut out = String::from("series,x,y\n");
    for p in points {
        writeln!(out, "{},{},{}", p.series, p.x, num(p.y)).expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<GridRow> {
        let mut rows = Vec::new();
        for (rel, size) in [(29, 100_000), (79, 100_000), (576, 1_000)] {
            for neg in [0.5, 0.9, 0.99] {
                rows.push(GridRow {
                    rel_types: rel,
                    data_size: size,
                    neg_fraction: neg,
                    f1: 0.5,
                    precision: 0.25,
                    recall: 1.0,
                });
            }
        }
        rows
    }

    #[test]
    fn wide_grid_has_nine_metric_columns() {
        let tsv = grid_wide_tsv(&grid()).unwrap();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "rel_types\tdata_size\tf1@0.5\tp@0.5\tr@0.5\tf1@0.9\tp@0.9\tr@0.9\tf1@0.99\tp@0.99\tr@0.99"
        );
        assert!(lines.iter().all(|l| l.split('\t').count() == 11));
        assert!(lines[3].starts_with("576\t1000\t0.500000\t0.250000\t1.000000"));
    }

    #[test]
    fn wide_grid_rejects_holes_and_duplicates() {
        let mut rows = grid();
        rows.pop();
        assert!(grid_wide_tsv(&rows).is_err());
        let mut rows = grid();
        rows.push(rows[0].clone());
        assert!(grid_wide_tsv(&rows).is_err());
        assert!(matches!(grid_wide_tsv(&[]), Err(Error::NoResults)));
    }

    #[test]
    fn long_grid_single_row() {
        let tsv = grid_long_tsv(&grid()[..1]);
        assert_eq!(tsv, format!("{GRID_LONG_HEADER}\n29\t100000\t0.5\t0.500000\t0.250000\t1.000000\n"));
    }

    #[test]
    fn matrix_blocks() {
        let ids = ["core", "fewrel", "rebel", "tacred"];
        let mut cells = Vec::new();
        for k in [1, 5] {
            for tr in ids {
                for te in ids {
                    cells.push(CrossDatasetCell { train_id: tr.into(), test_id: te.into(), k, score: 0.5 });
                }
            }
        }
        let wide = matrix_wide_tsv(&cells).unwrap();
        let lines: Vec<&str> = wide.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 5);
        assert_eq!(lines[0], "test/train\tcore\tfewrel\trebel\ttacred");
        assert_eq!(lines[1], "K=1");
        assert_eq!(lines[6], "K=5");
        assert_eq!(lines[2].split('\t').count(), 5);
        assert_eq!(matrix_long_tsv(&cells).lines().count(), 33);
        cells.pop();
        assert!(matrix_wide_tsv(&cells).is_err());
    }

    #[test]
    fn series_lines() {
        let pts = vec![SeriesPoint { series: "k=1".into(), x: 5.0, y: 0.25 }];
        assert_eq!(series_csv(&pts), "series,x,y\nk=1,5,0.250000\n");
    }
}
