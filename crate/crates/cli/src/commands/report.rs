//! Merges result documents into tables, figure series and a summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use fsrc_core::report::{
    grid_long_tsv, grid_wide_tsv, matrix_long_tsv, matrix_wide_tsv, series_csv, GridRow, SeriesPoint,
};
use fsrc_core::Error;

use crate::artifacts::{read_json, write_with_meta, Context};
use crate::failure::{Failure, Result};
use crate::results::ResultDoc;
use crate::ReportArgs;

pub const DIR: &str = "report";
pub const SUMMARY: &str = "summary.tsv";
pub const FIGURE_DIVERSITY: &str = "diversity.csv";
pub const FIGURE_CURVES: &str = "curves.csv";

fn source_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub const SUMMARY_HEADER: &str =
    "source\tkind\tconfig_hash\tcorpus_hash\tf1\tprecision\trecall\tthreshold\taccuracy\tsteps";

/// Headline numbers of a result; grid and matrix results carry theirs in
/// their own tables and leave these blank.
#[derive(Default)]
struct Headline {
    f1: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    threshold: Option<f64>,
    accuracy: Option<f64>,
    steps: Option<usize>,
}

fn headline(doc: &ResultDoc) -> Headline {
    match doc {
        ResultDoc::Train(d) => Headline {
            f1: d.curve.last().map(|p| p.dev_f1),
            threshold: d.curve.last().map(|p| p.threshold),
            steps: Some(d.steps),
            ..Headline::default()
        },
        ResultDoc::PairEval(d) => Headline {
            f1: Some(d.report.f1),
            precision: Some(d.report.precision),
            recall: Some(d.report.recall),
            threshold: Some(d.report.threshold),
            ..Headline::default()
        },
        ResultDoc::EpisodeEval(d) => Headline {
            threshold: Some(d.report.nota_threshold),
            accuracy: Some(d.report.query_accuracy),
            ..Headline::default()
        },
        ResultDoc::Grid(_) | ResultDoc::Matrix(_) => Headline::default(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn run(ctx: &Context, args: &ReportArgs) -> Result<()> {
    if args.files.is_empty() {
        return Err(Error::NoResults.into());
    }
    let docs: Vec<(String, ResultDoc)> =
        args.files.iter().map(|p| Ok((source_name(p), read_json::<ResultDoc>(p, "eval")?))).collect::<Result<_>>()?;

    let corpora: BTreeSet<&str> = docs.iter().map(|(_, d)| d.corpus_hash()).collect();
    if corpora.len() > 1 {
        let listing = docs.iter().map(|(s, d)| format!("{s}={}", d.corpus_hash())).collect::<Vec<_>>().join(", ");
        if !args.force {
            return Err(Failure::ProvenanceMismatch(format!("results come from different corpora: {listing}")));
        }
        log::warn!("merging results from different corpora: {listing}");
    }

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut grid_rows: Vec<GridRow> = Vec::new();
    let mut cells = Vec::new();
    let mut diversity = Vec::new();
    let mut curves = Vec::new();
    for (source, doc) in &docs {
        let h = headline(doc);
        writeln!(
            summary,
            "{source}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            doc.kind(),
            doc.config_hash(),
            doc.corpus_hash(),
            cell(h.f1),
            cell(h.precision),
            cell(h.recall),
            cell(h.threshold),
            cell(h.accuracy),
            h.steps.map_or_else(String::new, |s| s.to_string()),
        )
        .expect("string write");
        match doc {
            ResultDoc::Train(d) => curves.extend(d.curve.iter().map(|p| SeriesPoint {
                series: source.clone(),
                x: p.step as f64,
                y: p.dev_f1,
            })),
            ResultDoc::Grid(d) => {
                grid_rows.extend(d.rows.iter().cloned());
                let mut rows = d.rows.clone();
                rows.sort_by(|a, b| {
                    (a.neg_fraction, a.data_size, a.rel_types)
                        .partial_cmp(&(b.neg_fraction, b.data_size, b.rel_types))
                        .expect("finite fractions")
                });
                diversity.extend(rows.into_iter().map(|r| SeriesPoint {
                    series: format!("f1@{}/data_size={}", r.neg_fraction, r.data_size),
                    x: r.rel_types as f64,
                    y: r.f1,
                }));
                let mut eps = d.episodes.clone();
                eps.sort_by_key(|e| (e.k, e.data_size, e.rel_types));
                diversity.extend(eps.into_iter().map(|e| SeriesPoint {
                    series: format!("k={}/data_size={}", e.k, e.data_size),
                    x: e.rel_types as f64,
                    y: e.accuracy,
                }));
                for c in &d.curves {
                    curves.extend(c.points.iter().map(|p| SeriesPoint {
                        series: format!("rel_types={}/data_size={}", c.rel_types, c.data_size),
                        x: p.step as f64,
                        y: p.dev_f1,
                    }));
                }
            }
            ResultDoc::Matrix(d) => cells.extend(d.cells.iter().cloned()),
            ResultDoc::PairEval(_) | ResultDoc::EpisodeEval(_) => {}
        }
    }

    let dir = ctx.path(DIR);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    let provenance = BTreeMap::from([
        ("sources".to_owned(), docs.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(",")),
        ("forced".to_owned(), args.force.to_string()),
    ]);
    let corpus_hash = corpora.into_iter().collect::<Vec<_>>().join(",");
    let meta = ctx.meta("report", &corpus_hash, provenance);
    let mut outputs: Vec<(&str, String)> = vec![(SUMMARY, summary)];
    if !grid_rows.is_empty() {
        outputs.push((super::grid::TABLE, grid_wide_tsv(&grid_rows)?));
        outputs.push((super::grid::TABLE_LONG, grid_long_tsv(&grid_rows)));
    }
    if !cells.is_empty() {
        outputs.push((super::matrix::TABLE, matrix_wide_tsv(&cells)?));
        outputs.push((super::matrix::TABLE_LONG, matrix_long_tsv(&cells)));
    }
    if !diversity.is_empty() {
        outputs.push((FIGURE_DIVERSITY, series_csv(&diversity)));
    }
    if !curves.is_empty() {
        outputs.push((FIGURE_CURVES, series_csv(&curves)));
    }
    for (name, text) in outputs {
        let path = dir.join(name);
        write_with_meta(&path, &text, &meta)?;
        println!("{}", path.display());
    }
    Ok(())
}
