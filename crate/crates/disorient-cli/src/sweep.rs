//! The full experiment grid: every frame pair crossed with every
//! (strategy, k, side, yaw) cell.
//!
//! Two parallel phases: pair preparation (load + baseline + candidate
//! extraction), then the pair x cell grid. Both map over index ranges
//! with an order-preserving reduce, so output is identical whatever
//! the worker count.

use std::path::Path;

use disorient_core::parallel;
use disorient_core::{Error, Result};

use crate::config::RunConfig;
use crate::dataset::{pairs, Sequence};
use crate::pipeline::{prepare_pair, run_cell, task_seed, CellSpec, PairContext};
use crate::plot::{line_chart, Series};
use crate::report::{
    summarize_rows, write_per_pair, write_summary, PerPairRow, SummaryRow,
};

/// Cells in deterministic grid order: strategy-major, then k, side, yaw.
pub fn enumerate_cells(cfg: &RunConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        for &k in &cfg.k_values {
            for &side in &cfg.side_values {
                for &yaw in &cfg.yaw_values {
                    cells.push(CellSpec {
                        strategy,
                        k,
                        side,
                        yaw,
                    });
                }
            }
        }
    }
    cells
}

fn prepare_pairs(cfg: &RunConfig) -> Result<Vec<PairContext>> {
    let mut loaded = Vec::new();
    let mut jobs: Vec<(usize, (usize, usize))> = Vec::new();
    for id in &cfg.sequences {
        let seq = Sequence::new(&cfg.dataset, id);
        let n = seq.scan_count()?;
        let gt = seq.load_gt()?;
        if gt.len() < n {
            return Err(Error::InvalidParam(format!(
                "sequence {id}: {} poses for {n} scans",
                gt.len()
            )));
        }
        let seq_pairs = pairs(n, cfg.eval.frame_stride);
        if seq_pairs.is_empty() {
            return Err(Error::InvalidParam(format!(
                "sequence {id}: no frame pairs at stride {}",
                cfg.eval.frame_stride
            )));
        }
        let idx = loaded.len();
        loaded.push((seq, gt));
        for p in seq_pairs {
            jobs.push((idx, p));
        }
    }
    parallel::try_map_indexed(&jobs, |_, &(idx, pair)| {
        let (seq, gt) = &loaded[idx];
        prepare_pair(seq, gt, pair, cfg)
    })
}

/// Runs the sweep and writes `per_pair.csv`, `summary.csv`, and one
/// SVG per metric into `out`. Returns the per-pair rows.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PerPairRow>> {
    cfg.validate()?;
    parallel::configure_workers(cfg.workers);
    let contexts = prepare_pairs(cfg)?;
    let cells = enumerate_cells(cfg);
    log::info!(
        "sweep: {} pairs x {} cells over {:?}",
        contexts.len(),
        cells.len(),
        cfg.sequences
    );

    let tasks: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|p| (0..cells.len()).map(move |c| (p, c)))
        .collect();
    let rows: Vec<PerPairRow> = parallel::try_map_indexed(&tasks, |_, &(p, c)| {
        let ctx = &contexts[p];
        let cell = &cells[c];
        let outcome = run_cell(ctx, cell, cfg, task_seed(cfg.seed, p, c))?;
        Ok::<PerPairRow, Error>(PerPairRow {
            seq: ctx.seq_id.clone(),
            cell: *cell,
            mode: cfg.mode,
            error: outcome.error,
            removed_points: outcome.removed_points,
        })
    })?;

    write_per_pair(&out.join("per_pair.csv"), &rows)?;
    let summary = summarize_rows(&rows, &cfg.eval)?;
    write_summary(&out.join("summary.csv"), &summary)?;
    write_metric_charts(&summary, cfg.side_values[0], cfg.yaw_values[0], out)?;
    Ok(rows)
}

/// One chart per metric: the metric vs k at the given side and yaw,
/// one curve per strategy (first-seen order).
pub fn write_metric_charts(
    summary: &[SummaryRow],
    side: f64,
    yaw: f64,
    out: &Path,
) -> Result<()> {
    let mut strategies = Vec::new();
    for row in summary {
        if !strategies.contains(&row.cell.strategy) {
            strategies.push(row.cell.strategy);
        }
    }
    let metrics: [(&str, &str, fn(&SummaryRow) -> f64); 3] = [
        ("mean_rre", "mean RRE (deg)", |r| r.summary.mean_rre_deg),
        ("mean_rte", "mean RTE (m)", |r| r.summary.mean_rte_m),
        ("rr", "registration recall", |r| r.summary.recall),
    ];
    for (stem, y_label, pick) in metrics {
        let mut series = Vec::new();
        for &strategy in &strategies {
            let mut points: Vec<(f64, f64)> = summary
                .iter()
                .filter(|r| {
                    r.cell.strategy == strategy && r.cell.side == side && r.cell.yaw == yaw
                })
                .map(|r| (r.cell.k as f64, pick(r)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            if !points.is_empty() {
                series.push(Series {
                    label: strategy.to_string(),
                    points,
                });
            }
        }
        line_chart(
            &out.join(format!("{stem}.svg")),
            &format!("{y_label} vs K (L={side} m, yaw={yaw} deg)"),
            "K",
            y_label,
            &series,
        )?;
    }
    Ok(())
}
