//! Report structures for both benchmarks: JSON-serializable summaries
//! plus flat metrics CSV writers.

use std::io::Write;

use serde::Serialize;

use crate::dynamic_bench::{DynamicArtifacts, DynamicMethodArtifacts};
use crate::static_bench::{MethodArtifacts, StaticArtifacts};
use crate::Result;

/// Summary of one sampler on the static benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub concentration: usize,
    pub objective_mean: f64,
    pub objective_standard_error: f64,
    pub training_seconds: f64,
    pub coverage: f64,
    pub average_width: f64,
    pub ensemble_seconds: f64,
    pub total_redraws: usize,
}

impl MethodReport {
    fn from_static(m: &MethodArtifacts) -> Self {
        Self {
            method: m.kind.label().to_string(),
            concentration: m.training.best_concentration,
            objective_mean: m.objective().mean,
            objective_standard_error: m.objective().se,
            training_seconds: m.training_seconds,
            coverage: m.coverage,
            average_width: m.average_width,
            ensemble_seconds: m.ensemble_seconds,
            total_redraws: m.manifest.total_redraws,
        }
    }
}

/// Full report of a static benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct StaticReport {
    pub benchmark: String,
    pub seed: u64,
    pub dofs: usize,
    pub snapshots: usize,
    pub snapshot_rank: usize,
    pub subspace_dim: usize,
    pub draws: usize,
    pub level: f64,
    pub rom_relative_error: f64,
    pub methods: Vec<MethodReport>,
    /// Mean pointwise band-width ratio, Gaussian model over bootstrap.
    pub width_ratio: Option<f64>,
    pub width_ratio_of_averages: Option<f64>,
    pub wall_seconds: f64,
}

pub fn static_report(artifacts: &StaticArtifacts) -> StaticReport {
    let config = &artifacts.assembly.config;
    StaticReport {
        benchmark: "parametric-linear-static".to_string(),
        seed: config.seed,
        dofs: config.problem.dofs,
        snapshots: config.problem.snapshots,
        snapshot_rank: artifacts.assembly.svd.rank(),
        subspace_dim: config.problem.subspace_dim,
        draws: config.ensemble.draws,
        level: config.ensemble.level,
        rom_relative_error: artifacts.assembly.rom_relative_error(),
        methods: artifacts
            .methods
            .iter()
            .map(MethodReport::from_static)
            .collect(),
        width_ratio: artifacts.width_ratio,
        width_ratio_of_averages: artifacts.width_ratio_of_averages,
        wall_seconds: artifacts.wall_seconds,
    }
}

/// Writes static metrics as flat `method,metric,value` rows. Timings
/// stay in the JSON report so CSV bodies are identical across reruns of
/// the same seed.
pub fn write_static_metrics_csv<W: Write>(mut w: W, report: &StaticReport) -> Result<()> {
    writeln!(w, "method,metric,value")?;
    for m in &report.methods {
        writeln!(w, "{},concentration,{}", m.method, m.concentration)?;
        writeln!(w, "{},objective_mean,{}", m.method, m.objective_mean)?;
        writeln!(
            w,
            "{},objective_standard_error,{}",
            m.method, m.objective_standard_error
        )?;
        writeln!(w, "{},coverage,{}", m.method, m.coverage)?;
        writeln!(w, "{},average_width,{}", m.method, m.average_width)?;
        writeln!(w, "{},total_redraws,{}", m.method, m.total_redraws)?;
    }
    if let Some(ratio) = report.width_ratio {
        writeln!(w, "both,width_ratio,{ratio}")?;
    }
    if let Some(ratio) = report.width_ratio_of_averages {
        writeln!(w, "both,width_ratio_of_averages,{ratio}")?;
    }
    writeln!(w, "both,rom_relative_error,{}", report.rom_relative_error)?;
    Ok(())
}

/// Per-quantity outcome row of the transient benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub quantity: String,
    pub coverage: f64,
    pub average_width: f64,
}

/// Summary of one sampler on the transient benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicMethodReport {
    pub method: String,
    pub concentration: usize,
    pub objective_mean: f64,
    pub objective_standard_error: f64,
    pub training_seconds: f64,
    pub ensemble_seconds: f64,
    pub total_redraws: usize,
    pub rows: Vec<RowReport>,
}

impl DynamicMethodReport {
    fn from_dynamic(m: &DynamicMethodArtifacts, labels: &[String]) -> Self {
        Self {
            method: m.kind.label().to_string(),
            concentration: m.training.best_concentration,
            objective_mean: m.training.best.mean,
            objective_standard_error: m.training.best.se,
            training_seconds: m.training_seconds,
            ensemble_seconds: m.ensemble_seconds,
            total_redraws: m.manifest.total_redraws,
            rows: labels
                .iter()
                .enumerate()
                .map(|(i, label)| RowReport {
                    quantity: label.clone(),
                    coverage: m.coverages[i],
                    average_width: m.widths[i],
                })
                .collect(),
        }
    }
}

/// Per-quantity band-width ratio between the two samplers.
#[derive(Debug, Clone, Serialize)]
pub struct RowRatio {
    pub quantity: String,
    /// Mean pointwise ratio, Gaussian model over bootstrap.
    pub width_ratio: f64,
}

/// One row of the full-scale reference table.
#[derive(Debug, Clone, Serialize)]
pub struct FullScaleReferenceRow {
    pub quantity: &'static str,
    pub unit: &'static str,
    pub ppca_coverage: f64,
    pub ppca_average_width: f64,
    pub bootstrap_coverage: f64,
    pub bootstrap_average_width: f64,
    pub width_ratio: f64,
}

/// Reference results for the full-scale structure this chain imitates at
/// desk scale. They are included in reports for qualitative comparison
/// only: the chain is a synthetic analogue, not a model of that
/// structure, so agreement is expected in ordering and rough magnitude
/// of coverage, not in widths.
pub const FULL_SCALE_REFERENCE: [FullScaleReferenceRow; 4] = [
    FullScaleReferenceRow {
        quantity: "translational displacement",
        unit: "1e-4 in",
        ppca_coverage: 0.9611,
        ppca_average_width: 3.17,
        bootstrap_coverage: 0.9708,
        bootstrap_average_width: 2.69,
        width_ratio: 1.37,
    },
    FullScaleReferenceRow {
        quantity: "translational velocity",
        unit: "in/s",
        ppca_coverage: 0.9334,
        ppca_average_width: 1.18,
        bootstrap_coverage: 0.9558,
        bootstrap_average_width: 1.11,
        width_ratio: 1.19,
    },
    FullScaleReferenceRow {
        quantity: "translational acceleration",
        unit: "1e3 in/s^2",
        ppca_coverage: 0.8414,
        ppca_average_width: 7.26,
        bootstrap_coverage: 0.8706,
        bootstrap_average_width: 7.22,
        width_ratio: 1.04,
    },
    FullScaleReferenceRow {
        quantity: "rotational velocity",
        unit: "in/s",
        ppca_coverage: 0.9342,
        ppca_average_width: 1.41,
        bootstrap_coverage: 0.9663,
        bootstrap_average_width: 1.51,
        width_ratio: 1.11,
    },
];

/// Full report of a transient benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicReport {
    pub benchmark: String,
    /// The chain stands in for a large structure at desk scale; every
    /// consumer of this report should treat it that way.
    pub label: String,
    pub seed: u64,
    pub dofs: usize,
    pub steps: usize,
    pub dt: f64,
    pub snapshot_rank: usize,
    pub subspace_dim: usize,
    pub draws: usize,
    pub level: f64,
    pub methods: Vec<DynamicMethodReport>,
    pub width_ratios: Option<Vec<RowRatio>>,
    pub full_scale_reference: Vec<FullScaleReferenceRow>,
    pub wall_seconds: f64,
}

pub fn dynamic_report(artifacts: &DynamicArtifacts) -> DynamicReport {
    let config = &artifacts.assembly.config;
    let labels = artifacts.assembly.qoi_labels();
    DynamicReport {
        benchmark: "transient-chain".to_string(),
        label: "synthetic analogue".to_string(),
        seed: config.seed,
        dofs: config.problem.dofs,
        steps: config.problem.steps,
        dt: config.problem.dt,
        snapshot_rank: artifacts.assembly.svd.rank(),
        subspace_dim: config.problem.subspace_dim,
        draws: config.ensemble.draws,
        level: config.ensemble.level,
        methods: artifacts
            .methods
            .iter()
            .map(|m| DynamicMethodReport::from_dynamic(m, &labels))
            .collect(),
        width_ratios: artifacts.width_ratios.as_ref().map(|ratios| {
            labels
                .iter()
                .zip(ratios.iter())
                .map(|(label, &ratio)| RowRatio {
                    quantity: label.clone(),
                    width_ratio: ratio,
                })
                .collect()
        }),
        full_scale_reference: FULL_SCALE_REFERENCE.to_vec(),
        wall_seconds: artifacts.wall_seconds,
    }
}

/// Writes transient metrics as flat `method,quantity,metric,value` rows,
/// timings excluded for the same rerun stability as the static writer.
pub fn write_dynamic_metrics_csv<W: Write>(mut w: W, report: &DynamicReport) -> Result<()> {
    writeln!(w, "method,quantity,metric,value")?;
    for m in &report.methods {
        writeln!(w, "{},all,concentration,{}", m.method, m.concentration)?;
        for row in &m.rows {
            writeln!(w, "{},{},coverage,{}", m.method, row.quantity, row.coverage)?;
            writeln!(
                w,
                "{},{},average_width,{}",
                m.method, row.quantity, row.average_width
            )?;
        }
    }
    if let Some(ratios) = &report.width_ratios {
        for r in ratios {
            writeln!(w, "both,{},width_ratio,{}", r.quantity, r.width_ratio)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_orders_methods_consistently() {
        // On every reference row the bootstrap band is at least as well
        // covered, and the ratio of average widths stays near the quoted
        // pointwise ratio.
        for row in &FULL_SCALE_REFERENCE {
            assert!(row.bootstrap_coverage > row.ppca_coverage - 1e-12);
            assert!(row.width_ratio >= 1.0);
            assert!((0.5..=1.0).contains(&row.ppca_coverage));
            assert!((0.5..=1.0).contains(&row.bootstrap_coverage));
        }
    }

    #[test]
    fn metric_rows_are_flat_csv() {
        let report = StaticReport {
            benchmark: "parametric-linear-static".into(),
            seed: 17,
            dofs: 10,
            snapshots: 5,
            snapshot_rank: 2,
            subspace_dim: 1,
            draws: 100,
            level: 0.95,
            rom_relative_error: 0.1,
            methods: vec![MethodReport {
                method: "bootstrap".into(),
                concentration: 8,
                objective_mean: 1.0,
                objective_standard_error: 0.1,
                training_seconds: 0.5,
                coverage: 0.95,
                average_width: 0.2,
                ensemble_seconds: 0.3,
                total_redraws: 2,
            }],
            width_ratio: Some(1.5),
            width_ratio_of_averages: Some(1.4),
            wall_seconds: 1.0,
        };
        let mut buf = Vec::new();
        write_static_metrics_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("method,metric,value"));
        assert!(text.lines().all(|l| l.split(',').count() == 3));
        assert!(text.contains("bootstrap,concentration,8"));
        assert!(text.contains("both,width_ratio,1.5"));
    }
}
