use std::path::Path;

use serde::Serialize;

use super::config::ProjectConfig;
use crate::analysis::{ClassifyOptions, CrossingReport, TrackOptions};
use crate::fit::FitResult;
use crate::{Error, Result};

/// Something worth writing down after a run, with the inputs needed to repeat it.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Fit {
        result: &'a FitResult,
        config: &'a ProjectConfig,
        data: Option<&'a str>,
        region: Option<(f64, f64)>,
    },
    Crossing {
        report: &'a CrossingReport,
        track: TrackOptions,
        classify: ClassifyOptions,
        source: Option<&'a str>,
        warnings: &'a [String],
    },
}

#[derive(Serialize)]
struct FitDoc<'a> {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<[f64; 2]>,
    objective: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_depth: Option<f64>,
    converged: bool,
    rms: f64,
    residual_count: usize,
    iterations: usize,
    evaluations: usize,
    seed: u64,
    best_start: usize,
    start_rms: Vec<f64>,
    parameters: Vec<ParamDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fixed: Vec<FixedDoc>,
    config: &'a ProjectConfig,
}

#[derive(Serialize)]
struct ParamDoc {
    name: String,
    value: f64,
    initial: f64,
    lower: f64,
    upper: f64,
    sensitivity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
}

#[derive(Serialize)]
struct FixedDoc {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct CrossingDoc<'a> {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
    region: [f64; 2],
    classification: &'static str,
    gap: f64,
    coupling_estimate: f64,
    gap_at: f64,
    branches: [usize; 2],
    mean_width: f64,
    gap_threshold: f64,
    merge_tolerance: f64,
    merged_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling_squared: Option<f64>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    warnings: &'a [String],
    options: OptionsDoc,
}

#[derive(Serialize)]
struct OptionsDoc {
    min_depth: f64,
    max_jump_widths: f64,
    share_widths: f64,
    gap_threshold_widths: f64,
    merge_tolerance_widths: f64,
}

/// TOML text of the report. NaN sensitivities (model failed at the optimum) are written as `nan`.
pub fn render_report(report: &Report<'_>) -> Result<String> {
    let text = match *report {
        Report::Fit {
            result,
            config,
            data,
            region,
        } => {
            let min_depth = match result.objective {
                crate::fit::ObjectiveKind::BranchResidual { min_depth } => Some(min_depth),
                crate::fit::ObjectiveKind::TraceResidual => None,
            };
            toml::to_string(&FitDoc {
                kind: "fit",
                data,
                region: region.map(|(a, b)| [a, b]),
                objective: result.objective.name(),
                min_depth,
                converged: result.converged,
                rms: result.rms,
                residual_count: result.residual_count,
                iterations: result.iterations,
                evaluations: result.evaluations,
                seed: result.seed,
                best_start: result.best_start,
                start_rms: result.start_rms.clone(),
                parameters: result
                    .free
                    .iter()
                    .map(|p| ParamDoc {
                        name: p.id.to_string(),
                        value: p.value,
                        initial: p.initial,
                        lower: p.lower,
                        upper: p.upper,
                        sensitivity: p.sensitivity,
                        std_error: p.std_error,
                    })
                    .collect(),
                fixed: result
                    .fixed
                    .iter()
                    .map(|(id, v)| FixedDoc {
                        name: id.to_string(),
                        value: *v,
                    })
                    .collect(),
                config,
            })
        }
        Report::Crossing {
            report,
            track,
            classify,
            source,
            warnings,
        } => toml::to_string(&CrossingDoc {
            kind: "crossing",
            source,
            region: [report.region.0, report.region.1],
            classification: report.classification.as_str(),
            gap: report.gap,
            coupling_estimate: report.coupling_estimate,
            gap_at: report.gap_at,
            branches: [report.branches.0, report.branches.1],
            mean_width: report.mean_width,
            gap_threshold: report.gap_threshold,
            merge_tolerance: report.merge_tolerance,
            merged_points: report.merged_points,
            coupling_squared: report.coupling_squared,
            warnings,
            options: OptionsDoc {
                min_depth: track.min_depth,
                max_jump_widths: track.max_jump_widths,
                share_widths: track.share_widths,
                gap_threshold_widths: classify.gap_threshold_widths,
                merge_tolerance_widths: classify.merge_tolerance_widths,
            },
        }),
    };
    text.map_err(|e| Error::invalid(format!("cannot serialise report: {e}")))
}

pub fn save_report(report: &Report<'_>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report)?).map_err(|e| Error::io(path, e))
}
