//! Scenario runner: synthesize every case, store it for each configured
//! time, analyze the retrieved fields, run the requested diagnostics on the
//! last one, and write images, CSVs, `report.json` and `run.json`.
//!
//! Stages run in order. A failing stage stops the run and leaves a
//! `run.json` with `status = "failed"` listing whatever was written.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mpov_core::analysis::{analyze, fit_gaussian_width, phase_difference, winding_on_circle, AnalysisOptions, AnalysisReport, Singularity};
use mpov_core::beams::{plane_wave_period, synth_plane_wave};
use mpov_core::diagnostics::{
    count_dark_stripes, demultiplex, demux_cut_warning, fit_diffusion_coefficient, fork_fringe_counts, interferogram,
    tilted_lens_image, DiffusionFit, TiltedLensSpec,
};
use mpov_core::io::write_field_to;
use mpov_core::storage::storage_sweep;
use mpov_core::ComplexField;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{predicted_singularities, Beam, Case, Plan, PredictedSingularities, ScenarioConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::output::{
    intensity_pgm, json_bytes, phase_pgm, profile_csv, sha256_hex, widths_csv, ArtifactWriter, OutputEntry, WidthRow,
};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "run.json";

/// Per-field numbers shared by the scenario report and `analyze`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldMetrics {
    pub power: f64,
    pub peak_radius_m: Option<f64>,
    pub fwhm_m: Option<f64>,
    pub fidelity: Option<f64>,
    pub singularities: Vec<Singularity>,
}

impl FieldMetrics {
    pub fn new(field: &ComplexField, report: &AnalysisReport) -> Self {
        FieldMetrics {
            power: field.power(),
            peak_radius_m: report.peak_radius,
            fwhm_m: report.fwhm,
            fidelity: report.fidelity_vs_reference,
            singularities: report.singularities.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeMetrics {
    pub time_s: f64,
    #[serde(flatten)]
    pub field: FieldMetrics,
    /// Change since the first storage time of the case.
    pub peak_shift_m: Option<f64>,
    /// Relative FWHM change since the first storage time.
    pub fwhm_growth: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ring_phase_jumps: Vec<RingPhaseJump>,
}

/// Phase step from one ring crest to the next along the +x axis. Near `pi`
/// when a zero circle separates them.
#[derive(Debug, Clone, Serialize)]
pub struct RingPhaseJump {
    pub inner_ring: usize,
    pub outer_ring: usize,
    pub jump_rad: f64,
}

/// Jumps between adjacent rings of equal charge; for unequal charges the
/// step depends on the azimuth and is not reported.
fn ring_phase_jumps(field: &ComplexField, beam: &Beam) -> Vec<RingPhaseJump> {
    let rings = beam.rings();
    (1..rings.len())
        .filter(|&k| rings[k - 1].charge == rings[k].charge)
        .map(|k| RingPhaseJump {
            inner_ring: k - 1,
            outer_ring: k,
            jump_rad: phase_difference(field, (rings[k - 1].radius, 0.0), (rings[k].radius, 0.0)),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ForkCount {
    pub radius_m: f64,
    pub upper: f64,
    pub lower: f64,
    pub difference: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterferogramMetrics {
    pub period_m: f64,
    pub fork_counts: Vec<ForkCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RingWinding {
    pub ring: usize,
    pub radius_m: f64,
    pub winding: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemuxMetrics {
    pub cut_m: f64,
    pub warning: Option<String>,
    pub inner_power: f64,
    pub outer_power: f64,
    pub inner_winding: Option<RingWinding>,
    pub outer_winding: Option<RingWinding>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LensMetrics {
    pub part: &'static str,
    pub magnification: f64,
    pub focal_x_m: f64,
    pub focal_y_m: f64,
    pub distance_m: f64,
    pub dark_stripes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsMetrics {
    pub time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interferogram: Option<InterferogramMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demux: Option<DemuxMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lens: Vec<LensMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_fit: Option<DiffusionFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseMetrics {
    pub name: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub predicted_singularities: Vec<PredictedSingularities>,
    pub times: Vec<TimeMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsMetrics>,
}

/// Case names from highest to lowest fidelity at one storage time.
#[derive(Debug, Clone, Serialize)]
pub struct FidelityRanking {
    pub time_s: f64,
    pub cases: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioMetrics {
    pub cases: Vec<CaseMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fidelity_ranking: Vec<FidelityRanking>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<'a> {
    pub schema_version: u32,
    pub scenario: &'a str,
    pub parameters: &'a ScenarioConfig,
    pub metrics: &'a ScenarioMetrics,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub scenario: Option<String>,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix_s: Option<u64>,
    pub inputs: Vec<InputEntry>,
    pub parameters: Option<ScenarioConfig>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Leave wall-clock metadata out of `run.json`.
    pub reproducible: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub metrics: ScenarioMetrics,
    pub outputs: Vec<OutputEntry>,
}

/// Run a scenario given its TOML text. `input_label` identifies the
/// configuration in the manifest.
pub fn run_scenario(text: &str, input_label: &str, options: &RunOptions) -> CliResult<RunSummary> {
    let mut writer = ArtifactWriter::create(&options.out_dir)?;
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: concat!("mpov ", env!("CARGO_PKG_VERSION")).to_owned(),
        scenario: None,
        status: "failed",
        error: None,
        created_unix_s: (!options.reproducible).then(unix_now),
        inputs: vec![InputEntry {
            path: input_label.to_owned(),
            sha256: sha256_hex(text.as_bytes()),
        }],
        parameters: None,
        outputs: Vec::new(),
    };
    let result = execute(text, &mut writer, &mut manifest);
    manifest.outputs = writer.entries().to_vec();
    match &result {
        Ok(_) => manifest.status = "complete",
        Err(e) => manifest.error = Some(e.to_string()),
    }
    // A manifest write failure must not hide the original error.
    let written = json_bytes(&manifest).and_then(|b| writer.write_unrecorded(MANIFEST_FILE, &b));
    let metrics = result?;
    written?;
    Ok(RunSummary {
        out_dir: writer.root().to_path_buf(),
        metrics,
        outputs: writer.entries().to_vec(),
    })
}

pub fn run_scenario_file(path: &Path, options: &RunOptions) -> CliResult<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    run_scenario(&text, &path.display().to_string(), options)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn execute(text: &str, writer: &mut ArtifactWriter, manifest: &mut Manifest) -> CliResult<ScenarioMetrics> {
    let config = ScenarioConfig::from_toml(text).map_err(|e| e.in_stage("parse"))?;
    manifest.scenario = Some(config.name.clone());
    manifest.parameters = Some(config.clone());
    let plan = config.plan()?;

    let mut cases = Vec::with_capacity(plan.cases.len());
    for case in &plan.cases {
        cases.push(run_case(&plan, case, writer)?);
    }
    let fidelity_ranking = if plan.config.analysis.fidelity && cases.len() > 1 {
        rank_by_fidelity(&plan.times, &cases)
    } else {
        Vec::new()
    };
    let metrics = ScenarioMetrics {
        cases,
        fidelity_ranking,
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        scenario: &plan.config.name,
        parameters: &plan.config,
        metrics: &metrics,
        files: writer.entries().iter().map(|e| e.path.clone()).collect(),
    };
    writer.write(REPORT_FILE, &json_bytes(&report)?, None)?;
    Ok(metrics)
}

fn rank_by_fidelity(times: &[f64], cases: &[CaseMetrics]) -> Vec<FidelityRanking> {
    times
        .iter()
        .enumerate()
        .map(|(k, &time_s)| {
            let mut scored: Vec<(f64, &str)> = cases
                .iter()
                .map(|c| (c.times[k].field.fidelity.unwrap_or(f64::NAN), c.name.as_str()))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            FidelityRanking {
                time_s,
                cases: scored.into_iter().map(|(_, n)| n.to_owned()).collect(),
            }
        })
        .collect()
}

fn field_bytes(field: &ComplexField) -> CliResult<Vec<u8>> {
    let mut bytes = Vec::new();
    write_field_to(field, &mut bytes)?;
    Ok(bytes)
}

/// Analysis of one stored field; pure so that storage times can run in
/// parallel.
pub fn analyze_field(
    field: &ComplexField,
    input: Option<&ComplexField>,
    options: &AnalysisOptions,
) -> CliResult<(AnalysisReport, FieldMetrics)> {
    let report = analyze(field, options, input)?;
    let metrics = FieldMetrics::new(field, &report);
    Ok((report, metrics))
}

fn run_case(plan: &Plan, case: &Case, writer: &mut ArtifactWriter) -> CliResult<CaseMetrics> {
    let stage = |s: &str| format!("{}/{s}", case.name);
    let input = case.beam.synthesize(&plan.grid).map_err(|e| CliError::from(e).in_stage(stage("synth")))?;
    let stored = storage_sweep(&input, plan.diffusion, &plan.times).map_err(|e| CliError::from(e).in_stage(stage("store")))?;

    let reference = plan.config.analysis.fidelity.then_some(&input);
    let analyses = stored
        .par_iter()
        .map(|f| analyze_field(f, reference, &plan.analysis))
        .collect::<CliResult<Vec<_>>>()
        .map_err(|e| e.in_stage(stage("analyze")))?;

    let mut times = Vec::with_capacity(stored.len());
    let (first_peak, first_fwhm) = (analyses[0].1.peak_radius_m, analyses[0].1.fwhm_m);
    for (k, ((field, (report, metrics)), &time_s)) in stored.iter().zip(&analyses).zip(&plan.times).enumerate() {
        let base = format!("{}_t{k}", case.name);
        let write = |writer: &mut ArtifactWriter| -> CliResult<()> {
            let (image, peak) = intensity_pgm(&field.intensity())?;
            writer.write(&format!("{base}_intensity.pgm"), &image, Some(peak))?;
            if plan.config.analysis.phase_images {
                writer.write(&format!("{base}_phase.pgm"), &phase_pgm(field)?, None)?;
            }
            writer.write(&format!("{base}_profile.csv"), &profile_csv(&report.profile)?, None)?;
            if plan.config.output.fields {
                writer.write(&format!("{base}.mpovf"), &field_bytes(field)?, None)?;
            }
            Ok(())
        };
        write(writer).map_err(|e| e.in_stage(stage("write")))?;
        times.push(TimeMetrics {
            time_s,
            field: metrics.clone(),
            peak_shift_m: metrics.peak_radius_m.zip(first_peak).map(|(p, p0)| p - p0),
            fwhm_growth: metrics.fwhm_m.zip(first_fwhm).map(|(f, f0)| f / f0 - 1.0),
            ring_phase_jumps: ring_phase_jumps(field, &case.beam),
        });
    }

    let last = stored.len() - 1;
    let diagnostics = run_diagnostics(plan, case, &stored[last], plan.times[last], &analyses, writer)
        .map_err(|e| e.in_stage(stage("diagnostics")))?;
    Ok(CaseMetrics {
        name: case.name.clone(),
        predicted_singularities: predicted_singularities(&case.beam),
        times,
        diagnostics,
    })
}

fn lens_metrics(part: &'static str, field: &ComplexField, lens: &TiltedLensSpec) -> CliResult<(LensMetrics, Vec<u8>, f64)> {
    let resolved = lens.resolve(field)?;
    let image = tilted_lens_image(field, lens)?;
    let dark_stripes = count_dark_stripes(&image)?;
    let (bytes, peak) = intensity_pgm(&image)?;
    let metrics = LensMetrics {
        part,
        magnification: resolved.magnification,
        focal_x_m: resolved.focal_x,
        focal_y_m: resolved.focal_y,
        distance_m: resolved.distance,
        dark_stripes,
    };
    Ok((metrics, bytes, peak))
}

fn run_diagnostics(
    plan: &Plan,
    case: &Case,
    field: &ComplexField,
    time_s: f64,
    analyses: &[(AnalysisReport, FieldMetrics)],
    writer: &mut ArtifactWriter,
) -> CliResult<Option<DiagnosticsMetrics>> {
    let d = &plan.config.diagnostics;
    if d.interferogram.is_none() && d.demux.is_none() && plan.lens.is_none() && !d.fit_diffusion {
        return Ok(None);
    }
    let name = &case.name;
    let mut out = DiagnosticsMetrics {
        time_s,
        interferogram: None,
        demux: None,
        lens: Vec::new(),
        diffusion_fit: None,
    };

    if let Some(cfg) = &d.interferogram {
        let (tx, ty) = (cfg.tilt_x.si(), cfg.tilt_y.si());
        let reference = synth_plane_wave(&plan.grid, tx, ty, field.max_abs())?;
        let image = interferogram(field, &reference)?;
        let (bytes, peak) = intensity_pgm(&image)?;
        writer.write(&format!("{name}_interferogram.pgm"), &bytes, Some(peak))?;
        let k = plan.grid.wavenumber();
        let carrier = (k * tx, k * ty);
        let fork_counts = cfg
            .fork_radii
            .iter()
            .map(|r| {
                let c = fork_fringe_counts(&image, carrier, r.si())?;
                Ok(ForkCount {
                    radius_m: r.si(),
                    upper: c.upper,
                    lower: c.lower,
                    difference: c.difference,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        out.interferogram = Some(InterferogramMetrics {
            period_m: plane_wave_period(&plan.grid, tx, ty),
            fork_counts,
        });
    }

    if let Some(cfg) = &d.demux {
        let cut = cfg.cut.si();
        let (inner, outer) = demultiplex(field, cut)?;
        for (part, f) in [("inner", &inner), ("outer", &outer)] {
            let (bytes, peak) = intensity_pgm(&f.intensity())?;
            writer.write(&format!("{name}_{part}_intensity.pgm"), &bytes, Some(peak))?;
            if plan.config.output.fields {
                writer.write(&format!("{name}_{part}.mpovf"), &field_bytes(f)?, None)?;
            }
        }
        let rings = case.beam.rings();
        let winding = |f: &ComplexField, ring: Option<usize>| -> CliResult<Option<RingWinding>> {
            ring.map(|k| {
                let radius_m = rings[k].radius;
                Ok(RingWinding {
                    ring: k,
                    radius_m,
                    winding: winding_on_circle(f, radius_m)?,
                })
            })
            .transpose()
        };
        let inner_ring = rings.iter().rposition(|r| r.radius < cut);
        let outer_ring = rings.iter().position(|r| r.radius > cut);
        let warning = match &case.beam {
            Beam::Mpov(spec) => demux_cut_warning(spec, cut),
            _ => None,
        };
        out.demux = Some(DemuxMetrics {
            cut_m: cut,
            warning,
            inner_power: inner.power(),
            outer_power: outer.power(),
            inner_winding: winding(&inner, inner_ring)?,
            outer_winding: winding(&outer, outer_ring)?,
        });
        if let Some(lens) = &plan.lens {
            for (part, f) in [("inner", &inner), ("outer", &outer)] {
                let (m, bytes, peak) = lens_metrics(part, f, lens)?;
                writer.write(&format!("{name}_{part}_lens.pgm"), &bytes, Some(peak))?;
                out.lens.push(m);
            }
        }
    } else if let Some(lens) = &plan.lens {
        let (m, bytes, peak) = lens_metrics("field", field, lens)?;
        writer.write(&format!("{name}_lens.pgm"), &bytes, Some(peak))?;
        out.lens.push(m);
    }

    if d.fit_diffusion {
        let rows = plan
            .times
            .iter()
            .zip(analyses)
            .map(|(&t_s, (report, _))| Ok(WidthRow {
                t_s,
                w_m: fit_gaussian_width(&report.profile)?,
            }))
            .collect::<CliResult<Vec<_>>>()?;
        writer.write(&format!("{name}_widths.csv"), &widths_csv(&rows)?, None)?;
        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.t_s, r.w_m)).collect();
        out.diffusion_fit = Some(fit_diffusion_coefficient(&samples)?);
    }
    Ok(Some(out))
}
