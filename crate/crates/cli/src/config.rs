//! Scenario configuration files.
//!
//! A scenario is a TOML document with `schema_version = 1`. Quantities may
//! be SI numbers or strings with unit suffixes (see [`crate::units`]).
//!
//! ```toml
//! schema_version = 1
//! name = "pov_l5"
//!
//! [grid]
//! n = 1024
//! dx = "4um"
//!
//! [storage]
//! diffusion = "25cm2/s"
//! times = ["0us", "5us"]
//!
//! [[case]]
//! name = "l5"
//! pov = { radius = "0.45mm", half_width = "0.14mm", charge = 5 }
//! ```
//!
//! A case holds exactly one of `pov`, `rings` (a multi-ring beam), `lg` or
//! `gaussian`. Unknown keys are rejected. [`ScenarioConfig::plan`] checks
//! every beam, storage time and diagnostic before anything is computed.

use std::collections::HashSet;

use mpov_core::analysis::{AnalysisOptions, DEFAULT_AMPLITUDE_CEILING, MIN_BINS};
use mpov_core::beams::{
    predict_singularity_angles, predicted_singularity_radius, synth_gaussian, synth_lg, synth_mpov, LgSpec, MpovSpec,
    PovRingSpec,
};
use mpov_core::diagnostics::{TiltedLensSpec, DEFAULT_FOCAL_LENGTH, DEFAULT_LENS_TILT};
use mpov_core::grid::DEFAULT_WAVELENGTH;
use mpov_core::storage::{check_wrap_around, StorageParams, DEFAULT_DIFFUSION};
use mpov_core::{make_grid, ComplexField, GridSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::units::{Angle, Diffusivity, Length, Time};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(rename = "case", default)]
    pub cases: Vec<CaseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Square grid size; alternatively give `nx` and `ny`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    pub dx: Length,
    #[serde(default = "default_wavelength")]
    pub wavelength: Length,
}

fn default_wavelength() -> Length {
    Length(DEFAULT_WAVELENGTH)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageConfig {
    #[serde(default = "default_diffusion")]
    pub diffusion: Diffusivity,
    #[serde(default = "default_times")]
    pub times: Vec<Time>,
}

fn default_diffusion() -> Diffusivity {
    Diffusivity(DEFAULT_DIFFUSION)
}

fn default_times() -> Vec<Time> {
    vec![Time(0.0)]
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            diffusion: default_diffusion(),
            times: default_times(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_ceiling")]
    pub amplitude_ceiling: f64,
    #[serde(default)]
    pub center: [Length; 2],
    /// Report fidelity of every stored field against its input.
    #[serde(default = "yes")]
    pub fidelity: bool,
    #[serde(default = "yes")]
    pub phase_images: bool,
}

fn default_bins() -> usize {
    256
}

fn default_ceiling() -> f64 {
    DEFAULT_AMPLITUDE_CEILING
}

fn yes() -> bool {
    true
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bins: default_bins(),
            amplitude_ceiling: default_ceiling(),
            center: [Length(0.0); 2],
            fidelity: true,
            phase_images: true,
        }
    }
}

/// Diagnostics run on each case's field at the last storage time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferogram: Option<InterferogramConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demux: Option<DemuxConfig>,
    /// Applied to each demultiplexed part when `demux` is set, otherwise to
    /// the whole field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lens: Option<LensConfig>,
    /// Fit `w^2 = w0^2 + 4 D t` to the Gaussian widths across storage times.
    #[serde(default)]
    pub fit_diffusion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferogramConfig {
    pub tilt_x: Angle,
    #[serde(default)]
    pub tilt_y: Angle,
    /// Circles on which fork fringes are counted.
    #[serde(default)]
    pub fork_radii: Vec<Length>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemuxConfig {
    pub cut: Length,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensConfig {
    #[serde(default = "default_focal_length")]
    pub focal_length: Length,
    #[serde(default = "default_lens_tilt")]
    pub tilt: Angle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<f64>,
}

fn default_focal_length() -> Length {
    Length(DEFAULT_FOCAL_LENGTH)
}

fn default_lens_tilt() -> Angle {
    Angle(DEFAULT_LENS_TILT)
}

impl LensConfig {
    pub fn spec(&self) -> TiltedLensSpec {
        TiltedLensSpec {
            focal_length: self.focal_length.si(),
            tilt: self.tilt.si(),
            distance: self.distance.map(Length::si),
            magnification: self.magnification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write every field as an MPOVF1 file.
    #[serde(default)]
    pub fields: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pov: Option<RingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<Vec<RingConfig>>,
    #[serde(default)]
    pub waive_spacing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lg: Option<LgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub radius: Length,
    pub half_width: Length,
    pub charge: i32,
    #[serde(default)]
    pub phase: Angle,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl RingConfig {
    pub fn spec(&self) -> mpov_core::Result<PovRingSpec> {
        PovRingSpec::new(self.radius.si(), self.half_width.si(), self.charge)?
            .with_phase(self.phase.si())
            .with_amplitude(self.amplitude)
            .validated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgConfig {
    pub waist: Length,
    pub charge: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub waist: Length,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Beam {
    /// A single ring is a one-ring [`MpovSpec`].
    Mpov(MpovSpec),
    Lg(LgSpec),
    Gaussian { waist: f64, amplitude: f64 },
}

impl Beam {
    pub fn synthesize(&self, grid: &GridSpec) -> mpov_core::Result<ComplexField> {
        match self {
            Beam::Mpov(spec) => synth_mpov(grid, spec),
            Beam::Lg(spec) => synth_lg(grid, spec),
            Beam::Gaussian { waist, amplitude } => synth_gaussian(grid, *waist, *amplitude),
        }
    }

    pub fn rings(&self) -> &[PovRingSpec] {
        match self {
            Beam::Mpov(spec) => spec.rings(),
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictedSingularities {
    pub inner_ring: usize,
    pub outer_ring: usize,
    pub radius_m: f64,
    pub angles_rad: Vec<f64>,
}

/// Zeros expected between each pair of neighbouring rings whose charges
/// differ.
pub fn predicted_singularities(beam: &Beam) -> Vec<PredictedSingularities> {
    beam.rings()
        .windows(2)
        .enumerate()
        .filter_map(|(k, pair)| {
            let angles = predict_singularity_angles(&pair[0], &pair[1]).ok()?;
            Some(PredictedSingularities {
                inner_ring: k,
                outer_ring: k + 1,
                radius_m: predicted_singularity_radius(&pair[0], &pair[1]),
                angles_rad: angles,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub beam: Beam,
}

/// A configuration that passed every check.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ScenarioConfig,
    pub grid: GridSpec,
    pub diffusion: f64,
    pub times: Vec<f64>,
    pub analysis: AnalysisOptions,
    pub cases: Vec<Case>,
    pub lens: Option<TiltedLensSpec>,
}

fn field_error(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {e}"))
}

/// Core errors keep their class (and exit status) but gain the field path.
fn core_error(path: &str, e: mpov_core::Error) -> CliError {
    CliError::Core(e).in_stage(format!("validate {path}"))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ScenarioConfig {
    /// Parse TOML text. Errors carry the line, column and key.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("schema error: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version: unsupported version {} (this build reads {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    fn grid_spec(&self) -> CliResult<GridSpec> {
        let g = &self.grid;
        let (nx, ny) = match (g.n, g.nx, g.ny) {
            (Some(n), None, None) => (n, n),
            (None, Some(nx), Some(ny)) => (nx, ny),
            _ => return Err(field_error("grid", "give either `n` or both `nx` and `ny`")),
        };
        make_grid(nx, ny, g.dx.si(), g.wavelength.si()).map_err(|e| core_error("grid", e))
    }

    pub(crate) fn beam(case: &CaseConfig, path: &str) -> CliResult<Beam> {
        let given = [
            case.pov.is_some(),
            case.rings.is_some(),
            case.lg.is_some(),
            case.gaussian.is_some(),
        ];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(field_error(path, "give exactly one of `pov`, `rings`, `lg`, `gaussian`"));
        }
        if case.waive_spacing && case.rings.is_none() {
            return Err(field_error(path, "`waive_spacing` only applies to `rings`"));
        }
        let ring_specs = |rings: &[RingConfig], key: &str| -> CliResult<Vec<PovRingSpec>> {
            rings
                .iter()
                .enumerate()
                .map(|(k, r)| r.spec().map_err(|e| core_error(&format!("{path}.{key}[{k}]"), e)))
                .collect()
        };
        let beam = if let Some(ring) = &case.pov {
            Beam::Mpov(MpovSpec::new(ring_specs(std::slice::from_ref(ring), "pov")?).map_err(|e| core_error(path, e))?)
        } else if let Some(rings) = &case.rings {
            let specs = ring_specs(rings, "rings")?;
            Beam::Mpov(MpovSpec::build(specs, case.waive_spacing).map_err(|e| core_error(&format!("{path}.rings"), e))?)
        } else if let Some(lg) = &case.lg {
            Beam::Lg(LgSpec::new(lg.waist.si(), lg.charge).map_err(|e| core_error(&format!("{path}.lg"), e))?)
        } else {
            let g = case.gaussian.as_ref().expect("one beam kind is present");
            if !(g.waist.si() > 0.0 && g.amplitude.is_finite() && g.amplitude >= 0.0) {
                return Err(field_error(&format!("{path}.gaussian"), "need waist > 0 and amplitude >= 0"));
            }
            Beam::Gaussian {
                waist: g.waist.si(),
                amplitude: g.amplitude,
            }
        };
        Ok(beam)
    }

    /// Validate everything up front. Each beam is synthesized once here so
    /// that window-fit failures surface before any storage run.
    pub fn plan(&self) -> CliResult<Plan> {
        if !valid_name(&self.name) {
            return Err(field_error("name", "use letters, digits, `_` or `-`"));
        }
        let grid = self.grid_spec()?;

        let diffusion = self.storage.diffusion.si();
        if self.storage.times.is_empty() {
            return Err(field_error("storage.times", "at least one time is required"));
        }
        let times: Vec<f64> = self.storage.times.iter().map(|t| t.si()).collect();
        for (k, &t) in times.iter().enumerate() {
            let path = format!("storage.times[{k}]");
            let params = StorageParams::new(diffusion, t).map_err(|e| core_error(&path, e))?;
            check_wrap_around(&grid, &params).map_err(|e| core_error(&path, e))?;
        }

        let a = &self.analysis;
        if a.bins < MIN_BINS {
            return Err(field_error("analysis.bins", format!("need at least {MIN_BINS}")));
        }
        if !(a.amplitude_ceiling > 0.0 && a.amplitude_ceiling <= 1.0) {
            return Err(field_error("analysis.amplitude_ceiling", "must lie in (0, 1]"));
        }
        let center = (a.center[0].si(), a.center[1].si());
        if !grid.contains(center.0, center.1) {
            return Err(field_error("analysis.center", "outside the grid window"));
        }
        let analysis = AnalysisOptions {
            center,
            nbins: a.bins,
            amplitude_ceiling: a.amplitude_ceiling,
        };

        if self.cases.is_empty() {
            return Err(field_error("case", "at least one [[case]] is required"));
        }
        let mut seen = HashSet::new();
        let mut cases = Vec::with_capacity(self.cases.len());
        for (k, case) in self.cases.iter().enumerate() {
            let path = format!("case[{k}]");
            if !valid_name(&case.name) {
                return Err(field_error(&format!("{path}.name"), "use letters, digits, `_` or `-`"));
            }
            if !seen.insert(case.name.as_str()) {
                return Err(field_error(&format!("{path}.name"), format!("duplicate case name {:?}", case.name)));
            }
            let beam = Self::beam(case, &path)?;
            beam.synthesize(&grid).map_err(|e| core_error(&path, e))?;
            cases.push(Case {
                name: case.name.clone(),
                beam,
            });
        }

        let d = &self.diagnostics;
        if let Some(i) = &d.interferogram {
            let period = mpov_core::beams::plane_wave_period(&grid, i.tilt_x.si(), i.tilt_y.si());
            if !(period.is_finite() && period >= 4.0 * grid.dx()) {
                return Err(field_error(
                    "diagnostics.interferogram",
                    format!("fringe period {period:.3e} m is below 4 dx; reduce the tilt"),
                ));
            }
            for (k, r) in i.fork_radii.iter().enumerate() {
                if !(r.si() > 0.0 && r.si() < grid.half_window()) {
                    return Err(field_error(&format!("diagnostics.interferogram.fork_radii[{k}]"), "must lie inside the window"));
                }
            }
        }
        if let Some(m) = &d.demux {
            if !(m.cut.si() > 0.0 && m.cut.si() < grid.half_window()) {
                return Err(field_error("diagnostics.demux.cut", "must lie inside the window"));
            }
        }
        let lens = d
            .lens
            .as_ref()
            .map(|l| l.spec().validated().map_err(|e| core_error("diagnostics.lens", e)))
            .transpose()?;
        if d.fit_diffusion && times.len() < 3 {
            return Err(field_error("diagnostics.fit_diffusion", "needs at least three storage times"));
        }

        Ok(Plan {
            config: self.clone(),
            grid,
            diffusion,
            times,
            analysis,
            cases,
            lens,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
[grid]
n = 256
dx = "8um"
[[case]]
name = "a"
pov = { radius = "0.45mm", half_width = "0.14mm", charge = 5 }
"#;

    #[test]
    fn minimal_config_plans() {
        let plan = ScenarioConfig::from_toml(MINIMAL).unwrap().plan().unwrap();
        assert_eq!(plan.grid.nx(), 256);
        assert_eq!(plan.times, vec![0.0]);
        assert_eq!(plan.diffusion, DEFAULT_DIFFUSION);
        let Beam::Mpov(spec) = &plan.cases[0].beam else {
            panic!("expected a ring beam")
        };
        assert!((spec.rings()[0].radius - 0.45e-3).abs() < 1e-15);
    }

    #[test]
    fn empty_file_is_a_schema_error() {
        let err = ScenarioConfig::from_toml("").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("schema_version"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("dx = \"8um\"", "dx = \"8um\"\ndxx = 3");
        let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("dxx") && err.contains("line 7"), "{err}");
    }

    #[test]
    fn wrong_unit_names_the_field() {
        let text = MINIMAL.replace("\"8um\"", "\"8us\"");
        let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("dx") && err.contains("length"), "{err}");
    }

    #[test]
    fn future_schema_rejected() {
        let err = ScenarioConfig::from_toml(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn plan_rejects_bad_cases() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();

        let mut two = cfg.clone();
        two.cases[0].lg = Some(LgConfig {
            waist: Length(1e-4),
            charge: 1,
        });
        assert!(two.plan().unwrap_err().to_string().contains("exactly one"));

        let mut dup = cfg.clone();
        dup.cases.push(dup.cases[0].clone());
        assert!(dup.plan().unwrap_err().to_string().contains("duplicate"));

        let mut big = cfg.clone();
        big.cases[0].pov.as_mut().unwrap().radius = Length(0.95e-3);
        let err = big.plan().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("case[0]"), "{err}");

        let mut close = cfg.clone();
        let ring = close.cases[0].pov.take().unwrap();
        let mut outer = ring;
        outer.radius = Length(0.6e-3);
        close.cases[0].rings = Some(vec![ring, outer]);
        assert_eq!(close.plan().unwrap_err().exit_code(), 2);
        close.cases[0].waive_spacing = true;
        assert!(close.plan().is_ok());
    }

    #[test]
    fn long_storage_is_a_numerical_guard() {
        let text = MINIMAL.replace("[[case]]", "[storage]\ntimes = [\"0us\", \"1ms\"]\n[[case]]");
        let err = ScenarioConfig::from_toml(&text).unwrap().plan().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("storage.times[1]"), "{err}");
    }

    #[test]
    fn predictions_skip_equal_charges() {
        let ring = |r: f64, l| PovRingSpec::new(r, 0.1e-3, l).unwrap();
        let beam = Beam::Mpov(MpovSpec::new(vec![ring(0.3e-3, 1), ring(0.6e-3, 1), ring(0.9e-3, 4)]).unwrap());
        let p = predicted_singularities(&beam);
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].inner_ring, p[0].angles_rad.len()), (1, 3));
    }
}
