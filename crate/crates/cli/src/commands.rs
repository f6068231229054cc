//! Argument parsing and the subcommands.
//!
//! Field-valued commands read and write MPOVF1 files; `-` (the default)
//! means stdin or stdout, so the stages compose as a shell pipeline:
//!
//! ```text
//! mpov synth --pov R=0.45mm w=0.14mm l=5 | mpov store --D 25cm2/s --t 5us | mpov analyze
//! ```

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use mpov_core::analysis::{winding_on_circle, AnalysisOptions, DEFAULT_AMPLITUDE_CEILING};
use mpov_core::beams::synth_plane_wave;
use mpov_core::diagnostics::{
    count_dark_stripes, demultiplex, fit_diffusion_coefficient, fork_fringe_counts, interferogram, tilted_lens_image,
    TiltedLensSpec, DEFAULT_FOCAL_LENGTH, DEFAULT_LENS_TILT,
};
use mpov_core::io::{read_field_from, write_field_to};
use mpov_core::storage::storage_sweep;
use mpov_core::{make_grid, ComplexField};
use serde::Serialize;
use serde_json::json;

use crate::config::{CaseConfig, GaussianConfig, LgConfig, RingConfig, ScenarioConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult, EXIT_USAGE};
use crate::output::{intensity_pgm, json_bytes, profile_csv, read_widths_csv};
use crate::scenario::{analyze_field, run_scenario, run_scenario_file, ForkCount, RunOptions};
use crate::scenarios::{bundled, BUNDLED};
use crate::units::{parse_quantity, Angle, Dimension, Diffusivity, Length, Time};

#[derive(Debug, Parser)]
#[command(name = "mpov", version, about = "Perfect optical vortex synthesis, diffusion storage and analysis")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a beam and write it as a field file.
    Synth(SynthArgs),
    /// Blur a field by atomic diffusion for one storage time.
    Store(StoreArgs),
    /// Radial profile, ring metrics, singularities and fidelity as JSON.
    Analyze(AnalyzeArgs),
    /// Interfere a field with a tilted plane wave and count fork fringes.
    Interfere(InterfereArgs),
    /// Count dark stripes behind a tilted lens.
    #[command(name = "oam-measure")]
    OamMeasure(OamArgs),
    /// Split a field with a circular mask.
    Demux(DemuxArgs),
    /// Fit a diffusion coefficient to a width-versus-time CSV.
    #[command(name = "fit-d")]
    FitD(FitArgs),
    /// Run a scenario file or a bundled scenario.
    Run(RunArgs),
    /// List bundled scenarios, or print one.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Grid samples per side.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value = "4um")]
    dx: Length,
    #[arg(long, default_value = "795nm")]
    wavelength: Length,
    /// One ring: R=<len> w=<len> l=<int> [phase=<angle>] [A=<amp>]. Repeat for more rings.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", action = clap::ArgAction::Append)]
    pov: Vec<String>,
    /// Allow rings closer than twice the widest ring width.
    #[arg(long)]
    waive_spacing: bool,
    /// Laguerre-Gaussian mode: w0=<len> l=<int>.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", conflicts_with_all = ["pov", "gaussian"])]
    lg: Option<Vec<String>>,
    /// Gaussian beam: w0=<len> [A=<amp>].
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", conflicts_with_all = ["pov", "lg"])]
    gaussian: Option<Vec<String>>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[arg(short, long, default_value = "-")]
    input: String,
    #[arg(short, long, default_value = "-")]
    output: String,
    /// Diffusion coefficient.
    #[arg(long = "D", visible_alias = "diffusion", default_value = "25cm2/s")]
    diffusion: Diffusivity,
    /// Storage time.
    #[arg(long = "t", visible_alias = "time")]
    time: Time,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(short, long, default_value = "-")]
    input: String,
    /// Field to compute fidelity against.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    bins: usize,
    /// Singularity search ceiling as a fraction of the peak amplitude.
    #[arg(long, default_value_t = DEFAULT_AMPLITUDE_CEILING)]
    ceiling: f64,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    center_x: Length,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    center_y: Length,
    /// Also write the radial profile here.
    #[arg(long)]
    profile_csv: Option<PathBuf>,
    /// JSON report destination.
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct InterfereArgs {
    #[arg(short, long, default_value = "-")]
    input: String,
    #[arg(long, allow_hyphen_values = true)]
    tilt_x: Angle,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    tilt_y: Angle,
    /// Reference amplitude; defaults to the field's peak amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Count fork fringes on this circle. Repeatable.
    #[arg(long)]
    fork_radius: Vec<Length>,
    /// Write the interferogram as a 16-bit PGM.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct OamArgs {
    #[arg(short, long, default_value = "-")]
    input: String,
    #[arg(long)]
    focal_length: Option<Length>,
    /// Lens tilt; defaults to 0.55 rad.
    #[arg(long)]
    tilt: Option<Angle>,
    /// Observation distance in the scaled frame; defaults to midway between the two line foci.
    #[arg(long)]
    distance: Option<Length>,
    /// Beam magnification before the lens; chosen automatically when omitted.
    #[arg(long)]
    magnification: Option<f64>,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct DemuxArgs {
    #[arg(short, long, default_value = "-")]
    input: String,
    /// Mask radius.
    #[arg(long)]
    cut: Length,
    /// Field inside the cut.
    #[arg(long)]
    inner: Option<PathBuf>,
    /// Field outside the cut.
    #[arg(long)]
    outer: Option<PathBuf>,
    /// Report the winding of the inner part on this circle.
    #[arg(long)]
    inner_radius: Option<Length>,
    /// Report the winding of the outer part on this circle.
    #[arg(long)]
    outer_radius: Option<Length>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with columns t_s and w_m.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(required_unless_present = "scenario", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name (see `mpov scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory; defaults to out/<scenario name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit wall-clock metadata so repeated runs are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Debug, Args)]
struct ScenariosArgs {
    /// Print this scenario's configuration.
    name: Option<String>,
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = Cli::from_arg_matches(&matches)
        .map_err(|e| CliError::Usage(e.to_string()))
        .and_then(|cli| dispatch(cli, &matches));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, matches: &ArgMatches) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => {
            let sub = matches.subcommand_matches("synth").expect("synth matches");
            let rings: Vec<Vec<String>> = sub
                .get_occurrences::<String>("pov")
                .map(|occ| occ.map(|o| o.cloned().collect()).collect())
                .unwrap_or_default();
            synth(a, rings)
        }
        Command::Store(a) => store(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Interfere(a) => interfere(a),
        Command::OamMeasure(a) => oam_measure(a),
        Command::Demux(a) => demux(a),
        Command::FitD(a) => fit_d(a),
        Command::Run(a) => run(a),
        Command::Scenarios(a) => scenarios(a),
    }
}

fn read_input(path: &str) -> CliResult<ComplexField> {
    if path == "-" {
        Ok(read_field_from(BufReader::new(io::stdin().lock()))?)
    } else {
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Ok(read_field_from(BufReader::new(file))?)
    }
}

fn write_target(path: &str, bytes: &[u8]) -> CliResult<()> {
    if path == "-" {
        let mut out = io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))
    } else {
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }
}

fn write_field_target(path: &str, field: &ComplexField) -> CliResult<()> {
    if path == "-" {
        let mut out = BufWriter::new(io::stdout().lock());
        write_field_to(field, &mut out)?;
        out.flush().map_err(|e| CliError::io("<stdout>", e))
    } else {
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        write_field_to(field, &mut out)?;
        out.flush().map_err(|e| CliError::io(path, e))
    }
}

fn write_path(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Report layout shared with scenario runs.
fn emit_report(output: &str, command: &str, parameters: serde_json::Value, metrics: impl Serialize, files: Vec<String>) -> CliResult<()> {
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": command,
        "parameters": parameters,
        "metrics": metrics,
        "files": files,
    });
    write_target(output, &json_bytes(&report)?)
}

fn key_values<'a>(flag: &str, tokens: &'a [String]) -> CliResult<Vec<(&'a str, &'a str)>> {
    tokens
        .iter()
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--{flag}: expected KEY=VALUE, got {t:?}")))
        })
        .collect()
}

fn quantity(flag: &str, key: &str, value: &str, dim: Dimension) -> CliResult<f64> {
    parse_quantity(value, dim).map_err(|e| CliError::Usage(format!("--{flag} {key}: {e}")))
}

fn number<T: std::str::FromStr>(flag: &str, key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("--{flag} {key}: cannot read {value:?} as a number")))
}

fn parse_ring(tokens: &[String]) -> CliResult<RingConfig> {
    let (mut radius, mut width, mut charge) = (None, None, None);
    let (mut phase, mut amplitude) = (0.0, 1.0);
    for (key, value) in key_values("pov", tokens)? {
        match key {
            "R" | "radius" => radius = Some(quantity("pov", key, value, Dimension::Length)?),
            "w" | "half_width" => width = Some(quantity("pov", key, value, Dimension::Length)?),
            "l" | "charge" => charge = Some(number("pov", key, value)?),
            "phase" => phase = quantity("pov", key, value, Dimension::Angle)?,
            "A" | "amplitude" => amplitude = number("pov", key, value)?,
            other => return Err(CliError::Usage(format!("--pov: unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| CliError::Usage(format!("--pov: missing {k}="));
    Ok(RingConfig {
        radius: Length(radius.ok_or_else(|| missing("R"))?),
        half_width: Length(width.ok_or_else(|| missing("w"))?),
        charge: charge.ok_or_else(|| missing("l"))?,
        phase: Angle(phase),
        amplitude,
    })
}

fn parse_lg(tokens: &[String]) -> CliResult<LgConfig> {
    let (mut waist, mut charge) = (None, None);
    for (key, value) in key_values("lg", tokens)? {
        match key {
            "w0" | "waist" => waist = Some(quantity("lg", key, value, Dimension::Length)?),
            "l" | "charge" => charge = Some(number("lg", key, value)?),
            other => return Err(CliError::Usage(format!("--lg: unknown key {other:?}"))),
        }
    }
    Ok(LgConfig {
        waist: Length(waist.ok_or_else(|| CliError::Usage("--lg: missing w0=".into()))?),
        charge: charge.ok_or_else(|| CliError::Usage("--lg: missing l=".into()))?,
    })
}

fn parse_gaussian(tokens: &[String]) -> CliResult<GaussianConfig> {
    let (mut waist, mut amplitude) = (None, 1.0);
    for (key, value) in key_values("gaussian", tokens)? {
        match key {
            "w0" | "waist" => waist = Some(quantity("gaussian", key, value, Dimension::Length)?),
            "A" | "amplitude" => amplitude = number("gaussian", key, value)?,
            other => return Err(CliError::Usage(format!("--gaussian: unknown key {other:?}"))),
        }
    }
    Ok(GaussianConfig {
        waist: Length(waist.ok_or_else(|| CliError::Usage("--gaussian: missing w0=".into()))?),
        amplitude,
    })
}

fn synth(a: SynthArgs, ring_tokens: Vec<Vec<String>>) -> CliResult<()> {
    let mut case = CaseConfig {
        name: "synth".into(),
        pov: None,
        rings: None,
        waive_spacing: a.waive_spacing,
        lg: None,
        gaussian: None,
    };
    if let Some(tokens) = &a.lg {
        case.lg = Some(parse_lg(tokens)?);
    } else if let Some(tokens) = &a.gaussian {
        case.gaussian = Some(parse_gaussian(tokens)?);
    } else if !ring_tokens.is_empty() {
        case.rings = Some(ring_tokens.iter().map(|t| parse_ring(t)).collect::<CliResult<_>>()?);
    } else {
        return Err(CliError::Usage("synth needs --pov, --lg or --gaussian".into()));
    }
    let grid = make_grid(a.n, a.n, a.dx.si(), a.wavelength.si())?;
    let beam = ScenarioConfig::beam(&case, "synth")?;
    let field = beam.synthesize(&grid)?;
    write_field_target(&a.output, &field)
}

fn store(a: StoreArgs) -> CliResult<()> {
    let field = read_input(&a.input)?;
    let mut stored = storage_sweep(&field, a.diffusion.si(), &[a.time.si()])?;
    write_field_target(&a.output, &stored.remove(0))
}

fn analyze_cmd(a: AnalyzeArgs) -> CliResult<()> {
    let field = read_input(&a.input)?;
    let reference = a.reference.as_ref().map(|p| read_input(&p.display().to_string())).transpose()?;
    let options = AnalysisOptions {
        center: (a.center_x.si(), a.center_y.si()),
        nbins: a.bins,
        amplitude_ceiling: a.ceiling,
    };
    let (report, metrics) = analyze_field(&field, reference.as_ref(), &options)?;
    let mut files = Vec::new();
    if let Some(path) = &a.profile_csv {
        write_path(path, &profile_csv(&report.profile)?)?;
        files.push(path.display().to_string());
    }
    let parameters = json!({
        "input": a.input,
        "reference": a.reference,
        "bins": a.bins,
        "amplitude_ceiling": a.ceiling,
        "center": [a.center_x.si(), a.center_y.si()],
    });
    emit_report(&a.output, "analyze", parameters, metrics, files)
}

fn interfere(a: InterfereArgs) -> CliResult<()> {
    let field = read_input(&a.input)?;
    let g = *field.grid();
    let (tx, ty) = (a.tilt_x.si(), a.tilt_y.si());
    let amplitude = a.amplitude.unwrap_or_else(|| field.max_abs());
    let reference = synth_plane_wave(&g, tx, ty, amplitude)?;
    let image = interferogram(&field, &reference)?;
    let carrier = (g.wavenumber() * tx, g.wavenumber() * ty);
    let fork_counts = a
        .fork_radius
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
    let mut files = Vec::new();
    let mut normalization = None;
    if let Some(path) = &a.image {
        let (bytes, peak) = intensity_pgm(&image)?;
        write_path(path, &bytes)?;
        files.push(path.display().to_string());
        normalization = Some(peak);
    }
    let parameters = json!({
        "input": a.input,
        "tilt_x": tx,
        "tilt_y": ty,
        "amplitude": amplitude,
    });
    let metrics = json!({
        "period_m": mpov_core::beams::plane_wave_period(&g, tx, ty),
        "fork_counts": fork_counts,
        "image_normalization": normalization,
    });
    emit_report(&a.output, "interfere", parameters, metrics, files)
}

fn oam_measure(a: OamArgs) -> CliResult<()> {
    let field = read_input(&a.input)?;
    let lens = TiltedLensSpec {
        focal_length: a.focal_length.map_or(DEFAULT_FOCAL_LENGTH, Length::si),
        tilt: a.tilt.map_or(DEFAULT_LENS_TILT, Angle::si),
        distance: a.distance.map(Length::si),
        magnification: a.magnification,
    }
    .validated()?;
    let resolved = lens.resolve(&field)?;
    let image = tilted_lens_image(&field, &lens)?;
    let stripes = count_dark_stripes(&image)?;
    let mut files = Vec::new();
    let mut normalization = None;
    if let Some(path) = &a.image {
        let (bytes, peak) = intensity_pgm(&image)?;
        write_path(path, &bytes)?;
        files.push(path.display().to_string());
        normalization = Some(peak);
    }
    let metrics = json!({
        "dark_stripes": stripes,
        "magnification": resolved.magnification,
        "focal_x_m": resolved.focal_x,
        "focal_y_m": resolved.focal_y,
        "distance_m": resolved.distance,
        "image_normalization": normalization,
    });
    emit_report(&a.output, "oam-measure", json!({ "input": a.input, "lens": lens }), metrics, files)
}

fn demux(a: DemuxArgs) -> CliResult<()> {
    let field = read_input(&a.input)?;
    let (inner, outer) = demultiplex(&field, a.cut.si())?;
    let mut files = Vec::new();
    for (path, f) in [(&a.inner, &inner), (&a.outer, &outer)] {
        if let Some(path) = path {
            write_field_target(&path.display().to_string(), f)?;
            files.push(path.display().to_string());
        }
    }
    let winding = |f: &ComplexField, r: Option<Length>| -> CliResult<Option<i32>> {
        r.map(|r| winding_on_circle(f, r.si())).transpose().map_err(Into::into)
    };
    let metrics = json!({
        "inner_power": inner.power(),
        "outer_power": outer.power(),
        "inner_winding": winding(&inner, a.inner_radius)?,
        "outer_winding": winding(&outer, a.outer_radius)?,
    });
    let parameters = json!({
        "input": a.input,
        "cut_m": a.cut.si(),
        "inner_radius_m": a.inner_radius.map(Length::si),
        "outer_radius_m": a.outer_radius.map(Length::si),
    });
    emit_report(&a.output, "demux", parameters, metrics, files)
}

fn fit_d(a: FitArgs) -> CliResult<()> {
    let samples = read_widths_csv(&a.input)?;
    let fit = fit_diffusion_coefficient(&samples)?;
    let parameters = json!({ "input": a.input, "samples": samples.len() });
    emit_report(&a.output, "fit-d", parameters, fit, Vec::new())
}

fn run(a: RunArgs) -> CliResult<()> {
    let summary = match (&a.config, &a.scenario) {
        (Some(path), _) => {
            let out = a.out.clone().unwrap_or_else(|| {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                PathBuf::from("out").join(stem.unwrap_or_else(|| "scenario".into()))
            });
            run_scenario_file(
                path,
                &RunOptions {
                    out_dir: out,
                    reproducible: a.reproducible,
                },
            )?
        }
        (None, Some(name)) => {
            let text = bundled(name).ok_or_else(|| CliError::Usage(format!("no bundled scenario named {name:?}")))?;
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
            run_scenario(
                text,
                &format!("bundled:{name}"),
                &RunOptions {
                    out_dir: out,
                    reproducible: a.reproducible,
                },
            )?
        }
        (None, None) => unreachable!("clap requires a config or --scenario"),
    };
    eprintln!("wrote {} files to {}", summary.outputs.len() + 1, summary.out_dir.display());
    Ok(())
}

fn scenarios(a: ScenariosArgs) -> CliResult<()> {
    match a.name {
        None => {
            let names: String = BUNDLED.iter().map(|(n, _)| format!("{n}\n")).collect();
            write_target("-", names.as_bytes())
        }
        Some(name) => {
            let text = bundled(&name).ok_or_else(|| CliError::Usage(format!("no bundled scenario named {name:?}")))?;
            write_target("-", text.as_bytes())
        }
    }
}
