//! `ppcsim`: simulate, sweep, classify and fit coupled-resonator transmission spectra.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 computation or data,
//! 4 fit did not converge (report still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppcsim_core::analysis::{classify_crossing_with, find_peaks, track_branches_with, Branch, BranchSample, BranchSet};
use ppcsim_core::fit::fit;
use ppcsim_core::io::{
    load_config, read_sweep_csv, render_report, save_report, write_sweep_csv, write_tracks_csv, MagnitudeScale,
    Project, Report, SweepCsvLayout,
};
use ppcsim_core::preset::{load_preset, preset_names, preset_text};
use ppcsim_core::spectrum::SweepResult;
use ppcsim_core::Error;

#[derive(Parser)]
#[command(name = "ppcsim", version, about = "Three-mode photon-photon coupling simulator and fitter")]
struct Cli {
    /// Print the fully resolved parameter set to standard error.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transmission at one size L; writes the trace and prints its dips.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Swept size, mm.
        #[arg(long = "l", value_name = "MM")]
        l: f64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Transmission over the configured L list, plus tracked dip branches.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_name = "PATH")]
        tracks: Option<PathBuf>,
        /// Standard deviation of Gaussian noise added to linear |S21|.
        #[arg(long, value_name = "SIGMA")]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Classify the branch interaction inside an L window of a sweep file.
    Classify {
        #[arg(long = "in", value_name = "SWEEP_CSV")]
        input: PathBuf,
        #[arg(long, value_name = "LMIN:LMAX", value_parser = parse_region)]
        region: (f64, f64),
        /// Take tracking and classification options from this config.
        #[arg(long, value_name = "PATH|preset:NAME")]
        config: Option<String>,
        #[arg(long, value_name = "DEPTH")]
        min_depth: Option<f64>,
        /// Also save the report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Scale::Linear)]
        scale: Scale,
    },
    /// Fit the config's free parameters to a sweep file.
    Fit {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "SWEEP_CSV")]
        data: PathBuf,
        /// Defaults to the config's fit region, else all of the data.
        #[arg(long, value_name = "LMIN:LMAX", value_parser = parse_region)]
        region: Option<(f64, f64)>,
        #[arg(long, value_name = "REPORT")]
        out: PathBuf,
        /// Best-fit model sweep on the data grid; defaults to REPORT with an `.overlay.csv` extension.
        #[arg(long, value_name = "PATH")]
        overlay: Option<PathBuf>,
        /// Overrides the config's multi-start seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// List built-in presets, or print one.
    Presets {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Project file, or `preset:NAME`.
    #[arg(long, value_name = "PATH|preset:NAME")]
    config: String,
    /// Allow sizes outside the config's domain.
    #[arg(long)]
    force_domain: bool,
}

#[derive(Args)]
struct CsvArgs {
    /// Magnitude scale of sweep files read or written.
    #[arg(long, value_enum, default_value_t = Scale::Linear)]
    scale: Scale,
    /// Significant digits in written CSV; shortest exact text by default.
    #[arg(long, value_name = "DIGITS")]
    precision: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Linear,
    Db,
}

impl Scale {
    fn layout(self, precision: Option<usize>) -> SweepCsvLayout {
        let scale = match self {
            Scale::Linear => MagnitudeScale::Linear,
            Scale::Db => MagnitudeScale::Db,
        };
        SweepCsvLayout {
            precision,
            ..SweepCsvLayout::default().with_scale(scale)
        }
    }
}

fn parse_region(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LMIN:LMAX, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad LMIN {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad LMAX {b:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("region {s:?} must be finite with LMIN < LMAX"));
    }
    Ok((lo, hi))
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

/// Domain violations are the caller's mistake, everything else a computation failure.
fn compute(e: Error) -> Failure {
    let code = match &e {
        Error::OutsideDomain { .. } => 2,
        Error::AtSweepPoint { source, .. } if matches!(**source, Error::OutsideDomain { .. }) => 2,
        _ => 3,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn load_project(spec: &str, force_domain: bool, verbose: bool) -> Result<Project, Failure> {
    let cfg = match spec.strip_prefix("preset:") {
        Some(name) => load_preset(name),
        None => load_config(spec),
    }
    .map_err(usage)?;
    if verbose {
        eprintln!("# resolved configuration ({spec})");
        eprint!("{}", cfg.to_toml().map_err(usage)?);
    }
    Ok(cfg.resolve().map_err(usage)?.with_domain_override(force_domain))
}

fn print_peaks(sweep: &SweepResult, min_depth: f64) -> Result<(), Failure> {
    println!("L_mm\tfreq_GHz\tdepth\twidth_GHz");
    for (l, t) in sweep.l_values().iter().zip(sweep.traces()) {
        for p in find_peaks(t, min_depth).map_err(compute)? {
            println!("{l}\t{:.6}\t{:.6}\t{:.6}", p.frequency, p.depth, p.width);
        }
    }
    Ok(())
}

/// Branches for a sweep too short to link: every dip is its own branch.
fn unlinked_branches(sweep: &SweepResult, min_depth: f64) -> Result<BranchSet, Failure> {
    let mut branches = Vec::new();
    for (l, t) in sweep.l_values().iter().zip(sweep.traces()) {
        for p in find_peaks(t, min_depth).map_err(compute)? {
            branches.push(Branch {
                samples: vec![BranchSample {
                    l: *l,
                    frequency: p.frequency,
                    depth: p.depth,
                    width: p.width,
                }],
            });
        }
    }
    Ok(BranchSet {
        branches,
        l_values: sweep.l_values().to_vec(),
        warnings: Vec::new(),
    })
}

fn overlay_path(report: &Path) -> PathBuf {
    report.with_extension("overlay.csv")
}

fn run(cli: Cli) -> Result<(), Failure> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Simulate { config, l, out, csv } => {
            if !l.is_finite() {
                return Err(usage(format!("L = {l} is not a finite size")));
            }
            let mut project = load_project(&config.config, config.force_domain, verbose)?;
            project.l_values = vec![l];
            let sweep = project.sweep().map_err(compute)?;
            write_sweep_csv(&sweep, &out, &csv.scale.layout(csv.precision)).map_err(compute)?;
            print_peaks(&sweep, project.track.min_depth)
        }
        Command::Sweep {
            config,
            out,
            tracks,
            noise,
            seed,
            csv,
        } => {
            let project = load_project(&config.config, config.force_domain, verbose)?;
            let mut sweep = project.sweep().map_err(compute)?;
            if let Some(sigma) = noise {
                sweep = sweep.with_noise(sigma, seed).map_err(usage)?;
            }
            write_sweep_csv(&sweep, &out, &csv.scale.layout(csv.precision)).map_err(compute)?;
            let short = sweep.len() < 3;
            if short {
                print_peaks(&sweep, project.track.min_depth)?;
            }
            if let Some(path) = tracks {
                let set = if short {
                    unlinked_branches(&sweep, project.track.min_depth)?
                } else {
                    track_branches_with(&sweep, &project.track).map_err(compute)?
                };
                if verbose {
                    for w in &set.warnings {
                        eprintln!("warning: {w}");
                    }
                }
                write_tracks_csv(&set, &path).map_err(compute)?;
            }
            Ok(())
        }
        Command::Classify {
            input,
            region,
            config,
            min_depth,
            report,
            scale,
        } => {
            let (mut track, classify) = match &config {
                Some(c) => {
                    let p = load_project(c, false, verbose)?;
                    (p.track, p.classify)
                }
                None => Default::default(),
            };
            if let Some(d) = min_depth {
                if !(d > 0.0 && d < 1.0) {
                    return Err(usage(format!("--min-depth must lie in (0, 1), got {d}")));
                }
                track.min_depth = d;
            }
            let sweep = read_sweep_csv(&input, &scale.layout(None)).map_err(compute)?;
            let set = track_branches_with(&sweep, &track).map_err(compute)?;
            let result = classify_crossing_with(&set, region, &classify).map_err(compute)?;
            let source = input.display().to_string();
            let doc = Report::Crossing {
                report: &result,
                track,
                classify,
                source: Some(&source),
                warnings: &set.warnings,
            };
            print!("{}", render_report(&doc).map_err(compute)?);
            if let Some(path) = report {
                save_report(&doc, path).map_err(compute)?;
            }
            Ok(())
        }
        Command::Fit {
            config,
            data,
            region,
            out,
            overlay,
            seed,
            csv,
        } => {
            let project = load_project(&config.config, config.force_domain, verbose)?;
            let mut spec = project
                .fit
                .clone()
                .ok_or_else(|| usage(format!("{}: no [fit] section", config.config)))?;
            if let Some(s) = seed {
                spec = spec.with_seed(s);
            }
            let layout = csv.scale.layout(csv.precision);
            let mut sweep = read_sweep_csv(&data, &layout).map_err(compute)?;
            let region = region.or(project.fit_region);
            if let Some((lo, hi)) = region {
                sweep = sweep.restricted(lo, hi).map_err(compute)?;
            }
            if project.system.len() >= 2 {
                require_two_branches(&sweep, &project)?;
            }
            let problem = project.fit_problem().map_err(usage)?;
            let result = fit(&problem, &spec, &sweep).map_err(compute)?;

            let data_name = data.display().to_string();
            save_report(
                &Report::Fit {
                    result: &result,
                    config: &project.config,
                    data: Some(&data_name),
                    region,
                },
                &out,
            )
            .map_err(compute)?;
            let model = problem.model_sweep(&result.parameters(), &sweep).map_err(compute)?;
            let overlay = overlay.unwrap_or_else(|| overlay_path(&out));
            write_sweep_csv(&model, &overlay, &layout).map_err(compute)?;

            for p in &result.free {
                match p.std_error {
                    Some(e) => println!("{} = {} ± {:.3e}", p.id, p.value, e),
                    None => println!("{} = {}", p.id, p.value),
                }
            }
            println!("rms = {:.6e}", result.rms);
            println!("converged = {}", result.converged);
            if !result.converged {
                return Err(Failure {
                    code: 4,
                    message: format!(
                        "fit did not converge after {} evaluations; best point written to {}",
                        result.evaluations,
                        out.display()
                    ),
                });
            }
            Ok(())
        }
        Command::Presets { show } => {
            match show {
                Some(name) => print!("{}", preset_text(&name).map_err(usage)?),
                None => {
                    for n in preset_names() {
                        println!("{n}");
                    }
                }
            }
            Ok(())
        }
    }
}

/// A coupling fit needs two interacting branches inside the window.
fn require_two_branches(sweep: &SweepResult, project: &Project) -> Result<(), Failure> {
    let most = if sweep.len() >= 3 {
        let set = track_branches_with(sweep, &project.track).map_err(compute)?;
        sweep
            .l_values()
            .iter()
            .map(|&l| set.branches.iter().filter(|b| b.at(l).is_some()).count())
            .max()
            .unwrap_or(0)
    } else {
        sweep
            .traces()
            .iter()
            .map(|t| find_peaks(t, project.track.min_depth).map(|p| p.len()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(compute)?
            .into_iter()
            .max()
            .unwrap_or(0)
    };
    if most < 2 {
        return Err(compute(Error::InsufficientBranches { found: most }));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ppcsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
