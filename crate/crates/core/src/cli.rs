//! Command-line front end. Flags are turned into `key = value` pairs and
//! resolved together with the optional config file, so both layers share one
//! validator.

use crate::analytic::{
    area_limit_constant, edgeworth_area, limit_constant, var_log_one_minus_x, var_log_one_minus_x_closed, zeta2,
};
use crate::components::analyze;
use crate::critpoints::solve;
use crate::harness::config::{read_config_file, resolve, Command, ExperimentConfig, KacMode, KeyValues};
use crate::harness::{
    default_out, format_summary, io_error, run_area, run_scaling, run_simulate, write_file, HarnessError,
};
use crate::heavytail::{single_jump_prediction, walk_interval_prob_mc};
use crate::kacrice::{epsilon_count, estimate_p_on_and_mn, estimate_t0, Region};
use crate::par::with_threads;
use crate::polyeval::RootedPolynomial;
use crate::raster::{label_components, pixel_classes, rasterize_with, write_ppm, RasterOptions};
use crate::sampling::{derive_substream, sample_roots};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;

macro_rules! command_args {
    ($name:ident { $($field:ident = $key:literal : $help:literal),* $(,)? } flags { $($flag:ident = $fkey:literal : $fhelp:literal),* $(,)? }) => {
        #[derive(Args, Debug, Default)]
        pub struct $name {
            /// Config file of `key = value` lines; flags take precedence.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                #[arg(long = $key, help = $help)]
                pub $field: Option<String>,
            )*
            $(
                #[arg(long = $fkey, help = $fhelp)]
                pub $flag: bool,
            )*
        }

        impl $name {
            #[allow(unused_mut)]
            fn values(&self) -> KeyValues {
                let mut kv = KeyValues::new();
                $(
                    if let Some(v) = &self.$field {
                        kv.insert($key.replace('-', "_"), v.clone());
                    }
                )*
                $(
                    if self.$flag {
                        kv.insert($fkey.replace('-', "_"), "true".into());
                    }
                )*
                kv
            }
        }
    };
}

command_args!(SimulateArgs {
    n = "n": "polynomial degree",
    trials = "trials": "number of trials",
    seed = "seed": "master seed, decimal or 0x hex",
    kappa = "kappa": "annulus width factor",
    threads = "threads": "worker threads, 0 for all cores",
    out = "out": "CSV output path",
    area_samples = "area-samples": "disc samples per area estimate",
    boundary_points = "boundary-points": "points on the inradius circle",
} flags {
    no_timing = "no-timing": "write 0 in the wall_micros column",
    dump_crit = "dump-crit": "also write critical points and residuals",
    sequential = "sequential": "run trials on the calling thread",
});

command_args!(ScalingArgs {
    ns = "ns": "comma-separated degrees",
    trials = "trials": "trials per degree",
    seed = "seed": "master seed, decimal or 0x hex",
    kappa = "kappa": "annulus width factor",
    threads = "threads": "worker threads, 0 for all cores",
    out = "out": "table output path",
    area_samples = "area-samples": "disc samples per area estimate",
    boundary_points = "boundary-points": "points on the inradius circle",
} flags {
    no_timing = "no-timing": "skip per-trial timing",
    sequential = "sequential": "run trials on the calling thread",
});

command_args!(RasterArgs {
    n = "n": "polynomial degree",
    seed = "seed": "master seed; trial 0 is drawn",
    kappa = "kappa": "annulus width factor",
    res = "res": "pixels per side",
    bound = "bound": "half-width of the square",
    out = "out": "PPM output path",
    threads = "threads": "worker threads, 0 for all cores",
    roots = "roots": "CSV of roots (re,im) instead of sampling",
} flags {
    sequential = "sequential": "rasterize on the calling thread",
});

command_args!(ConstantsArgs {} flags {});

command_args!(AreaArgs {
    n = "n": "polynomial degree",
    trials = "trials": "number of trials",
    seed = "seed": "master seed, decimal or 0x hex",
    kappa = "kappa": "annulus width factor for the prediction",
    threads = "threads": "worker threads, 0 for all cores",
    area_samples = "area-samples": "disc samples per trial",
    c_n = "c-n": "level shift for the prediction",
} flags {
    q1 = "q1": "include the skewness correction",
    sequential = "sequential": "run trials on the calling thread",
});

command_args!(AreaPredictArgs {
    n = "n": "polynomial degree",
    kappa = "kappa": "annulus width factor",
    c_n = "c-n": "level shift",
} flags {
    q1 = "q1": "include the skewness correction",
});

command_args!(HeavytailArgs {
    r = "r": "evaluation point in (0, 1)",
    n = "n": "walk length",
    a = "a": "interval start",
    b = "b": "interval end",
    trials = "trials": "number of walks",
    seed = "seed": "master seed, decimal or 0x hex",
    threads = "threads": "worker threads, 0 for all cores",
} flags {
    sequential = "sequential": "run walks on the calling thread",
});

command_args!(KacriceArgs {
    mode = "mode": "epsint, on-event or t0",
    n = "n": "polynomial degree",
    kappa = "kappa": "annulus width factor",
    trials = "trials": "samples for on-event and t0",
    seed = "seed": "master seed, decimal or 0x hex",
    threads = "threads": "worker threads, 0 for all cores",
    eps = "eps": "level for epsint",
    grid = "grid": "cells per side for epsint",
    roots = "roots": "CSV of roots (re,im) for epsint",
    out = "out": "CSV output path instead of stdout",
} flags {
    sequential = "sequential": "run on the calling thread",
});

#[derive(Parser, Debug)]
#[command(name = "lemlab", version, about = "Random polynomial lemniscate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Component counts over many trials, written as CSV.
    Simulate(SimulateArgs),
    /// Mean component count against sqrt(n) over several degrees.
    Scaling(ScalingArgs),
    /// Rasterize one lemniscate to PPM and flood-fill its components.
    Raster(RasterArgs),
    /// Print the limiting constants.
    Constants(ConstantsArgs),
    /// Monte Carlo area outside the lemniscate against the prediction.
    Area(AreaArgs),
    /// Predicted area outside the lemniscate.
    AreaPredict(AreaPredictArgs),
    /// Interval probability of the heavy-tailed walk.
    Heavytail(HeavytailArgs),
    /// Kac-Rice estimators.
    Kacrice(KacriceArgs),
}

impl Sub {
    fn parts(&self) -> (Command, KeyValues, Option<&PathBuf>) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a.values(), a.config.as_ref()),
            Sub::Scaling(a) => (Command::Scaling, a.values(), a.config.as_ref()),
            Sub::Raster(a) => (Command::Raster, a.values(), a.config.as_ref()),
            Sub::Constants(a) => (Command::Constants, a.values(), a.config.as_ref()),
            Sub::Area(a) => (Command::Area, a.values(), a.config.as_ref()),
            Sub::AreaPredict(a) => (Command::AreaPredict, a.values(), a.config.as_ref()),
            Sub::Heavytail(a) => (Command::Heavytail, a.values(), a.config.as_ref()),
            Sub::Kacrice(a) => (Command::Kacrice, a.values(), a.config.as_ref()),
        }
    }
}

/// Outcome of a command: text for stdout plus the exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: 0 }
    }
}

pub fn config_for(sub: &Sub) -> Result<ExperimentConfig, HarnessError> {
    let (command, cli, path) = sub.parts();
    let file = path.map(|p| read_config_file(p)).transpose()?;
    Ok(resolve(command, &cli, file.as_ref())?)
}

/// Formats `x` with `digits` significant digits.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Output, HarnessError> {
    match cfg.command {
        Command::Constants => Ok(Output::ok(constants_text())),
        Command::Simulate => {
            let report = run_simulate(cfg)?;
            let mut text = format_summary(&report.summary);
            let _ = writeln!(text, "csv                  {}", report.csv_path.display());
            let _ = writeln!(text, "failures_file        {}", report.failures_path.display());
            let breach = report.summary.breaches_threshold();
            Ok(Output {
                stdout: text,
                code: if breach { 3 } else { 0 },
            })
        }
        Command::Scaling => {
            let report = run_scaling(cfg)?;
            let mut text = report.table();
            let _ = writeln!(text, "bracket {}", if report.bracket_holds() { "PASS" } else { "FAIL" });
            Ok(Output {
                stdout: text,
                code: if report.any_breach() { 3 } else { 0 },
            })
        }
        Command::Raster => raster(cfg),
        Command::Area => area(cfg),
        Command::AreaPredict => {
            let a = edgeworth_area(cfg.n, cfg.kappa, cfg.c_n, cfg.q1)?;
            Ok(Output::ok(format!(
                "n,kappa,c_n,q1,area,sqrt_n_area,limit\n{},{},{},{},{:.10e},{:.10},{:.10}\n",
                cfg.n,
                cfg.kappa,
                cfg.c_n,
                cfg.q1,
                a,
                a * (cfg.n as f64).sqrt(),
                area_limit_constant()
            )))
        }
        Command::Heavytail => {
            let est = with_threads(cfg.threads, || {
                walk_interval_prob_mc(cfg.r, cfg.n, cfg.a, cfg.b, cfg.trials, cfg.master_seed, cfg.execution())
            })?;
            let pred = single_jump_prediction(cfg.r, cfg.n, cfg.a, cfg.b)?;
            Ok(Output::ok(format!(
                "r,n,a,b,trials,probability,std_error,prediction,ratio\n{},{},{},{},{},{:e},{:e},{:e},{:.4}\n",
                cfg.r,
                cfg.n,
                cfg.a,
                cfg.b,
                cfg.trials,
                est.value,
                est.std_error,
                pred,
                est.value / pred
            )))
        }
        Command::Kacrice => kacrice(cfg),
    }
}

pub fn constants_text() -> String {
    let rows = [
        ("zeta2", zeta2()),
        ("var_log_one_minus_x", var_log_one_minus_x_closed()),
        ("var_log_one_minus_x_quadrature", var_log_one_minus_x()),
        ("limit_constant", limit_constant()),
        ("area_limit_constant", area_limit_constant()),
    ];
    rows.iter().map(|(k, v)| format!("{k} {}\n", significant(*v, 10))).collect()
}

fn load_or_sample(cfg: &ExperimentConfig) -> Result<RootedPolynomial, HarnessError> {
    match &cfg.roots_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            Ok(RootedPolynomial::from_csv(&text)?)
        }
        None => {
            let mut stream = derive_substream(cfg.master_seed, 0);
            Ok(RootedPolynomial::new(sample_roots(cfg.n, &mut stream))?)
        }
    }
}

/// Critical-value component count, or `None` when the solver gives up.
fn critical_count(cfg: &ExperimentConfig, poly: &RootedPolynomial) -> Option<(usize, usize)> {
    let mut stream = derive_substream(cfg.master_seed, 0);
    if cfg.roots_path.is_none() {
        sample_roots(cfg.n, &mut stream);
    }
    let crit = solve(poly, &mut stream).ok()?;
    let report = analyze(poly, &crit, cfg.kappa).ok()?;
    Some((report.components, crit.len()))
}

fn raster(cfg: &ExperimentConfig) -> Result<Output, HarnessError> {
    let poly = load_or_sample(cfg)?;
    let opts = RasterOptions {
        execution: cfg.execution(),
        ..RasterOptions::default()
    };
    let mut grid = with_threads(cfg.threads, || rasterize_with(&poly, cfg.resolution, cfg.bound, opts))?;
    let stats = label_components(&mut grid);
    let path = default_out(cfg, "lemniscate.ppm");
    write_ppm(&grid, &poly, cfg.kappa, &path)?;
    let classes = pixel_classes(&grid, poly.degree(), cfg.kappa);
    let mut text = String::new();
    let _ = writeln!(text, "degree               {}", poly.degree());
    let _ = writeln!(text, "flood_components     {}", stats.pixels.len());
    let _ = writeln!(text, "tiny_components      {}", stats.extent.iter().filter(|&&e| e < 3).count());
    match critical_count(cfg, &poly) {
        Some((c, _)) => {
            let _ = writeln!(text, "critical_components  {c}");
        }
        None => {
            let _ = writeln!(text, "critical_components  unavailable");
        }
    }
    let _ = writeln!(text, "inside_area          {:.6}", grid.inside_area());
    let _ = writeln!(text, "uncovered_inradius   {}", classes.uncovered_inradius);
    let _ = writeln!(text, "ppm                  {}", path.display());
    Ok(Output::ok(text))
}

fn area(cfg: &ExperimentConfig) -> Result<Output, HarnessError> {
    let acc = run_area(cfg.n, cfg.trials, cfg.area_samples, cfg.master_seed, cfg.execution(), cfg.threads)?;
    let pred = edgeworth_area(cfg.n, cfg.kappa, cfg.c_n, cfg.q1)?;
    let root = (cfg.n as f64).sqrt();
    Ok(Output::ok(format!(
        "n,trials,mean_area,std_error,sqrt_n_mean,prediction,sqrt_n_prediction,ratio\n{},{},{:.6e},{:.3e},{:.6},{:.6e},{:.6},{:.4}\n",
        cfg.n,
        cfg.trials,
        acc.mean,
        acc.std_error(),
        acc.mean * root,
        pred,
        pred * root,
        acc.mean / pred
    )))
}

fn kacrice(cfg: &ExperimentConfig) -> Result<Output, HarnessError> {
    let text = match cfg.mode {
        KacMode::EpsInt => {
            let poly = load_or_sample(cfg)?;
            let est = epsilon_count(&poly, Region::unit_square(), cfg.eps, cfg.grid)?;
            let crit = critical_count(cfg, &poly).map(|(_, k)| k.to_string());
            format!(
                "mode,n,eps,grid,estimate,critical_points\nepsint,{},{},{},{:.6},{}\n",
                poly.degree(),
                cfg.eps,
                cfg.grid,
                est,
                crit.unwrap_or_else(|| "NA".into())
            )
        }
        KacMode::OnEvent => {
            let e = with_threads(cfg.threads, || {
                estimate_p_on_and_mn(cfg.n, cfg.kappa, cfg.trials, cfg.master_seed, cfg.execution())
            })?;
            format!(
                "mode,n,kappa,trials,p_on,p_on_se,m_n,m_n_se,m_n_mom,m_n_plain,m_n_plain_se,m_n_plain_mom,annulus_fraction,z\n\
                 on-event,{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:.6},{:.3}\n",
                e.n,
                e.kappa,
                cfg.trials,
                e.p_on.value,
                e.p_on.std_error,
                e.m_n.value,
                e.m_n.std_error,
                e.m_n_mom,
                e.m_n_plain.value,
                e.m_n_plain.std_error,
                e.m_n_plain_mom,
                e.annulus_fraction.value,
                e.identity_z()
            )
        }
        KacMode::T0 => {
            let e = with_threads(cfg.threads, || {
                estimate_t0(cfg.n, cfg.kappa, cfg.trials, cfg.master_seed, cfg.execution())
            })?;
            format!(
                "mode,n,kappa,trials,t0,t0_se,t0_mom,t0_weighted,t0_weighted_se,t0_weighted_mom,predicted_components\n\
                 t0,{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:.6}\n",
                e.n,
                e.kappa,
                cfg.trials,
                e.plain.value,
                e.plain.std_error,
                e.plain_mom,
                e.weighted.value,
                e.weighted.std_error,
                e.weighted_mom,
                1.0 + e.plain.value
            )
        }
    };
    match &cfg.out_path {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            Ok(Output::ok(format!("wrote {}\n", path.display())))
        }
        None => Ok(Output::ok(text)),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Output {
                stdout: String::new(),
                code,
            };
        }
    };
    match config_for(&cli.command).and_then(|cfg| execute(&cfg)) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            Output {
                stdout: String::new(),
                code: e.exit_code(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(significant(0.32246703342411, 10), "0.3224670334");
        assert_eq!(significant(1.6449340668482264, 10), "1.644934067");
        assert_eq!(significant(123.456, 4), "123.5");
    }

    #[test]
    fn constants_are_printed() {
        let text = constants_text();
        assert!(text.contains("var_log_one_minus_x 0.3224670334"));
        assert!(text.contains("limit_constant 0.4530881696"));
    }

    #[test]
    fn bad_input_exits_two() {
        assert_eq!(run(["lemlab", "simulate", "--bogus", "1"]).code, 2);
        assert_eq!(run(["lemlab", "simulate", "--n", "0"]).code, 2);
        assert_eq!(run(["lemlab", "kacrice", "--mode", "nope"]).code, 2);
        assert_eq!(run(["lemlab", "heavytail", "--r", "1.5"]).code, 2);
    }

    #[test]
    fn area_predict_runs() {
        let out = run(["lemlab", "area-predict", "--n", "1000000"]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("1.42"), "{}", out.stdout);
    }
}
