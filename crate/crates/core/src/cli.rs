//! Command-line front end. Each mode produces a primary JSON document and a
//! set of named artifacts; `main` prints the former and writes the latter.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};
use crate::conversion::{convert_interior, oracle_points, oracle_with_check, random_source};
use crate::engine::predict;
use crate::error::{Error, Result};
use crate::ext_rational::{parse_rational, Rational};
use crate::fitter::{fit_exponent, fit_exponent_with_log, read_series_csv, FitResult};
use crate::norms::{dyadic_h1_sweep, hardy_check, le_norm, DiscreteField, NormKind, SLAB_LIMITATION};
use crate::simulator::{evolve, write_series_csv, FieldSlices, SamplerSpec, Series};

#[derive(Parser, Debug)]
#[command(name = "pwdecay", version, about = "Decay-rate prediction and tail simulation for radial wave models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// Symbolic exponent bootstrap; prints the report and a step table.
    Predict,
    /// Evolve the model equation and record sampled curves.
    Simulate,
    /// Fit a power law to a series (from --input, or the r0 tail of a run).
    Fit,
    /// Local-energy norms, Hardy ratios and dyadic H¹ ratios.
    Norms,
    /// Quadrature checks of the conversion kernel on random sources.
    Oracle,
    /// Compare the fitted tail exponent with the predicted one.
    Verify,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Predict => Mode::Predict,
            Command::Simulate => Mode::Simulate,
            Command::Fit => Mode::Fit,
            Command::Norms => Mode::Norms,
            Command::Oracle => Mode::Oracle,
            Command::Verify => Mode::Verify,
        }
    }
}

/// Overrides for the configuration file. A rate of `none` removes the
/// corresponding coefficient.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long, global = true)]
    pub part: Option<u8>,
    #[arg(long = "amp-v", global = true, allow_hyphen_values = true)]
    pub amp_v: Option<f64>,
    #[arg(long = "amp-h", global = true, allow_hyphen_values = true)]
    pub amp_h: Option<f64>,
    #[arg(long = "amp-a", global = true, allow_hyphen_values = true)]
    pub amp_a: Option<f64>,
    #[arg(long, global = true)]
    pub ell: Option<u32>,
    /// Mesh width.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub umax: Option<f64>,
    #[arg(long, global = true)]
    pub vmax: Option<f64>,
    #[arg(long, global = true)]
    pub r0: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
}

fn parse_rate(name: &str, s: &str) -> Result<Option<Rational>> {
    if matches!(s, "none" | "off") {
        return Ok(None);
    }
    parse_rational(s)
        .map(Some)
        .ok_or_else(|| Error::usage(format!("--{name} expects a rational such as 1/2 or 0.25, got {s:?}")))
}

impl Flags {
    /// The configuration file (or defaults) with these flags applied on top.
    pub fn resolve(&self, mode: Mode) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.mode = Some(mode);
        if let Some(s) = &self.sigma {
            c.profile.sigma = parse_rate("sigma", s)?;
        }
        if let Some(s) = &self.delta {
            c.profile.delta = parse_rate("delta", s)?;
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(part => profile.part, amp_v => profile.amp_v, amp_h => profile.amp_h, amp_a => profile.amp_a,
             ell => ell, h => grid.h, umax => grid.u_max, vmax => grid.v_max, r0 => r0, tol => tol,
             seed => seed, eps => eps);
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        Ok(c)
    }
}

/// Result of one mode: the primary document, named artifacts, an optional
/// human-readable table, and the exit status.
pub struct Outcome {
    pub primary: Value,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub table: Option<String>,
    pub exit_code: i32,
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

fn document(config: &RunConfig, key: &str, body: impl Serialize) -> Result<Value> {
    Ok(json!({
        "config_hash": config.hash(),
        "config": RunConfig { out: None, ..config.clone() },
        key: serde_json::to_value(body)?,
    }))
}

fn simulate_curves(config: &RunConfig, extra: &[SamplerSpec]) -> Result<FieldSlices> {
    let mut curves = vec![SamplerSpec::FixedR { r: config.r0 }];
    curves.extend_from_slice(extra);
    evolve(&config.grid, &config.model(), &config.data, &curves)
}

fn series_csv(config: &RunConfig, series: &Series) -> Result<Vec<u8>> {
    let header = [
        format!("config_hash={}", config.hash()),
        format!("curve={}", series.spec.label()),
        format!("{},phi", series.spec.parameter_name()),
    ];
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &header, series)?;
    Ok(buf)
}

fn run_predict(config: &RunConfig) -> Result<Outcome> {
    config.profile.validate()?;
    let report = predict(&config.profile)?;
    let table = report.step_table();
    let doc = document(config, "report", &report)?;
    Ok(Outcome {
        artifacts: vec![("prediction.json".into(), pretty(&doc)), ("steps.txt".into(), table.clone().into_bytes())],
        primary: doc,
        table: Some(table),
        exit_code: 0,
    })
}

fn run_simulate(config: &RunConfig) -> Result<Outcome> {
    let slices = simulate_curves(config, &config.samplers)?;
    let mut artifacts = Vec::new();
    let mut listing = Vec::new();
    for s in &slices.series {
        let name = format!("{}.csv", s.spec.label());
        artifacts.push((name.clone(), series_csv(config, s)?));
        listing.push(json!({ "curve": s.spec, "file": name, "points": s.points.len() }));
    }
    let (nu, nv) = config.grid.counts();
    let doc = document(
        config,
        "simulation",
        json!({ "u_steps": nu, "v_steps": nv, "sup_abs": slices.sup_abs, "series": listing }),
    )?;
    artifacts.push(("metadata.json".into(), pretty(&doc)));
    Ok(Outcome { primary: doc, artifacts, table: None, exit_code: 0 })
}

fn tail_series(config: &RunConfig) -> Result<(Vec<(f64, f64)>, &'static str)> {
    match &config.input {
        Some(p) => Ok((read_series_csv(std::fs::File::open(p)?)?, "input")),
        None => {
            let slices = simulate_curves(config, &[])?;
            Ok((slices.series.into_iter().next().expect("r0 curve").points, "simulation"))
        }
    }
}

fn run_fit(config: &RunConfig) -> Result<Outcome> {
    let (series, origin) = tail_series(config)?;
    let window = config.fit_window.or_else(|| (origin == "simulation").then(|| config.window()));
    let fit = fit_exponent(&series, window)?;
    let with_log = fit_exponent_with_log(&series, window).ok();
    let doc = document(config, "fit", json!({ "source": origin, "power": fit, "power_with_log": with_log }))?;
    Ok(Outcome { artifacts: vec![("fit.json".into(), pretty(&doc))], primary: doc, table: None, exit_code: 0 })
}

fn norms_field(config: &RunConfig) -> Result<DiscreteField> {
    if let Some(p) = &config.input {
        return DiscreteField::read_csv(std::fs::File::open(p)?);
    }
    let s = &config.norms;
    let margin = 1.2 * s.r_max + 1.0;
    let slab = s.slab.unwrap_or((margin, (config.grid.v_max - margin).min(config.grid.u_max)));
    if !(slab.1 > slab.0) {
        return Err(Error::usage(format!("no room for a norm slab of radius {} in this grid", s.r_max)));
    }
    let slices = simulate_curves(config, &[])?;
    DiscreteField::from_slices(&slices, slab, s.r_max, (s.nt, s.nr))
}

fn run_norms(config: &RunConfig) -> Result<Outcome> {
    let field = norms_field(config)?;
    let model = config.model();
    let mut norms = serde_json::Map::new();
    for kind in [NormKind::Le, NormKind::Le1, NormKind::LeStar] {
        let rep = le_norm(&field, kind)?;
        norms.insert(serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string(), serde_json::to_value(rep)?);
    }
    let hardy = match hardy_check(&field, config.norms.gamma) {
        Ok(r) => serde_json::to_value(r)?,
        Err(e @ (Error::Usage(_) | Error::Unsupported(_))) => json!({ "error": e.to_string() }),
        Err(e) => return Err(e),
    };
    let (reports, max) = dyadic_h1_sweep(&field, &model, config.norms.base)?;
    let doc = document(
        config,
        "norms",
        json!({
            "slab": field.slab(),
            "le": norms,
            "hardy": hardy,
            "dyadic_h1": { "cells": reports, "max_ratio": max },
            "note": SLAB_LIMITATION,
        }),
    )?;
    Ok(Outcome { artifacts: vec![("norms.json".into(), pretty(&doc))], primary: doc, table: None, exit_code: 0 })
}

fn run_oracle(config: &RunConfig) -> Result<Outcome> {
    let settings = &config.oracle;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points = oracle_points(settings.points);
    let mut csv_rows = Vec::new();
    let mut summary = Vec::new();
    for k in 0..settings.sources {
        let src = random_source(&mut rng);
        let bound = convert_interior(&src)?;
        let (mut lo, mut hi, mut worst_rel) = (f64::INFINITY, 0f64, 0f64);
        for &(t, r) in &points {
            let (value, rel) = oracle_with_check(&src, t, r, config.eps, settings.resolution)?;
            let sym = bound.evaluate(t, r, config.eps);
            let ratio = value / sym;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            worst_rel = worst_rel.max(rel);
            csv_rows.push((k, src.m, src.alpha.to_f64(config.eps), src.beta.to_f64(config.eps), src.eta.to_f64(config.eps), t, r, value, rel, sym, ratio));
        }
        summary.push(json!({
            "source": k,
            "m": src.m,
            "alpha": src.alpha,
            "beta": src.beta,
            "eta": src.eta,
            "bound": bound,
            "ratio_min": lo,
            "ratio_max": hi,
            "richardson_max": worst_rel,
        }));
    }
    let mut buf = format!("# config_hash={}\n", config.hash()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["source", "m", "alpha", "beta", "eta", "t", "r", "oracle", "richardson", "bound", "ratio"])?;
        for row in &csv_rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let doc = document(config, "oracle", json!({ "points": points, "sources": summary }))?;
    Ok(Outcome {
        artifacts: vec![("oracle.csv".into(), buf), ("oracle.json".into(), pretty(&doc))],
        primary: doc,
        table: None,
        exit_code: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    #[serde(with = "crate::ext_rational::serde_rational")]
    pub theorem_exponent: Rational,
    /// Decay rate in `t` at fixed `r`: one more than the `⟨t−r⟩` exponent.
    pub predicted_local_exponent: f64,
    pub fitted: FitResult,
    pub tol: f64,
    pub verdict: Verdict,
    /// `|fitted − predicted| ≤ tol`.
    pub tight: bool,
}

pub fn verdict(predicted: f64, fitted: f64, tol: f64) -> (Verdict, bool) {
    let v = if fitted >= predicted - tol { Verdict::Consistent } else { Verdict::Inconsistent };
    (v, (fitted - predicted).abs() <= tol)
}

fn run_verify(config: &RunConfig) -> Result<Outcome> {
    config.profile.validate()?;
    let report = predict(&config.profile)?;
    let te = report.theorem_exponent;
    let predicted = 1.0 + *te.numer() as f64 / *te.denom() as f64;
    let (series, _) = tail_series(config)?;
    let fitted = fit_exponent(&series, Some(config.fit_window.unwrap_or_else(|| config.window())))?;
    let (v, tight) = verdict(predicted, fitted.exponent, config.tol);
    let body = VerifyReport {
        theorem_exponent: te,
        predicted_local_exponent: predicted,
        fitted,
        tol: config.tol,
        verdict: v,
        tight,
    };
    let doc = document(config, "verify", &body)?;
    Ok(Outcome {
        artifacts: vec![("verify.json".into(), pretty(&doc))],
        primary: doc,
        table: None,
        exit_code: if v == Verdict::Inconsistent { 1 } else { 0 },
    })
}

/// Run one mode on a resolved configuration, without touching the file system
/// except to read `config.input`.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    match config.mode.ok_or_else(|| Error::usage("no mode given"))? {
        Mode::Predict => run_predict(config),
        Mode::Simulate => run_simulate(config),
        Mode::Fit => run_fit(config),
        Mode::Norms => run_norms(config),
        Mode::Oracle => run_oracle(config),
        Mode::Verify => run_verify(config),
    }
}

pub fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

fn write_artifacts(config: &RunConfig, outcome: &Outcome, seconds: f64) -> Result<()> {
    let Some(dir) = &config.out else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &outcome.artifacts {
        std::fs::write(dir.join(name), bytes)?;
    }
    let timing = json!({ "mode": config.mode, "config_hash": config.hash(), "seconds": seconds });
    std::fs::write(dir.join("timing.json"), pretty(&timing))?;
    Ok(())
}

/// Entry point for the binary; returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_json(&Error::usage(e.to_string().trim().to_string())));
            return 2;
        }
    };
    let started = Instant::now();
    let result = cli
        .flags
        .resolve(cli.command.into())
        .and_then(|config| execute(&config).map(|o| (config, o)))
        .and_then(|(config, o)| {
            write_artifacts(&config, &o, started.elapsed().as_secs_f64())?;
            Ok(o)
        });
    match result {
        Ok(o) => {
            if let Some(t) = &o.table {
                eprint!("{t}");
            }
            print!("{}", String::from_utf8_lossy(&pretty(&o.primary)));
            o.exit_code
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
