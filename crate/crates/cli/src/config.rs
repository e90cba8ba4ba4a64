//! Run configuration: command-line flags over an optional `key=value` file
//! over built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use crushflow::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown format {other:?}; expected csv|json"),
        }
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults of [`Params::new`].
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Cantor scale exponent nu in (0, 1).
    #[arg(long, global = true)]
    pub nu: Option<f64>,
    /// Stage-time exponent beta in (0, 1) [default: 1 - nu^2].
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Dimension d >= 2.
    #[arg(long = "d", global = true)]
    pub dim: Option<usize>,
    /// Number of stages N.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Final time T of the reversed field.
    #[arg(long = "T", global = true)]
    pub final_time: Option<f64>,
    /// Integrability exponent p for W^{1,p} reports.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Hölder exponent [default: half of min(beta/(1-beta), beta/(1+nu))].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Grid resolution M per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file [default: stdout].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Multiplier on theta in the inflated-cube inclusion check.
    #[arg(long = "theta-scale", global = true)]
    pub theta_scale: Option<f64>,
    /// Plain-text key=value configuration file.
    #[arg(long, global = true, env = "CRUSHFLOW_CONFIG")]
    pub config: Option<PathBuf>,
}

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub grid: usize,
    pub tol: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub theta_scale: f64,
}

const KEYS: &[&str] =
    &["nu", "beta", "d", "depth", "T", "p", "alpha", "grid", "tol", "seed", "threads", "out", "format", "theta-scale"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key=value", no + 1))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        let key = if key == "final-time" { "T".to_string() } else { key };
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {key:?}", no + 1);
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}")))
        .transpose()
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => load(path)?,
            None => BTreeMap::new(),
        };
        let pick = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            Ok(flag.or(from_file(&file, key)?))
        };
        let dim = args.dim.or(from_file(&file, "d")?).unwrap_or(2);
        let nu = pick(args.nu, "nu")?.unwrap_or(0.75);
        let mut params = Params::new(dim, nu)?;
        if let Some(beta) = pick(args.beta, "beta")? {
            params = params.with_beta(beta)?;
        }
        if let Some(depth) = args.depth.or(from_file(&file, "depth")?) {
            params = params.with_depth(depth)?;
        }
        if let Some(t) = pick(args.final_time, "T")? {
            params = params.with_final_time(t)?;
        }
        if let Some(p) = pick(args.p, "p")? {
            params = params.with_p(p)?;
        }
        if let Some(a) = pick(args.alpha, "alpha")? {
            params = params.with_alpha(a)?;
        }
        Ok(Self {
            params,
            grid: args.grid.or(from_file(&file, "grid")?).unwrap_or(DEFAULT_GRID),
            tol: pick(args.tol, "tol")?.unwrap_or(DEFAULT_TOL),
            seed: args.seed.or(from_file(&file, "seed")?).unwrap_or(DEFAULT_SEED),
            threads: args.threads.or(from_file(&file, "threads")?),
            out: args.out.clone().or(from_file(&file, "out")?),
            format: args.format.or(from_file(&file, "format")?),
            theta_scale: pick(args.theta_scale, "theta-scale")?.unwrap_or(1.0),
        })
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn load(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config_file(&text).with_context(|| format!("in config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_params() {
        let c = RunConfig::resolve(&GlobalArgs::default()).unwrap();
        assert_eq!(c.params, Params::default());
        assert_eq!(c.grid, DEFAULT_GRID);
        assert_eq!(c.theta_scale, 1.0);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nnu = 0.5\nbeta=0.6\ngrid = 8 # inline\nT=2\n").unwrap();
        let args = GlobalArgs { config: Some(path), grid: Some(16), ..Default::default() };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!(c.params.nu, 0.5);
        assert_eq!(c.params.beta, 0.6);
        assert_eq!(c.params.final_time, 2.0);
        assert_eq!(c.grid, 16);
    }

    #[test]
    fn beta_defaults_from_nu() {
        let args = GlobalArgs { nu: Some(0.5), ..Default::default() };
        assert_eq!(RunConfig::resolve(&args).unwrap().params.beta, 0.75);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(parse_config_file("nu 0.5").is_err());
        assert!(parse_config_file("colour = red").is_err());
        let m = parse_config_file("--theta_scale = 2\nfinal_time = 3").unwrap();
        assert_eq!(m["theta-scale"], "2");
        assert_eq!(m["T"], "3");
    }

    #[test]
    fn invalid_values_are_errors() {
        let args = GlobalArgs { nu: Some(1.5), ..Default::default() };
        assert!(RunConfig::resolve(&args).is_err());
    }
}
