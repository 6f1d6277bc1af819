//! Config-driven commands behind the `radgpr` binary.
//!
//! Exit codes: 0 on success, 1 when validation or the run fails, 2 when the
//! config cannot be read or parsed.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::kernel::{
    compute_fusion_constants, select_sigma_f_distributed, FusionConstants, NetworkSigmaF,
};
use crate::netgraph::ValidationReport;
use crate::sim::{self, MetricsRow, SimConfig, SimOutput};
use crate::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Parse(_) => 2,
            CliError::Validation(_) | CliError::Run(_) | CliError::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads and parses a config file. Returns the config and its digest.
pub fn load_config(path: &Path) -> CliResult<(SimConfig, String)> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = config_digest(&text)?;
    let cfg = SimConfig::from_toml(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok((cfg, digest))
}

/// SHA-256 of the config's canonical JSON form (keys sorted), so the digest
/// ignores formatting and key order.
pub fn config_digest(text: &str) -> CliResult<String> {
    let value: toml::Value = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let canonical: serde_json::Value =
        serde_json::to_value(&value).map_err(|e| CliError::Parse(e.to_string()))?;
    let bytes = serde_json::to_vec(&canonical).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOutcome {
    pub schedule: ValidationReport,
    /// Structural config problems (noise, kernel, grid, ...).
    pub config_error: Option<String>,
    pub passed: bool,
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> CliResult<ValidateOutcome> {
    let (cfg, _) = load_config(path)?;
    let schedule = cfg.schedule.validate();
    let config_error = cfg.check().err().map(|e| e.to_string());
    let passed = schedule.ok && config_error.is_none();
    let mut s = String::new();
    let _ = writeln!(s, "agents: {}", schedule.n_agents);
    let _ = writeln!(s, "period: {}", schedule.period);
    let _ = writeln!(s, "alpha: {}", fmt_f64(schedule.alpha));
    match schedule.b {
        Some(b) => {
            let _ = writeln!(s, "b: {b}");
        }
        None => {
            let _ = writeln!(s, "b: none");
        }
    }
    match schedule.zeta {
        Some(z) => {
            let _ = writeln!(s, "zeta: {}", fmt_f64(z));
        }
        None => {
            let _ = writeln!(s, "zeta: none");
        }
    }
    let _ = writeln!(s, "constant transition: {}", schedule.constant_transition);
    for v in &schedule.violations {
        let _ = writeln!(s, "violation: {v}");
    }
    if let Some(e) = &config_error {
        let _ = writeln!(s, "config: {e}");
    }
    let _ = writeln!(s, "{}", if passed { "PASS" } else { "FAIL" });
    out.write_all(s.as_bytes())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
    Ok(ValidateOutcome {
        schedule,
        config_error,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub fn cmd_run(path: &Path, out_dir: &Path, opts: &RunOptions) -> CliResult<RunManifest> {
    let started = Instant::now();
    let (mut cfg, digest) = load_config(path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.check()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = cfg.schedule.validate();
    if !report.ok {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Validation(msgs.join("; ")));
    }
    let output = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?
            .install(|| sim::run(&cfg))?,
        None => sim::run(&cfg)?,
    };

    let write_err = |p: &Path| {
        let path = p.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
    let metrics = out_dir.join("metrics.csv");
    let preds = out_dir.join("final_predictions.csv");
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&metrics, metrics_csv(&output.metrics)).map_err(write_err(&metrics))?;
    fs::write(&preds, predictions_csv(&output)).map_err(write_err(&preds))?;

    let manifest = RunManifest {
        config_digest: digest,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: vec![metrics, preds, manifest_path.clone()],
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json).map_err(write_err(&manifest_path))?;
    Ok(manifest)
}

/// Shortest of the plain and exponent forms; both parse back exactly.
pub fn fmt_f64(x: f64) -> String {
    let plain = x.to_string();
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

pub const METRICS_HEADER: &str =
    "t,agent,err_local,err_fused,err_central,var_local_avg,var_fused_avg,dispersion,consensus_residual";

/// One line per `(t, agent)`; floats use the shortest representation that
/// parses back to the same value.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 160);
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.agent,
            fmt_f64(r.err_local),
            fmt_f64(r.err_fused),
            fmt_f64(r.err_central),
            fmt_f64(r.var_local_avg),
            fmt_f64(r.var_fused_avg),
            fmt_f64(r.dispersion),
            fmt_f64(r.consensus_residual)
        );
    }
    s
}

/// Final-round predictions on the test grid: coordinates, the latent value,
/// every agent's local and fused mean and variance, then the centralized
/// baseline.
pub fn predictions_csv(out: &SimOutput) -> String {
    let dim = out.grid.dim();
    let mut cols: Vec<String> = (1..=dim).map(|k| format!("z{k}")).collect();
    cols.push("eta".into());
    for i in 0..out.final_agents.len() {
        for c in ["mu_local", "var_local", "mu_fused", "var_fused"] {
            cols.push(format!("{c}_{i}"));
        }
    }
    cols.push("mu_central".into());
    cols.push("var_central".into());
    let mut s = cols.join(",");
    s.push('\n');
    for (p, z) in out.grid.points().iter().enumerate() {
        let mut fields: Vec<String> = z.iter().map(|x| fmt_f64(*x)).collect();
        fields.push(fmt_f64(out.eta[p]));
        for a in &out.final_agents {
            fields.push(fmt_f64(a.local_mean[p]));
            fields.push(fmt_f64(a.local_var[p]));
            fields.push(fmt_f64(a.fused.mu_tilde[p]));
            fields.push(fmt_f64(a.fused.var_tilde[p]));
        }
        fields.push(fmt_f64(out.central.mean[p]));
        fields.push(fmt_f64(out.central.var[p]));
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaFReport {
    pub selection: NetworkSigmaF,
    pub constants: FusionConstants,
}

/// Floods the noise variances, selects `sigma_f^2` per agent, agrees on the
/// maximum and reports the admissibility inequality at the agreed value.
pub fn cmd_sigma_f(path: &Path, out: &mut dyn Write) -> CliResult<SigmaFReport> {
    let (cfg, _) = load_config(path)?;
    cfg.check()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let start = cfg.kernel.sigma_f_sq.max(1.0);
    let selection = select_sigma_f_distributed(&cfg.schedule, &cfg.noise, start)?;
    let s2 = selection.agreed[0];
    let constants = compute_fusion_constants(s2, &cfg.noise)?;
    let cond = &selection.condition;
    let mut s = String::new();
    let _ = writeln!(s, "sigma_f_sq: {}", fmt_f64(s2));
    let _ = writeln!(s, "lhs: {}", fmt_f64(cond.lhs));
    let _ = writeln!(s, "rhs: {}", fmt_f64(cond.rhs));
    let _ = writeln!(s, "satisfied: {}", cond.satisfied);
    let _ = writeln!(s, "c: {}", fmt_f64(constants.c));
    let psi: Vec<String> = constants.psi.iter().map(|p| fmt_f64(*p)).collect();
    let _ = writeln!(s, "psi: {}", psi.join(","));
    let _ = writeln!(s, "flood rounds: {}", selection.flood_rounds);
    out.write_all(s.as_bytes())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
    Ok(SigmaFReport {
        selection,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a = config_digest("x = 1\ny = 2\n[t]\na = 1.5\nb = [1, 2]\n").unwrap();
        let b = config_digest("y = 2\nx = 1\n[t]\nb = [1, 2]\na = 1.5\n").unwrap();
        let c = config_digest("y = 3\nx = 1\n[t]\nb = [1, 2]\na = 1.5\n").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(config_digest("x = = 1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Parse("x".into()).exit_code(), 2);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        assert_eq!(CliError::Run(Error::EmptyDataset).exit_code(), 1);
    }

    #[test]
    fn csv_floats_round_trip() {
        let row = MetricsRow {
            t: 1,
            agent: 0,
            err_local: 0.1 + 0.2,
            err_fused: 1.0 / 3.0,
            err_central: 1e-300,
            var_local_avg: 0.5,
            var_fused_avg: 0.5,
            dispersion: 2f64.sqrt(),
            consensus_residual: 0.0,
            active: 0,
            improved: 0,
            variance_violations: 0,
            samples: 1,
        };
        let csv = metrics_csv(std::slice::from_ref(&row));
        let line = csv.lines().nth(1).unwrap();
        let f: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(f[0], row.err_local);
        assert_eq!(f[1], row.err_fused);
        assert_eq!(f[2], row.err_central);
        assert_eq!(f[5], row.dispersion);
        assert_eq!(fmt_f64(1e-300), "1e-300");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(-1.799631684727393e-36), "-1.799631684727393e-36");
    }
}
