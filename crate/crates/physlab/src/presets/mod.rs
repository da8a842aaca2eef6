//! Registered experiments. Each preset owns a schema with per-tier
//! defaults, a runtime model, and a runner that writes its artifacts.

mod estimation;
mod kernel;
mod link;
mod planes;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{resolve, Param, Resolved, Tier, Violation};
use crate::error::{HarnessError, Result};
use crate::output::{FileDigest, Sink};

/// Full-tier runs estimated above this are refused at launch.
pub const FULL_TIER_LIMIT_SECONDS: f64 = 48.0 * 3600.0;

pub const MANIFEST: &str = "manifest.json";

pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    pub summary: &'static str,
    pub schema: fn() -> Vec<Param>,
    /// Checks that span several keys.
    pub check: fn(&Resolved) -> Vec<Violation>,
    /// Estimated single-core wall-clock seconds.
    pub cost: fn(&Resolved) -> f64,
    pub run: fn(&Resolved, u64, &mut Sink) -> Result<()>,
}

impl Preset {
    pub fn description(&self) -> String {
        format!("{}: {}", self.figure, self.summary)
    }
}

pub fn registry() -> Vec<Preset> {
    vec![
        link::fro_awgn(),
        link::constellations_2d(),
        link::constellations_3d(),
        link::rayleigh_ae(),
        estimation::mse_samples(),
        estimation::depth(),
        estimation::entropy_vs_n(),
        planes::deep(),
        planes::slfn(),
        kernel::width_sweep(),
    ]
}

pub fn find(name: &str) -> Result<Preset> {
    registry().into_iter().find(|p| p.name == name).ok_or_else(|| HarnessError::UnknownPreset(name.to_string()))
}

pub(crate) fn no_checks(_: &Resolved) -> Vec<Violation> {
    Vec::new()
}

/// Outcome of `validate`: violations are data, not failures.
#[derive(Clone, Debug)]
pub struct Validation {
    pub resolved: Option<Resolved>,
    pub violations: Vec<Violation>,
    pub estimate_seconds: Option<f64>,
}

impl Validation {
    pub fn ok(&self) -> bool {
        !self.violations.iter().any(Violation::is_error)
    }
}

pub fn validate(preset: &Preset, overrides: &[(String, String)]) -> Validation {
    let resolved = match resolve(&(preset.schema)(), overrides) {
        Ok(r) => r,
        Err(violations) => return Validation { resolved: None, violations, estimate_seconds: None },
    };
    let mut violations = (preset.check)(&resolved);
    if violations.iter().any(Violation::is_error) {
        return Validation { resolved: Some(resolved), violations, estimate_seconds: None };
    }
    let est = (preset.cost)(&resolved);
    match resolved.tier.budget_seconds() {
        Some(budget) if est > budget => violations.push(Violation::warning(
            None,
            format!(
                "estimated runtime {} exceeds the {} tier budget of {}",
                human_duration(est),
                resolved.tier,
                human_duration(budget)
            ),
        )),
        None if est > FULL_TIER_LIMIT_SECONDS => violations.push(Violation::warning(
            None,
            format!(
                "estimated runtime {}; the full tier of {} is infeasible on one core",
                human_duration(est),
                preset.name
            ),
        )),
        _ => {}
    }
    Validation { resolved: Some(resolved), violations, estimate_seconds: Some(est) }
}

pub fn human_duration(s: f64) -> String {
    if s < 1.0 {
        "under 1 s".into()
    } else if s < 120.0 {
        format!("{s:.0} s")
    } else if s < 7200.0 {
        format!("{:.1} min", s / 60.0)
    } else if s < 3.0 * 86400.0 {
        format!("{:.1} h", s / 3600.0)
    } else {
        format!("{:.0} days", s / 86400.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub preset: String,
    pub figure: String,
    pub tool_version: String,
    pub seed: u64,
    pub tier: String,
    /// Every key the preset read, with its resolved value.
    pub config: BTreeMap<String, String>,
    pub overridden: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub estimated_seconds: f64,
    /// `ok` or `diverged`.
    pub status: String,
    pub files: Vec<FileDigest>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Validates, runs, and writes the manifest last. A divergence still
/// produces a manifest, marked `diverged`, before the error is returned.
pub fn run(preset: &Preset, seed: u64, overrides: &[(String, String)], out: &Path) -> Result<RunManifest> {
    let v = validate(preset, overrides);
    if !v.ok() {
        return Err(HarnessError::Invalid(v.violations.into_iter().filter(Violation::is_error).collect()));
    }
    let cfg = v.resolved.expect("valid configs resolve");
    let est = v.estimate_seconds.unwrap_or(0.0);
    if cfg.tier == Tier::Full && est > FULL_TIER_LIMIT_SECONDS {
        return Err(HarnessError::Infeasible(format!(
            "the full tier of {} is infeasible: estimated {} on one core at full scale. \
             Use tier=desk, or override the size keys to bring it under {}",
            preset.name,
            human_duration(est),
            human_duration(FULL_TIER_LIMIT_SECONDS)
        )));
    }
    let mut sink = Sink::create(out)?;
    let started = now_ms();
    let (status, pending) = match (preset.run)(&cfg, seed, &mut sink) {
        Ok(()) => ("ok", None),
        Err(e @ HarnessError::Diverged { .. }) => ("diverged", Some(e)),
        Err(e) => return Err(e),
    };
    let manifest = RunManifest {
        preset: preset.name.to_string(),
        figure: preset.figure.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        tier: cfg.tier.to_string(),
        config: cfg.echo(),
        overridden: cfg.overridden.clone(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        estimated_seconds: est,
        status: status.to_string(),
        files: sink.files().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = out.join(MANIFEST);
    std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
    match pending {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// First divergence among several training runs, reported after all
/// artifacts are written.
#[derive(Default)]
pub(crate) struct Divergence(Option<(String, u64)>);

impl Divergence {
    pub fn note(&mut self, context: impl FnOnce() -> String, step: Option<u64>) {
        if let (None, Some(step)) = (&self.0, step) {
            self.0 = Some((context(), step));
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.0 {
            Some((context, step)) => Err(HarnessError::Diverged { context, step }),
            None => Ok(()),
        }
    }
}

/// Unit costs measured on a single core of the reference machine.
pub(crate) mod cost {
    /// One full-batch AE epoch over M one-hot symbols.
    pub fn ae_epoch(m: usize, d: usize) -> f64 {
        let flops = (m * (2 * m * m + 2 * m * d) * 3) as f64;
        1.0e-6 + 1.2e-9 * flops
    }

    /// One minibatch step of a dense network.
    pub fn nn_step(widths: &[usize], batch: usize) -> f64 {
        let macs: usize = widths.windows(2).map(|w| w[0] * w[1]).sum();
        2e-6 + 2.0e-10 * (6 * macs * batch) as f64
    }

    /// Symmetric eigenvalues of an n×n matrix.
    pub fn eig(n: usize) -> f64 {
        3.6e-10 * (n as f64).powi(3) + 1e-6 * (n * n) as f64 * 1e-2
    }

    /// Pairwise gradient step of an M-point constellation.
    pub fn gs_step(m: usize, d: usize) -> f64 {
        2e-7 + 3e-9 * (m * m * d) as f64
    }
}
