//! Config-driven experiment runs.
//!
//! One declarative TOML document describes one run: the command, the
//! kernel(s), the volume, replica and seed ranges, and output paths.
//! Unknown keys are rejected. Every run writes a single JSON document
//! containing the results, a digest of the effective config, and the mark
//! generator version; rerunning the same config reproduces the document
//! byte for byte. Timing is reported on stderr so the document stays
//! deterministic.
//!
//! # Config schema
//!
//! ```toml
//! command = "theta"        # explore | couple | enumerate | theta |
//!                          # susceptibility | decay | bisect |
//!                          # monotonicity | accept
//! seed = 42                # base seed (decimal; the CLI flag also takes hex)
//! n = 16                   # volume radius (or n_list for decay/monotonicity)
//! replicas = 10000
//!
//! [kernel]
//! family = "table"         # table | polynomial-phi | product-scaled
//! d = 2
//! orientation = "undirected"   # undirected | directed | oriented
//! entries = [ { displacement = [1, 0], value = 0.45 },
//!             { displacement = [0, 1], value = 0.45 } ]
//! # polynomial-phi instead takes beta/alpha; product-scaled takes
//! # factor plus a nested [kernel.inner]. Optional overrides:
//! # overrides = [ { displacement = [1, 0], value = 0.3 } ]
//! ```
//!
//! Command-specific keys: `kernel_prime` (couple, enumerate, monotonicity),
//! `delta`/`q` (explore), `mode`, `functional`, `target`, `theta_target`,
//! `tol`, `beta_max`, `scale_max`, `phi` (bisect), `engine` and
//! `full_cluster` (explore), `assert_level`, `trace_out`, `csv_out`, `out`.

use crate::coupling::{self, CPrimeMode};
use crate::error::{Error, Result};
use crate::exploration::{self, AssertLevel, RunOptions};
use crate::lattice::{DifferenceSet, Displacement, Kernel, PhiFamily};
use crate::marks::{MarkField, GENERATOR_VERSION};
use crate::montecarlo;
use crate::oracle;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Explore,
    Couple,
    Enumerate,
    Theta,
    Susceptibility,
    Decay,
    Bisect,
    Monotonicity,
    Accept,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub displacement: Vec<i32>,
    pub value: f64,
}

/// Declarative kernel description; validated by [`KernelSpec::build`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<EntrySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<KernelSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Vec<EntrySpec>>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        let orientation = self.orientation.as_deref().unwrap_or("undirected");
        let entry_pairs = |entries: &Option<Vec<EntrySpec>>| -> Vec<(Displacement, f64)> {
            entries
                .iter()
                .flatten()
                .map(|e| (Displacement::new(e.displacement.clone()), e.value))
                .collect()
        };
        let base = match self.family.as_str() {
            "table" => {
                let d = self
                    .d
                    .ok_or_else(|| Error::Config("table kernel needs d".into()))?;
                let entries = entry_pairs(&self.entries);
                match orientation {
                    "undirected" => Kernel::table(d, entries)?,
                    "directed" => Kernel::directed_table(d, entries)?,
                    "oriented" => {
                        if d < 2 {
                            return Err(Error::Config(
                                "oriented kernels need d >= 2 (space plus time)".into(),
                            ));
                        }
                        Kernel::oriented_table(d - 1, entries)?
                    }
                    other => {
                        return Err(Error::Config(format!("unknown orientation '{other}'")))
                    }
                }
            }
            "polynomial-phi" => {
                if orientation != "undirected" {
                    return Err(Error::Config(
                        "polynomial-phi kernels are undirected".into(),
                    ));
                }
                let d = self
                    .d
                    .ok_or_else(|| Error::Config("polynomial-phi kernel needs d".into()))?;
                let beta = self
                    .beta
                    .ok_or_else(|| Error::Config("polynomial-phi kernel needs beta".into()))?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("polynomial-phi kernel needs alpha".into()))?;
                Kernel::polynomial_phi(d, beta, alpha)?
            }
            "product-scaled" => {
                let factor = self
                    .factor
                    .ok_or_else(|| Error::Config("product-scaled kernel needs factor".into()))?;
                let inner = self
                    .inner
                    .as_ref()
                    .ok_or_else(|| Error::Config("product-scaled kernel needs inner".into()))?;
                inner.build()?.scaled(factor)?
            }
            other => return Err(Error::Config(format!("unknown kernel family '{other}'"))),
        };
        let mut kernel = base;
        for e in self.overrides.iter().flatten() {
            kernel = kernel.with_override(Displacement::new(e.displacement.clone()), e.value)?;
        }
        Ok(kernel)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<EntrySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl PhiSpec {
    pub fn build(&self) -> Result<PhiFamily> {
        match (&self.entries, self.alpha) {
            (Some(entries), None) => PhiFamily::table(
                self.d,
                entries
                    .iter()
                    .map(|e| (Displacement::new(e.displacement.clone()), e.value)),
            ),
            (None, Some(alpha)) => Ok(PhiFamily::Polynomial { d: self.d, alpha }),
            _ => Err(Error::Config(
                "phi spec takes either entries (table) or alpha (polynomial)".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_prime: Option<KernelSpec>,
    /// Explicit difference-set displacements (explore only; derived from
    /// kernel_prime everywhere else).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<i32>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assert_level: Option<AssertLevel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_cluster: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<CPrimeMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<i32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn kernel(&self) -> Result<Kernel> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a kernel".into()))?
            .build()
    }

    fn kernel_prime(&self) -> Result<Kernel> {
        self.kernel_prime
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs kernel_prime".into()))?
            .build()
    }

    fn n(&self) -> Result<u32> {
        self.n.ok_or_else(|| Error::Config("this command needs n".into()))
    }

    fn n_list(&self) -> Result<Vec<u32>> {
        if let Some(list) = &self.n_list {
            if list.is_empty() {
                return Err(Error::Config("n_list must be nonempty".into()));
            }
            return Ok(list.clone());
        }
        Ok(vec![self.n()?])
    }

    fn replicas(&self) -> Result<u64> {
        let r = self.replicas.unwrap_or(1);
        if r < 1 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        Ok(r)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn mode(&self) -> CPrimeMode {
        self.mode.unwrap_or(CPrimeMode::PointwiseDominated)
    }

    fn run_options(&self) -> RunOptions {
        let level = self.assert_level.unwrap_or(AssertLevel::Off);
        RunOptions {
            assertions: level,
            record_trace: level == AssertLevel::FullTrace || self.trace_out.is_some(),
            stop_at_boundary: !self.full_cluster.unwrap_or(false),
        }
    }

    /// Canonical JSON of everything that affects the results (output paths
    /// and worker counts excluded).
    pub fn effective_json(&self) -> serde_json::Value {
        let mut stripped = self.clone();
        stripped.out = None;
        stripped.trace_out = None;
        stripped.csv_out = None;
        stripped.workers = None;
        serde_json::to_value(&stripped).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.effective_json()).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Self-describing output document; bit-identical across reruns of the
/// same config digest.
#[derive(Clone, Debug, Serialize)]
pub struct OutputDoc {
    pub schema_version: u32,
    pub command: Command,
    pub generator: &'static str,
    pub config_digest: String,
    pub seed: u64,
    /// The effective config; rerunning it reproduces this document.
    pub config: serde_json::Value,
    pub results: serde_json::Value,
}

impl OutputDoc {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("results serialize")
}

/// Execute one config and produce its output document. Side files (trace,
/// CSV) are written here; the main document is the caller's to write.
pub fn run_command(config: &ExperimentConfig) -> Result<OutputDoc> {
    let results = match config.command {
        Command::Explore => run_explore(config)?,
        Command::Couple => run_couple(config)?,
        Command::Enumerate => run_enumerate(config)?,
        Command::Theta => {
            let report =
                montecarlo::estimate_theta(&config.kernel()?, config.n()?, config.replicas()?, config.seed())?;
            json(&report)
        }
        Command::Susceptibility => {
            let report = montecarlo::estimate_susceptibility(
                &config.kernel()?,
                config.n()?,
                config.replicas()?,
                config.seed(),
            )?;
            json(&report)
        }
        Command::Decay => {
            let fit = montecarlo::estimate_decay(
                &config.kernel()?,
                &config.n_list()?,
                config.replicas()?,
                config.seed(),
            )?;
            if let Some(path) = &config.csv_out {
                let mut lines = String::from("n,theta,stderr,log_theta\n");
                for p in &fit.points {
                    lines.push_str(&format!("{},{},{},{}\n", p.n, p.theta, p.stderr, p.log_theta));
                }
                std::fs::write(path, lines)?;
            }
            json(&fit)
        }
        Command::Bisect => {
            let phi = config
                .phi
                .as_ref()
                .ok_or_else(|| Error::Config("bisect needs a phi spec".into()))?
                .build()?;
            let est = montecarlo::bisect_beta_c(
                &phi,
                config.n()?,
                config.replicas()?,
                config.theta_target.unwrap_or(0.5),
                config.tol.unwrap_or(0.01),
                config.beta_max.unwrap_or(64.0),
                config.seed(),
            )?;
            if let Some(path) = &config.csv_out {
                let (lo, hi) = est.outcome.bracket;
                let (tl, th) = est.outcome.theta_at_bracket;
                let lines = format!(
                    "beta,theta,stderr\n{lo},{tl},\n{hi},{th},\n"
                );
                std::fs::write(path, lines)?;
            }
            json(&est)
        }
        Command::Monotonicity => {
            let report = montecarlo::monotonicity_experiment(
                &config.kernel()?,
                &config.kernel_prime()?,
                &config.n_list()?,
                config.replicas()?,
                config.theta_target.unwrap_or(0.5),
                config.tol.unwrap_or(0.01),
                config.scale_max.unwrap_or(256.0),
                config.seed(),
            )?;
            if let Some(path) = &config.csv_out {
                let mut lines = String::from("n,s_base,s_perturbed,gap,stderr\n");
                for p in &report.points {
                    lines.push_str(&format!(
                        "{},{},{},{},{}\n",
                        p.n, p.scale_base.location, p.scale_perturbed.location, p.gap, p.combined_stderr
                    ));
                }
                std::fs::write(path, lines)?;
            }
            json(&report)
        }
        Command::Accept => {
            let rows = crate::acceptance::run_all();
            let all_passed = rows.iter().all(|r| r.passed);
            serde_json::json!({
                "criteria": rows,
                "all_passed": all_passed,
            })
        }
    };
    Ok(OutputDoc {
        schema_version: 1,
        command: config.command,
        generator: GENERATOR_VERSION,
        config_digest: config.digest(),
        seed: config.seed(),
        config: config.effective_json(),
        results,
    })
}

fn run_explore(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let kernel = config.kernel()?;
    let n = config.n()?;
    let field = MarkField::new(config.seed());
    match config.engine.as_deref().unwrap_or("exploration") {
        "bfs" => {
            let cluster = oracle::bfs_cluster(&kernel, n, &field)?;
            Ok(serde_json::json!({
                "engine": "bfs",
                "vertices": cluster.vertices,
                "edges": cluster.edges,
            }))
        }
        "exploration" => {
            let delta = match (&config.delta, &config.kernel_prime) {
                (Some(list), _) => DifferenceSet::from_displacements(
                    kernel.d(),
                    kernel.orientation(),
                    list.iter().map(|c| Displacement::new(c.clone())),
                )?,
                (None, Some(spec)) => crate::lattice::delta_of(&kernel, &spec.build()?)?,
                (None, None) => DifferenceSet::empty(kernel.d(), kernel.orientation()),
            };
            let q = config.q.unwrap_or(0.0);
            let opts = config.run_options();
            let outcome = exploration::run(&kernel, &delta, q, n, &field, opts)?;
            if let Some(path) = &config.trace_out {
                let mut out = String::new();
                for rec in outcome.trace.as_deref().unwrap_or(&[]) {
                    out.push_str(&serde_json::to_string(rec).expect("trace serializes"));
                    out.push('\n');
                }
                std::fs::write(path, out)?;
            }
            let mut vertices = outcome.discovered_vertices();
            vertices.sort();
            let statuses: Vec<serde_json::Value> = outcome
                .statuses()
                .into_iter()
                .map(|(key, status)| serde_json::json!({ "edge": key, "status": status }))
                .collect();
            Ok(serde_json::json!({
                "engine": "exploration",
                "termination": outcome.termination,
                "stages": outcome.stages,
                "vertices": vertices,
                "untagged_cluster": sorted_vertices(&outcome, outcome.untagged_cluster_ids()),
                "tagged_leaves": sorted_vertices(&outcome, outcome.tagged_leaf_ids()),
                "statuses": statuses,
            }))
        }
        other => Err(Error::Config(format!("unknown engine '{other}'"))),
    }
}

fn sorted_vertices(
    outcome: &exploration::ExplorationOutcome,
    ids: Vec<u32>,
) -> Vec<crate::lattice::Vertex> {
    let mut v: Vec<_> = ids
        .into_iter()
        .map(|i| outcome.ctx.vertices[i as usize].clone())
        .collect();
    v.sort();
    v
}

fn run_couple(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let j = config.kernel()?;
    let jp = config.kernel_prime()?;
    let n = config.n()?;
    let mode = config.mode();
    let runner = coupling::CoupledRunner::new(&j, &jp, n, mode)?
        .with_run_options(config.run_options());
    let replicas = config.replicas()?;
    if replicas == 1 {
        let sample = runner.sample_seed(config.seed())?;
        let (containment, witness) = coupling::check_containment(&sample);
        Ok(serde_json::json!({
            "params": runner.params.summary(),
            "mode": mode,
            "termination": sample.exploration.termination,
            "cluster_h": sample.cluster_h,
            "cluster_star": sample.cluster_star,
            "cluster_jprime": sample.cluster_jprime,
            "halo_vertices": sample.halo_vertices,
            "halo_edges": sample.halo_edges,
            "containment": containment,
            "witness": witness,
        }))
    } else {
        let seed0 = config.seed();
        let mut holds = 0u64;
        let mut not_applicable = 0u64;
        let mut violated = 0u64;
        for i in 0..replicas {
            let sample = runner.sample_seed(seed0.wrapping_add(i))?;
            match coupling::check_containment(&sample).0 {
                coupling::Containment::Holds => holds += 1,
                coupling::Containment::NotApplicable => not_applicable += 1,
                coupling::Containment::Violated => violated += 1,
            }
        }
        let report = coupling::domination_report(&j, &jp, n, replicas, seed0)?;
        Ok(serde_json::json!({
            "params": runner.params.summary(),
            "mode": mode,
            "containment_counts": {
                "holds": holds,
                "not_applicable": not_applicable,
                "violated": violated,
            },
            "domination": report,
        }))
    }
}

fn run_enumerate(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let j = config.kernel()?;
    let jp = config
        .kernel_prime
        .as_ref()
        .map(|s| s.build())
        .transpose()?;
    let n = config.n()?;
    let name = config
        .functional
        .as_deref()
        .ok_or_else(|| Error::Config("enumerate needs a functional".into()))?;
    if name == "domination-check" {
        let jp = jp.ok_or_else(|| Error::Config("domination-check needs kernel_prime".into()))?;
        let check = oracle::exact_domination_check(&j, &jp, n)?;
        return Ok(json(&check));
    }
    let functional = match name {
        "cluster-size" => oracle::Functional::ClusterSize,
        "connection" => oracle::Functional::Connection {
            target: crate::lattice::Vertex::new(
                config
                    .target
                    .clone()
                    .ok_or_else(|| Error::Config("connection needs a target vertex".into()))?,
            ),
        },
        "cprime-size" => oracle::Functional::CPrimeSize {
            mode: config.mode(),
        },
        "halo-vertex-count" => oracle::Functional::HaloVertexCount,
        "cluster-h-size" => oracle::Functional::ClusterHSize,
        other => return Err(Error::Config(format!("unknown functional '{other}'"))),
    };
    let dist = oracle::enumerate_exact(&j, jp.as_ref(), n, &functional)?;
    let mean = dist.mean();
    Ok(serde_json::json!({
        "distribution": dist,
        "mean": mean,
    }))
}

/// Parse a seed given as decimal or 0x-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).map_err(|e| Error::Config(format!("bad hex seed: {e}")))
    } else {
        t.parse()
            .map_err(|e| Error::Config(format!("bad seed: {e}")))
    }
}

/// Write a document to the given path, or stdout when the path is "-" or
/// absent.
pub fn write_document(doc: &OutputDoc, out: Option<&PathBuf>) -> Result<()> {
    let text = doc.to_json_string();
    match out {
        Some(path) if path.as_os_str() != "-" => std::fs::write(path, text)?,
        _ => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const THETA_CONFIG: &str = r#"
command = "theta"
seed = 5
n = 4
replicas = 500

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.45 },
            { displacement = [0, 1], value = 0.45 } ]
"#;

    #[test]
    fn parse_and_run_theta() {
        let config = ExperimentConfig::from_toml(THETA_CONFIG).unwrap();
        let doc = run_command(&config).unwrap();
        assert_eq!(doc.schema_version, 1);
        assert!(doc.results.get("estimate").is_some());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{THETA_CONFIG}\nbogus_key = 3\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn negative_replicas_rejected_at_parse_time() {
        let bad = THETA_CONFIG.replace("replicas = 500", "replicas = -2");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let config = ExperimentConfig::from_toml(THETA_CONFIG).unwrap();
        let a = run_command(&config).unwrap().to_json_string();
        let b = run_command(&config).unwrap().to_json_string();
        assert_eq!(a, b);
    }

    #[test]
    fn digest_ignores_output_paths() {
        let config = ExperimentConfig::from_toml(THETA_CONFIG).unwrap();
        let mut with_out = config.clone();
        with_out.out = Some(PathBuf::from("somewhere.json"));
        assert_eq!(config.digest(), with_out.digest());
        let mut different = config.clone();
        different.seed = Some(6);
        assert_ne!(config.digest(), different.digest());
    }

    #[test]
    fn explore_matches_bfs_byte_for_byte() {
        let explore = r#"
command = "explore"
seed = 77
n = 5
full_cluster = true

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.45 },
            { displacement = [0, 1], value = 0.45 } ]
"#;
        let config = ExperimentConfig::from_toml(explore).unwrap();
        let doc = run_command(&config).unwrap();
        let mut bfs_config = config.clone();
        bfs_config.engine = Some("bfs".into());
        let bfs_doc = run_command(&bfs_config).unwrap();
        let a = serde_json::to_string(&doc.results["vertices"]).unwrap();
        let b = serde_json::to_string(&bfs_doc.results["vertices"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("0XFF").unwrap(), 255);
        assert!(parse_seed("zzz").is_err());
    }

    #[test]
    fn oriented_kernel_spec_builds() {
        let spec: KernelSpec = toml::from_str(
            r#"
family = "table"
d = 2
orientation = "oriented"
entries = [ { displacement = [0, 1], value = 0.7 },
            { displacement = [1, 1], value = 0.7 } ]
"#,
        )
        .unwrap();
        let k = spec.build().unwrap();
        assert!(k.is_oriented());
    }
}
