//! Test-suite emission and replay. A run produces a directory with:
//! - `suite.json`: {program_hash, hp, tests: [{file, first_new_path_iter}]}
//! - `test_<seq>.bin`: the raw input bytes, one file per discovered path
//! - `report.json`: the coverage report
//! - `stats.csv`: one row per search iteration

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concrete::{self, InputVector};
use crate::ir::IrProgram;
use crate::mcts::{Engine, HyperParams, CSV_HEADER};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestEntry {
    pub file: String,
    pub first_new_path_iter: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub program_hash: String,
    pub hp: HyperParams,
    pub tests: Vec<TestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub branches_total: usize,
    pub branches_hit: usize,
    pub branch_cov: f64,
    pub paths_found: usize,
    /// Hit counts keyed by branch target address ("f<i>.b<j>").
    pub per_branch_hits: BTreeMap<String, u64>,
}

pub fn program_hash(source_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(source_text.as_bytes());
    format!("{:x}", h.finalize())
}

pub fn coverage_report(engine: &Engine<'_>) -> CoverageReport {
    CoverageReport {
        branches_total: engine.branches_total(),
        branches_hit: engine.branches_hit(),
        branch_cov: engine.branch_cov(),
        paths_found: engine.registry().len(),
        per_branch_hits: engine
            .branch_hits()
            .iter()
            .map(|(a, &n)| (a.to_string(), n))
            .collect(),
    }
}

pub fn stats_csv(engine: &Engine<'_>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in engine.stats() {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Write the full artifact directory for a finished run.
pub fn write_suite(
    dir: &Path,
    source_text: &str,
    engine: &Engine<'_>,
) -> std::io::Result<SuiteManifest> {
    std::fs::create_dir_all(dir)?;
    let mut tests = Vec::new();
    for (seq, entry) in engine.suite().iter().enumerate() {
        let file = format!("test_{seq}.bin");
        std::fs::write(dir.join(&file), &entry.input.bytes)?;
        tests.push(TestEntry { file, first_new_path_iter: entry.first_new_path_iter });
    }
    let manifest = SuiteManifest {
        program_hash: program_hash(source_text),
        hp: engine.hp.clone(),
        tests,
    };
    std::fs::write(dir.join("suite.json"), serde_json::to_vec_pretty(&manifest)?)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_vec_pretty(&coverage_report(engine))?,
    )?;
    std::fs::write(dir.join("stats.csv"), stats_csv(engine))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> std::io::Result<SuiteManifest> {
    let bytes = std::fs::read(dir.join("suite.json"))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

pub fn load_report(dir: &Path) -> std::io::Result<CoverageReport> {
    let bytes = std::fs::read(dir.join("report.json"))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Re-execute every test in the suite and measure coverage afresh.
pub fn replay(dir: &Path, p: &IrProgram) -> std::io::Result<CoverageReport> {
    let manifest = load_manifest(dir)?;
    let depth_cap = manifest.hp.tree_depth;
    let step_cap = manifest.hp.conex_budget;
    let mut covered: BTreeMap<String, u64> = BTreeMap::new();
    let mut paths: HashSet<Vec<crate::ir::Address>> = HashSet::new();
    for t in &manifest.tests {
        let bytes = std::fs::read(dir.join(&t.file))?;
        let trace = concrete::execute(p, &InputVector { bytes }, depth_cap, step_cap);
        for a in &trace.addrs {
            *covered.entry(a.to_string()).or_insert(0) += 1;
        }
        paths.insert(trace.addrs);
    }
    let total = p.branch_addresses().len();
    Ok(CoverageReport {
        branches_total: total,
        branches_hit: covered.len(),
        branch_cov: if total == 0 { 1.0 } else { covered.len() as f64 / total as f64 },
        paths_found: paths.len(),
        per_branch_hits: covered,
    })
}
