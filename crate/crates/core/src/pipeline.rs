//! File-based pipeline stages behind the command-line tool.
//!
//! Each stage writes into its own directory and finishes with a
//! `manifest.json` listing the config, its hash, the inputs it consumed and
//! every file it produced, all by relative path and SHA-256. Nothing
//! time- or host-dependent is recorded, so a rerun with the same config
//! reproduces the directory byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::envsim::{generate_dataset, make_reference};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::{self, EvalTable, IdmPolicy};
use crate::idm::{
    self, grad_check, load_checkpoint, save_checkpoint, EpochLog, GradCheckReport, IdmModel,
};
use crate::metrics::CoverageCurve;
use crate::trajectory::Trajectory;

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "model.json";
pub const EPOCH_LOG_FILE: &str = "epoch_log.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// Consumed files, by name and content hash.
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    #[serde(default)]
    pub summary: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    pub fn outputs_with_role<'a>(
        &'a self,
        role: &'a str,
    ) -> impl Iterator<Item = &'a FileEntry> + 'a {
        self.outputs.iter().filter(move |f| f.role == role)
    }

    fn as_input(&self, dir_role: &str) -> FileEntry {
        let text = manifest_bytes(self);
        FileEntry {
            path: format!("{dir_role}/{MANIFEST}"),
            sha256: sha256_hex(&text),
            role: dir_role.into(),
            scenario: None,
            seed: None,
        }
    }
}

fn manifest_bytes(m: &Manifest) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(m).expect("manifest serializes");
    v.push(b'\n');
    v
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under a root directory and records them for the manifest.
struct Outputs {
    root: PathBuf,
    manifest: Manifest,
}

impl Outputs {
    fn create(root: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    fn write(
        &mut self,
        rel: &str,
        bytes: &[u8],
        role: &str,
        scenario: Option<&str>,
        seed: Option<u64>,
    ) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            role: role.into(),
            scenario: scenario.map(str::to_string),
            seed,
        });
        Ok(())
    }

    fn finish(self) -> Result<Manifest> {
        let path = self.root.join(MANIFEST);
        fs::write(&path, manifest_bytes(&self.manifest)).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

fn trajectory_bytes(tr: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    tr.write_jsonl_to(&mut buf).expect("writing to memory");
    buf
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// Read a file listed in a manifest, checking its recorded hash.
fn read_verified(dir: &Path, entry: &FileEntry) -> Result<Vec<u8>> {
    let path = dir.join(&entry.path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::Corrupt {
            path,
            message: "content does not match the manifest checksum".into(),
        });
    }
    Ok(bytes)
}

fn load_trajectory(dir: &Path, entry: &FileEntry) -> Result<Trajectory> {
    read_verified(dir, entry)?;
    Trajectory::read_jsonl(&dir.join(&entry.path))
}

/// Write reference trajectories and the demonstration set.
pub fn gen_data(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.check()?;
    let env = cfg.env();
    let mut out = Outputs::create(out_dir, Manifest::new("gen-data", cfg))?;
    for &s in &cfg.envsim.scenarios {
        let r = make_reference(s, cfg.envsim.reference_seed, cfg.core, &env);
        r.validate()?;
        out.write(
            &format!("references/{}.jsonl", s.name()),
            &trajectory_bytes(&r),
            "reference",
            Some(s.name()),
            Some(cfg.envsim.reference_seed),
        )?;
    }
    let data = generate_dataset(
        &cfg.envsim.scenarios,
        cfg.envsim.n_per_scenario,
        cfg.envsim.data_seed,
        cfg.envsim.jitter,
        cfg.core,
        &env,
    )?;
    let n = cfg.envsim.n_per_scenario;
    for (i, tr) in data.iter().enumerate() {
        tr.validate()?;
        out.write(
            &format!("train/{}-{:03}.jsonl", tr.meta.scenario, i % n),
            &trajectory_bytes(tr),
            "train",
            Some(&tr.meta.scenario),
            Some(tr.meta.seed),
        )?;
    }
    out.manifest
        .summary
        .insert("references".into(), cfg.envsim.scenarios.len().to_string());
    out.manifest
        .summary
        .insert("demonstrations".into(), data.len().to_string());
    out.finish()
}

/// The demonstration set listed in a `gen-data` manifest.
pub fn load_training_set(data_dir: &Path) -> Result<(Manifest, Vec<Trajectory>)> {
    let m = Manifest::load(data_dir)?;
    let data = m
        .outputs_with_role("train")
        .map(|e| load_trajectory(data_dir, e))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, data))
}

/// References for `scenarios`, in that order.
pub fn load_references(
    data_dir: &Path,
    scenarios: &[crate::envsim::Scenario],
) -> Result<(Manifest, Vec<Trajectory>)> {
    let m = Manifest::load(data_dir)?;
    let mut refs = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let entry = m
            .outputs_with_role("reference")
            .find(|e| e.scenario.as_deref() == Some(s.name()))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{} has no reference for scenario `{}`",
                    data_dir.display(),
                    s.name()
                ))
            })?;
        refs.push(load_trajectory(data_dir, entry)?);
    }
    Ok((m, refs))
}

/// Finite-difference check of a freshly initialized model for this config.
pub fn grad_check_fresh(
    cfg: &RunConfig,
    samples: usize,
    probes: Option<usize>,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let model = IdmModel::new(cfg.layout(), cfg.arch(), cfg.idm.train.seed)?;
    grad_check(&model, samples, probes, h, tol, cfg.idm.train.seed)
}

pub struct TrainRun {
    pub manifest: Manifest,
    pub model: IdmModel,
    pub log: Vec<EpochLog>,
}

/// Train on the demonstrations in `data_dir` and write the checkpoint and
/// epoch log to `out_dir`.
pub fn train(cfg: &RunConfig, data_dir: &Path, out_dir: &Path, exec: Exec) -> Result<TrainRun> {
    cfg.check()?;
    let (data_manifest, data) = load_training_set(data_dir)?;
    let out_run = idm::train(&data, cfg.window(), &cfg.idm.train, cfg.arch(), exec)?;

    let mut out = Outputs::create(out_dir, Manifest::new("train", cfg))?;
    out.manifest.inputs.push(data_manifest.as_input("data"));
    let ck = out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&out_run.model, &ck)?;
    let bytes = fs::read(&ck).map_err(|e| Error::io(&ck, e))?;
    out.manifest.outputs.push(FileEntry {
        path: CHECKPOINT_FILE.into(),
        sha256: sha256_hex(&bytes),
        role: "checkpoint".into(),
        scenario: None,
        seed: Some(cfg.idm.train.seed),
    });
    let log_bytes = csv_bytes(|w| EpochLog::write_csv(&out_run.log, w));
    out.write(EPOCH_LOG_FILE, &log_bytes, "epoch_log", None, None)?;
    if let Some(last) = out_run.log.last() {
        out.manifest
            .summary
            .insert("final_total_loss".into(), last.loss.total.to_string());
        out.manifest.summary.insert(
            "final_sticks_error".into(),
            last.loss.sticks_error_rate.to_string(),
        );
    }
    out.manifest
        .summary
        .insert("window".into(), harness::window_name(&cfg.window()));
    let manifest = out.finish()?;
    Ok(TrainRun {
        manifest,
        model: out_run.model,
        log: out_run.log,
    })
}

fn checkpoint_input(path: &Path) -> Result<(IdmModel, FileEntry)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let model = load_checkpoint(path)?;
    let entry = FileEntry {
        path: path.file_name().map_or_else(
            || CHECKPOINT_FILE.to_string(),
            |n| n.to_string_lossy().into_owned(),
        ),
        sha256: sha256_hex(&bytes),
        role: "checkpoint".into(),
        scenario: None,
        seed: None,
    };
    Ok((model, entry))
}

pub struct EvalRun {
    pub manifest: Manifest,
    pub table: EvalTable,
}

/// Roll out the checkpoint on every evaluation scenario and write the
/// evaluation table, per-rollout selector traces and seed-averaged coverage
/// curves.
pub fn eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    data_dir: &Path,
    out_dir: &Path,
    exec: Exec,
) -> Result<EvalRun> {
    cfg.check()?;
    let (model, ck_entry) = checkpoint_input(checkpoint)?;
    let (data_manifest, refs) = load_references(data_dir, cfg.eval_scenarios())?;
    let rollout = cfg.rollout();
    let results = harness::run_rollouts(&IdmPolicy(&model), &refs, &rollout, exec)?;
    let table = EvalTable::from_results(&refs, &results, &rollout.selector.to_string())?;

    let mut out = Outputs::create(out_dir, Manifest::new("eval", cfg))?;
    out.manifest.inputs.push(ck_entry);
    out.manifest.inputs.push(data_manifest.as_input("data"));
    out.write(
        EVAL_FILE,
        &csv_bytes(|w| table.write_csv(w)),
        "eval",
        None,
        None,
    )?;
    let n = cfg.harness.coverage_samples;
    for (reference, runs) in refs.iter().zip(&results) {
        let name = &reference.meta.scenario;
        let ref_pos = reference.positions();
        let mut mean: Option<CoverageCurve> = None;
        for r in runs {
            out.write(
                &format!("traces/{name}-seed{}.csv", r.seed),
                &csv_bytes(|w| r.trace.write_csv(w)),
                "trace",
                Some(name),
                Some(r.seed),
            )?;
            let c = CoverageCurve::sample(&r.agent.positions(), &ref_pos, n)?;
            match &mut mean {
                None => mean = Some(c),
                Some(m) => {
                    for (a, b) in m.points.iter_mut().zip(&c.points) {
                        a.1 += b.1;
                    }
                }
            }
        }
        if let Some(mut m) = mean {
            let k = runs.len() as f64;
            m.points.iter_mut().for_each(|p| p.1 /= k);
            out.write(
                &format!("coverage/{name}.csv"),
                &csv_bytes(|w| m.write_csv(w)),
                "coverage",
                Some(name),
                None,
            )?;
        }
    }
    out.manifest.summary.insert(
        "mean_median_auc".into(),
        table.mean_median_auc().to_string(),
    );
    let manifest = out.finish()?;
    Ok(EvalRun { manifest, table })
}

pub struct SweepRun {
    pub manifest: Manifest,
    pub table: harness::SweepTable,
}

/// Radius and InnerOuter sweeps over the config's radii and pairs.
pub fn sweep(
    cfg: &RunConfig,
    checkpoint: &Path,
    data_dir: &Path,
    out_dir: &Path,
    exec: Exec,
) -> Result<SweepRun> {
    cfg.check()?;
    let (model, ck_entry) = checkpoint_input(checkpoint)?;
    let (data_manifest, refs) = load_references(data_dir, cfg.eval_scenarios())?;
    let table = harness::sweep_radius(
        &IdmPolicy(&model),
        &refs,
        &cfg.futuresel.sweep_radii,
        &cfg.futuresel.sweep_pairs,
        cfg.futuresel.k,
        &cfg.rollout(),
        exec,
    )?;
    let mut out = Outputs::create(out_dir, Manifest::new("sweep", cfg))?;
    out.manifest.inputs.push(ck_entry);
    out.manifest.inputs.push(data_manifest.as_input("data"));
    out.write(
        SWEEP_FILE,
        &csv_bytes(|w| table.write_csv(w)),
        "sweep",
        None,
        None,
    )?;
    let manifest = out.finish()?;
    Ok(SweepRun { manifest, table })
}

/// Directories under `run_dir` (itself included) that hold a manifest,
/// in path order.
fn manifest_dirs(run_dir: &Path) -> Result<Vec<PathBuf>> {
    if !run_dir.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} is not a directory",
            run_dir.display()
        )));
    }
    let mut dirs = Vec::new();
    if run_dir.join(MANIFEST).is_file() {
        dirs.push(run_dir.to_path_buf());
    }
    let mut subs: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(|e| Error::io(run_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(MANIFEST).is_file())
        .collect();
    subs.sort();
    dirs.extend(subs);
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {MANIFEST} in {} or its subdirectories",
            run_dir.display()
        )));
    }
    Ok(dirs)
}

fn read_csv(dir: &Path, m: &Manifest, role: &str) -> Result<Vec<Vec<String>>> {
    let entry = m
        .outputs_with_role(role)
        .next()
        .ok_or_else(|| Error::Corrupt {
            path: dir.join(MANIFEST),
            message: format!("no `{role}` output listed"),
        })?;
    let text = String::from_utf8(read_verified(dir, entry)?).map_err(|e| Error::Corrupt {
        path: dir.join(&entry.path),
        message: e.to_string(),
    })?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

/// Human-readable summary of every stage found in `run_dir`. Values are
/// copied verbatim from the stage outputs. The text is also written to
/// `report.txt` in `run_dir`.
pub fn report(run_dir: &Path) -> Result<String> {
    let mut s = String::new();
    for dir in manifest_dirs(run_dir)? {
        let m = Manifest::load(&dir)?;
        let rel = dir.strip_prefix(run_dir).unwrap_or(&dir);
        let name = if rel.as_os_str().is_empty() {
            ".".to_string()
        } else {
            rel.display().to_string()
        };
        let _ = writeln!(s, "== {} ({name})", m.command);
        let _ = writeln!(s, "config hash: {}", m.config_hash);
        for (k, v) in &m.summary {
            let _ = writeln!(s, "{k}: {v}");
        }
        match m.command.as_str() {
            "eval" => {
                let rows = read_csv(&dir, &m, "eval")?;
                let strategy = rows.first().map_or("", |r| r[2].as_str());
                let _ = writeln!(s, "strategy: {strategy}");
                let _ = writeln!(
                    s,
                    "{:<18} {:>22} {:>22} {:>22}",
                    "trajectory", "median AUC", "median FI", "median DTW"
                );
                for r in rows
                    .iter()
                    .filter(|r| r.get(1).map(String::as_str) == Some("median"))
                {
                    let _ = writeln!(s, "{:<18} {:>22} {:>22} {:>22}", r[0], r[3], r[4], r[5]);
                }
                let curves: Vec<&str> = m
                    .outputs_with_role("coverage")
                    .map(|e| e.path.as_str())
                    .collect();
                let _ = writeln!(s, "coverage curves (r,f): {}", curves.join(" "));
            }
            "sweep" => {
                let rows = read_csv(&dir, &m, "sweep")?;
                let _ = writeln!(
                    s,
                    "{:<12} {:>8} {:>8} {:>8} {:<18} {:>22} {:>22}",
                    "strategy", "r", "r_in", "r_out", "trajectory", "median AUC", "median FI"
                );
                for r in &rows {
                    let _ = writeln!(
                        s,
                        "{:<12} {:>8} {:>8} {:>8} {:<18} {:>22} {:>22}",
                        r[0], r[1], r[2], r[3], r[4], r[5], r[6]
                    );
                }
            }
            "train" => {
                let rows = read_csv(&dir, &m, "epoch_log")?;
                if let Some(last) = rows.last() {
                    let _ = writeln!(
                        s,
                        "epoch {}: total {} button_loss {} sticks_loss {} button_err {} sticks_err {}",
                        last[0], last[1], last[2], last[3], last[4], last[5]
                    );
                }
            }
            _ => {}
        }
        s.push('\n');
    }
    let path = run_dir.join(REPORT_FILE);
    fs::write(&path, &s).map_err(|e| Error::io(&path, e))?;
    Ok(s)
}
