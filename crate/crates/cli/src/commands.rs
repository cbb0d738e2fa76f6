//! Subcommand implementations. Each returns a short human summary for stdout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tactigrasp_core::dataset::{
    self, collect, filter_balance, manifest_csv, select_objects, selection_csv, stats, Dataset, Pool, SimRunner,
};
use tactigrasp_core::grasping::ObjectModel;
use tactigrasp_core::scene::export::{pgm16, pgm8, ppm};
use tactigrasp_core::tactile::to_intensity_image;
use tactigrasp_learn::ablation::{emit_report, run_ablation, AblationReport};
use tactigrasp_learn::model::Network;
use tactigrasp_learn::params_io;
use tactigrasp_learn::train::train_kfold;

use crate::config::Config;
use crate::corpus::load_corpus;
use crate::error::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn corpus(cfg: &Config) -> Result<Vec<(String, tactigrasp_core::geometry::TriMesh)>, CliError> {
    load_corpus(cfg.corpus_file().as_deref(), cfg.usize("corpus.tessellation") as u32)
}

/// Container plus sidecar manifest (with a provenance line prepended).
fn save_dataset(cfg: &Config, ds: &Dataset, out: &Path) -> Result<(), CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    dataset::save(ds, out)?;
    write(&with_suffix(out, ".csv"), format!("{}\n{}", cfg.provenance(), manifest_csv(ds)))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(dataset::load(path)?)
}

pub fn select(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let corpus = corpus(cfg)?;
    let ids: Vec<String> = corpus.iter().map(|(id, _)| id.clone()).collect();
    let runner = SimRunner { corpus: &corpus, sim: cfg.sim()?, seed: cfg.seed() };
    let sel = cfg.selection();
    let rows = select_objects(&ids, &runner, &sel, cfg.workers())?;
    write(out, format!("{}\n{}", cfg.provenance(), selection_csv(&rows, &sel)))?;
    let count = |p: Pool| rows.iter().filter(|r| r.pool == p).count();
    Ok(format!(
        "{} objects: {} known, {} unknown, {} dropped",
        rows.len(),
        count(Pool::Known),
        count(Pool::Unknown),
        count(Pool::Dropped)
    ))
}

/// `(object_id, chosen_scale)` of the rows of a selection CSV in `pool`.
pub fn read_selection(path: &Path, pool: Pool) -> Result<Vec<(String, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| CliError::Data("selection file is empty".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Data(format!("selection file has no `{name}` column")))
    };
    let (id_c, scale_c, pool_c) = (col("object_id")?, col("chosen_scale")?, col("pool")?);
    let mut out = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(CliError::Data(format!("selection row `{line}` has {} fields, expected {}", f.len(), header.len())));
        }
        if f[pool_c] != pool.as_str() {
            continue;
        }
        let scale = f[scale_c]
            .parse::<f64>()
            .map_err(|_| CliError::Data(format!("selection row `{line}` has no usable scale")))?;
        out.push((f[id_c].to_string(), scale));
    }
    Ok(out)
}

pub fn collect_cmd(cfg: &Config, out: &Path, selection: Option<(&Path, Pool)>) -> Result<String, CliError> {
    let corpus = corpus(cfg)?;
    let sim = cfg.sim()?;
    let density = cfg.f64("dataset.density");
    let objects = match selection {
        None => {
            let scale = cfg.f64("dataset.scale");
            corpus.iter().map(|(id, m)| ObjectModel::new(id.clone(), m, scale, density)).collect::<Result<Vec<_>, _>>()?
        }
        Some((path, pool)) => {
            let chosen = read_selection(path, pool)?;
            if chosen.is_empty() {
                return Err(CliError::Data(format!("selection has no `{}` objects", pool.as_str())));
            }
            let meshes: BTreeMap<&str, _> = corpus.iter().map(|(id, m)| (id.as_str(), m)).collect();
            chosen
                .iter()
                .map(|(id, scale)| {
                    let mesh = meshes.get(id.as_str()).ok_or_else(|| CliError::Data(format!("selected object `{id}` is not in the corpus")))?;
                    Ok(ObjectModel::new(id.clone(), mesh, *scale, density)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?
        }
    };
    let ds = collect(&objects, &sim, &cfg.collect())?;
    save_dataset(cfg, &ds, out)?;
    let mut t = format!("{}\nobject_id,attempts,recorded,no_grasp,no_contact,invalid_tactile\n", cfg.provenance());
    for (id, o) in &ds.telemetry.per_object {
        let _ = writeln!(t, "{id},{},{},{},{},{}", o.attempts, o.recorded, o.no_grasp, o.no_contact, o.invalid_tactile);
    }
    write(&with_suffix(out, ".telemetry.csv"), t)?;
    let st = stats(&ds)?;
    Ok(format!(
        "collected {} samples from {} attempts (retention {:.3}, success fraction {:.3})",
        ds.len(),
        ds.telemetry.attempts_total(),
        ds.telemetry.retention_ratio().unwrap_or(0.0),
        st.success_fraction()
    ))
}

pub fn filter_cmd(cfg: &Config, input: &Path, out: &Path) -> Result<String, CliError> {
    let raw = load_dataset(input)?;
    let filtered = filter_balance(&raw, cfg.usize("dataset.cap"));
    save_dataset(cfg, &filtered, out)?;
    let mut s = format!("kept {} of {} samples", filtered.len(), raw.len());
    if let Ok(st) = stats(&filtered) {
        for o in &st.per_object {
            let _ = write!(s, "\n{}: {} successful + {} unsuccessful", o.object_id, o.successes, o.samples - o.successes);
        }
        let _ = write!(s, "\nsuccess fraction {:.3}", st.success_fraction());
    }
    Ok(s)
}

pub fn train_cmd(cfg: &Config, data: &Path, out_dir: &Path) -> Result<String, CliError> {
    let ds = load_dataset(data)?;
    ensure_dir(out_dir)?;
    let mask = cfg.mask();
    let model = cfg.model(mask);
    let net = Network::new(&model)?;
    let r = train_kfold(&ds, &model, &cfg.train())?;
    let mut folds = format!("{}\nfold,val_accuracy,test_accuracy\n", cfg.provenance());
    for (k, f) in r.folds.iter().enumerate() {
        let _ = writeln!(folds, "{k},{:.6},{:.6}", f.val_accuracy, f.test_accuracy);
        params_io::save(&out_dir.join(format!("fold{k}.tgmp")), &net, &f.params)?;
    }
    write(&out_dir.join("train_folds.csv"), folds)?;
    let final_acc = r.final_test_accuracy.map_or_else(String::new, |a| format!("{a:.6}"));
    write(
        &out_dir.join("train_summary.csv"),
        format!(
            "{}\nmask,mean,std,final_test_accuracy\n{},{:.6},{:.6},{final_acc}\n",
            cfg.provenance(),
            mask,
            r.metrics.mean,
            r.metrics.std
        ),
    )?;
    if let Some(p) = &r.final_params {
        params_io::save(&out_dir.join("final.tgmp"), &net, p)?;
    }
    Ok(format!("{}: test accuracy {:.3} ± {:.3} (population std over {} folds)", mask.label(), r.metrics.mean, r.metrics.std, r.folds.len()))
}

fn summarize(report: &AblationReport, files: &[PathBuf]) -> String {
    let mut s = String::new();
    for row in &report.rows {
        let _ = writeln!(s, "{:<28} n={:<6} {:.3} ± {:.3}", row.mask.label(), row.size, row.mean, row.std);
    }
    let _ = write!(s, "wrote {} files", files.len());
    s
}

pub fn ablate_cmd(cfg: &Config, data: &Path, unknown: Option<&Path>, out_dir: &Path) -> Result<String, CliError> {
    let ds = load_dataset(data)?;
    let unknown = unknown.map(load_dataset).transpose()?;
    ensure_dir(out_dir)?;
    let out = run_ablation(&cfg.ablation(), &ds, unknown.as_ref())?;
    let files = emit_report(&out.report, out_dir)?;
    Ok(summarize(&out.report, &files))
}

pub fn report_cmd(input: &Path, out_dir: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Data(format!("cannot read {}: {e}", input.display())))?;
    let report: AblationReport = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let files = emit_report(&report, out_dir)?;
    Ok(summarize(&report, &files))
}

/// Puts a `#` comment line after the magic number of a binary PNM image.
fn with_comment(image: Vec<u8>, comment: &str) -> Vec<u8> {
    let mut out = image[..3].to_vec();
    out.extend_from_slice(comment.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&image[3..]);
    out
}

pub fn render_sample(cfg: &Config, data: &Path, index: usize, out_dir: &Path) -> Result<String, CliError> {
    let ds = load_dataset(data)?;
    let s = ds
        .samples
        .get(index)
        .ok_or_else(|| CliError::Data(format!("sample index {index} out of range (dataset has {})", ds.len())))?;
    let sensor = cfg.sensor();
    let d = ds.dims;
    let prov = format!("{} sample={index} object={} label={}", cfg.provenance(), s.object_id, s.label());
    let files = [
        ("tactile_left.pgm", pgm8(d.tactile_width, d.tactile_height, &to_intensity_image(&s.tactile_left, &sensor))),
        ("tactile_right.pgm", pgm8(d.tactile_width, d.tactile_height, &to_intensity_image(&s.tactile_right, &sensor))),
        ("camera.ppm", ppm(d.camera_width, d.camera_height, &s.rgb)),
        ("camera_depth.pgm", pgm16(d.camera_width, d.camera_height, &s.depth, cfg.f64("scene.camera_far"))),
    ];
    for (name, bytes) in files {
        write(&out_dir.join(name), with_comment(bytes, &prov))?;
    }
    Ok(format!("sample {index}: {} (label {}), forces {:.2} N / {:.2} N", s.object_id, s.label(), s.left_force, s.right_force))
}
