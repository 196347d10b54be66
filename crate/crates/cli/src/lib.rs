//! Command implementations behind the `nurbs-ett` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nurbs_ett::eval::{
    aggregate, read_frames_file, read_points, read_truth, write_frames_file, write_points,
    write_truth, FrameRecord, MetricsReport, TruthRecord,
};
use nurbs_ett::measurement::Measurement;
use nurbs_ett::sim::{generate_scenario, ScenarioConfig};
use nurbs_ett::tracker::{make_tracker, Method, NurbsTracker, ShapeSnapshot, Tracker, TrackerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const POINTS_FILE: &str = "points.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const RECORDS_FILE: &str = "records.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const TRACKER_FILE: &str = "tracker.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Static,
    Dynamic,
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn layered<T>(base: &T, path: Option<&Path>) -> Result<T>
where
    T: Clone + Serialize + for<'de> Deserialize<'de>,
{
    let Some(path) = path else {
        return Ok(base.clone());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let top: toml::Value =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut merged = toml::Value::try_from(base)?;
    merge(&mut merged, top);
    merged
        .try_into()
        .with_context(|| format!("invalid config {}", path.display()))
}

/// Preset scenario overlaid with an optional TOML file and seed.
pub fn load_scenario(
    preset: Preset,
    path: Option<&Path>,
    seed: Option<u64>,
) -> Result<ScenarioConfig> {
    let base = match preset {
        Preset::Static => ScenarioConfig::static_preset(),
        Preset::Dynamic => ScenarioConfig::dynamic_preset(),
    };
    let mut cfg = layered(&base, path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Preset tracker settings overlaid with an optional TOML file; `method`
/// wins over both.
pub fn load_tracker(
    preset: Preset,
    path: Option<&Path>,
    method: Option<Method>,
) -> Result<TrackerConfig> {
    let m = method.unwrap_or(Method::M2);
    let base = match preset {
        Preset::Static => TrackerConfig::static_preset(m),
        Preset::Dynamic => TrackerConfig::dynamic_preset(m),
    };
    let mut cfg = layered(&base, path)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub preset: Option<Preset>,
    pub scenario: Option<PathBuf>,
    pub tracker_config: Option<PathBuf>,
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub files: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    fn digest_files(out: &Path, names: &[&str]) -> Result<Vec<FileDigest>> {
        names
            .iter()
            .map(|n| {
                Ok(FileDigest {
                    path: (*n).to_string(),
                    sha256: sha256_file(&out.join(n))?,
                })
            })
            .collect()
    }

    pub fn write(&self) -> Result<()> {
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Names of listed files whose current digest differs from the stored one.
    pub fn stale_files(&self, dir: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for f in &self.files {
            if sha256_file(&dir.join(&f.path))? != f.sha256 {
                stale.push(f.path.clone());
            }
        }
        Ok(stale)
    }
}

pub struct SimulateArgs<'a> {
    pub preset: Preset,
    pub scenario: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out: &'a Path,
}

/// Writes the point cloud, reference trajectory and resolved config.
pub fn cmd_simulate(args: &SimulateArgs<'_>) -> Result<RunManifest> {
    let cfg = load_scenario(args.preset, args.scenario, args.seed)?;
    let frames = generate_scenario(&cfg)?;
    fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let clouds: Vec<_> = frames.iter().map(|f| f.measurements.clone()).collect();
    let truth: Vec<_> = frames.iter().map(TruthRecord::from_frame).collect();
    write_points(create(&args.out.join(POINTS_FILE))?, &clouds)?;
    write_truth(create(&args.out.join(TRUTH_FILE))?, &truth)?;
    fs::write(args.out.join(SCENARIO_FILE), toml::to_string(&cfg)?)?;
    let manifest = RunManifest {
        command: "simulate".into(),
        preset: Some(args.preset),
        scenario: args.scenario.map(Path::to_path_buf),
        tracker_config: None,
        method: None,
        seed: Some(cfg.seed),
        out: args.out.to_path_buf(),
        files: RunManifest::digest_files(args.out, &[POINTS_FILE, TRUTH_FILE, SCENARIO_FILE])?,
    };
    manifest.write()?;
    Ok(manifest)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub struct TrackArgs<'a> {
    pub frames: &'a Path,
    pub preset: Preset,
    pub tracker_config: Option<&'a Path>,
    pub method: Option<Method>,
    pub out: &'a Path,
    /// Writes zero instead of the measured step time.
    pub zero_time: bool,
}

/// Loads a simulated sequence as measurement frames and their references.
pub fn load_frames(dir: &Path, std: f64) -> Result<(Vec<Vec<Measurement>>, Vec<TruthRecord>)> {
    let truth_path = dir.join(TRUTH_FILE);
    let truth = read_truth(open(&truth_path)?)
        .with_context(|| format!("reading {}", truth_path.display()))?;
    let points_path = dir.join(POINTS_FILE);
    let clouds = read_points(open(&points_path)?, truth.len())
        .with_context(|| format!("reading {}", points_path.display()))?;
    if clouds.len() != truth.len() {
        bail!(
            "{} has {} frames but {} lists {}",
            points_path.display(),
            clouds.len(),
            truth_path.display(),
            truth.len()
        );
    }
    let frames = clouds
        .into_iter()
        .map(|c| c.into_iter().map(|p| Measurement::isotropic(p, std)).collect())
        .collect();
    Ok((frames, truth))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Runs one tracker over a simulated sequence.
pub fn cmd_track(args: &TrackArgs<'_>) -> Result<RunManifest> {
    let cfg = load_tracker(args.preset, args.tracker_config, args.method)?;
    let (frames, truth) = load_frames(args.frames, cfg.measurement_std)?;
    let mut records = Vec::with_capacity(frames.len());
    let mut snapshot = None;
    let mut files = vec![RECORDS_FILE, TRACKER_FILE];
    if cfg.method == Method::Sp {
        let mut tracker = make_tracker(&cfg)?;
        for (f, t) in frames.iter().zip(&truth) {
            records.push(t.record(&tracker.process(f)?));
        }
    } else {
        let mut tracker = NurbsTracker::new(cfg.clone())?;
        for (f, t) in frames.iter().zip(&truth) {
            records.push(t.record(&tracker.process(f)?));
        }
        snapshot = tracker.snapshot();
    }
    if args.zero_time {
        records.iter_mut().for_each(|r| r.time_ms = 0.0);
    }
    fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_frames_file(&args.out.join(RECORDS_FILE), &records)?;
    fs::write(args.out.join(TRACKER_FILE), toml::to_string(&cfg)?)?;
    if let Some(s) = snapshot {
        fs::write(args.out.join(SNAPSHOT_FILE), serde_json::to_string_pretty(&s)? + "\n")?;
        files.push(SNAPSHOT_FILE);
    }
    let seed = RunManifest::read(args.frames).ok().and_then(|m| m.seed);
    let manifest = RunManifest {
        command: "track".into(),
        preset: Some(args.preset),
        scenario: Some(args.frames.join(SCENARIO_FILE)),
        tracker_config: args.tracker_config.map(Path::to_path_buf),
        method: Some(cfg.method),
        seed,
        out: args.out.to_path_buf(),
        files: RunManifest::digest_files(args.out, &files)?,
    };
    manifest.write()?;
    Ok(manifest)
}

/// A record file given directly or through its run directory.
fn records_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(RECORDS_FILE)
    } else {
        p.to_path_buf()
    }
}

/// One report per input, in input order.
pub fn cmd_eval(inputs: &[PathBuf], with_yaw: bool) -> Result<Vec<(String, MetricsReport)>> {
    if inputs.is_empty() {
        bail!("eval needs at least one record file");
    }
    inputs
        .iter()
        .map(|p| {
            let path = records_path(p);
            let records: Vec<FrameRecord> = read_frames_file(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let report = aggregate(&records, with_yaw)
                .with_context(|| format!("aggregating {}", path.display()))?;
            Ok((p.display().to_string(), report))
        })
        .collect()
}

pub fn write_report<W: Write>(mut out: W, rows: &[(String, MetricsReport)]) -> Result<()> {
    writeln!(out, "{}", MetricsReport::CSV_HEADER)?;
    for (name, r) in rows {
        writeln!(out, "{}", r.csv_row(name))?;
    }
    Ok(())
}

/// Tessellates the shape stored in a snapshot file into an OBJ mesh.
pub fn cmd_mesh(snapshot: &Path, out: &Path, grid_u: usize, grid_v: usize) -> Result<usize> {
    let path = snapshot_path(snapshot);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let snap: ShapeSnapshot = serde_json::from_str(&text)?;
    let mesh = snap.surface()?.tessellate(grid_u, grid_v)?;
    let file = create(out)?;
    mesh.write_obj(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(mesh.vertices.len())
}

fn snapshot_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(SNAPSHOT_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Stable identifier of the innermost known cause.
pub fn error_class(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<nurbs_ett::Error>() {
            return e.class();
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
    }
    if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        return "io";
    }
    "usage"
}

/// Single-line `error[class]: message` form of an error chain.
pub fn error_line(err: &anyhow::Error) -> String {
    let msg = err
        .chain()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    format!("error[{}]: {}", error_class(err), msg)
}
