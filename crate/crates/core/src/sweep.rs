//! Two-dimensional parameter sweeps producing amplification-rate phase maps.
//!
//! Cells are independent runs. They are split into contiguous blocks, one per
//! worker, and written into a preallocated grid, so the result does not depend
//! on the number of workers.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::diagnostics::{classify_phase, Phase};
use crate::dynamics::{integrate, DynamicsError};
use crate::scenario::{AxisSpec, ConfigError, ScenarioConfig, SweepSection};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    /// Scenario every cell starts from (no sweep section, no runs).
    pub base: ScenarioConfig,
}

impl SweepSpec {
    /// Builds the spec from a scenario carrying a `[sweep]` section.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let Some(SweepSection { axis1, axis2 }) = cfg.sweep.clone() else {
            return Err(ConfigError::Invalid("scenario has no [sweep] section".into()));
        };
        let mut base = cfg.normalized();
        base.sweep = None;
        base.runs.clear();
        let spec = Self { axis1, axis2, base };
        spec.validate()?;
        Ok(spec)
    }

    /// The scenario including its sweep section, as written to the sidecar.
    pub fn to_config(&self) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        cfg.sweep = Some(SweepSection {
            axis1: self.axis1.clone(),
            axis2: self.axis2.clone(),
        });
        cfg
    }

    pub fn config_hash(&self) -> String {
        self.to_config().hash()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.to_config().validate()?;
        // both axes must be settable on this variant
        self.cell_config(0, 0)?;
        self.base.resolve()?;
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.axis1.count, self.axis2.count)
    }

    pub fn cell_config(&self, i: usize, j: usize) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = self.base.clone();
        cfg.set_field(&self.axis1.name, self.axis1.value(i))?;
        cfg.set_field(&self.axis2.name, self.axis2.value(j))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub enum CellPhase {
    Label(Phase),
    /// The cell could not be evaluated; carries a short reason code.
    Failed(String),
}

impl fmt::Display for CellPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellPhase::Label(p) => write!(f, "{p}"),
            CellPhase::Failed(code) => write!(f, "failed:{code}"),
        }
    }
}

impl PartialEq for CellPhase {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub lambda_amp: f64,
    pub phase: CellPhase,
    pub diverged: bool,
    /// Integration steps, zero for failed cells. Not persisted.
    pub steps: u64,
}

impl Cell {
    fn failed(code: &str, diverged: bool) -> Self {
        Self {
            lambda_amp: f64::NAN,
            phase: CellPhase::Failed(code.into()),
            diverged,
            steps: 0,
        }
    }

    pub fn label(&self) -> Option<Phase> {
        match self.phase {
            CellPhase::Label(p) => Some(p),
            CellPhase::Failed(_) => None,
        }
    }
}

/// Bitwise comparison of the persisted fields, so failed (NaN) cells compare
/// equal to themselves.
impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.lambda_amp.to_bits() == other.lambda_amp.to_bits()
            && self.phase == other.phase
            && self.diverged == other.diverged
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunStats {
    pub wall_time: Duration,
    pub total_steps: u64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Row-major: index `i * axis2.count + j`.
    pub cells: Vec<Cell>,
    pub stats: RunStats,
}

impl PartialEq for SweepResult {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.cells == other.cells
    }
}

impl SweepResult {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.spec.axis2.count + j]
    }
}

fn run_cell(spec: &SweepSpec, i: usize, j: usize) -> Cell {
    let resolved = match spec.cell_config(i, j).and_then(|c| c.resolve()) {
        Ok(r) => r,
        Err(_) => return Cell::failed("config", false),
    };
    let traj = match integrate(
        &resolved.params,
        &resolved.variant,
        resolved.phi0,
        resolved.mem0,
        &resolved.settings,
    ) {
        Ok(t) => t,
        Err(DynamicsError::Diverged { .. }) => return Cell::failed("nonfinite", true),
        Err(_) => return Cell::failed("config", false),
    };
    match classify_phase(&traj, resolved.tau, resolved.threshold) {
        Ok(l) => Cell {
            lambda_amp: l.lambda_amp,
            phase: CellPhase::Label(l.label),
            diverged: traj.diverged(),
            steps: traj.steps,
        },
        Err(_) => Cell::failed("data", traj.diverged()),
    }
}

/// Evaluates every cell with `parallelism` worker threads.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let start = Instant::now();
    let (n1, n2) = spec.dims();
    let n = n1 * n2;
    let workers = parallelism.clamp(1, n);
    let block = n.div_ceil(workers);
    let mut slots: Vec<Option<Cell>> = vec![None; n];
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(block).enumerate() {
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let idx = w * block + k;
                    *slot = Some(run_cell(spec, idx / n2, idx % n2));
                }
            });
        }
    });
    let cells: Vec<Cell> = slots
        .into_iter()
        .map(|c| c.expect("every cell is assigned to a worker"))
        .collect();
    let stats = RunStats {
        wall_time: start.elapsed(),
        total_steps: cells.iter().map(|c| c.steps).sum(),
        workers: n.div_ceil(block),
    };
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        stats,
    })
}

/// Path of the configuration snapshot stored next to a sweep CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("toml")
}

fn axis_header(a: &AxisSpec) -> String {
    format!("{},{},{},{}", a.name, a.min, a.max, a.count)
}

/// Writes the sweep CSV and its configuration sidecar.
pub fn write_sweep(result: &SweepResult, path: &Path) -> Result<(), SweepError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |source| SweepError::Io {
            path: p.clone(),
            source,
        }
    };
    let spec = &result.spec;
    let mut out = String::new();
    out.push_str(&format!("# schema={SCHEMA_VERSION}\n"));
    out.push_str(&format!("# config_hash={}\n", spec.config_hash()));
    out.push_str(&format!("# axis1={}\n", axis_header(&spec.axis1)));
    out.push_str(&format!("# axis2={}\n", axis_header(&spec.axis2)));
    out.push_str("i,j,axis1_value,axis2_value,lambda_amp,phase,diverged\n");
    let (n1, n2) = spec.dims();
    for i in 0..n1 {
        for j in 0..n2 {
            let c = result.cell(i, j);
            out.push_str(&format!(
                "{i},{j},{},{},{},{},{}\n",
                spec.axis1.value(i),
                spec.axis2.value(j),
                c.lambda_amp,
                c.phase,
                c.diverged
            ));
        }
    }
    let mut f = std::fs::File::create(path).map_err(io(path))?;
    f.write_all(out.as_bytes()).map_err(io(path))?;
    let side = sidecar_path(path);
    std::fs::write(&side, spec.to_config().to_toml_string()).map_err(io(&side))?;
    Ok(())
}

/// Reads a sweep written by [`write_sweep`], checking schema, hash and that
/// every cell is present exactly once.
pub fn read_sweep(path: &Path) -> Result<SweepResult, SweepError> {
    let name = path.display().to_string();
    let schema = |msg: String| SweepError::Schema {
        path: name.clone(),
        msg,
    };
    let side = sidecar_path(path);
    let cfg = ScenarioConfig::load(&side)?;
    let spec = SweepSpec::from_config(&cfg)?;

    let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
        path: name.clone(),
        source,
    })?;
    let mut lines = text.lines();

    let mut header = |key: &str| -> Result<String, SweepError> {
        let line = lines
            .next()
            .ok_or_else(|| schema(format!("missing `# {key}=` header")))?;
        line.strip_prefix(&format!("# {key}="))
            .map(str::to_string)
            .ok_or_else(|| schema(format!("expected `# {key}=` header, found `{line}`")))
    };
    let version = header("schema")?;
    if version != SCHEMA_VERSION.to_string() {
        return Err(schema(format!(
            "unsupported schema version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    let hash = header("config_hash")?;
    if hash != spec.config_hash() {
        return Err(schema("config hash does not match the sidecar configuration".into()));
    }
    if header("axis1")? != axis_header(&spec.axis1) || header("axis2")? != axis_header(&spec.axis2) {
        return Err(schema("axis headers do not match the sidecar configuration".into()));
    }
    let columns = lines.next().ok_or_else(|| schema("missing column header".into()))?;
    if columns != "i,j,axis1_value,axis2_value,lambda_amp,phase,diverged" {
        return Err(schema(format!("unexpected column header `{columns}`")));
    }

    let (n1, n2) = spec.dims();
    let mut slots: Vec<Option<Cell>> = vec![None; n1 * n2];
    for (row, line) in (1usize..).zip(lines) {
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| schema(format!("data row {row}: {what}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let i: usize = f[0].parse().map_err(|_| bad("bad i"))?;
        let j: usize = f[1].parse().map_err(|_| bad("bad j"))?;
        if i >= n1 || j >= n2 {
            return Err(bad("cell index outside the grid"));
        }
        let lambda_amp: f64 = f[4].parse().map_err(|_| bad("bad lambda_amp"))?;
        let phase = match f[5].strip_prefix("failed:") {
            Some(code) => CellPhase::Failed(code.to_string()),
            None => CellPhase::Label(f[5].parse().map_err(|e: String| bad(&e))?),
        };
        let diverged: bool = f[6].parse().map_err(|_| bad("bad diverged flag"))?;
        let slot = &mut slots[i * n2 + j];
        if slot.is_some() {
            return Err(bad(&format!("duplicate cell ({i},{j})")));
        }
        *slot = Some(Cell {
            lambda_amp,
            phase,
            diverged,
            steps: 0,
        });
    }
    let mut cells = Vec::with_capacity(slots.len());
    for (idx, c) in slots.into_iter().enumerate() {
        cells.push(c.ok_or_else(|| schema(format!("missing cell ({},{})", idx / n2, idx % n2)))?);
    }
    Ok(SweepResult {
        spec,
        cells,
        stats: RunStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_spec() -> SweepSpec {
        let text = r#"
variant = "static"
[circuit]
mu = 1.0
gamma = 0.1
[initial]
kind = "psi1"
[integration]
dt = 0.01
t_end = 40.0
tau = 20.0
[sweep]
axis1 = { name = "gamma", min = 0.1, max = 2.0, count = 2 }
axis2 = { name = "mu", min = 0.99, max = 1.0, count = 2 }
"#;
        SweepSpec::from_config(&ScenarioConfig::from_toml_str(text).unwrap()).unwrap()
    }

    #[test]
    fn static_two_by_two_matches_thresholds() {
        let r = run_sweep(&static_spec(), 2).unwrap();
        for j in 0..2 {
            assert_eq!(r.cell(0, j).label(), Some(Phase::PTSymmetric));
            assert_eq!(r.cell(1, j).label(), Some(Phase::PTBroken));
        }
    }

    #[test]
    fn round_trip_and_missing_cell() {
        let r = run_sweep(&static_spec(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_sweep(&r, &path).unwrap();
        assert_eq!(read_sweep(&path).unwrap(), r);

        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().filter(|l| !l.starts_with("1,0,")).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        let err = read_sweep(&path).unwrap_err().to_string();
        assert!(err.contains("missing cell (1,0)"), "{err}");
    }

    #[test]
    fn hash_mismatch_detected() {
        let r = run_sweep(&static_spec(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_sweep(&r, &path).unwrap();
        let side = sidecar_path(&path);
        let edited = std::fs::read_to_string(&side)
            .unwrap()
            .replace("t_end = 40.0", "t_end = 41.0");
        std::fs::write(&side, edited).unwrap();
        assert!(matches!(read_sweep(&path), Err(SweepError::Schema { .. })));
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut spec = static_spec();
        // tau = 30 periods needs t_end >= 60 periods
        spec.axis1 = AxisSpec {
            name: "tau".into(),
            min: 20.0,
            max: 30.0,
            count: 2,
        };
        let r = run_sweep(&spec, 3).unwrap();
        assert!(r.cell(0, 0).label().is_some());
        assert_eq!(r.cell(1, 1).phase.to_string(), "failed:data");
        assert!(r.cell(1, 1).lambda_amp.is_nan());
        assert_eq!(r, r.clone());
    }

    #[test]
    fn invalid_axis_rejected_up_front() {
        let mut spec = static_spec();
        spec.axis2.name = "x0".into();
        assert!(run_sweep(&spec, 1).is_err());
    }
}
