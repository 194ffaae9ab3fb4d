//! `key = value` configuration files with dotted keys, `#` comments and
//! comma-separated lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::certificates::{DEFAULT_TEST_CUTOFF, REG_TOL};
use crate::error::{Error, Result};
use crate::relative::{R2Options, ReferenceKind, WeakStrongConfig, DEFAULT_COARSE_N, DEFAULT_REFERENCE_N, RTOL_R2};
use crate::rheology::{ConjugateMode, RheologyKind, RheologyModel, RheologyParams, DEFAULT_HYPOTHESIS_SEED};
use crate::spectral::{InitialData, TimeStepRule, DEFAULT_DEALIAS_FRACTION, DEFAULT_MAX_MODE, DEFAULT_SPECTRAL_DECAY};

/// Version of the output directory layout.
pub const FORMAT_VERSION: u32 = 1;

/// Parsed `key = value` pairs with their line numbers.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            if entries.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Typed reads from a `ConfigFile`, remembering which keys were consumed.
struct Reader<'a> {
    file: &'a ConfigFile,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.used.insert(key.to_string());
        self.file.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn parse_err(line: usize, key: &str, value: &str, what: &str) -> Error {
        Error::Parse {
            line,
            message: format!("`{key}`: cannot read `{value}` as {what}"),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse()
                .map_err(|_| Self::parse_err(line, key, v, std::any::type_name::<T>())),
        }
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| Self::parse_err(line, key, v, std::any::type_name::<T>())),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Self::parse_err(line, key, v, "a list")))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).map_or(default, |(v, _)| v).to_string()
    }

    fn switch(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(("on" | "true" | "yes", _)) => Ok(true),
            Some(("off" | "false" | "no", _)) => Ok(false),
            Some((v, line)) => Err(Self::parse_err(line, key, v, "on/off")),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.file.entries.get(key).map_or(0, |(_, l)| *l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub dealias_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_final: f64,
    /// `None` means automatic steps.
    pub dt: Option<f64>,
    pub record_stride: usize,
    /// Snapshot every this many steps; 0 keeps only the initial and final state.
    pub snapshot_stride: usize,
    /// `None` takes the model's own Newtonian part.
    pub newtonian_floor: Option<f64>,
}

impl TimeConfig {
    pub fn rule(&self) -> TimeStepRule {
        match self.dt {
            Some(dt) => TimeStepRule::Fixed(dt),
            None => TimeStepRule::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceConfig {
    None,
    /// Body force of the manufactured vortex solution.
    Manufactured { amplitude: f64, decay: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBlock {
    pub coarse_n: Vec<usize>,
    pub reference_n: usize,
    /// `fine_run` or `manufactured`.
    pub reference: String,
    pub reference_seed: Option<u64>,
    pub rtol_r2: f64,
    pub stress_term: bool,
    /// Seconds.
    pub wallclock_cap: f64,
    pub samples: usize,
    pub hypothesis_seed: u64,
    pub table_min: f64,
    pub table_max: f64,
    pub table_points: usize,
    pub mu_list: Vec<f64>,
    /// Partition of the per-record tail defect estimate (default `N / 2`).
    pub defect_coarse_n: Option<usize>,
    pub weak_cutoff: i64,
    pub weak_residuals: bool,
    pub reg_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rheology: RheologyParams,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialData,
    pub force: ForceConfig,
    pub experiment: ExperimentBlock,
    pub output: OutputConfig,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_file(&ConfigFile::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let mut r = Reader {
            file,
            used: BTreeSet::new(),
        };
        let d = RheologyParams::default();
        let kind_name = r.string("rheology.kind", d.kind.name());
        let kind = RheologyKind::parse(&kind_name).ok_or_else(|| Error::Parse {
            line: r.line_of("rheology.kind"),
            message: format!("unknown rheology kind `{kind_name}`"),
        })?;
        let inner_name = r.string("rheology.inner", d.inner.name());
        let inner = RheologyKind::parse(&inner_name).ok_or_else(|| Error::Parse {
            line: r.line_of("rheology.inner"),
            message: format!("unknown rheology kind `{inner_name}`"),
        })?;
        let conjugate_mode = match r.string("rheology.conjugate_mode", "auto").as_str() {
            "auto" => None,
            "closed_form" => Some(ConjugateMode::ClosedForm),
            "radial_numeric" => Some(ConjugateMode::RadialNumeric),
            other => {
                return Err(Error::Parse {
                    line: r.line_of("rheology.conjugate_mode"),
                    message: format!("unknown conjugate mode `{other}`"),
                })
            }
        };
        let dim: usize = r.get("grid.d", 2)?;
        let rheology = RheologyParams {
            kind,
            mu: r.get("rheology.mu", d.mu)?,
            mu1: r.get("rheology.mu1", d.mu1)?,
            mu2: r.get("rheology.mu2", d.mu2)?,
            p: r.get("rheology.p", d.p)?,
            tau0: r.get("rheology.tau0", d.tau0)?,
            eps_reg: r.get("rheology.eps_reg", d.eps_reg)?,
            l: r.list("rheology.L")?,
            inner,
            smoothing: r.get("rheology.smoothing", d.smoothing)?,
            conjugate_mode,
            dim,
        };
        let grid = GridConfig {
            dim,
            n: r.get("grid.N", 32)?,
            dealias_fraction: r.get("grid.dealias_fraction", DEFAULT_DEALIAS_FRACTION)?,
        };
        let dt = match r.string("time.dt", "auto").as_str() {
            "auto" => None,
            v => Some(v.parse::<f64>().map_err(|_| Reader::parse_err(r.line_of("time.dt"), "time.dt", v, "a number or `auto`"))?),
        };
        let newtonian_floor = match r.string("time.newtonian_floor", "auto").as_str() {
            "auto" => None,
            v => Some(v.parse::<f64>().map_err(|_| {
                Reader::parse_err(r.line_of("time.newtonian_floor"), "time.newtonian_floor", v, "a number or `auto`")
            })?),
        };
        let time = TimeConfig {
            t_final: r.get("time.T_final", 1.0)?,
            dt,
            record_stride: r.get("time.record_stride", 1)?,
            snapshot_stride: r.get("time.snapshot_stride", 0)?,
            newtonian_floor,
        };
        let initial = match r.string("initial.kind", "taylor_green").as_str() {
            "taylor_green" => InitialData::TaylorGreen {
                amplitude: r.get("initial.amplitude", 1.0)?,
            },
            "seeded_random_smooth" => InitialData::SeededRandomSmooth {
                seed: r.get("initial.seed", 0)?,
                spectral_decay: r.get("initial.spectral_decay", DEFAULT_SPECTRAL_DECAY)?,
                max_mode: r.get("initial.max_mode", DEFAULT_MAX_MODE)?,
                energy: r.get("initial.energy", 0.1)?,
            },
            "snapshot" => {
                let Some((p, _)) = r.raw("initial.snapshot_path") else {
                    return Err(Error::Configuration("initial.kind = snapshot needs initial.snapshot_path".into()));
                };
                InitialData::Snapshot { path: PathBuf::from(p) }
            }
            other => {
                return Err(Error::Parse {
                    line: r.line_of("initial.kind"),
                    message: format!("unknown initial data `{other}`"),
                })
            }
        };
        let force = match r.string("force.kind", "none").as_str() {
            "none" => ForceConfig::None,
            "manufactured" => ForceConfig::Manufactured {
                amplitude: r.get("force.amplitude", 1.0)?,
                decay: r.opt("force.decay")?,
            },
            other => {
                return Err(Error::Parse {
                    line: r.line_of("force.kind"),
                    message: format!("unknown force `{other}`"),
                })
            }
        };
        let experiment = ExperimentBlock {
            coarse_n: r.list("experiment.coarse_N")?.unwrap_or_else(|| DEFAULT_COARSE_N.to_vec()),
            reference_n: r.get("experiment.reference_N", DEFAULT_REFERENCE_N)?,
            reference: r.string("experiment.reference", "fine_run"),
            reference_seed: r.opt("experiment.reference_seed")?,
            rtol_r2: r.get("experiment.rtol_r2", RTOL_R2)?,
            stress_term: r.switch("gronwall.stress_term", false)?,
            wallclock_cap: r.get("experiment.wallclock_cap", 300.0)?,
            samples: r.get("experiment.samples", 1000)?,
            hypothesis_seed: r.get("experiment.hypothesis_seed", DEFAULT_HYPOTHESIS_SEED)?,
            table_min: r.get("experiment.table_min", 1e-3)?,
            table_max: r.get("experiment.table_max", 1e3)?,
            table_points: r.get("experiment.table_points", 25)?,
            mu_list: r.list("experiment.mu_list")?.unwrap_or_else(|| vec![0.01, 0.1, 1.0]),
            defect_coarse_n: r.opt("experiment.defect_coarse_N")?,
            weak_cutoff: r.get("experiment.weak_cutoff", DEFAULT_TEST_CUTOFF)?,
            weak_residuals: r.switch("experiment.weak_residuals", false)?,
            reg_tol: r.get("experiment.reg_tol", REG_TOL)?,
        };
        let output = OutputConfig {
            directory: PathBuf::from(r.string("output.directory", "out")),
            formats: r
                .list::<String>("output.formats")?
                .unwrap_or_else(|| vec!["csv".into(), "json".into(), "bin".into()]),
        };
        let unknown: Vec<&str> = file
            .keys()
            .filter(|k| !r.used.contains(*k) && !k.starts_with("meta."))
            .collect();
        if let Some(k) = unknown.first() {
            return Err(Error::Parse {
                line: r.line_of(k),
                message: format!("unknown key `{k}`"),
            });
        }
        let cfg = Self {
            rheology,
            grid,
            time,
            initial,
            force,
            experiment,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Configuration(m.to_string()));
        if !(self.grid.dim == 2 || self.grid.dim == 3) {
            return bad("grid.d must be 2 or 3");
        }
        if !(self.time.t_final >= 0.0 && self.time.t_final.is_finite()) {
            return bad("time.T_final must be finite and >= 0");
        }
        if self.time.dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) {
            return bad("time.dt must be positive");
        }
        if self.time.record_stride == 0 {
            return bad("time.record_stride must be >= 1");
        }
        if !matches!(self.experiment.reference.as_str(), "fine_run" | "manufactured") {
            return bad("experiment.reference must be fine_run or manufactured");
        }
        if !(self.experiment.table_min > 0.0 && self.experiment.table_max >= self.experiment.table_min) {
            return bad("experiment.table_min/table_max must satisfy 0 < min <= max");
        }
        if self.experiment.table_points == 0 {
            return bad("experiment.table_points must be >= 1");
        }
        Ok(())
    }

    /// Replaces the initial seed (command-line override).
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitialData::SeededRandomSmooth { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
        self
    }

    /// The weak-strong experiment this config describes; an unset
    /// `time.newtonian_floor` resolves to the model's own floor.
    pub fn weak_strong(&self) -> Result<WeakStrongConfig> {
        let reference = match self.experiment.reference.as_str() {
            "manufactured" => {
                let (amplitude, decay) = match (&self.force, &self.initial) {
                    (ForceConfig::Manufactured { amplitude, decay }, _) => (*amplitude, *decay),
                    (_, InitialData::TaylorGreen { amplitude }) => (*amplitude, None),
                    _ => (1.0, None),
                };
                ReferenceKind::Manufactured { amplitude, decay }
            }
            _ => ReferenceKind::FineRun,
        };
        let mut rheology = self.rheology.clone();
        rheology.dim = self.grid.dim;
        let newtonian_floor = match self.time.newtonian_floor {
            Some(mu0) => mu0,
            None => RheologyModel::new(rheology.clone())?.newtonian_floor(),
        };
        Ok(WeakStrongConfig {
            rheology,
            dim: self.grid.dim,
            dealias_fraction: self.grid.dealias_fraction,
            coarse_n: self.experiment.coarse_n.clone(),
            reference_n: self.experiment.reference_n,
            reference,
            initial: self.initial.clone(),
            reference_seed: self.experiment.reference_seed,
            t_final: self.time.t_final,
            dt: self.time.rule(),
            record_stride: self.time.record_stride,
            newtonian_floor,
            r2: R2Options {
                rtol_r2: self.experiment.rtol_r2,
                stress_term: self.experiment.stress_term,
            },
            wallclock_cap: (self.experiment.wallclock_cap > 0.0)
                .then(|| Duration::from_secs_f64(self.experiment.wallclock_cap)),
        })
    }

    /// Every key with its resolved value, in the input format. `extra`
    /// lines (e.g. `meta.*`) are appended verbatim.
    pub fn to_text(&self, extra: &[(String, String)]) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let p = &self.rheology;
        put("rheology.kind", p.kind.name().into());
        put("rheology.mu", fmt_f64(p.mu));
        put("rheology.mu1", fmt_f64(p.mu1));
        put("rheology.mu2", fmt_f64(p.mu2));
        put("rheology.p", fmt_f64(p.p));
        put("rheology.tau0", fmt_f64(p.tau0));
        put("rheology.eps_reg", fmt_f64(p.eps_reg));
        if let Some(l) = &p.l {
            put("rheology.L", l.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "));
        }
        put("rheology.inner", p.inner.name().into());
        put("rheology.smoothing", fmt_f64(p.smoothing));
        put(
            "rheology.conjugate_mode",
            match p.conjugate_mode {
                None => "auto",
                Some(ConjugateMode::ClosedForm) => "closed_form",
                Some(ConjugateMode::RadialNumeric) => "radial_numeric",
            }
            .into(),
        );
        put("grid.d", self.grid.dim.to_string());
        put("grid.N", self.grid.n.to_string());
        put("grid.dealias_fraction", fmt_f64(self.grid.dealias_fraction));
        let t = &self.time;
        put("time.T_final", fmt_f64(t.t_final));
        put("time.dt", t.dt.map_or("auto".into(), fmt_f64));
        put("time.record_stride", t.record_stride.to_string());
        put("time.snapshot_stride", t.snapshot_stride.to_string());
        put("time.newtonian_floor", t.newtonian_floor.map_or("auto".into(), fmt_f64));
        match &self.initial {
            InitialData::TaylorGreen { amplitude } => {
                put("initial.kind", "taylor_green".into());
                put("initial.amplitude", fmt_f64(*amplitude));
            }
            InitialData::SeededRandomSmooth {
                seed,
                spectral_decay,
                max_mode,
                energy,
            } => {
                put("initial.kind", "seeded_random_smooth".into());
                put("initial.seed", seed.to_string());
                put("initial.spectral_decay", fmt_f64(*spectral_decay));
                put("initial.max_mode", max_mode.to_string());
                put("initial.energy", fmt_f64(*energy));
            }
            InitialData::Snapshot { path } => {
                put("initial.kind", "snapshot".into());
                put("initial.snapshot_path", path.display().to_string());
            }
        }
        match &self.force {
            ForceConfig::None => put("force.kind", "none".into()),
            ForceConfig::Manufactured { amplitude, decay } => {
                put("force.kind", "manufactured".into());
                put("force.amplitude", fmt_f64(*amplitude));
                if let Some(d) = decay {
                    put("force.decay", fmt_f64(*d));
                }
            }
        }
        let e = &self.experiment;
        put("experiment.coarse_N", join(&e.coarse_n));
        put("experiment.reference_N", e.reference_n.to_string());
        put("experiment.reference", e.reference.clone());
        if let Some(s) = e.reference_seed {
            put("experiment.reference_seed", s.to_string());
        }
        put("experiment.rtol_r2", fmt_f64(e.rtol_r2));
        put("gronwall.stress_term", if e.stress_term { "on" } else { "off" }.into());
        put("experiment.wallclock_cap", fmt_f64(e.wallclock_cap));
        put("experiment.samples", e.samples.to_string());
        put("experiment.hypothesis_seed", e.hypothesis_seed.to_string());
        put("experiment.table_min", fmt_f64(e.table_min));
        put("experiment.table_max", fmt_f64(e.table_max));
        put("experiment.table_points", e.table_points.to_string());
        put("experiment.mu_list", e.mu_list.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "));
        if let Some(n) = e.defect_coarse_n {
            put("experiment.defect_coarse_N", n.to_string());
        }
        put("experiment.weak_cutoff", e.weak_cutoff.to_string());
        put("experiment.weak_residuals", if e.weak_residuals { "on" } else { "off" }.into());
        put("experiment.reg_tol", fmt_f64(e.reg_tol));
        put("output.directory", self.output.directory.display().to_string());
        put("output.formats", self.output.formats.join(", "));
        for (k, v) in extra {
            put(k, v.clone());
        }
        s
    }
}
