use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{ClassifyOptions, TrackOptions};
use crate::fit::{FitProblem, FitSpec, FreeParameter, ObjectiveKind, ParamId};
use crate::model::{CoupledSystem, Mode};
use crate::spectrum::{sweep, Drive, FrequencyGrid, GeometryLaw, GeometryMap, SweepResult, DEFAULT_DOMAIN};
use crate::{Error, Result};

/// A project file as written on disk. [`ProjectConfig::resolve`] turns it
/// into validated model objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Name of the preset this file came from, if any. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `γ`, GHz.
    pub extrinsic_damping: f64,
    /// `[min, max]` sizes in mm where the laws hold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    /// Real feedline amplitudes per mode; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<Vec<f64>>,
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub couplings: Vec<CouplingConfig>,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub label: String,
    pub intrinsic_damping: f64,
    pub law: LawConfig,
    /// Physical size of a resonator that is not swept, mm. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawConfig {
    Fixed { omega: f64 },
    Inverse { a: f64, b: f64 },
}

impl From<LawConfig> for GeometryLaw {
    fn from(law: LawConfig) -> Self {
        match law {
            LawConfig::Fixed { omega } => GeometryLaw::Fixed { omega },
            LawConfig::Inverse { a, b } => GeometryLaw::Inverse { a, b },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub between: [String; 2],
    #[serde(default)]
    pub coherent: f64,
    #[serde(default)]
    pub dissipative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Either an explicit `values` list or `start`, `stop` and `points`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl SweepConfig {
    pub fn range(start: f64, stop: f64, points: usize) -> Self {
        SweepConfig {
            start: Some(start),
            stop: Some(stop),
            points: Some(points),
            values: None,
        }
    }

    /// Evenly spaced values are rounded to 1e-9 mm so that e.g. 7.4 reads as 7.4.
    pub fn l_values(&self) -> Result<Vec<f64>> {
        match (self, &self.values) {
            (
                SweepConfig {
                    start: None,
                    stop: None,
                    points: None,
                    ..
                },
                Some(v),
            ) => {
                if v.is_empty() {
                    return Err(Error::config("sweep.values", "empty list"));
                }
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::config("sweep.values", format!("{x} is not finite")));
                }
                Ok(v.clone())
            }
            (
                SweepConfig {
                    start: Some(a),
                    stop: Some(b),
                    points: Some(n),
                    ..
                },
                None,
            ) => {
                let (a, b, n) = (*a, *b, *n);
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::config("sweep", "start and stop must be finite"));
                }
                match n {
                    0 => Err(Error::config("sweep.points", "need at least one point")),
                    1 if a == b => Ok(vec![a]),
                    1 => Err(Error::config("sweep.points", "a single point needs start == stop")),
                    _ if a >= b => Err(Error::config("sweep", format!("start {a} must be below stop {b}"))),
                    _ => Ok((0..n)
                        .map(|k| {
                            let x = a + (b - a) * k as f64 / (n - 1) as f64;
                            (x * 1e9).round() / 1e9
                        })
                        .collect()),
                }
            }
            _ => Err(Error::config(
                "sweep",
                "give either `values` or all of `start`, `stop` and `points`",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jump_widths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_widths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_threshold_widths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_tolerance_widths: Option<f64>,
    /// Default regions for `classify`, `[lmin, lmax]` each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveName {
    TraceResidual,
    BranchResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub objective: ObjectiveName,
    /// Dip threshold for the branch residual; defaults to the analysis one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    /// Only data inside `[lmin, lmax]` is fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<[f64; 2]>,
    pub free: Vec<FreeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<FixedConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeConfig {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub name: String,
    pub value: f64,
}

/// Everything a run needs, built from a [`ProjectConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub config: ProjectConfig,
    /// Template with coupling and dampings set; bare frequencies follow `geometry`.
    pub system: CoupledSystem,
    pub geometry: GeometryMap,
    pub grid: FrequencyGrid,
    pub l_values: Vec<f64>,
    pub drive: Drive,
    pub track: TrackOptions,
    pub classify: ClassifyOptions,
    pub regions: Vec<(f64, f64)>,
    pub fit: Option<FitSpec>,
    pub fit_region: Option<(f64, f64)>,
}

impl Project {
    /// Lets sizes outside the declared domain through.
    pub fn with_domain_override(mut self, allow: bool) -> Self {
        self.geometry = self.geometry.with_domain_override(allow);
        self
    }

    pub fn sweep(&self) -> Result<SweepResult> {
        sweep(&self.system, &self.geometry, &self.l_values, &self.grid, &self.drive)
    }

    pub fn fit_problem(&self) -> Result<FitProblem> {
        FitProblem::new(self.system.clone(), self.geometry.clone(), self.drive.clone())
    }
}

fn at<T>(key: impl Into<String>, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

fn region(key: &str, r: [f64; 2]) -> Result<(f64, f64)> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(Error::config(key, format!("region [{}, {}] must be finite with min < max", r[0], r[1])));
    }
    Ok((r[0], r[1]))
}

impl ProjectConfig {
    pub fn resolve(&self) -> Result<Project> {
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode is required"));
        }
        let labels: Vec<&str> = self.modes.iter().map(|m| m.label.as_str()).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::config(format!("modes[{i}].label"), format!("duplicate label {l:?}")));
            }
        }
        let domain = match self.domain {
            Some(d) => region("domain", d)?,
            None => DEFAULT_DOMAIN,
        };
        let laws: Vec<GeometryLaw> = self.modes.iter().map(|m| m.law.into()).collect();
        let geometry = at("modes", GeometryMap::new(laws.clone(), domain))?;

        let mut modes = Vec::with_capacity(self.modes.len());
        for (i, m) in self.modes.iter().enumerate() {
            if let Some(s) = m.size_mm {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::config(format!("modes[{i}].size_mm"), "must be positive"));
                }
            }
            let omega = laws[i].eval(domain.0);
            modes.push(at(format!("modes[{i}]"), Mode::new(m.label.clone(), omega, m.intrinsic_damping))?);
        }
        let mut system = at("extrinsic_damping", CoupledSystem::new(modes, self.extrinsic_damping))?;

        let mut seen: Vec<(usize, usize)> = Vec::new();
        for (k, c) in self.couplings.iter().enumerate() {
            let key = format!("couplings[{k}]");
            let i = at(format!("{key}.between"), system.index_of(&c.between[0]))?;
            let j = at(format!("{key}.between"), system.index_of(&c.between[1]))?;
            let pair = (i.min(j), i.max(j));
            if seen.contains(&pair) {
                return Err(Error::config(
                    format!("{key}.between"),
                    format!("{} and {} are coupled twice", c.between[0], c.between[1]),
                ));
            }
            seen.push(pair);
            system = at(key, system.with_coupling(i, j, Complex64::new(c.coherent, c.dissipative)))?;
        }

        let grid = at("grid", FrequencyGrid::new(self.grid.start, self.grid.stop, self.grid.points))?;
        let l_values = self.sweep.l_values()?;
        let drive = match &self.drive {
            None => Drive::uniform(self.modes.len()),
            Some(d) => {
                if d.len() != self.modes.len() {
                    return Err(Error::config(
                        "drive",
                        format!("{} entries for {} modes", d.len(), self.modes.len()),
                    ));
                }
                at("drive", Drive::from_real(d))?
            }
        };

        let a = self.analysis.clone().unwrap_or_default();
        let defaults = TrackOptions::default();
        let track = TrackOptions {
            min_depth: a.min_depth.unwrap_or(defaults.min_depth),
            max_jump_widths: a.max_jump_widths.unwrap_or(defaults.max_jump_widths),
            share_widths: a.share_widths.unwrap_or(defaults.share_widths),
        };
        if !(track.min_depth > 0.0 && track.min_depth < 1.0) {
            return Err(Error::config("analysis.min_depth", "must lie in (0, 1)"));
        }
        if !(track.max_jump_widths > 0.0 && track.share_widths >= 0.0) {
            return Err(Error::config("analysis", "width multiples must be positive"));
        }
        let cdef = ClassifyOptions::default();
        let classify = ClassifyOptions {
            gap_threshold_widths: a.gap_threshold_widths.unwrap_or(cdef.gap_threshold_widths),
            merge_tolerance_widths: a.merge_tolerance_widths.unwrap_or(cdef.merge_tolerance_widths),
        };
        if !(classify.gap_threshold_widths > 0.0 && classify.merge_tolerance_widths > 0.0) {
            return Err(Error::config("analysis", "classification tolerances must be positive"));
        }
        let regions = a
            .regions
            .iter()
            .enumerate()
            .map(|(k, r)| region(&format!("analysis.regions[{k}]"), *r))
            .collect::<Result<Vec<_>>>()?;

        let (fit, fit_region) = match &self.fit {
            None => (None, None),
            Some(f) => {
                let (spec, r) = self.resolve_fit(f, &system, track.min_depth)?;
                (Some(spec), r)
            }
        };

        Ok(Project {
            config: self.clone(),
            system,
            geometry,
            grid,
            l_values,
            drive,
            track,
            classify,
            regions,
            fit,
            fit_region,
        })
    }

    fn resolve_fit(
        &self,
        f: &FitConfig,
        system: &CoupledSystem,
        default_depth: f64,
    ) -> Result<(FitSpec, Option<(f64, f64)>)> {
        let param = |key: String, name: &str| -> Result<ParamId> {
            let id: ParamId = at(key.clone(), name.parse())?;
            let labels: Vec<&String> = match &id {
                ParamId::ExtrinsicDamping => vec![],
                ParamId::IntrinsicDamping(m) | ParamId::OmegaShift(m) => vec![m],
                ParamId::Coherent(a, b) | ParamId::Dissipative(a, b) => vec![a, b],
            };
            for l in labels {
                at(key.clone(), system.index_of(l))?;
            }
            Ok(id)
        };
        let free = f
            .free
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Ok(FreeParameter {
                    id: param(format!("fit.free[{k}].name"), &p.name)?,
                    initial: p.initial,
                    lower: p.lower,
                    upper: p.upper,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fixed = f
            .fixed
            .iter()
            .enumerate()
            .map(|(k, p)| Ok((param(format!("fit.fixed[{k}].name"), &p.name)?, p.value)))
            .collect::<Result<Vec<_>>>()?;
        let objective = match f.objective {
            ObjectiveName::TraceResidual => {
                if f.min_depth.is_some() {
                    return Err(Error::config("fit.min_depth", "only used by the branch-residual objective"));
                }
                ObjectiveKind::TraceResidual
            }
            ObjectiveName::BranchResidual => ObjectiveKind::BranchResidual {
                min_depth: f.min_depth.unwrap_or(default_depth),
            },
        };
        let mut spec = at("fit", FitSpec::new(free, fixed, objective))?;
        if let Some(s) = f.starts {
            spec = at("fit.starts", spec.with_starts(s))?;
        }
        if let Some(seed) = f.seed {
            spec = spec.with_seed(seed);
        }
        if let Some(n) = f.max_evaluations {
            spec = spec.with_max_evaluations(n);
        }
        let r = f.region.map(|r| region("fit.region", r)).transpose()?;
        Ok((spec, r))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }
}

/// Parses and validates a project file's text. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<ProjectConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.message().to_string()))?;
    let cfg: ProjectConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut key = e.path().to_string();
        let message = e.inner().message().to_string();
        // name the missing key itself, not just its parent table
        if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.strip_suffix('`')) {
            key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
        }
        Error::config(key, message)
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ProjectConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn save_config(config: &ProjectConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, config.to_toml()?).map_err(|e| Error::io(path, e))
}
