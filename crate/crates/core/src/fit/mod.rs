//! Recovering couplings and dampings from measured or simulated spectra.
//!
//! Free parameters are searched inside their bounds, rescaled to the unit
//! cube. Every start runs a bounded Nelder–Mead simplex; in trace-residual
//! mode the simplex hands over to a finite-difference Levenberg–Marquardt
//! polish, which is far cheaper once inside the right basin. Several starts
//! are run and the lowest residual wins.

mod optim;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::find_peaks;
use crate::model::CoupledSystem;
use crate::spectrum::{map_geometry, s21, Drive, GeometryMap, SpectrumTrace, SweepResult};
use crate::{Error, Result};

/// A model quantity addressed by name.
///
/// Names are `extrinsic_damping`, `intrinsic_damping.<mode>`,
/// `coherent.<mode>.<mode>`, `dissipative.<mode>.<mode>` and `omega_shift.<mode>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParamId {
    ExtrinsicDamping,
    IntrinsicDamping(String),
    /// Real part of `Δ_ij`.
    Coherent(String, String),
    /// Imaginary part of `Δ_ij`.
    Dissipative(String, String),
    /// Offset added to a mode's bare frequency after the geometry law.
    OmegaShift(String),
}

impl ParamId {
    /// Must stay non-negative.
    pub fn is_rate(&self) -> bool {
        matches!(
            self,
            ParamId::ExtrinsicDamping | ParamId::IntrinsicDamping(_) | ParamId::Dissipative(..)
        )
    }

    /// Same quantity: coupling names are unordered in their two labels.
    pub fn same_as(&self, other: &ParamId) -> bool {
        use ParamId::*;
        match (self, other) {
            (Coherent(a, b), Coherent(c, d)) | (Dissipative(a, b), Dissipative(c, d)) => {
                (a == c && b == d) || (a == d && b == c)
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamId::ExtrinsicDamping => f.write_str("extrinsic_damping"),
            ParamId::IntrinsicDamping(m) => write!(f, "intrinsic_damping.{m}"),
            ParamId::Coherent(a, b) => write!(f, "coherent.{a}.{b}"),
            ParamId::Dissipative(a, b) => write!(f, "dissipative.{a}.{b}"),
            ParamId::OmegaShift(m) => write!(f, "omega_shift.{m}"),
        }
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        let bad = || Error::invalid(format!("unknown parameter name {s:?}"));
        let label = |p: &str| {
            crate::model::validate_label(p)?;
            Ok::<_, Error>(p.to_string())
        };
        match parts.as_slice() {
            ["extrinsic_damping"] => Ok(ParamId::ExtrinsicDamping),
            ["intrinsic_damping", m] => Ok(ParamId::IntrinsicDamping(label(m)?)),
            ["omega_shift", m] => Ok(ParamId::OmegaShift(label(m)?)),
            ["coherent", a, b] | ["dissipative", a, b] => {
                if a == b {
                    return Err(Error::invalid(format!("{s}: a mode does not couple to itself")));
                }
                let (a, b) = (label(a)?, label(b)?);
                Ok(if parts[0] == "coherent" {
                    ParamId::Coherent(a, b)
                } else {
                    ParamId::Dissipative(a, b)
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// Per-sample `|S21|_model − |S21|_data`, all traces concatenated.
    TraceResidual,
    /// For every dip found in the data, its distance to the nearest model dip.
    BranchResidual { min_depth: f64 },
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::TraceResidual => "trace-residual",
            ObjectiveKind::BranchResidual { .. } => "branch-residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeParameter {
    pub id: ParamId,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

/// What to fit, within which bounds, and how.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    free: Vec<FreeParameter>,
    fixed: Vec<(ParamId, f64)>,
    objective: ObjectiveKind,
    starts: usize,
    seed: u64,
    max_evaluations: usize,
}

pub const DEFAULT_STARTS: usize = 8;

impl FitSpec {
    pub fn new(free: Vec<FreeParameter>, fixed: Vec<(ParamId, f64)>, objective: ObjectiveKind) -> Result<Self> {
        if free.is_empty() {
            return Err(Error::invalid("a fit needs at least one free parameter"));
        }
        for p in &free {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.initial.is_finite()) {
                return Err(Error::invalid(format!("{}: bounds and initial value must be finite", p.id)));
            }
            if p.lower >= p.upper {
                return Err(Error::invalid(format!(
                    "{}: lower bound {} must be below upper bound {}",
                    p.id, p.lower, p.upper
                )));
            }
            if p.initial < p.lower || p.initial > p.upper {
                return Err(Error::invalid(format!(
                    "{}: initial value {} outside [{}, {}]",
                    p.id, p.initial, p.lower, p.upper
                )));
            }
            if p.id.is_rate() && p.lower < 0.0 {
                return Err(Error::invalid(format!("{}: lower bound must be ≥ 0", p.id)));
            }
        }
        for (id, v) in &fixed {
            if !v.is_finite() || (id.is_rate() && *v < 0.0) {
                return Err(Error::invalid(format!("{id}: fixed value {v} is not allowed")));
            }
        }
        let ids: Vec<&ParamId> = free.iter().map(|p| &p.id).chain(fixed.iter().map(|f| &f.0)).collect();
        for (i, a) in ids.iter().enumerate() {
            if ids[..i].iter().any(|b| a.same_as(b)) {
                return Err(Error::invalid(format!("parameter {a} listed twice")));
            }
        }
        if let ObjectiveKind::BranchResidual { min_depth } = objective {
            if !(min_depth > 0.0 && min_depth < 1.0) {
                return Err(Error::invalid(format!("min_depth must lie in (0, 1), got {min_depth}")));
            }
        }
        Ok(FitSpec {
            free,
            fixed,
            objective,
            starts: DEFAULT_STARTS,
            seed: 0,
            max_evaluations: 20_000,
        })
    }

    /// Number of starts; the first is always the declared initial point.
    pub fn with_starts(mut self, starts: usize) -> Result<Self> {
        if starts == 0 {
            return Err(Error::invalid("need at least one start"));
        }
        self.starts = starts;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Budget of objective evaluations per start.
    pub fn with_max_evaluations(mut self, n: usize) -> Self {
        self.max_evaluations = n.max(10);
        self
    }

    pub fn free(&self) -> &[FreeParameter] {
        &self.free
    }

    pub fn fixed(&self) -> &[(ParamId, f64)] {
        &self.fixed
    }

    pub fn objective(&self) -> ObjectiveKind {
        self.objective
    }

    pub fn starts(&self) -> usize {
        self.starts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn to_physical(&self, u: &[f64]) -> Vec<(ParamId, f64)> {
        self.free
            .iter()
            .zip(u)
            .map(|(p, &t)| (p.id.clone(), p.lower + t * (p.upper - p.lower)))
            .chain(self.fixed.iter().cloned())
            .collect()
    }

    fn to_unit(&self, values: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .zip(values)
            .map(|(p, v)| (v - p.lower) / (p.upper - p.lower))
            .collect()
    }
}

/// The model being fitted: a template system, how bare frequencies follow the
/// swept size, and the feedline coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    template: CoupledSystem,
    geometry: GeometryMap,
    drive: Drive,
}

impl FitProblem {
    pub fn new(template: CoupledSystem, geometry: GeometryMap, drive: Drive) -> Result<Self> {
        if geometry.len() != template.len() || drive.len() != template.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} modes, {} geometry laws, {} drive entries",
                template.len(),
                geometry.len(),
                drive.len()
            )));
        }
        Ok(FitProblem {
            template,
            geometry,
            drive,
        })
    }

    pub fn template(&self) -> &CoupledSystem {
        &self.template
    }

    pub fn geometry(&self) -> &GeometryMap {
        &self.geometry
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    /// The system at size `l` with `params` applied on top of the template.
    pub fn system_at(&self, params: &[(ParamId, f64)], l: f64) -> Result<CoupledSystem> {
        let mut omegas = map_geometry(&self.geometry, l)?;
        for (id, v) in params {
            if let ParamId::OmegaShift(m) = id {
                omegas[self.template.index_of(m)?] += v;
            }
        }
        let mut sys = self.template.clone().with_frequencies(&omegas)?;
        for &(ref id, v) in params {
            sys = match id {
                ParamId::ExtrinsicDamping => sys.with_extrinsic_damping(v)?,
                ParamId::IntrinsicDamping(m) => {
                    let i = sys.index_of(m)?;
                    sys.with_intrinsic_damping(i, v)?
                }
                ParamId::Coherent(a, b) => {
                    let (i, j) = (sys.index_of(a)?, sys.index_of(b)?);
                    let im = sys.coupling(i, j).im;
                    sys.with_coupling(i, j, Complex64::new(v, im))?
                }
                ParamId::Dissipative(a, b) => {
                    let (i, j) = (sys.index_of(a)?, sys.index_of(b)?);
                    let re = sys.coupling(i, j).re;
                    sys.with_coupling(i, j, Complex64::new(re, v))?
                }
                ParamId::OmegaShift(_) => sys,
            };
        }
        Ok(sys)
    }

    /// Model transmission at every `L` of `data`, on the data grid.
    pub fn model_sweep(&self, params: &[(ParamId, f64)], data: &SweepResult) -> Result<SweepResult> {
        let traces = data
            .l_values()
            .iter()
            .map(|&l| {
                let sys = self.system_at(params, l)?;
                Ok(s21(&sys, data.grid(), &self.drive)?.with_sweep_value(l))
            })
            .collect::<Result<Vec<_>>>()?;
        SweepResult::from_traces(traces)
    }

    fn check_params(&self, params: &[(ParamId, f64)]) -> Result<()> {
        for (id, _) in params {
            match id {
                ParamId::ExtrinsicDamping => {}
                ParamId::IntrinsicDamping(m) | ParamId::OmegaShift(m) => {
                    self.template.index_of(m)?;
                }
                ParamId::Coherent(a, b) | ParamId::Dissipative(a, b) => {
                    self.template.index_of(a)?;
                    self.template.index_of(b)?;
                }
            }
        }
        Ok(())
    }
}

/// Residual vector of the model with `params` against `data`.
pub fn objective(
    problem: &FitProblem,
    params: &[(ParamId, f64)],
    data: &SweepResult,
    kind: ObjectiveKind,
) -> Result<Vec<f64>> {
    problem.check_params(params)?;
    let prepared = Prepared::new(data, kind)?;
    prepared.residuals(problem, params)
}

/// Data reduced to what the objective compares against.
struct Prepared<'a> {
    data: &'a SweepResult,
    kind: ObjectiveKind,
    mags: Vec<Vec<f64>>,
    peaks: Vec<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    fn new(data: &'a SweepResult, kind: ObjectiveKind) -> Result<Self> {
        let mags: Vec<Vec<f64>> = data.traces().iter().map(SpectrumTrace::magnitudes).collect();
        let peaks = match kind {
            ObjectiveKind::TraceResidual => Vec::new(),
            ObjectiveKind::BranchResidual { min_depth } => data
                .traces()
                .iter()
                .map(|t| Ok(find_peaks(t, min_depth)?.iter().map(|p| p.frequency).collect()))
                .collect::<Result<_>>()?,
        };
        Ok(Prepared {
            data,
            kind,
            mags,
            peaks,
        })
    }

    fn len(&self) -> usize {
        match self.kind {
            ObjectiveKind::TraceResidual => self.mags.iter().map(Vec::len).sum(),
            ObjectiveKind::BranchResidual { .. } => self.peaks.iter().map(Vec::len).sum(),
        }
    }

    fn residuals(&self, problem: &FitProblem, params: &[(ParamId, f64)]) -> Result<Vec<f64>> {
        let grid = self.data.grid();
        let mut out = Vec::with_capacity(self.len());
        for (k, &l) in self.data.l_values().iter().enumerate() {
            let sys = problem.system_at(params, l)?;
            let model = s21(&sys, grid, &problem.drive)?;
            match self.kind {
                ObjectiveKind::TraceResidual => {
                    if model.len() != self.mags[k].len() {
                        return Err(Error::DimensionMismatch(format!(
                            "model has {} samples, data {} at L = {l}",
                            model.len(),
                            self.mags[k].len()
                        )));
                    }
                    out.extend(model.s21().iter().zip(&self.mags[k]).map(|(m, d)| m.norm() - d));
                }
                ObjectiveKind::BranchResidual { min_depth } => {
                    let model_peaks = find_peaks(&model, min_depth)?;
                    let span = grid.stop() - grid.start();
                    out.extend(self.peaks[k].iter().map(|&f| {
                        model_peaks
                            .iter()
                            .map(|p| f - p.frequency)
                            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
                            .unwrap_or(span)
                    }));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParameter {
    pub id: ParamId,
    pub value: f64,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    /// Diagonal of `JᵀJ` at the optimum: how strongly the residual reacts to this parameter.
    pub sensitivity: f64,
    /// `√(s² (JᵀJ)⁻¹)_ii` with `s²` the residual variance; `None` when `JᵀJ` is singular
    /// or there are no spare degrees of freedom.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub free: Vec<FittedParameter>,
    /// Copied through unchanged.
    pub fixed: Vec<(ParamId, f64)>,
    pub objective: ObjectiveKind,
    /// Root-mean-square residual at the optimum.
    pub rms: f64,
    pub residual_count: usize,
    /// Iterations of the winning start.
    pub iterations: usize,
    /// Objective evaluations over all starts.
    pub evaluations: usize,
    pub converged: bool,
    pub best_start: usize,
    /// Final RMS residual of every start, in start order.
    pub start_rms: Vec<f64>,
    pub seed: u64,
}

impl FitResult {
    /// Free values followed by the fixed ones.
    pub fn parameters(&self) -> Vec<(ParamId, f64)> {
        self.free
            .iter()
            .map(|p| (p.id.clone(), p.value))
            .chain(self.fixed.iter().cloned())
            .collect()
    }

    pub fn value(&self, id: &ParamId) -> Option<f64> {
        self.parameters().into_iter().find(|(p, _)| p.same_as(id)).map(|(_, v)| v)
    }
}

/// RMS residuals below this count as an exact fit.
const RMS_FLOOR: f64 = 1e-13;
/// Relative RMS improvement per cycle below which a start has converged.
const REL_TOL: f64 = 1e-10;

struct StartOutcome {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// Fits `spec`'s free parameters to `data`.
///
/// Non-convergence is not an error: the best point found is returned with
/// `converged == false`.
pub fn fit(problem: &FitProblem, spec: &FitSpec, data: &SweepResult) -> Result<FitResult> {
    problem.check_params(&spec.to_physical(&spec.to_unit(&initials(spec))))?;
    let mags: Vec<f64> = data.traces().iter().flat_map(|t| t.magnitudes()).collect();
    let (lo, hi) = mags
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| (a.min(m), b.max(m)));
    if hi - lo <= 1e-12 {
        return Err(Error::DegenerateData("every |S21| sample is the same".into()));
    }
    let prepared = Prepared::new(data, spec.objective)?;
    let n = spec.free.len();
    if prepared.len() < 3 * n {
        return Err(Error::invalid(format!(
            "{} residuals for {} free parameters; need at least {}",
            prepared.len(),
            n,
            3 * n
        )));
    }

    let residuals = |u: &[f64]| -> Option<Vec<f64>> {
        let r = prepared.residuals(problem, &spec.to_physical(u)).ok()?;
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let cost = |u: &[f64]| residuals(u).map_or(f64::INFINITY, |r| optim::rms(&r));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut starts = vec![spec.to_unit(&initials(spec))];
    for _ in 1..spec.starts {
        starts.push((0..n).map(|_| rng.random::<f64>()).collect());
    }

    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .map(|x0| run_start(&cost, &residuals, x0, spec))
        .collect();

    let best_start = (0..outcomes.len())
        .min_by(|&a, &b| outcomes[a].f.total_cmp(&outcomes[b].f).then(a.cmp(&b)))
        .expect("at least one start");
    let best = &outcomes[best_start];
    if !best.f.is_finite() {
        return Err(Error::NoConvergence(
            "the model could not be evaluated at any start".into(),
        ));
    }

    let params = spec.to_physical(&best.x);
    let r = prepared.residuals(problem, &params)?;
    let (sensitivity, std_error) = curvature(&prepared, problem, spec, &best.x, &r);

    Ok(FitResult {
        free: spec
            .free
            .iter()
            .enumerate()
            .map(|(k, p)| FittedParameter {
                id: p.id.clone(),
                value: params[k].1,
                initial: p.initial,
                lower: p.lower,
                upper: p.upper,
                sensitivity: sensitivity[k],
                std_error: std_error.as_ref().map(|s| s[k]).filter(|v| v.is_finite()),
            })
            .collect(),
        fixed: spec.fixed.clone(),
        objective: spec.objective,
        rms: optim::rms(&r),
        residual_count: r.len(),
        iterations: best.iterations,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        converged: best.converged,
        best_start,
        start_rms: outcomes.iter().map(|o| o.f).collect(),
        seed: spec.seed,
    })
}

fn initials(spec: &FitSpec) -> Vec<f64> {
    spec.free.iter().map(|p| p.initial).collect()
}

fn run_start<C, R>(cost: &C, residuals: &R, x0: &[f64], spec: &FitSpec) -> StartOutcome
where
    C: Fn(&[f64]) -> f64,
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let budget = spec.max_evaluations;
    // coarse simplex search to land in a basin
    let first = optim::nelder_mead(cost, x0, 0.1, 1e-6, RMS_FLOOR, (150 * (n + 1)).min(budget));
    let mut x = first.x;
    let mut f = first.f;
    let mut evaluations = first.evaluations;
    let mut iterations = first.iterations;
    let mut converged = f <= RMS_FLOOR;

    let mut step = 0.05;
    while !converged && evaluations < budget {
        let previous = f;
        match spec.objective {
            ObjectiveKind::TraceResidual => {
                let (local, lm_converged) =
                    optim::levenberg_marquardt(residuals, &x, REL_TOL, RMS_FLOOR, 200);
                evaluations += local.evaluations;
                iterations += local.iterations;
                if local.f <= f {
                    x = local.x;
                    f = local.f;
                }
                if lm_converged {
                    // one more simplex cycle from the polished point confirms it
                    let check = optim::nelder_mead(cost, &x, 1e-3, 1e-14, RMS_FLOOR, 20 * (n + 1));
                    evaluations += check.evaluations;
                    iterations += check.iterations;
                    if check.f < f {
                        x = check.x;
                        f = check.f;
                    }
                }
            }
            ObjectiveKind::BranchResidual { .. } => {
                let local = optim::nelder_mead(cost, &x, step, 1e-14, RMS_FLOOR, budget - evaluations);
                evaluations += local.evaluations;
                iterations += local.iterations;
                if local.f <= f {
                    x = local.x;
                    f = local.f;
                }
                step = (step * 0.5).max(1e-4);
            }
        }
        if f <= RMS_FLOOR || (previous - f) <= REL_TOL * previous {
            converged = true;
        }
    }
    StartOutcome {
        x,
        f,
        iterations,
        evaluations,
        converged,
    }
}

/// `diag(JᵀJ)` and standard errors at the optimum, in physical units.
fn curvature(
    prepared: &Prepared<'_>,
    problem: &FitProblem,
    spec: &FitSpec,
    u: &[f64],
    r: &[f64],
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = u.len();
    let residuals = |x: &[f64]| prepared.residuals(problem, &spec.to_physical(x)).ok();
    let Some(j_unit) = optim::jacobian(&residuals, u, r, 1e-6) else {
        return (vec![f64::NAN; n], None);
    };
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        spec.free.iter().map(|p| 1.0 / (p.upper - p.lower)),
    ));
    let j = j_unit * scale;
    let jtj = j.transpose() * &j;
    let sensitivity = (0..n).map(|k| jtj[(k, k)]).collect();
    let m = r.len();
    let std_error = (m > n)
        .then(|| jtj.clone().try_inverse())
        .flatten()
        .map(|inv| {
            let s2 = r.iter().map(|v| v * v).sum::<f64>() / (m - n) as f64;
            (0..n).map(|k| (s2 * inv[(k, k)]).sqrt()).collect()
        });
    (sensitivity, std_error)
}
