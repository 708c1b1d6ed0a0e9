//! Feedline transmission of the coupled resonators and sweeps over resonator size.
//!
//! The transmission is the linear-response form
//!
//! ```text
//! S21(ω) = 1 − iγ · dᵀ (ω I − H)⁻¹ d
//! ```
//!
//! with `H` the effective matrix and `d` the unit-norm feedline coupling vector.
//! Far from every resonance the resolvent vanishes and `S21 → 1`; on resonance
//! each hybrid mode carves a dip whose depth follows its overlap with `d`.
//! This is a modelling choice: no transmission formula is taken from
//! measurement theory beyond "dips at the hybrid eigenfrequencies".

mod geometry;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::linalg::solve_in_place;
use crate::model::{system_matrix, CoupledSystem};
use crate::{Error, Result};

pub use geometry::{map_geometry, GeometryLaw, GeometryMap, DEFAULT_DOMAIN};

/// Uniformly spaced frequency axis in GHz, endpoints included. A single
/// sample is allowed when `start == stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start: f64,
    stop: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::NonFinite("frequency grid"));
        }
        if points == 1 && start == stop {
            return Ok(FrequencyGrid {
                start,
                stop,
                points,
            });
        }
        if start >= stop {
            return Err(Error::invalid(format!(
                "frequency grid start {start} must be below stop {stop}"
            )));
        }
        if points < 2 {
            return Err(Error::invalid(format!(
                "frequency grid needs at least 2 points, got {points}"
            )));
        }
        Ok(FrequencyGrid {
            start,
            stop,
            points,
        })
    }

    /// Recovers the grid behind a list of ascending samples.
    ///
    /// Spacing must be uniform to within `1e-4` of a step; anything coarser
    /// than that is a different grid, not rounding in an export.
    pub fn from_samples(freqs: &[f64]) -> Result<Self> {
        match freqs {
            [] => return Err(Error::invalid("no frequency samples")),
            [f] => return FrequencyGrid::new(*f, *f, 1),
            _ => {}
        }
        let grid = FrequencyGrid::new(freqs[0], freqs[freqs.len() - 1], freqs.len())?;
        let tol = 1e-4 * grid.step();
        for (k, &f) in freqs.iter().enumerate() {
            if (f - grid.frequency(k)).abs() > tol {
                return Err(Error::invalid(format!(
                    "frequency samples are not uniformly spaced (sample {k} at {f} GHz)"
                )));
            }
        }
        Ok(grid)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Zero for a single-sample grid.
    pub fn step(&self) -> f64 {
        if self.points == 1 {
            return 0.0;
        }
        (self.stop - self.start) / (self.points - 1) as f64
    }

    /// Sample `k`; the last sample is exactly `stop`.
    pub fn frequency(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.stop
        } else {
            self.start + (self.stop - self.start) * k as f64 / (self.points - 1) as f64
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.frequency(k)).collect()
    }

    /// Same axis within `tol` of a step at both ends.
    pub fn matches(&self, other: &FrequencyGrid, tol: f64) -> bool {
        let scale = tol * self.step();
        self.points == other.points
            && (self.start - other.start).abs() <= scale
            && (self.stop - other.stop).abs() <= scale
    }
}

/// Feedline coupling amplitudes, normalised to unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive(Vec<Complex64>);

impl Drive {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("drive vector"));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("drive vector must have a nonzero entry"));
        }
        Ok(Drive(amplitudes.into_iter().map(|z| z / norm).collect()))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Every mode equally coupled to the feedline.
    pub fn uniform(n: usize) -> Self {
        let a = 1.0 / (n as f64).sqrt();
        Drive(vec![Complex64::new(a, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Reorders entries; `order[k]` is the old index placed at position `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        Ok(Drive(order.iter().map(|&i| self.0[i]).collect()))
    }
}

/// Complex transmission samples on a grid, optionally tagged with the size `L` (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    grid: FrequencyGrid,
    s21: Vec<Complex64>,
    sweep_value: Option<f64>,
}

impl SpectrumTrace {
    pub fn new(grid: FrequencyGrid, s21: Vec<Complex64>, sweep_value: Option<f64>) -> Result<Self> {
        if s21.len() != grid.points() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples on a {}-point grid",
                s21.len(),
                grid.points()
            )));
        }
        if s21.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("transmission samples"));
        }
        if let Some(l) = sweep_value {
            if !l.is_finite() {
                return Err(Error::NonFinite("sweep value"));
            }
        }
        Ok(SpectrumTrace {
            grid,
            s21,
            sweep_value,
        })
    }

    /// Magnitude-only data, as read from an export; phases are set to zero.
    pub fn from_magnitudes(grid: FrequencyGrid, mags: &[f64], sweep_value: Option<f64>) -> Result<Self> {
        if mags.iter().any(|m| *m < 0.0) {
            return Err(Error::invalid("negative |S21| magnitude"));
        }
        Self::new(
            grid,
            mags.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            sweep_value,
        )
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn s21(&self) -> &[Complex64] {
        &self.s21
    }

    pub fn sweep_value(&self) -> Option<f64> {
        self.sweep_value
    }

    pub fn with_sweep_value(mut self, l: f64) -> Self {
        self.sweep_value = Some(l);
        self
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.s21.iter().map(|z| z.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.s21.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s21.is_empty()
    }
}

/// Transmission of `sys` on `grid` for feedline coupling `drive`.
///
/// Works for any number of modes, including one. The shared extrinsic
/// damping is also the feedline coupling rate, so it must be positive.
pub fn s21(sys: &CoupledSystem, grid: &FrequencyGrid, drive: &Drive) -> Result<SpectrumTrace> {
    let n = sys.len();
    if drive.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "drive has {} entries for {} modes",
            drive.len(),
            n
        )));
    }
    let gamma = sys.extrinsic_damping();
    if gamma <= 0.0 {
        return Err(Error::invalid(
            "extrinsic damping must be positive to couple the modes to the feedline",
        ));
    }
    let h = system_matrix(sys);
    let d = drive.as_slice();
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(grid.points());
    for k in 0..grid.points() {
        let w = grid.frequency(k);
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = -h[(i, j)];
            }
            a[i * n + i] += w;
        }
        x.copy_from_slice(d);
        if !solve_in_place(&mut a, &mut x, n) {
            return Err(Error::Unphysical(format!(
                "resolvent is singular at {w} GHz (lossless mode on the grid)"
            )));
        }
        let proj: Complex64 = d.iter().zip(&x).map(|(di, xi)| di * xi).sum();
        out.push(Complex64::new(1.0, 0.0) - Complex64::new(0.0, gamma) * proj);
    }
    SpectrumTrace::new(*grid, out, None)
}

/// Bare frequency of one mode across a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrack {
    pub label: String,
    pub omegas: Vec<f64>,
}

/// One trace per size `L`, all on a shared grid, `L` strictly ascending.
///
/// `mode_tracks` is empty when the sweep was read from data rather than simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    l_values: Vec<f64>,
    traces: Vec<SpectrumTrace>,
    mode_tracks: Vec<ModeTrack>,
}

impl SweepResult {
    /// Assembles data traces; they are sorted by `L`, which every trace must carry.
    pub fn from_traces(mut traces: Vec<SpectrumTrace>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::invalid("a sweep needs at least one trace"));
        }
        let mut l_values = Vec::with_capacity(traces.len());
        for t in &traces {
            l_values.push(
                t.sweep_value()
                    .ok_or_else(|| Error::invalid("trace without an L value in a sweep"))?,
            );
        }
        let mut order: Vec<usize> = (0..traces.len()).collect();
        order.sort_by(|&a, &b| l_values[a].total_cmp(&l_values[b]));
        let mut sorted = Vec::with_capacity(traces.len());
        let mut taken: Vec<Option<SpectrumTrace>> = traces.drain(..).map(Some).collect();
        for &i in &order {
            sorted.push(taken[i].take().expect("each index visited once"));
        }
        let l_values: Vec<f64> = order.iter().map(|&i| l_values[i]).collect();
        Self::assemble(l_values, sorted, Vec::new())
    }

    fn assemble(l_values: Vec<f64>, traces: Vec<SpectrumTrace>, mode_tracks: Vec<ModeTrack>) -> Result<Self> {
        for w in l_values.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid(format!("duplicate or unordered L value {}", w[1])));
            }
        }
        let grid = *traces[0].grid();
        for t in &traces[1..] {
            if !grid.matches(t.grid(), 1e-6) {
                return Err(Error::InconsistentGrid {
                    l: t.sweep_value().unwrap_or(f64::NAN),
                    message: "traces in a sweep must share one frequency grid".into(),
                });
            }
        }
        Ok(SweepResult {
            l_values,
            traces,
            mode_tracks,
        })
    }

    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    pub fn traces(&self) -> &[SpectrumTrace] {
        &self.traces
    }

    pub fn mode_tracks(&self) -> &[ModeTrack] {
        &self.mode_tracks
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.traces[0].grid()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// The traces with `lo ≤ L ≤ hi` (small slack for decimal L values).
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<SweepResult> {
        let eps = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| self.l_values[k] >= lo - eps && self.l_values[k] <= hi + eps)
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid(format!("no sweep points in L ∈ [{lo}, {hi}]")));
        }
        Ok(SweepResult {
            l_values: keep.iter().map(|&k| self.l_values[k]).collect(),
            traces: keep.iter().map(|&k| self.traces[k].clone()).collect(),
            mode_tracks: self
                .mode_tracks
                .iter()
                .map(|t| ModeTrack {
                    label: t.label.clone(),
                    omegas: keep.iter().map(|&k| t.omegas[k]).collect(),
                })
                .collect(),
        })
    }

    /// Adds independent Gaussian noise of standard deviation `sigma` to every
    /// linear `|S21|` sample. Phases are dropped and magnitudes floored at zero.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<SweepResult> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("noise level must be finite and ≥ 0, got {sigma}")));
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces = self
            .traces
            .iter()
            .map(|t| {
                let mags: Vec<f64> = t.magnitudes().iter().map(|m| (m + normal.sample(&mut rng)).max(0.0)).collect();
                SpectrumTrace::from_magnitudes(t.grid, &mags, t.sweep_value)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepResult {
            l_values: self.l_values.clone(),
            traces,
            mode_tracks: self.mode_tracks.clone(),
        })
    }
}

/// Transmission at every `L`, with bare frequencies from `gm` and everything
/// else taken from `template`.
///
/// Points are evaluated in parallel and assembled in input order; the first
/// failing `L` (in input order) is reported.
pub fn sweep(
    template: &CoupledSystem,
    gm: &GeometryMap,
    l_values: &[f64],
    grid: &FrequencyGrid,
    drive: &Drive,
) -> Result<SweepResult> {
    if l_values.is_empty() {
        return Err(Error::invalid("sweep needs at least one L value"));
    }
    for w in l_values.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid(format!(
                "L values must be strictly ascending ({} then {})",
                w[0], w[1]
            )));
        }
    }
    if gm.len() != template.len() {
        return Err(Error::DimensionMismatch(format!(
            "geometry map has {} laws for {} modes",
            gm.len(),
            template.len()
        )));
    }
    let results: Vec<Result<(Vec<f64>, SpectrumTrace)>> = l_values
        .par_iter()
        .map(|&l| {
            let at = |e: Error| Error::AtSweepPoint {
                l,
                source: Box::new(e),
            };
            let omegas = map_geometry(gm, l).map_err(at)?;
            let sys = template.clone().with_frequencies(&omegas).map_err(at)?;
            let trace = s21(&sys, grid, drive).map_err(at)?;
            Ok((omegas, trace.with_sweep_value(l)))
        })
        .collect();
    let mut traces = Vec::with_capacity(l_values.len());
    let mut tracks: Vec<ModeTrack> = template
        .modes()
        .iter()
        .map(|m| ModeTrack {
            label: m.label().to_string(),
            omegas: Vec::with_capacity(l_values.len()),
        })
        .collect();
    for r in results {
        let (omegas, trace) = r?;
        for (t, w) in tracks.iter_mut().zip(omegas) {
            t.omegas.push(w);
        }
        traces.push(trace);
    }
    SweepResult::assemble(l_values.to_vec(), traces, tracks)
}
