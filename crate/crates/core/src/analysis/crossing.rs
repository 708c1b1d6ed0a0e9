use std::fmt;

use super::tracking::{BranchSample, BranchSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// Coherent coupling: the branches avoid each other.
    Repulsion,
    /// Dissipative coupling: the branch frequencies coalesce over a finite interval.
    Attraction,
    /// No resolvable interaction.
    Crossing,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Repulsion => "repulsion",
            Classification::Attraction => "attraction",
            Classification::Crossing => "crossing",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub region: (f64, f64),
    pub classification: Classification,
    /// Smallest frequency distance between the two branches, GHz.
    pub gap: f64,
    /// `gap / 2`, GHz.
    pub coupling_estimate: f64,
    /// `L` where the smallest gap occurs.
    pub gap_at: f64,
    /// Indices into the branch set of the interacting pair.
    pub branches: (usize, usize),
    pub mean_width: f64,
    pub gap_threshold: f64,
    pub merge_tolerance: f64,
    /// Longest run of consecutive `L` points with merged branches.
    pub merged_points: usize,
    /// Signed squared coupling from a hyperbola fitted to gaps above the threshold:
    /// positive for an avoided crossing, negative when the branches merge,
    /// near zero for a plain crossing. `None` when too few points are resolved.
    pub coupling_squared: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Repulsion needs a minimum gap above this many mean widths.
    pub gap_threshold_widths: f64,
    /// Branches closer than this many mean widths count as merged.
    pub merge_tolerance_widths: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            gap_threshold_widths: 3.0,
            merge_tolerance_widths: 0.5,
        }
    }
}

pub fn classify_crossing(branches: &BranchSet, region: (f64, f64)) -> Result<CrossingReport> {
    classify_crossing_with(branches, region, &ClassifyOptions::default())
}

/// Picks the pair of branches that come closest inside `region` and
/// classifies their interaction.
///
/// Repulsion: the pair never merges and stays further apart than the gap
/// threshold. Attraction: the pair merges over at least two consecutive `L`
/// points and the resolved gaps do not extrapolate to a plain crossing. A
/// true crossing also produces a point or two where the dips overlap; the
/// smooth curve through `gap²` at the well separated points tells the two
/// apart: its minimum `4D` is about zero for a crossing, `4g²` for coherent
/// coupling `g` and `−4Γ²` for dissipative coupling `iΓ`. Neighbouring dips
/// pull each other inwards by a few percent of a width, which biases `D`
/// slightly negative, so attraction asks for `D` below `−merge_tolerance²`.
pub fn classify_crossing_with(
    branches: &BranchSet,
    region: (f64, f64),
    opts: &ClassifyOptions,
) -> Result<CrossingReport> {
    let (lo, hi) = region;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("bad region [{lo}, {hi}]")));
    }
    if !(opts.gap_threshold_widths > 0.0 && opts.merge_tolerance_widths > 0.0) {
        return Err(Error::invalid("classification tolerances must be positive"));
    }
    let eps = 1e-9 * (1.0 + hi.abs());
    let inside = |l: f64| l >= lo - eps && l <= hi + eps;
    let region_l: Vec<f64> = branches.l_values.iter().copied().filter(|&l| inside(l)).collect();
    if region_l.len() < 5 {
        return Err(Error::invalid(format!(
            "region [{lo}, {hi}] holds {} sweep points, need at least 5",
            region_l.len()
        )));
    }
    let index_of = |l: f64| region_l.iter().position(|&x| x == l);

    let present: Vec<usize> = (0..branches.branches.len())
        .filter(|&b| branches.branches[b].samples.iter().any(|s| inside(s.l)))
        .collect();
    if present.len() < 2 {
        return Err(Error::InsufficientBranches {
            found: present.len(),
        });
    }

    struct Pair {
        ids: (usize, usize),
        points: Vec<(usize, f64, BranchSample, BranchSample)>,
        min_gap: f64,
        min_at: f64,
    }
    let mut best: Option<Pair> = None;
    for (a, &i) in present.iter().enumerate() {
        for &j in &present[a + 1..] {
            let mut points = Vec::new();
            for si in branches.branches[i].samples.iter().filter(|s| inside(s.l)) {
                if let Some(sj) = branches.branches[j].at(si.l) {
                    let k = index_of(si.l).expect("sample L comes from the sweep");
                    points.push((k, (si.frequency - sj.frequency).abs(), *si, *sj));
                }
            }
            if points.len() < 2 {
                continue;
            }
            let (min_gap, min_at) = points
                .iter()
                .map(|p| (p.1, p.2.l))
                .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc });
            if best.as_ref().is_none_or(|b| min_gap < b.min_gap) {
                best = Some(Pair {
                    ids: (i, j),
                    points,
                    min_gap,
                    min_at,
                });
            }
        }
    }
    // branches that never share two L points cannot be compared: at most one
    // of them counts as present throughout
    let pair = best.ok_or(Error::InsufficientBranches { found: 1 })?;

    let widths: Vec<f64> = pair.points.iter().flat_map(|p| [p.2.width, p.3.width]).collect();
    let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
    let gap_threshold = opts.gap_threshold_widths * mean_width;
    let merge_tolerance = opts.merge_tolerance_widths * mean_width;

    let mut merged_points = 0;
    let mut run = 0;
    let mut prev_k: Option<usize> = None;
    for p in &pair.points {
        if p.1 <= merge_tolerance {
            run = if prev_k == Some(p.0.wrapping_sub(1)) && run > 0 { run + 1 } else { 1 };
            merged_points = merged_points.max(run);
        } else {
            run = 0;
        }
        prev_k = Some(p.0);
    }

    // only well separated dips: overlapping ones pull each other inwards
    let resolved: Vec<(f64, f64)> = pair
        .points
        .iter()
        .filter(|p| p.1 > gap_threshold)
        .map(|p| (p.2.l, p.1 * p.1))
        .collect();
    let coupling_squared = hyperbola_offset(&resolved);

    let classification = if merged_points == 0 && pair.min_gap > gap_threshold {
        Classification::Repulsion
    } else if merged_points >= 2
        && coupling_squared.is_none_or(|d| d < -merge_tolerance * merge_tolerance)
    {
        Classification::Attraction
    } else {
        Classification::Crossing
    };

    Ok(CrossingReport {
        region,
        classification,
        gap: pair.min_gap,
        coupling_estimate: 0.5 * pair.min_gap,
        gap_at: pair.min_at,
        branches: pair.ids,
        mean_width,
        gap_threshold,
        merge_tolerance,
        merged_points,
        coupling_squared,
    })
}

/// Least-squares polynomial through `(L, gap²)`, cubic when there are enough
/// points to absorb the curvature of the bare-frequency laws, and a quarter
/// of its minimum over the sampled `L` range.
fn hyperbola_offset(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let degree = if points.len() >= 5 { 3 } else { 2 };
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    if !(half > 0.0) {
        return None;
    }
    let m = degree + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut aty = nalgebra::DVector::<f64>::zeros(m);
    for &(l, y) in points {
        let x = (l - mid) / half;
        let row = nalgebra::DVector::from_iterator(m, (0..m).map(|k| x.powi(k as i32)));
        ata += &row * row.transpose();
        aty += &row * y;
    }
    let c = ata.lu().solve(&aty)?;
    let eval = |x: f64| (0..m).rev().fold(0.0, |acc, k| acc * x + c[k]);
    // minimum over [−1, 1]: endpoints plus interior critical points
    let mut candidates = vec![-1.0, 1.0];
    if degree == 2 {
        if c[2] > 0.0 {
            candidates.push(-c[1] / (2.0 * c[2]));
        }
    } else {
        let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            // cancellation-free roots of qa x² + qb x + qc
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            if qa != 0.0 {
                candidates.push(q / qa);
            }
            if q != 0.0 {
                candidates.push(qc / q);
            }
        }
    }
    let min = candidates
        .into_iter()
        .filter(|x| (-1.0..=1.0).contains(x))
        .map(eval)
        .fold(f64::INFINITY, f64::min);
    min.is_finite().then_some(0.25 * min)
}
