use super::peaks::{find_peaks, Peak};
use crate::spectrum::SweepResult;
use crate::{Error, Result};

/// One dip assigned to a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSample {
    pub l: f64,
    pub frequency: f64,
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub samples: Vec<BranchSample>,
}

impl Branch {
    pub fn at(&self, l: f64) -> Option<&BranchSample> {
        self.samples.iter().find(|s| s.l == l)
    }
}

/// Branches in order of first appearance (by `L`, then frequency), the
/// sweep's `L` grid and any linking ambiguities met on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSet {
    pub branches: Vec<Branch>,
    pub l_values: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    pub min_depth: f64,
    /// Largest frequency jump between adjacent `L`, in units of the branch's last width.
    pub max_jump_widths: f64,
    /// A branch left without a dip of its own may share an already claimed
    /// dip this close (in widths). Two hybrids merged into a single dip are
    /// then both kept alive.
    pub share_widths: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            min_depth: 0.02,
            max_jump_widths: 5.0,
            share_widths: 1.0,
        }
    }
}

/// [`track_branches_with`] using default options apart from `min_depth`.
pub fn track_branches(sweep: &SweepResult, min_depth: f64) -> Result<BranchSet> {
    track_branches_with(
        sweep,
        &TrackOptions {
            min_depth,
            ..TrackOptions::default()
        },
    )
}

/// Links dips across adjacent `L` by greedy nearest-frequency matching.
///
/// Ties go to the smaller distance, then the lower-frequency dip, then the
/// older branch, so the result is fully deterministic. A branch that finds no
/// dip at some `L` ends there; unmatched dips start new branches.
pub fn track_branches_with(sweep: &SweepResult, opts: &TrackOptions) -> Result<BranchSet> {
    if sweep.len() < 3 {
        return Err(Error::invalid(format!(
            "branch tracking needs at least 3 L values, got {}",
            sweep.len()
        )));
    }
    if !(opts.max_jump_widths > 0.0 && opts.share_widths >= 0.0) {
        return Err(Error::invalid("tracking tolerances must be positive"));
    }
    let mut branches: Vec<Branch> = Vec::new();
    let mut alive: Vec<usize> = Vec::new();
    let mut warnings = Vec::new();

    for (t, trace) in sweep.traces().iter().enumerate() {
        let l = sweep.l_values()[t];
        let peaks = find_peaks(trace, opts.min_depth)?;
        let sample = |p: &Peak| BranchSample {
            l,
            frequency: p.frequency,
            depth: p.depth,
            width: p.width,
        };

        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for &b in &alive {
            let last = branches[b].samples.last().expect("branches are never empty");
            let tol = opts.max_jump_widths * last.width;
            let mut dists: Vec<f64> = Vec::new();
            for (p, peak) in peaks.iter().enumerate() {
                let d = (peak.frequency - last.frequency).abs();
                if d <= tol {
                    candidates.push((d, p, b));
                    dists.push(d);
                }
            }
            dists.sort_by(f64::total_cmp);
            if dists.len() >= 2 && dists[1] - dists[0] <= 0.1 * dists[1] {
                warnings.push(format!(
                    "L = {l}: ambiguous link for branch {b} near {:.6} GHz ({} candidates within tolerance)",
                    last.frequency,
                    dists.len()
                ));
            }
        }
        candidates.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then(peaks[x.1].frequency.total_cmp(&peaks[y.1].frequency))
                .then(x.2.cmp(&y.2))
        });

        let mut peak_taken = vec![false; peaks.len()];
        let mut branch_done: Vec<usize> = Vec::new();
        for &(_, p, b) in &candidates {
            if peak_taken[p] || branch_done.contains(&b) {
                continue;
            }
            peak_taken[p] = true;
            branch_done.push(b);
            branches[b].samples.push(sample(&peaks[p]));
        }
        // shared dips: branches that lost out but sit on top of a claimed dip
        for &(d, p, b) in &candidates {
            if branch_done.contains(&b) || !peak_taken[p] {
                continue;
            }
            let last = branches[b].samples.last().expect("branches are never empty");
            if d <= opts.share_widths * last.width {
                branch_done.push(b);
                branches[b].samples.push(sample(&peaks[p]));
            }
        }

        let mut next_alive: Vec<usize> = alive.iter().copied().filter(|b| branch_done.contains(b)).collect();
        for (p, peak) in peaks.iter().enumerate() {
            if !peak_taken[p] {
                branches.push(Branch {
                    samples: vec![sample(peak)],
                });
                next_alive.push(branches.len() - 1);
            }
        }
        next_alive.sort_unstable();
        alive = next_alive;
    }

    Ok(BranchSet {
        branches,
        l_values: sweep.l_values().to_vec(),
        warnings,
    })
}
