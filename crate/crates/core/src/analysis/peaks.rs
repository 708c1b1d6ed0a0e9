use crate::spectrum::SpectrumTrace;
use crate::{Error, Result};

/// One transmission dip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// GHz, refined between grid points.
    pub frequency: f64,
    /// `1 − |S21|` at the minimum, measured from the unit baseline.
    pub depth: f64,
    /// Full width (GHz) at half the depth.
    pub width: f64,
}

/// Local minima of `|S21|` at least `min_depth` below the unit baseline,
/// sorted by frequency.
///
/// Each minimum is refined with a parabola through its two neighbours. The
/// width is measured where the dip recovers halfway to the baseline; when a
/// neighbouring dip gets in the way first, the clean side is mirrored.
pub fn find_peaks(trace: &SpectrumTrace, min_depth: f64) -> Result<Vec<Peak>> {
    if !(min_depth > 0.0 && min_depth < 1.0) {
        return Err(Error::invalid(format!("min_depth must lie in (0, 1), got {min_depth}")));
    }
    let n = trace.len();
    if n < 5 {
        return Err(Error::invalid(format!("peak search needs at least 5 points, got {n}")));
    }
    let mags = trace.magnitudes();
    let grid = trace.grid();
    let step = grid.step();
    let mut peaks = Vec::new();
    for k in 1..n - 1 {
        let (l, m, r) = (mags[k - 1], mags[k], mags[k + 1]);
        if !(m < l && m <= r) {
            continue;
        }
        let curvature = l - 2.0 * m + r;
        let offset = if curvature > 0.0 {
            (0.5 * (l - r) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let m_min = (m - 0.25 * (l - r) * offset).min(m);
        let depth = (1.0 - m_min).clamp(0.0, 1.0);
        if depth < min_depth {
            continue;
        }
        let level = m_min + 0.5 * depth;
        let left = walk(&mags, k, level, Side::Left);
        let right = walk(&mags, k, level, Side::Right);
        let centre = k as f64 + offset;
        let half = |edge: Edge| (edge.position - centre).abs();
        let width_samples = match (left, right) {
            (l, r) if l.crossed == r.crossed => r.position - l.position,
            (l, _) if l.crossed => 2.0 * half(l),
            (_, r) => 2.0 * half(r),
        };
        peaks.push(Peak {
            frequency: grid.start() + (grid.stop() - grid.start()) * centre / (n - 1) as f64,
            depth,
            width: width_samples.max(1e-3) * step,
        });
    }
    Ok(peaks)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy)]
struct Edge {
    /// Fractional sample index.
    position: f64,
    /// Reached the half level, as opposed to stopping at a local maximum or the grid end.
    crossed: bool,
}

fn walk(mags: &[f64], k: usize, level: f64, side: Side) -> Edge {
    let n = mags.len();
    let mut i = k;
    loop {
        let next = match side {
            Side::Left if i > 0 => i - 1,
            Side::Right if i + 1 < n => i + 1,
            _ => {
                return Edge {
                    position: i as f64,
                    crossed: false,
                }
            }
        };
        if mags[next] >= level {
            let frac = (level - mags[i]) / (mags[next] - mags[i]);
            let pos = match side {
                Side::Left => i as f64 - frac,
                Side::Right => i as f64 + frac,
            };
            return Edge {
                position: pos,
                crossed: true,
            };
        }
        if mags[next] < mags[i] {
            return Edge {
                position: i as f64,
                crossed: false,
            };
        }
        i = next;
    }
}
