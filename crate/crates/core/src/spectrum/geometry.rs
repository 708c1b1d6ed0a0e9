use crate::{Error, Result};

/// Sizes (mm) the calibrated laws are declared for.
pub const DEFAULT_DOMAIN: (f64, f64) = (4.0, 18.0);

/// How one resonator's bare frequency depends on the swept size `L` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryLaw {
    /// Size held constant, frequency in GHz.
    Fixed { omega: f64 },
    /// `ω(L) = a / L + b`, `a` in GHz·mm and `b` in GHz.
    Inverse { a: f64, b: f64 },
}

impl GeometryLaw {
    pub fn eval(&self, l: f64) -> f64 {
        match *self {
            GeometryLaw::Fixed { omega } => omega,
            GeometryLaw::Inverse { a, b } => a / l + b,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            GeometryLaw::Fixed { omega } => omega.is_finite(),
            GeometryLaw::Inverse { a, b } => a.is_finite() && b.is_finite(),
        }
    }
}

/// Per-mode laws plus the size domain they are valid on.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    laws: Vec<GeometryLaw>,
    domain: (f64, f64),
    allow_outside: bool,
}

impl GeometryMap {
    /// Every law must stay positive on the whole domain. Both law kinds are
    /// monotonic in `L`, so checking the endpoints is enough.
    pub fn new(laws: Vec<GeometryLaw>, domain: (f64, f64)) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::invalid("geometry map needs at least one law"));
        }
        let (lo, hi) = domain;
        if !lo.is_finite() || !hi.is_finite() || laws.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("geometry map"));
        }
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::invalid(format!(
                "size domain [{lo}, {hi}] must be positive and non-empty"
            )));
        }
        for (i, law) in laws.iter().enumerate() {
            for l in [lo, hi] {
                if law.eval(l) <= 0.0 {
                    return Err(Error::invalid(format!(
                        "law {i} predicts ω = {} GHz at L = {l} mm",
                        law.eval(l)
                    )));
                }
            }
        }
        Ok(GeometryMap {
            laws,
            domain,
            allow_outside: false,
        })
    }

    /// Lets [`map_geometry`] evaluate outside the declared domain.
    pub fn with_domain_override(mut self, allow: bool) -> Self {
        self.allow_outside = allow;
        self
    }

    pub fn laws(&self) -> &[GeometryLaw] {
        &self.laws
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    /// Size at which modes `i` and `j` are degenerate, if the laws ever meet at `L > 0`.
    pub fn crossing(&self, i: usize, j: usize) -> Option<f64> {
        use GeometryLaw::*;
        let l = match (self.laws[i], self.laws[j]) {
            (Fixed { .. }, Fixed { .. }) => return None,
            (Fixed { omega }, Inverse { a, b }) | (Inverse { a, b }, Fixed { omega }) => {
                a / (omega - b)
            }
            (Inverse { a: a1, b: b1 }, Inverse { a: a2, b: b2 }) => (a1 - a2) / (b2 - b1),
        };
        (l.is_finite() && l > 0.0).then_some(l)
    }
}

/// Bare frequencies (GHz) of every mode at size `l` (mm).
pub fn map_geometry(gm: &GeometryMap, l: f64) -> Result<Vec<f64>> {
    if !l.is_finite() {
        return Err(Error::NonFinite("sweep value"));
    }
    let (lo, hi) = gm.domain;
    if !gm.allow_outside && (l < lo || l > hi) {
        return Err(Error::OutsideDomain { l, min: lo, max: hi });
    }
    if l <= 0.0 {
        return Err(Error::invalid(format!("size must be positive, got {l} mm")));
    }
    gm.laws
        .iter()
        .enumerate()
        .map(|(i, law)| {
            let w = law.eval(l);
            if w > 0.0 && w.is_finite() {
                Ok(w)
            } else {
                Err(Error::invalid(format!("law {i} predicts ω = {w} GHz at L = {l} mm")))
            }
        })
        .collect()
}
