//! Local minimisers on the unit cube `[0, 1]^n`.

use nalgebra::{DMatrix, DVector};

/// Outcome of one local run.
#[derive(Debug, Clone)]
pub(crate) struct Local {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Nelder–Mead with every trial point projected back into the cube.
///
/// Stops when the spread of the simplex values falls below `ftol` relative to
/// the best value (or below `fabs` absolutely), or after `max_evals` calls.
pub(crate) fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, ftol: f64, fabs: f64, max_evals: usize) -> Local
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp_unit(&mut start);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        v[i] = if v[i] + step <= 1.0 { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut iterations = 0;

    while evals.get() < max_evals {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if worst - best <= ftol * best.abs() || worst <= fabs {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp_unit(&mut p);
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    values[i] = eval(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let (k, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Local {
        x: simplex[k].clone(),
        f: values[k],
        evaluations: evals.get(),
        iterations,
    }
}

/// Residual vector and its root-mean-square.
pub(crate) fn rms(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

/// Forward-difference Jacobian of `residuals` at `x` (columns = parameters).
///
/// Steps that would leave the cube are taken backwards instead.
pub(crate) fn jacobian<R>(residuals: &R, x: &[f64], r0: &[f64], h: f64) -> Option<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let m = r0.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let mut xp = x.to_vec();
        let step = if xp[k] + h <= 1.0 { h } else { -h };
        xp[k] += step;
        let rp = residuals(&xp)?;
        for i in 0..m {
            j[(i, k)] = (rp[i] - r0[i]) / step;
        }
    }
    Some(j)
}

/// Levenberg–Marquardt with finite-difference Jacobians and projection onto the cube.
///
/// Stops after a successful step that improves the RMS residual by less than
/// `rel_tol` (relative), when the RMS falls below `fabs`, or when the damping
/// blows up without finding a better point.
pub(crate) fn levenberg_marquardt<R>(
    residuals: &R,
    x0: &[f64],
    rel_tol: f64,
    fabs: f64,
    max_iterations: usize,
) -> (Local, bool)
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp_unit(&mut x);
    let mut evals = 1;
    let Some(mut r) = residuals(&x) else {
        return (
            Local {
                x,
                f: f64::INFINITY,
                evaluations: evals,
                iterations: 0,
            },
            false,
        );
    };
    let mut f = rms(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        if f <= fabs {
            converged = true;
            break;
        }
        let Some(j) = jacobian(residuals, &x, &r, 1e-7) else {
            break;
        };
        evals += n;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp_unit(&mut trial);
            evals += 1;
            match residuals(&trial) {
                Some(rt) if rms(&rt) < f => {
                    let ft = rms(&rt);
                    let improvement = (f - ft) / f;
                    x = trial;
                    r = rt;
                    f = ft;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if improvement < rel_tol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: a (bounded) stationary point
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    (
        Local {
            x,
            f,
            evaluations: evals,
            iterations,
        },
        converged,
    )
}
