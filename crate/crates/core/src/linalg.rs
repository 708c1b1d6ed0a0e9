use num_complex::Complex64;

/// Solves `a · x = b` in place by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n × n` and is destroyed; `b` is overwritten with `x`.
/// Returns `false` when a pivot underflows, i.e. the matrix is numerically singular.
pub(crate) fn solve_in_place(a: &mut [Complex64], b: &mut [Complex64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let tiny = f64::EPSILON * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mag <= tiny {
            return false;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let inv = a[col * n + col].inv();
        for r in col + 1..n {
            let factor = a[r * n + col] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let upper = a[col * n + k];
                a[r * n + k] -= factor * upper;
            }
            let upper_b = b[col];
            b[r] -= factor * upper_b;
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}
