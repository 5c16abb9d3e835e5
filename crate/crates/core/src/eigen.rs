//! Closed-form eigenvalues for matrices of size one to three, via the
//! characteristic polynomial, followed by a Newton polish of each root.

use num_complex::Complex64;

use crate::systems::Matrix;

/// Coefficients `[c_{n-1}, ..., c_0]` of the monic characteristic polynomial
/// `det(lambda I - M) = lambda^n + c_{n-1} lambda^{n-1} + ... + c_0`.
pub fn characteristic_coefficients(m: &Matrix) -> Vec<f64> {
    match m.dim() {
        1 => vec![-m.get(0, 0)],
        2 => {
            let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
            vec![-m.trace(), det]
        }
        3 => {
            let a = |i: usize, j: usize| m.get(i, j);
            let minors = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)
                + a(1, 1) * a(2, 2)
                - a(1, 2) * a(2, 1);
            vec![-m.trace(), minors, -det3(m)]
        }
        n => unreachable!("unsupported dimension {n}"),
    }
}

fn det3(m: &Matrix) -> f64 {
    let a = |i: usize, j: usize| m.get(i, j);
    a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
}

/// `det(M - lambda I)` evaluated directly from the matrix entries, not from the
/// characteristic coefficients. Used to check eigenvalues independently.
pub fn det_shifted(m: &Matrix, lambda: Complex64) -> Complex64 {
    let n = m.dim();
    let e = |i: usize, j: usize| {
        let v = Complex64::new(m.get(i, j), 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    };
    match n {
        1 => e(0, 0),
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        n => unreachable!("unsupported dimension {n}"),
    }
}

fn poly_eval(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    // Horner for p and p' of the monic polynomial
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots of `x^2 + b x + c`, computed without cancellation.
pub fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let (r1, r2) = (q, c / q);
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, -im), Complex64::new(re, im)]
    }
}

/// One real root of `x^3 + a x^2 + b x + c` (Cardano or trigonometric form),
/// polished by real Newton steps.
fn real_cubic_root(a: f64, b: f64, c: f64) -> f64 {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let t = if disc > 0.0 {
        let u = (-q / 2.0 - q.signum() * disc.sqrt()).cbrt();
        if u == 0.0 {
            0.0
        } else {
            u - p / (3.0 * u)
        }
    } else if p == 0.0 {
        (-q).cbrt()
    } else {
        // three real roots; take the largest
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        m * (arg.acos() / 3.0).cos()
    };
    let mut x = t - shift;
    for _ in 0..4 {
        let f = ((x + a) * x + b) * x + c;
        let df = (3.0 * x + 2.0 * a) * x + b;
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let next = x - f / df;
        let f_next = ((next + a) * next + b) * next + c;
        if f_next.abs() < f.abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// One complex Newton step on the characteristic polynomial, kept only if it
/// does not increase the residual (repeated roots make `p'` vanish).
fn polish(coeffs: &[f64], root: Complex64) -> Complex64 {
    let (p, dp) = poly_eval(coeffs, root);
    if dp.norm() == 0.0 || p.norm() == 0.0 {
        return root;
    }
    let mut next = root - p / dp;
    if root.im == 0.0 {
        next.im = 0.0;
    }
    let (p_next, _) = poly_eval(coeffs, next);
    if p_next.norm() <= p.norm() {
        next
    } else {
        root
    }
}

/// Eigenvalues of a 1x1, 2x2 or 3x3 real matrix, ordered by real part then
/// imaginary part. Complex pairs come out exactly conjugate.
pub fn eigenvalues(m: &Matrix) -> Vec<Complex64> {
    let coeffs = characteristic_coefficients(m);
    let mut roots: Vec<Complex64> = match m.dim() {
        1 => vec![Complex64::new(-coeffs[0], 0.0)],
        2 => quadratic_roots(coeffs[0], coeffs[1]).to_vec(),
        _ => {
            let (a, b, c) = (coeffs[0], coeffs[1], coeffs[2]);
            let x1 = real_cubic_root(a, b, c);
            // deflate: x^3 + a x^2 + b x + c = (x - x1)(x^2 + (a + x1) x + (b + (a + x1) x1))
            let qb = a + x1;
            let qc = if x1.abs() > 1.0 && c != 0.0 { -c / x1 } else { b + qb * x1 };
            let [r2, r3] = quadratic_roots(qb, qc);
            vec![Complex64::new(x1, 0.0), r2, r3]
        }
    };
    for r in roots.iter_mut() {
        *r = polish(&coeffs, *r);
    }
    // restore exact conjugacy after the independent polish of each member
    if roots.len() >= 2 {
        let n = roots.len();
        for i in 0..n {
            if roots[i].im > 0.0 {
                if let Some(j) = (0..n).find(|&j| j != i && roots[j].im < 0.0) {
                    let re = 0.5 * (roots[i].re + roots[j].re);
                    let im = 0.5 * (roots[i].im - roots[j].im);
                    roots[i] = Complex64::new(re, im);
                    roots[j] = Complex64::new(re, -im);
                }
            }
        }
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    roots
}

/// Eigenvalues of a 3x3 matrix.
pub fn eigen3(m: &Matrix) -> Vec<Complex64> {
    assert_eq!(m.dim(), 3, "eigen3 expects a 3x3 matrix");
    eigenvalues(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(m: &Matrix, roots: &[Complex64]) {
        let bound = 1e-6 * (1.0 + m.norm().powi(3));
        for r in roots {
            let d = det_shifted(m, *r).norm();
            assert!(d <= bound, "residual {d} > {bound} for {r}");
        }
    }

    #[test]
    fn diagonal() {
        let m = Matrix::diag(&[1.0, 2.0, 3.0]);
        let ev = eigen3(&m);
        for (e, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e.re - want).abs() < 1e-12 && e.im == 0.0);
        }
        residual_ok(&m, &ev);
    }

    #[test]
    fn repeated_roots() {
        let m = Matrix::identity(3);
        let ev = eigen3(&m);
        residual_ok(&m, &ev);
        for e in ev {
            assert!((e.re - 1.0).abs() < 1e-6);
        }
        let jordan = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 1.0], &[0.0, 0.0, 2.0]]);
        residual_ok(&jordan, &eigen3(&jordan));
    }

    #[test]
    fn lorenz_origin_at_r28() {
        let m = Matrix::from_rows(&[&[-10.0, 10.0, 0.0], &[28.0, -1.0, 0.0], &[0.0, 0.0, -8.0 / 3.0]]);
        let ev = eigen3(&m);
        let s = 1201.0f64.sqrt();
        let want = [(-11.0 - s) / 2.0, -8.0 / 3.0, (-11.0 + s) / 2.0];
        for (e, w) in ev.iter().zip(want) {
            assert!((e.re - w).abs() <= 1e-8 && e.im.abs() <= 1e-8, "{e} vs {w}");
        }
    }

    #[test]
    fn rotation_gives_conjugate_pair() {
        let m = Matrix::from_rows(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, -2.0]]);
        let ev = eigen3(&m);
        assert!((ev[0].re + 2.0).abs() < 1e-12);
        assert!(ev[1].re.abs() < 1e-12 && (ev[1].im + 1.0).abs() < 1e-12);
        assert_eq!(ev[1], ev[2].conj());
    }

    #[test]
    fn small_dimensions() {
        let ev = eigenvalues(&Matrix::from_rows(&[&[-24.0]]));
        assert_eq!(ev, vec![Complex64::new(-24.0, 0.0)]);
        let ev = eigenvalues(&Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]));
        assert_eq!(ev[0].im, -1.0);
        assert_eq!(ev[1].im, 1.0);
    }
}
