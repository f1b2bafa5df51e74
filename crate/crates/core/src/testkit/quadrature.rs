/// Adaptive Simpson quadrature. Used as the independent oracle for
/// compensator integrals and Monte Carlo estimates.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }

    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, frm, tol / 2.0, depth - 1)
        }
    }

    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let f = |x: f64| 3.0 * x * x;
        assert!((adaptive_simpson(&f, 0.0, 2.0, 1e-12) - 8.0).abs() < 1e-10);
    }

    #[test]
    fn integrates_exponential() {
        let f = |x: f64| (-x).exp();
        let got = adaptive_simpson(&f, 0.0, 5.0, 1e-12);
        let want = 1.0 - (-5.0f64).exp();
        assert!((got - want).abs() < 1e-10);
    }
}
