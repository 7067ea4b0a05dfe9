//! Error-free transformations, compensated Horner evaluation and the
//! reciprocal-factorial table backing the truncated sinh polynomials.

use std::sync::OnceLock;

/// Largest `j` with `j!` representable in binary64.
const MAX_FACTORIAL: usize = 170;

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner scheme for `sum_{i=0}^{deg} coef(i) x^i`.
///
/// The result is as accurate as if computed in twice the working precision
/// and then rounded, which keeps all-positive series at a few ulps even for
/// high degree.
pub(crate) fn comp_horner(deg: usize, x: f64, coef: impl Fn(usize) -> f64) -> f64 {
    let mut s = coef(deg);
    let mut c = 0.0f64;
    for i in (0..deg).rev() {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, coef(i));
        s = t;
        c = c.mul_add(x, pe + se);
    }
    s + c
}

fn inv_factorial_table() -> &'static [f64; MAX_FACTORIAL + 1] {
    static TABLE: OnceLock<[f64; MAX_FACTORIAL + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; MAX_FACTORIAL + 1];
        // j! carried as an unevaluated double-double sum hi + lo
        let (mut hi, mut lo) = (1.0_f64, 0.0_f64);
        table[0] = 1.0;
        for (j, slot) in table.iter_mut().enumerate().skip(1) {
            let (p, pe) = two_prod(hi, j as f64);
            let (s, e) = two_sum(p, lo * j as f64 + pe);
            hi = s;
            lo = e;
            let q = 1.0 / hi;
            let resid = (-q).mul_add(hi, 1.0) - q * lo;
            *slot = q.mul_add(resid, q);
        }
        table
    })
}

/// `1/j!`, flushed to zero once `j!` leaves the binary64 range.
#[inline]
pub(crate) fn inv_factorial(j: usize) -> f64 {
    if j > MAX_FACTORIAL {
        0.0
    } else {
        inv_factorial_table()[j]
    }
}

/// `ln j!`.
pub(crate) fn ln_factorial(j: usize) -> f64 {
    if j <= MAX_FACTORIAL {
        -inv_factorial(j).ln()
    } else {
        (2..=j).map(|i| (i as f64).ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_factorials_match_exact_small_values() {
        let mut f = 1.0_f64;
        for j in 1..=18 {
            f *= j as f64; // exact up to 18!
            let rel = (inv_factorial(j) * f - 1.0).abs();
            assert!(rel <= f64::EPSILON, "j = {j}: {rel}");
        }
        assert_eq!(inv_factorial(171), 0.0);
    }

    #[test]
    fn compensated_horner_on_ill_conditioned_polynomial() {
        // (x - 1)^5 expanded, evaluated near its root: plain Horner loses
        // nearly all digits here.
        let c = [-1.0, 5.0, -10.0, 10.0, -5.0, 1.0];
        let x = 1.0 + 1.0 / 1024.0;
        let exact = (1.0_f64 / 1024.0).powi(5);
        let got = comp_horner(5, x, |i| c[i]);
        assert!(((got - exact) / exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn ln_factorial_consistent() {
        assert!((ln_factorial(10) - 3628800.0_f64.ln()).abs() < 1e-13);
        let direct: f64 = (2..=200).map(|i| (i as f64).ln()).sum();
        assert!((ln_factorial(200) - direct).abs() < 1e-9);
    }
}
