//! Complex tridiagonal systems: factor once, solve many right-hand sides.

use num_complex::Complex64;

/// A tridiagonal matrix stored by diagonals. `lower[0]` and `upper[m-1]` are unused.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len(), "diagonal lengths differ");
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let m = self.len();
        assert!(x.len() == m && out.len() == m, "dimension mismatch");
        match m {
            0 => {}
            1 => out[0] = self.diag[0] * x[0],
            _ => {
                out[0] = self.diag[0] * x[0] + self.upper[0] * x[1];
                for (i, o) in out[1..m - 1].iter_mut().enumerate() {
                    let j = i + 1;
                    *o = self.lower[j] * x[j - 1] + self.diag[j] * x[j] + self.upper[j] * x[j + 1];
                }
                out[m - 1] = self.lower[m - 1] * x[m - 2] + self.diag[m - 1] * x[m - 1];
            }
        }
    }

    /// LU factorisation without pivoting. Returns `None` on a zero or
    /// non-finite pivot.
    pub fn factor(&self) -> Option<Factored> {
        let m = self.len();
        let mut inv_pivot = Vec::with_capacity(m);
        let mut upper_scaled = Vec::with_capacity(m);
        let mut prev_c = Complex64::new(0.0, 0.0);
        for i in 0..m {
            let pivot = if i == 0 { self.diag[0] } else { self.diag[i] - self.lower[i] * prev_c };
            let norm = pivot.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return None;
            }
            let inv = pivot.inv();
            prev_c = if i + 1 < m { self.upper[i] * inv } else { Complex64::new(0.0, 0.0) };
            inv_pivot.push(inv);
            upper_scaled.push(prev_c);
        }
        Some(Factored {
            matrix: self.clone(),
            inv_pivot,
            upper_scaled,
        })
    }
}

/// Thomas factors of a [`Tridiagonal`] matrix.
#[derive(Clone, Debug)]
pub struct Factored {
    matrix: Tridiagonal,
    inv_pivot: Vec<Complex64>,
    upper_scaled: Vec<Complex64>,
}

/// Outcome of a checked solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    /// `‖b - A x‖_2 / ‖b‖_2` after the optional refinement step.
    pub relative_residual: f64,
    pub refined: bool,
}

impl Factored {
    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    /// Solves `A x = b` in place (`x` holds `b` on entry). Components
    /// below [`FLUSH_THRESHOLD`] are set to zero as they are produced, so the
    /// geometrically decaying tails of the sweeps never turn subnormal.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let m = x.len();
        debug_assert_eq!(m, self.inv_pivot.len());
        if m == 0 {
            return;
        }
        x[0] = flush(x[0] * self.inv_pivot[0]);
        for i in 1..m {
            x[i] = flush((x[i] - self.matrix.lower[i] * x[i - 1]) * self.inv_pivot[i]);
        }
        for i in (0..m - 1).rev() {
            let next = x[i + 1];
            x[i] = flush(x[i] - self.upper_scaled[i] * next);
        }
    }

    /// Solves `A x = b`, checks the residual, and applies one step of
    /// iterative refinement if it exceeds `tol`. `scratch` must have the
    /// system length. Returns the final relative residual; the caller decides
    /// whether a residual still above `tol` is fatal.
    pub fn solve_checked(
        &self,
        b: &[Complex64],
        x: &mut [Complex64],
        scratch: &mut [Complex64],
        tol: f64,
    ) -> SolveReport {
        x.copy_from_slice(b);
        self.solve_in_place(x);
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            return SolveReport {
                relative_residual: 0.0,
                refined: false,
            };
        }
        let mut res = self.residual(b, x, scratch) / b_norm;
        let mut refined = false;
        if !(res <= tol) {
            self.solve_in_place(scratch);
            for (xi, ci) in x.iter_mut().zip(scratch.iter()) {
                *xi += ci;
            }
            res = self.residual(b, x, scratch) / b_norm;
            refined = true;
        }
        SolveReport {
            relative_residual: res,
            refined,
        }
    }

    /// Leaves `b - A x` in `out` and returns its 2-norm.
    fn residual(&self, b: &[Complex64], x: &[Complex64], out: &mut [Complex64]) -> f64 {
        self.matrix.apply(x, out);
        for (o, bi) in out.iter_mut().zip(b) {
            *o = bi - *o;
        }
        norm2(out)
    }
}

/// Magnitude below which [`Factored::solve_in_place`] writes exact zeros.
pub const FLUSH_THRESHOLD: f64 = 1e-280;

#[inline]
fn flush(z: Complex64) -> Complex64 {
    if z.re.abs() + z.im.abs() < FLUSH_THRESHOLD {
        Complex64::new(0.0, 0.0)
    } else {
        z
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
