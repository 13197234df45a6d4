//! Small dense eigenvalue routines.
//!
//! * [`hessenberg_eigenvalues`]: Francis double-shift QR on an upper
//!   Hessenberg matrix (eigenvalues only).
//! * [`SymTridiagonal`]: Sturm-sequence bisection and inverse iteration for
//!   symmetric tridiagonal matrices.

use crate::error::{Error, Result};

/// A possibly complex eigenvalue `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn distance_to_real(&self, x: f64) -> f64 {
        (self.re - x).hypot(self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// All eigenvalues of an upper Hessenberg matrix, ordered by real part and
/// then imaginary part.
///
/// The input is consumed as a row-major working array. Entries below the
/// first subdiagonal are ignored. Fails with [`Error::EigenFailure`] when the
/// iteration exceeds `100 n` sweeps in total.
pub fn hessenberg_eigenvalues(mut h: Vec<Vec<f64>>) -> Result<Vec<Eigenvalue>> {
    let n = h.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert!(h.iter().all(|row| row.len() == n), "matrix must be square");
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[i][j] = 0.0;
        }
    }

    let max_sweeps = 100 * n;
    let mut sweeps = 0usize;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[i][j].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z);
    let mut w;
    let mut s;

    while nn >= 0 {
        let mut its = 0;
        loop {
            // smallest l such that h[l][l-1] is negligible
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                s = h[lu - 1][lu - 1].abs() + h[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[lu][lu - 1].abs() + s == s {
                    h[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            x = h[nu][nu];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            y = h[nu - 1][nu - 1];
            w = h[nu][nu - 1] * h[nu - 1][nu];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }

            if sweeps >= max_sweeps {
                return Err(Error::EigenFailure { sweeps });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            // two consecutive small subdiagonal elements
            let lu = l as usize;
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                let u = h[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i != m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // double QR step on rows l..nn, columns m..nn
            let mut k = m;
            while k < nu {
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = 0.0;
                    if k != nu - 1 {
                        r = h[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if lu != m {
                            h[k][k - 1] = -h[k][k - 1];
                        }
                    } else {
                        h[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        p = h[k][j] + q * h[k + 1][j];
                        if k != nu - 1 {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k + 1][j] -= p * y;
                        h[k][j] -= p * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        p = x * h[i][k] + y * h[i][k + 1];
                        if k != nu - 1 {
                            p += z * h[i][k + 2];
                            h[i][k + 2] -= p * r;
                        }
                        h[i][k + 1] -= p * q;
                        h[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }

    let mut out: Vec<Eigenvalue> = wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Eigenvalue { re, im })
        .collect();
    if out.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::EigenFailure { sweeps });
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty());
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `lambda` (negative LDL^T pivots).
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut d = self.diag[0] - lambda;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let e2 = self.off[i - 1] * self.off[i - 1];
            let prev = if d == 0.0 { f64::EPSILON * (e2.sqrt() + 1.0) } else { d };
            d = (self.diag[i] - lambda) - e2 / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Absolute resolution used by [`Self::eigenvalue`].
    pub fn bisection_tolerance(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0)
    }

    /// The `index`-th smallest eigenvalue by bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        assert!(index < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let tol = self.bisection_tolerance();
        lo -= tol;
        hi += tol;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (accurate) eigenvalue by inverse iteration, unit
    /// 2-norm, sign fixed so that the largest component is positive.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lambda + self.bisection_tolerance();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..3 {
            x = self.solve_shifted(shift, &x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        let imax = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        x
    }

    /// Solves `(T - shift I) y = rhs` by Gaussian elimination with partial
    /// pivoting; exact singular pivots are nudged to machine epsilon.
    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * self.bisection_tolerance().max(f64::MIN_POSITIVE);
        // row i holds (d, u1, u2) on columns (i, i+1, i+2) after elimination
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut u1: Vec<f64> = self.off.clone();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut l: Vec<f64> = self.off.clone();
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if l[i].abs() > d[i].abs() {
                // swap rows i and i+1
                std::mem::swap(&mut d[i], &mut l[i]);
                let next_d = d[i + 1];
                let next_u1 = u1[i + 1];
                // old row i: (l_old=d_i_old at col i, u1_i, 0); row i+1: (l_i, d_{i+1}, u1_{i+1})
                let old_u1 = u1[i];
                u1[i] = next_d;
                u2[i] = next_u1;
                b.swap(i, i + 1);
                let factor = l[i] / d[i];
                d[i + 1] = old_u1 - factor * u1[i];
                u1[i + 1] = -factor * u2[i];
                b[i + 1] -= factor * b[i];
            } else {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let factor = l[i] / d[i];
                d[i + 1] -= factor * u1[i];
                b[i + 1] -= factor * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            if i + 1 < n {
                acc -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                acc -= u2[i] * y[i + 2];
            }
            y[i] = acc / d[i];
        }
        y
    }
}
