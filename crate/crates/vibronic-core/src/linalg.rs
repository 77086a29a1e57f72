//! Dense complex linear algebra kernels.
//!
//! Pure-Rust implementations sized for the desk-scale spaces this crate
//! works with (dimensions up to a few hundred): Hermitian eigendecomposition
//! via Householder tridiagonalisation followed by implicit-shift QL, and an
//! LU solver with partial pivoting for the Padé coefficient systems.

use crate::error::{Error, Result};
use crate::C64;
use ndarray::{Array1, Array2};

/// Maximum entry-wise deviation from Hermiticity, max |M - M†|.
pub fn hermiticity_deviation(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Conjugate transpose.
pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Maximum entry magnitude.
pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum entry-wise |a - b|.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns ascending eigenvalues `w` and a unitary `v` with eigenvectors in
/// its columns, so that `a = v · diag(w) · v†`. Only the Hermitian part of
/// the input influences the result; callers enforce Hermiticity tolerances.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigh requires a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }

    // Work on the Hermitian part to suppress roundoff asymmetry.
    let mut t = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
        }
    }
    let mut q = Array2::<C64>::eye(n);

    // Householder reduction to Hermitian tridiagonal form, accumulating q.
    for k in 0..n.saturating_sub(2) {
        let mut sigma2 = 0.0;
        for i in k + 1..n {
            sigma2 += t[(i, k)].norm_sqr();
        }
        let x0 = t[(k + 1, k)];
        let tail2 = sigma2 - x0.norm_sqr();
        if tail2 <= 0.0 {
            continue; // column already tridiagonal
        }
        let sigma = sigma2.sqrt();
        let alpha = if x0.norm() == 0.0 {
            C64::new(-sigma, 0.0)
        } else {
            -(x0 / x0.norm()) * sigma
        };
        // v = x - alpha e1; chosen sign makes v[0] = x0 + (x0/|x0|) sigma large.
        let mut v = Array1::<C64>::zeros(n - k - 1);
        for i in k + 1..n {
            v[i - k - 1] = t[(i, k)];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;

        // p = tau * B v over the trailing block B = t[k+1.., k+1..]
        let m = n - k - 1;
        let mut p = Array1::<C64>::zeros(m);
        for i in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m {
                acc += t[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = tau * acc;
        }
        // K = tau/2 * v† p ; q_h = p - K v
        let mut vp = C64::new(0.0, 0.0);
        for i in 0..m {
            vp += v[i].conj() * p[i];
        }
        let kappa = 0.5 * tau * vp;
        let mut qh = Array1::<C64>::zeros(m);
        for i in 0..m {
            qh[i] = p[i] - kappa * v[i];
        }
        // B <- B - q_h v† - v q_h†
        for i in 0..m {
            for j in 0..m {
                let upd = qh[i] * v[j].conj() + v[i] * qh[j].conj();
                t[(k + 1 + i, k + 1 + j)] -= upd;
            }
        }
        // new subdiagonal entry and explicit zeros
        t[(k + 1, k)] = alpha;
        t[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            t[(i, k)] = C64::new(0.0, 0.0);
            t[(k, i)] = C64::new(0.0, 0.0);
        }
        // accumulate: q[:, k+1..] <- q[:, k+1..] (I - tau v v†)
        for row in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m {
                acc += q[(row, k + 1 + j)] * v[j];
            }
            acc *= tau;
            for j in 0..m {
                let upd = acc * v[j].conj();
                q[(row, k + 1 + j)] -= upd;
            }
        }
    }

    // Phase-rotate the subdiagonal real and non-negative: T' = D† T D.
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    let mut phase = C64::new(1.0, 0.0);
    for i in 0..n {
        d[i] = t[(i, i)].re;
    }
    for k in 0..n - 1 {
        let sub = t[(k + 1, k)];
        let mag = sub.norm();
        let new_phase = if mag > 0.0 {
            phase * (sub / mag)
        } else {
            phase
        };
        e[k] = mag;
        // scale eigenvector column k+1 by the cumulative phase
        for row in 0..n {
            q[(row, k + 1)] *= new_phase;
        }
        // q columns carry D; subsequent subdiagonals must be expressed
        // relative to the cumulative phase, which the product form handles
        // because T_{k+2,k+1} gets conj(d_{k+2}) d_{k+1} applied.
        phase = new_phase;
    }

    // The cumulative-phase bookkeeping above multiplies column k+1 by the
    // running product, matching T' = D† T D with d_0 = 1.
    tql2(&mut d, &mut e, &mut q)?;

    // Sort ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vecs = Array2::<C64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vecs[(row, new_col)] = q[(row, old_col)];
        }
    }
    Ok((vals, vecs))
}

/// Implicit-shift QL iteration on a real symmetric tridiagonal matrix,
/// rotating the complex eigenvector matrix `z` alongside.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Array2<C64>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::Instability(
                    "tridiagonal QL failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..z.nrows() {
                    f = z[(row, i + 1)].re;
                    let fi = z[(row, i + 1)].im;
                    let zi = z[(row, i)];
                    z[(row, i + 1)] = C64::new(s * zi.re + c * f, s * zi.im + c * fi);
                    z[(row, i)] = C64::new(c * zi.re - s * f, c * zi.im - s * fi);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Solve `a x = b` for a square complex system via LU with partial pivoting.
pub fn solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve: matrix {}x{}, rhs {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // pivot
        let mut pmax = lu[(col, col)].norm();
        let mut prow = col;
        for r in col + 1..n {
            let v = lu[(r, col)].norm();
            if v > pmax {
                pmax = v;
                prow = r;
            }
        }
        if pmax == 0.0 {
            return Err(Error::SingularSystem(format!(
                "zero pivot at column {col} of {n}"
            )));
        }
        if prow != col {
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(prow, c)];
                lu[(prow, c)] = tmp;
            }
            x.swap(col, prow);
            piv.swap(col, prow);
        }
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            for c in col + 1..n {
                let sub = factor * lu[(col, c)];
                lu[(r, c)] -= sub;
            }
            let sub = factor * x[col];
            x[r] -= sub;
        }
    }
    // back substitution
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in r + 1..n {
            acc -= lu[(r, c)] * x[c];
        }
        x[r] = acc / lu[(r, r)];
    }
    Ok(x)
}

/// Solve a small real symmetric system by Gaussian elimination with
/// partial pivoting (used by the Levenberg-Marquardt normal equations).
pub fn solve_real(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch("solve_real shape".into()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut prow = col;
        let mut pmax = m[(col, col)].abs();
        for r in col + 1..n {
            if m[(r, col)].abs() > pmax {
                pmax = m[(r, col)].abs();
                prow = r;
            }
        }
        if pmax == 0.0 {
            return Err(Error::SingularSystem("singular normal equations".into()));
        }
        if prow != col {
            for c in 0..n {
                let t = m[(col, c)];
                m[(col, c)] = m[(prow, c)];
                m[(prow, c)] = t;
            }
            x.swap(col, prow);
        }
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                let s = f * m[(col, c)];
                m[(r, c)] -= s;
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in r + 1..n {
            acc -= m[(r, c)] * x[c];
        }
        x[r] = acc / m[(r, r)];
    }
    Ok(x)
}

/// Invert a small real symmetric positive-definite matrix (covariances).
pub fn invert_real(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve_real(a, &e)?;
        for row in 0..n {
            out[(row, col)] = x[row];
        }
    }
    Ok(out)
}
