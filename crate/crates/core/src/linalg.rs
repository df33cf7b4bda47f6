//! Small dense kernels: 2×2 Cholesky, 2×2 Lyapunov equations, 3×3 solves.

use crate::error::{Error, Result};
use crate::field::Sym2;

/// Lower-triangular `L` with `L Lᵀ = m`; `None` unless `m` is positive definite.
pub fn cholesky2(m: Sym2) -> Option<[[f64; 2]; 2]> {
    if !(m.a11 > 0.0) {
        return None;
    }
    let l11 = m.a11.sqrt();
    let l21 = m.a12 / l11;
    let d = m.a22 - l21 * l21;
    if !(d > 0.0) {
        return None;
    }
    Some([[l11, 0.0], [l21, d.sqrt()]])
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
pub fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Symmetric `B` solving `Jᵀ B + B J = I` for a 2×2 Jacobian `J`.
pub fn lyapunov2(j: [[f64; 2]; 2]) -> Result<Sym2> {
    let [[j11, j12], [j21, j22]] = j;
    // unknowns (b11, b12, b22); rows are the (1,1), (1,2), (2,2) entries
    let a = [
        [2.0 * j11, 2.0 * j21, 0.0],
        [j12, j11 + j22, j21],
        [0.0, 2.0 * j12, 2.0 * j22],
    ];
    let x = solve3(a, [1.0, 0.0, 1.0])
        .ok_or_else(|| Error::InvalidArgument("Lyapunov equation is singular".into()))?;
    Ok(Sym2::new(x[0], x[1], x[2]))
}

/// Eigenvalues of a real 2×2 matrix as `(re, im)` pairs.
pub fn eigenvalues2(j: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(tr / 2.0 - s, 0.0), (tr / 2.0 + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(tr / 2.0, -s), (tr / 2.0, s)]
    }
}
