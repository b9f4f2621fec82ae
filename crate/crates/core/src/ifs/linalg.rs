//! Dense helpers for the small matrices that show up in similitudes
//! (ambient dimension is typically 1 to 3).

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub(crate) fn mat_mul(d: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub(crate) fn mat_vec(d: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| (0..d).map(|j| a[i * d + j] * x[j]).sum()).collect()
}

pub(crate) fn transpose(d: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[j * d + i] = a[i * d + j];
        }
    }
    t
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve(d: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| m[x * d + col].abs().total_cmp(&m[y * d + col].abs()))?;
        if m[piv * d + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..d {
                m.swap(piv * d + j, col * d + j);
            }
            rhs.swap(piv, col);
        }
        for row in col + 1..d {
            let f = m[row * d + col] / m[col * d + col];
            if f == 0.0 {
                continue;
            }
            for j in col..d {
                m[row * d + j] -= f * m[col * d + j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let s: f64 = (row + 1..d).map(|j| m[row * d + j] * x[j]).sum();
        x[row] = (rhs[row] - s) / m[row * d + row];
    }
    Some(x)
}

fn det(n: usize, a: &[f64]) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let Some(piv) =
            (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
        else {
            return 0.0;
        };
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
            }
            sign = -sign;
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for j in col..n {
                m[row * n + j] -= f * m[col * n + j];
            }
        }
    }
    sign * (0..n).map(|i| m[i * n + i]).product::<f64>()
}

/// Normal vector of the hyperplane spanned by `d - 1` direction vectors in
/// ℝᵈ (generalized cross product). Zero when the directions are dependent.
pub(crate) fn normal_of(d: usize, dirs: &[Vec<f64>]) -> Vec<f64> {
    debug_assert_eq!(dirs.len(), d - 1);
    if d == 1 {
        return vec![1.0];
    }
    let mut out = vec![0.0; d];
    let m = d - 1;
    let mut minor = vec![0.0; m * m];
    for (col, o) in out.iter_mut().enumerate() {
        for (r, dir) in dirs.iter().enumerate() {
            let mut c = 0;
            for (j, &v) in dir.iter().enumerate() {
                if j != col {
                    minor[r * m + c] = v;
                    c += 1;
                }
            }
        }
        let s = if col % 2 == 0 { 1.0 } else { -1.0 };
        *o = s * det(m, &minor);
    }
    out
}
