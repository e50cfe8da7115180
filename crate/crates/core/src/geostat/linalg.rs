//! Dense LU solve with partial pivoting, sized for kriging systems of a few
//! hundred unknowns.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// Solves `a · x = b` for a row-major `n × n` matrix. One round of iterative
/// refinement is applied to the result.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>, Singular> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix is not n × n");
    let lu = Lu::factor(a, n)?;
    let mut x = lu.apply(b);
    // r = b - a·x, then x += a⁻¹·r
    let residual: Vec<f64> = (0..n)
        .map(|i| {
            let row = &a[i * n..(i + 1) * n];
            b[i] - row.iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>()
        })
        .collect();
    let correction = lu.apply(&residual);
    for (xi, ci) in x.iter_mut().zip(correction) {
        *xi += ci;
    }
    Ok(x)
}

struct Lu {
    n: usize,
    m: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &[f64], n: usize) -> Result<Self, Singular> {
        let mut m = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(Singular);
        }
        let tiny = scale * 1e-13;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, m[i * n + k].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty pivot column");
            if pivot <= tiny {
                return Err(Singular);
            }
            if p != k {
                for j in 0..n {
                    m.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let diag = m[k * n + k];
            for i in k + 1..n {
                let f = m[i * n + k] / diag;
                m[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        m[i * n + j] -= f * m[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, m, perm })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.m[i * n + j] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.m[i * n + j] * y[j];
            }
            y[i] = s / self.m[i * n + i];
        }
        y
    }
}
