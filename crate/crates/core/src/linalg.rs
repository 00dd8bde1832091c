/// Solves the dense square system `a x = b` (row-major `a`, size `dim`) by
/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below `1e-12` times the largest entry of `a`.
pub(crate) fn solve_square(a: &[f64], b: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let tiny = 1e-12 * scale;
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&r, &s| m[r * dim + col].abs().total_cmp(&m[s * dim + col].abs()))
            .unwrap();
        if m[pivot * dim + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for k in 0..dim {
                m.swap(pivot * dim + k, col * dim + k);
            }
            rhs.swap(pivot, col);
        }
        let inv = 1.0 / m[col * dim + col];
        for row in col + 1..dim {
            let factor = m[row * dim + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                m[row * dim + k] -= factor * m[col * dim + k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut acc = rhs[row];
        for k in row + 1..dim {
            acc -= m[row * dim + k] * x[k];
        }
        x[row] = acc / m[row * dim + row];
    }
    Some(x)
}
