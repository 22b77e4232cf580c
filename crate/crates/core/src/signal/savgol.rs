use super::FilterSpec;
use crate::error::{Error, Result};

/// Convolution weights `c_{-k..=k}` of a Savitzky-Golay smoother: the value at
/// the window center of the least-squares polynomial of degree `order`.
pub fn savgol_coefficients(window: usize, order: usize) -> Result<Vec<f64>> {
    FilterSpec {
        sg_window: window,
        sg_order: order,
        ..FilterSpec::default()
    }
    .validate_smoothing()?;
    let half = (window - 1) / 2;
    if half == 0 {
        return Ok(vec![1.0]);
    }
    let terms = order + 1;
    // Abscissae scaled into [-1, 1] keep the moment matrix well conditioned.
    let t: Vec<f64> = (0..window)
        .map(|i| (i as f64 - half as f64) / half as f64)
        .collect();

    let mut moments = vec![0.0; 2 * order + 1];
    for &tj in &t {
        let mut p = 1.0;
        for m in moments.iter_mut() {
            *m += p;
            p *= tj;
        }
    }
    let mut normal = vec![vec![0.0; terms + 1]; terms];
    for (r, row) in normal.iter_mut().enumerate() {
        row[..terms].copy_from_slice(&moments[r..r + terms]);
        row[terms] = if r == 0 { 1.0 } else { 0.0 };
    }
    let v = solve_augmented(normal)?;

    Ok(t.iter()
        .map(|&tj| {
            let mut p = 1.0;
            let mut acc = 0.0;
            for vk in &v {
                acc += vk * p;
                p *= tj;
            }
            acc
        })
        .collect())
}

/// Gaussian elimination with partial pivoting on an `n x (n+1)` augmented matrix.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidSpec("singular Savitzky-Golay moment matrix".into()));
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (top, rest) = a.split_at_mut(row);
                for (x, p) in rest[0][col..=n].iter_mut().zip(&top[col][col..=n]) {
                    *x -= f * p;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = a[row][n];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Mirror index: `-1 -> 1`, `n -> n - 2` (edge sample not repeated).
fn mirror(i: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let r = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    r.clamp(0, last) as usize
}

/// Smooths `x` with `y'_i = sum_j c_j y_{i+j}`; edges are mirror padded so the
/// output has the input's length.
pub fn savitzky_golay(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.validate_smoothing()?;
    if x.len() < spec.sg_window {
        return Err(Error::RejectedInput(format!(
            "signal of length {} is shorter than the Savitzky-Golay window {}",
            x.len(),
            spec.sg_window
        )));
    }
    let coeffs = savgol_coefficients(spec.sg_window, spec.sg_order)?;
    let half = (spec.sg_window / 2) as isize;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        let interior = i >= half && i + half < n as isize;
        let acc = if interior {
            let start = (i - half) as usize;
            coeffs
                .iter()
                .zip(&x[start..start + spec.sg_window])
                .map(|(c, v)| c * v)
                .sum()
        } else {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * x[mirror(i + j as isize - half, n)])
                .sum()
        };
        out.push(acc);
    }
    Ok(out)
}
