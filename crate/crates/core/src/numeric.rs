//! Small dense helpers shared by the quadrature and Monte Carlo code.

/// Neumaier-compensated accumulator. Summing the same sequence in the same
/// order always yields the same bits, which the parallel reductions rely on.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Determinant of a small square matrix given in
/// row-major order, by Gaussian elimination with partial pivoting.
pub fn small_det(mut a: Vec<f64>, dim: usize) -> f64 {
    debug_assert_eq!(a.len(), dim * dim);
    let mut det = 1.0;
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i * dim + col].abs().total_cmp(&a[j * dim + col].abs()))
            .unwrap();
        if a[pivot * dim + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..dim {
                a.swap(pivot * dim + k, col * dim + k);
            }
            det = -det;
        }
        let p = a[col * dim + col];
        det *= p;
        for row in col + 1..dim {
            let factor = a[row * dim + col] / p;
            if factor != 0.0 {
                for k in col..dim {
                    a[row * dim + k] -= factor * a[col * dim + k];
                }
            }
        }
    }
    det
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Volume of the round unit sphere S^k.
pub fn sphere_volume(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_volume(k - 2),
    }
}

/// The integral of sin^d over [0, pi].
pub fn wallis_integral(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => PI,
        1 => 2.0,
        _ => (d as f64 - 1.0) / d as f64 * wallis_integral(d - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1e16, 1.0, -1e16];
        values.extend(std::iter::repeat(1e-3).take(1000));
        assert!((compensated_sum(values) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_of_known_matrices() {
        assert_eq!(small_det(vec![2.0, 0.0, 0.0, 3.0], 2), 6.0);
        let a = vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 5.0];
        assert!((small_det(a, 3) + 5.0).abs() < 1e-15);
        assert_eq!(small_det(vec![1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn sphere_volumes_match_closed_forms() {
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_volume(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wallis_values() {
        assert_eq!(wallis_integral(1), 2.0);
        assert!((wallis_integral(3) - 4.0 / 3.0).abs() < 1e-15);
        assert!((wallis_integral(2) - PI / 2.0).abs() < 1e-15);
    }
}
