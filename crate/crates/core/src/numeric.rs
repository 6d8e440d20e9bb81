//! Small numerical helpers shared across modules.

/// Compensated (Neumaier) running sum.
///
/// Log-values are accumulated over horizons of 1e5 steps and more; plain
/// summation loses several digits there.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a sequence.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// `log(sum(exp(x)))`, stable for large magnitudes. Returns `-inf` for an
/// empty input or when every term is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let tail = sum(values.iter().map(|&v| (v - max).exp()));
    max + tail.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First `count` primes, used as Halton bases.
fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().all(|p| !candidate.is_multiple_of(*p)) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Radical inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out
}

/// Halton sequence point `index` (1-based indices avoid the origin) in the
/// unit cube of dimension `dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    primes(dim).into_iter().map(|b| radical_inverse(index, b)).collect()
}

/// Maps a point of the unit cube `[0,1)^(n-1)` to the closed simplex of
/// dimension `n` by stick breaking with Beta(1, n-k) inverse CDFs. The map is
/// continuous and pushes the uniform measure to the uniform measure on the
/// simplex, so low-discrepancy inputs stay well spread.
pub fn cube_to_simplex(u: &[f64]) -> Vec<f64> {
    let n = u.len() + 1;
    let mut out = Vec::with_capacity(n);
    let mut remaining = 1.0;
    for (k, &uk) in u.iter().enumerate() {
        let fraction = 1.0 - (1.0 - uk).powf(1.0 / (n - k - 1) as f64);
        let piece = remaining * fraction;
        out.push(piece);
        remaining -= piece;
    }
    out.push(remaining.max(0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }

    #[test]
    fn cube_to_simplex_lands_on_simplex() {
        for i in 1..200 {
            let p = cube_to_simplex(&halton(i, 3));
            assert_eq!(p.len(), 4);
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
