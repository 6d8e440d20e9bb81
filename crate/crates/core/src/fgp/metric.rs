//! Computable surrogate for the distance between generators.
//!
//! `d(Phi, Psi) = sum_{m >= 1} 2^{-m} x_m / (1 + x_m)` where
//! `x_m = sup |Phi - Psi|` over `K_m = {p : p_i >= 1/m}`. The series is cut
//! at `m = METRIC_TRUNCATION` (tail below `2^{-16}`) and each supremum is
//! replaced by a maximum over a fixed deterministic point set of `K_m`.

use crate::error::{Error, Result};
use crate::numeric::{cube_to_simplex, halton};
use crate::simplex::SimplexPoint;

use super::GeneratingFunction;

pub const METRIC_TRUNCATION: usize = 16;
pub const METRIC_POINTS_PER_SET: usize = 512;

/// The point set used for `K_m` in dimension `n`: the vertices of `K_m`,
/// the barycenter, then Halton points mapped onto `K_m`. Empty when `m < n`
/// and just the barycenter when `m == n`.
pub fn metric_points(n: usize, m: usize) -> Vec<SimplexPoint> {
    if m < n {
        return Vec::new();
    }
    if m == n {
        return vec![SimplexPoint::barycenter(n)];
    }
    let base = 1.0 / m as f64;
    let span = 1.0 - n as f64 * base;
    let embed = |s: &[f64]| SimplexPoint::from_normalized(s.iter().map(|x| base + span * x).collect());
    let mut points: Vec<SimplexPoint> = (0..n).map(|i| embed(SimplexPoint::vertex(n, i).coords())).collect();
    points.push(SimplexPoint::barycenter(n));
    let mut index = 1u64;
    while points.len() < METRIC_POINTS_PER_SET {
        points.push(embed(&cube_to_simplex(&halton(index, n - 1))));
        index += 1;
    }
    points
}

/// Truncated, discretised distance between two generators of the same
/// dimension.
pub fn metric_d(phi: &GeneratingFunction, psi: &GeneratingFunction) -> Result<f64> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            got: psi.dim(),
        });
    }
    let n = phi.dim();
    let mut total = 0.0;
    for m in 1..=METRIC_TRUNCATION {
        let mut x: f64 = 0.0;
        for p in metric_points(n, m) {
            x = x.max((phi.eval(&p)? - psi.eval(&p)?).abs());
        }
        total += 0.5f64.powi(m as i32) * x / (1.0 + x);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgp::AffinePiece;

    #[test]
    fn point_sets_lie_in_their_regions() {
        for n in 2..=4 {
            for m in 1..=METRIC_TRUNCATION {
                let pts = metric_points(n, m);
                if m < n {
                    assert!(pts.is_empty());
                    continue;
                }
                if m > n {
                    assert_eq!(pts.len(), METRIC_POINTS_PER_SET);
                }
                for p in &pts {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(p.iter().all(|&x| x >= 1.0 / m as f64 - 1e-15));
                }
            }
        }
    }

    #[test]
    fn metric_is_zero_on_identical_and_symmetric() {
        let a = GeneratingFunction::threshold(0.3).unwrap();
        let b = GeneratingFunction::geometric_mean(SimplexPoint::new(vec![0.4, 0.6]).unwrap()).unwrap();
        assert_eq!(metric_d(&a, &a).unwrap(), 0.0);
        let ab = metric_d(&a, &b).unwrap();
        assert!(ab > 0.0 && ab < 1.0);
        assert_eq!(ab, metric_d(&b, &a).unwrap());
    }

    #[test]
    fn scaled_constants_coincide() {
        let one = GeneratingFunction::constant(2).unwrap();
        let other = GeneratingFunction::min_affine(vec![AffinePiece::new(vec![0.0, 0.0], 3.0)]).unwrap();
        // normalisation makes both identically one
        assert_eq!(metric_d(&one, &other).unwrap(), 0.0);
    }

    #[test]
    fn metric_rejects_dimension_mismatch() {
        let a = GeneratingFunction::constant(2).unwrap();
        let b = GeneratingFunction::constant(3).unwrap();
        assert!(metric_d(&a, &b).is_err());
    }

    #[test]
    fn metric_matches_hand_sum_for_tent_against_constant() {
        // tent at 1/2 is 2 min(p1, p2); on K_m its distance to 1 peaks at the
        // boundary vertex where min = 1/m, giving 1 - 2/m.
        let tent = GeneratingFunction::threshold(0.5).unwrap();
        let one = GeneratingFunction::constant(2).unwrap();
        let mut expected = 0.0;
        for m in 2..=METRIC_TRUNCATION {
            let x = 1.0 - 2.0 / m as f64;
            expected += 0.5f64.powi(m as i32) * x / (1.0 + x);
        }
        assert!((metric_d(&tent, &one).unwrap() - expected).abs() < 1e-14);
    }
}
