//! Exact maxima of `sum_k P_k log(x . R_k)` over the simplex grid
//! `{a / N : a in Z^n, a >= 0, sum a = N}`, used as an independent check on
//! the log-optimal solver.
//!
//! [`grid_max`] gives the same answer as visiting every grid point but prunes
//! boxes of grid points with a supporting-hyperplane bound: for concave `f`,
//! `f(y) <= f(c) + grad f(c) . (y - c)` for any `c`, and the right side is
//! maximised over a box intersected with the simplex by filling the largest
//! gradient coordinates first.

use crate::ldp::expected_log_return;
use crate::numeric::dot;

/// Best grid point found and its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMax {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Number of grid points evaluated.
    pub evaluated: u64,
}

fn objective(a: &[u64], n_total: u64, probs: &[f64], returns: &[Vec<f64>]) -> f64 {
    let x: Vec<f64> = a.iter().map(|&v| v as f64 / n_total as f64).collect();
    expected_log_return(&x, probs, returns)
}

/// Visits every grid point.
pub fn grid_max_naive(probs: &[f64], returns: &[Vec<f64>], resolution: u64) -> GridMax {
    let n = returns[0].len();
    let mut best = GridMax {
        weights: Vec::new(),
        objective: f64::NEG_INFINITY,
        evaluated: 0,
    };
    let mut a = vec![0u64; n];
    visit_box(&mut a, 0, resolution, &vec![0; n], &vec![resolution; n], &mut |point| {
        let f = objective(point, resolution, probs, returns);
        best.evaluated += 1;
        if f > best.objective {
            best.objective = f;
            best.weights = point.iter().map(|&v| v as f64 / resolution as f64).collect();
        }
    });
    best
}

/// Calls `visit` on every integer point of the box `[lo, hi]` with
/// coordinate sum `remaining` over positions `i..`.
fn visit_box(a: &mut [u64], i: usize, remaining: u64, lo: &[u64], hi: &[u64], visit: &mut impl FnMut(&[u64])) {
    let n = a.len();
    if i == n - 1 {
        if remaining >= lo[i] && remaining <= hi[i] {
            a[i] = remaining;
            visit(a);
        }
        return;
    }
    let rest_lo: u64 = lo[i + 1..].iter().sum();
    let rest_hi: u64 = hi[i + 1..].iter().sum();
    let from = lo[i].max(remaining.saturating_sub(rest_hi));
    let to = hi[i].min(remaining.saturating_sub(rest_lo));
    if remaining < rest_lo {
        return;
    }
    for v in from..=to {
        a[i] = v;
        visit_box(a, i + 1, remaining - v, lo, hi, visit);
    }
}

fn box_size_at_most(lo: &[u64], hi: &[u64], limit: u64) -> bool {
    let mut size = 1u64;
    for (l, h) in lo.iter().zip(hi) {
        size = size.saturating_mul(h - l + 1);
        if size > limit {
            return false;
        }
    }
    true
}

/// Same maximum as [`grid_max_naive`], found by branch and bound.
pub fn grid_max(probs: &[f64], returns: &[Vec<f64>], resolution: u64) -> GridMax {
    let n = returns[0].len();
    let scale = resolution as f64;
    let mut best = GridMax {
        weights: Vec::new(),
        objective: f64::NEG_INFINITY,
        evaluated: 0,
    };
    let mut stack: Vec<(Vec<u64>, Vec<u64>)> = vec![(vec![0; n], vec![resolution; n])];
    while let Some((lo, hi)) = stack.pop() {
        let sum_lo: u64 = lo.iter().sum();
        let sum_hi: u64 = hi.iter().sum();
        if sum_lo > resolution || sum_hi < resolution {
            continue;
        }
        if box_size_at_most(&lo, &hi, 64) {
            let mut a = vec![0u64; n];
            visit_box(&mut a, 0, resolution, &lo, &hi, &mut |point| {
                let f = objective(point, resolution, probs, returns);
                best.evaluated += 1;
                if f > best.objective {
                    best.objective = f;
                    best.weights = point.iter().map(|&v| v as f64 / scale).collect();
                }
            });
            continue;
        }
        // A point of the box on the simplex: move each lower bound by the
        // same fraction of its width.
        let width: u64 = sum_hi - sum_lo;
        let frac = (resolution - sum_lo) as f64 / width as f64;
        let c: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| (l as f64 + frac * (h - l) as f64) / scale)
            .collect();
        let fc = expected_log_return(&c, probs, returns);
        let mut g = vec![0.0; n];
        for (pk, r) in probs.iter().zip(returns) {
            let s = pk / dot(&c, r);
            g.iter_mut().zip(r).for_each(|(gi, ri)| *gi += s * ri);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| g[j].total_cmp(&g[i]));
        let mut y: Vec<f64> = lo.iter().map(|&l| l as f64 / scale).collect();
        let mut left = (resolution - sum_lo) as f64 / scale;
        for &i in &order {
            let room = (hi[i] - lo[i]) as f64 / scale;
            let take = room.min(left);
            y[i] += take;
            left -= take;
        }
        let bound = fc + dot(&g, &y) - dot(&g, &c);
        if bound <= best.objective + 1e-13 * (1.0 + best.objective.abs()) {
            continue;
        }
        if best.objective == f64::NEG_INFINITY {
            // seed the incumbent with the rounded centre
            let mut a: Vec<u64> = c.iter().map(|v| (v * scale).floor() as u64).collect();
            a.iter_mut().zip(&lo).for_each(|(v, &l)| *v = (*v).max(l));
            let mut deficit = resolution as i64 - a.iter().sum::<u64>() as i64;
            for i in 0..n {
                while deficit > 0 && a[i] < hi[i] {
                    a[i] += 1;
                    deficit -= 1;
                }
            }
            if deficit == 0 {
                best.objective = objective(&a, resolution, probs, returns);
                best.weights = a.iter().map(|&v| v as f64 / scale).collect();
                best.evaluated += 1;
            }
        }
        let i = (0..n).max_by_key(|&i| hi[i] - lo[i]).unwrap();
        let mid = (lo[i] + hi[i]) / 2;
        let mut hi_left = hi.clone();
        hi_left[i] = mid;
        let mut lo_right = lo.clone();
        lo_right[i] = mid + 1;
        // explore the half containing the larger gradient direction last so
        // it is popped first
        let left_box = (lo, hi_left);
        let right_box = (lo_right, hi);
        if g[i] >= g.iter().sum::<f64>() / n as f64 {
            stack.push(left_box);
            stack.push(right_box);
        } else {
            stack.push(right_box);
            stack.push(left_box);
        }
    }
    best
}
