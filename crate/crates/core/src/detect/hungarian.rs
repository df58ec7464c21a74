//! Minimum-cost bipartite assignment (shortest augmenting paths with
//! potentials, O(n²m)).

use ndarray::Array2;

use crate::error::{Error, Result};

/// Optimal assignment of ground truths to predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(prediction, ground truth)` sorted by ground truth.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the matched costs, accumulated in ground-truth order.
    pub cost: f64,
}

/// Solves `rows <= cols` assignment; returns the column of every row.
fn solve(cost: &Array2<f64>) -> Vec<usize> {
    let (n, m) = cost.dim();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            col_of[p[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Globally optimal injective map from ground truths (columns of `cost`) to
/// predictions (rows). With more ground truths than predictions the surplus
/// ground truths stay unmatched.
pub fn hungarian_match(cost: &Array2<f64>) -> Result<Assignment> {
    let (n_pred, n_gt) = cost.dim();
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost"));
    }
    if n_pred == 0 || n_gt == 0 {
        return Ok(Assignment {
            pairs: vec![],
            cost: 0.0,
        });
    }
    // rows = ground truths, padded with expensive dummy predictions if needed
    let m = n_pred.max(n_gt);
    let big = 1.0 + (n_gt as f64 + 1.0) * cost.iter().fold(0.0f64, |a, &c| a.max(c.abs())) * 2.0;
    let t = Array2::from_shape_fn((n_gt, m), |(g, pr)| if pr < n_pred { cost[[pr, g]] } else { big });
    let col_of = solve(&t);
    let pairs: Vec<(usize, usize)> = col_of
        .iter()
        .enumerate()
        .filter(|(_, &pr)| pr < n_pred)
        .map(|(g, &pr)| (pr, g))
        .collect();
    let total = pairs.iter().fold(0.0, |acc, &(pr, g)| acc + cost[[pr, g]]);
    Ok(Assignment { pairs, cost: total })
}
