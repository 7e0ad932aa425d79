//! Optimal one-to-one matching of eigenvalue sets (Hungarian algorithm).

use serde::{Deserialize, Serialize};

use crate::CVec;

/// Minimum-cost assignment of rows to distinct columns for a rectangular
/// cost matrix with rows ≤ columns. Returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // potentials-based O(n²m) version, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// ‖λ − μ‖₂ / max(1, ‖μ‖₂), μ being the reference.
pub fn relative_distance(lambda: &CVec, reference: &CVec) -> f64 {
    (lambda - reference).norm() / reference.norm().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMatch {
    /// (index in computed, index in reference, relative distance).
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_relative: f64,
    pub unmatched_computed: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
}

/// Optimal matching minimizing the total relative distance.
pub fn match_sets(computed: &[CVec], reference: &[CVec]) -> SetMatch {
    let flip = computed.len() > reference.len();
    let (rows, cols) = if flip { (reference, computed) } else { (computed, reference) };
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|a| {
            cols.iter()
                .map(|b| if flip { relative_distance(b, a) } else { relative_distance(a, b) })
                .collect()
        })
        .collect();
    let assign = hungarian(&cost);
    let mut pairs: Vec<(usize, usize, f64)> = assign
        .iter()
        .enumerate()
        .map(|(r, &c)| if flip { (c, r, cost[r][c]) } else { (r, c, cost[r][c]) })
        .collect();
    pairs.sort_by_key(|p| p.0);
    let max_relative = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    let unmatched_computed = (0..computed.len()).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
    let unmatched_reference = (0..reference.len()).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
    SetMatch {
        pairs,
        max_relative,
        unmatched_computed,
        unmatched_reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use nalgebra::dvector;

    #[test]
    fn hungarian_small_cases() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
        let rect = vec![vec![10.0, 1.0, 7.0], vec![1.0, 10.0, 7.0]];
        assert_eq!(hungarian(&rect), vec![1, 0]);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::Rng;
        let mut r = crate::rng::stream(1, 0);
        for _ in 0..30 {
            let n = 5;
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
            let a = hungarian(&cost);
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..n).collect();
            permute(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum());
            });
            assert!((got - best).abs() < 1e-12);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn set_matching_is_permutation_invariant() {
        let c = |a: f64, b: f64| dvector![C64::new(a, 0.0), C64::new(b, 0.0)];
        let a = vec![c(1.0, 2.0), c(3.0, 4.0), c(-1.0, 0.0)];
        let b = vec![c(3.0, 4.0 + 1e-9), c(-1.0, 0.0), c(1.0, 2.0)];
        let m = match_sets(&a, &b);
        assert_eq!(m.pairs.iter().map(|p| p.1).collect::<Vec<_>>(), vec![2, 0, 1]);
        assert!(m.max_relative < 1e-9);
        let short = match_sets(&a[..2], &b);
        assert_eq!(short.unmatched_reference, vec![1]);
        let long = match_sets(&b, &a[..2]);
        assert_eq!(long.unmatched_computed, vec![1]);
    }
}
