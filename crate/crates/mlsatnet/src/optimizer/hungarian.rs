//! Maximum-weight perfect matching on a square weight matrix.
//!
//! Kuhn-Munkres with vertex labels, O(k^3). Rows and columns are the
//! two endpoint sets; pairs that must never be matched carry
//! [`INADMISSIBLE_WEIGHT`], and a solution that cannot avoid such a
//! pair is reported as infeasible rather than returned.

use super::OptimizerError;

/// Weight assigned to forbidden pairs. Far below any physical link
/// weight, so a perfect matching uses one only when forced to.
pub const INADMISSIBLE_WEIGHT: f64 = -1.0e9;

#[derive(Debug, Clone)]
pub struct MtwmResult {
    /// Column matched to each row.
    pub match_of_row: Vec<usize>,
    /// Sum of matched weights.
    pub total_weight: f64,
    /// Row labels of the optimal dual; with the column labels they
    /// dominate every weight: la[i] + lb[j] >= w[i][j].
    pub row_labels: Vec<f64>,
    pub col_labels: Vec<f64>,
}

/// Solves max-weight perfect matching, reporting the matching, its
/// weight, and the optimal labels.
pub fn mtwm(weights: &[Vec<f64>]) -> Result<MtwmResult, OptimizerError> {
    let n = weights.len();
    if n == 0 || weights.iter().any(|r| r.len() != n) {
        return Err(OptimizerError::BadMatrix {
            rows: n,
            cols: weights.first().map_or(0, |r| r.len()),
        });
    }

    // Potential method on the negated matrix (minimization form), with
    // 1-based virtual indices; cost[i][j] = -w[i-1][j-1].
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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

    let mut match_of_row = vec![usize::MAX; n];
    for j in 1..=n {
        match_of_row[p[j] - 1] = j - 1;
    }
    let mut total_weight = 0.0;
    for (i, &j) in match_of_row.iter().enumerate() {
        let w = weights[i][j];
        if w <= INADMISSIBLE_WEIGHT / 2.0 {
            return Err(OptimizerError::NoPerfectMatching);
        }
        total_weight += w;
    }
    // Negate the minimization potentials back into labels that
    // dominate the original weights.
    let row_labels = (1..=n).map(|i| -u[i]).collect();
    let col_labels = (1..=n).map(|j| -v[j]).collect();
    Ok(MtwmResult {
        match_of_row,
        total_weight,
        row_labels,
        col_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_best(w: &[Vec<f64>]) -> f64 {
        fn rec(w: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if row == w.len() {
                if acc > *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..w.len() {
                if !used[j] {
                    used[j] = true;
                    rec(w, row + 1, used, acc + w[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(w, 0, &mut vec![false; w.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn two_by_two_picks_diagonal() {
        let w = vec![vec![0.5, 0.2], vec![0.3, 0.9]];
        let r = mtwm(&w).unwrap();
        assert_eq!(r.match_of_row, vec![0, 1]);
        assert!((r.total_weight - 1.4).abs() < 1e-12);
    }

    #[test]
    fn single_entry() {
        let r = mtwm(&[vec![0.7]]).unwrap();
        assert_eq!(r.match_of_row, vec![0]);
        assert!((r.total_weight - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square_and_empty() {
        assert!(matches!(
            mtwm(&[vec![1.0, 2.0]]),
            Err(OptimizerError::BadMatrix { rows: 1, cols: 2 })
        ));
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(
            mtwm(&empty),
            Err(OptimizerError::BadMatrix { rows: 0, cols: 0 })
        ));
    }

    #[test]
    fn matches_exhaustive_search_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let k = 2 + trial % 6;
            // Weights on a 1/1024 grid keep every matching sum exact in
            // floating point, so equality can be tested without tolerance.
            let w: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    (0..k)
                        .map(|_| rng.gen_range(0..=1024) as f64 / 1024.0)
                        .collect()
                })
                .collect();
            let got = mtwm(&w).unwrap().total_weight;
            let want = brute_force_best(&w);
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn labels_dominate_all_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = rng.gen_range(2..=7);
            let w: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..k).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let r = mtwm(&w).unwrap();
            for i in 0..k {
                for j in 0..k {
                    assert!(
                        r.row_labels[i] + r.col_labels[j] >= w[i][j] - 1e-9,
                        "label gap at ({i},{j})"
                    );
                }
            }
            // On matched edges the labels are tight, so their sum equals
            // the matching weight.
            let label_sum: f64 =
                r.row_labels.iter().sum::<f64>() + r.col_labels.iter().sum::<f64>();
            assert!((label_sum - r.total_weight).abs() < 1e-6);
        }
    }

    #[test]
    fn forced_inadmissible_row_is_infeasible() {
        let w = vec![
            vec![INADMISSIBLE_WEIGHT, INADMISSIBLE_WEIGHT],
            vec![0.4, 0.6],
        ];
        assert!(matches!(mtwm(&w), Err(OptimizerError::NoPerfectMatching)));
    }

    #[test]
    fn avoids_inadmissible_when_possible() {
        // Greedy on raw weights would take (0,1); the perfect matching
        // must route around the blocked (1,0) corner.
        let w = vec![vec![0.2, 0.9], vec![INADMISSIBLE_WEIGHT, 0.8]];
        let r = mtwm(&w).unwrap();
        assert_eq!(r.match_of_row, vec![0, 1]);
        assert!((r.total_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_weights_still_perfect() {
        let w = vec![vec![0.5; 4]; 4];
        let r = mtwm(&w).unwrap();
        let mut seen = vec![false; 4];
        for &j in &r.match_of_row {
            assert!(!seen[j]);
            seen[j] = true;
        }
        assert!((r.total_weight - 2.0).abs() < 1e-12);
    }
}
