use crate::{Error, Result};

/// `perm[job] = worker`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub perm: Vec<usize>,
}

impl Assignment {
    pub fn cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.perm.iter().enumerate().map(|(j, &w)| cost[j][w]).sum()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        self.perm.iter().all(|&w| w < seen.len() && !std::mem::replace(&mut seen[w], true))
    }
}

/// Minimum-cost perfect matching by the shortest-augmenting-path form of the
/// Hungarian method with row/column potentials, O(n^3). Rows are inserted in
/// index order and ties pick the smallest column index.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Assignment, f64)> {
    let n = cost.len();
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::shape("cost matrix must be square"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::domain("costs must be finite"));
    }
    if n == 0 {
        return Ok((Assignment { perm: Vec::new() }, 0.0));
    }
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    let assignment = Assignment { perm };
    let total = assignment.cost(cost);
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identity_favoring() {
        let cost: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let (a, c) = hungarian(&cost).unwrap();
        assert_eq!(a.perm, vec![0, 1, 2, 3, 4]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn constant_matrix_returns_identity() {
        for n in 1..8 {
            let cost = vec![vec![2.5; n]; n];
            let (a, c) = hungarian(&cost).unwrap();
            assert_eq!(a.perm, (0..n).collect::<Vec<_>>());
            assert_eq!(c, 2.5 * n as f64);
        }
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = seeded(77);
        for trial in 0..1000 {
            let n = 1 + trial % 6;
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-5.0..10.0)).collect())
                .collect();
            let (a, c) = hungarian(&cost).unwrap();
            assert!(a.is_permutation());
            let best = permutations(n)
                .into_iter()
                .map(|p| Assignment { perm: p }.cost(&cost))
                .fold(f64::INFINITY, f64::min);
            assert!((c - best).abs() < 1e-9, "trial {trial}: {c} vs {best}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian(&[vec![1.0, 2.0]]).is_err());
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
    }
}
