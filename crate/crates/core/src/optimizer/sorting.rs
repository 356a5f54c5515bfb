//! Pareto dominance, fast non-dominated sorting and crowding distance.
//!
//! All objectives are minimized. Components may be `+inf`; NaN is not allowed.

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Splits `points` into successive non-dominated fronts of indices.
/// Indices inside a front are ascending.
pub fn non_dominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(b, a) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point within one front.
///
/// Points holding the minimum or maximum value of any objective get `+inf`.
/// Interior points accumulate `(next distinct value - previous distinct
/// value) / range` per objective. Working on distinct values makes the
/// result equivariant under permutation of the input, ties included.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let dims = front[0].as_ref().len();
    let mut dist = vec![0.0f64; n];
    for d in 0..dims {
        let mut values: Vec<f64> = front.iter().map(|p| p.as_ref()[d]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("objective values must not be NaN"));
        values.dedup();
        let (lo, hi) = (values[0], values[values.len() - 1]);
        let range = hi - lo;
        for (i, p) in front.iter().enumerate() {
            let v = p.as_ref()[d];
            if v == lo || v == hi {
                dist[i] = f64::INFINITY;
                continue;
            }
            if !range.is_finite() || range <= 0.0 {
                continue;
            }
            let pos = values.partition_point(|x| *x < v);
            let (prev, next) = (values[pos - 1], values[pos + 1]);
            dist[i] += (next - prev) / range;
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Peels fronts by brute force: front k is the set of points not
    /// dominated by any remaining point.
    fn brute_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| j != i && dominates(&points[j], &points[i])))
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn strict_domination() {
        assert_eq!(non_dominated_sort(&[[1.0, 1.0], [2.0, 2.0]]), vec![vec![0], vec![1]]);
    }

    #[test]
    fn two_incomparable_and_one_dominated() {
        let pts = [[1.0, 2.0], [2.0, 1.0], [3.0, 3.0]];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn empty_input() {
        let pts: Vec<Vec<f64>> = Vec::new();
        assert!(non_dominated_sort(&pts).is_empty());
        assert!(crowding_distance(&pts).is_empty());
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..4).map(|_| rng.gen_range(0..6) as f64).collect())
                .collect();
            assert_eq!(non_dominated_sort(&pts), brute_fronts(&pts));
        }
    }

    #[test]
    fn infinite_components_sort() {
        let pts = [[0.0, f64::INFINITY], [0.0, 1.0], [1.0, f64::INFINITY]];
        assert_eq!(non_dominated_sort(&pts), vec![vec![1], vec![0], vec![2]]);
    }

    #[test]
    fn crowding_single_point() {
        assert_eq!(crowding_distance(&[[3.0, 4.0]]), vec![f64::INFINITY]);
    }

    #[test]
    fn crowding_collinear() {
        let d = crowding_distance(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]);
        assert_eq!(d, vec![f64::INFINITY, 2.0, f64::INFINITY]);
    }

    proptest! {
        #[test]
        fn crowding_is_permutation_equivariant(
            pts in prop::collection::vec(prop::collection::vec(0u8..5, 3), 1..12),
            seed in any::<u64>(),
        ) {
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
            let base = crowding_distance(&pts);
            let moved = crowding_distance(&permuted);
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(moved[k], base[i]);
            }
        }

        #[test]
        fn later_fronts_are_dominated_by_previous(
            pts in prop::collection::vec(prop::collection::vec(0u8..6, 4), 1..25),
        ) {
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            let fronts = non_dominated_sort(&pts);
            prop_assert_eq!(fronts.iter().map(Vec::len).sum::<usize>(), pts.len());
            for w in fronts.windows(2) {
                for &j in &w[1] {
                    prop_assert!(w[0].iter().any(|&i| dominates(&pts[i], &pts[j])));
                }
            }
            for &i in &fronts[0] {
                prop_assert!(!pts.iter().any(|q| dominates(q, &pts[i])));
            }
        }
    }
}
