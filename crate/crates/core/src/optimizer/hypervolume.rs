//! Exact hypervolume by recursive slicing along the last objective.
//!
//! Minimization convention; only points strictly better than the reference
//! in every objective contribute. Exponential in the number of objectives
//! and cubic-ish in the point count for four objectives, which is fine for
//! fronts of a few hundred points.

/// Volume dominated by `points` and bounded by `reference`.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P], reference: &[f64]) -> f64 {
    let pts: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.as_ref().to_vec())
        .filter(|p| p.len() == reference.len() && p.iter().zip(reference).all(|(x, r)| x.is_finite() && x < r))
        .collect();
    slice(pts, reference)
}

fn slice(mut pts: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let d = reference.len();
    if d == 1 {
        let best = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return reference[0] - best;
    }
    pts.sort_by(|a, b| a[d - 1].partial_cmp(&b[d - 1]).expect("finite"));
    let mut volume = 0.0;
    for i in 0..pts.len() {
        let lower = pts[i][d - 1];
        let upper = if i + 1 < pts.len() { pts[i + 1][d - 1] } else { reference[d - 1] };
        if upper <= lower {
            continue;
        }
        let projected: Vec<Vec<f64>> = pts[..=i].iter().map(|p| p[..d - 1].to_vec()).collect();
        volume += (upper - lower) * slice(projected, &reference[..d - 1]);
    }
    volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_box() {
        assert!((hypervolume(&[[1.0, 1.0]], &[3.0, 4.0]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_staircase() {
        // Union of [1,3]x[2,3] and [2,3]x[1,3] = 2 + 2 - 1 = 3
        let v = hypervolume(&[[1.0, 2.0], [2.0, 1.0]], &[3.0, 3.0]);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn points_outside_reference_ignored() {
        assert_eq!(hypervolume(&[[5.0, 0.0]], &[3.0, 3.0]), 0.0);
        assert_eq!(hypervolume(&[[f64::INFINITY, 0.0]], &[3.0, 3.0]), 0.0);
    }

    /// Monte-Carlo-free grid oracle: count integer cells dominated by any
    /// point, for integer-valued points.
    fn cell_count(points: &[Vec<f64>], reference: &[f64]) -> f64 {
        let d = reference.len();
        let mut count = 0.0;
        let mut idx = vec![0usize; d];
        loop {
            let cell: Vec<f64> = idx.iter().map(|&k| k as f64).collect();
            if points.iter().any(|p| p.iter().zip(&cell).all(|(x, c)| x <= c)) {
                count += 1.0;
            }
            let mut g = 0;
            loop {
                if g == d {
                    return count;
                }
                idx[g] += 1;
                if (idx[g] as f64) < reference[g] {
                    break;
                }
                idx[g] = 0;
                g += 1;
            }
        }
    }

    #[test]
    fn matches_cell_counting_in_four_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reference = [6.0; 4];
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..4).map(|_| rng.gen_range(0..6) as f64).collect())
                .collect();
            let exact = hypervolume(&pts, &reference);
            assert!((exact - cell_count(&pts, &reference)).abs() < 1e-9);
        }
    }
}
