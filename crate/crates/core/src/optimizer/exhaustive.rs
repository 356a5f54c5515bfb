//! Brute-force enumeration of a discretized instance.
//!
//! Every gene takes one of `points` evenly spaced values in `[0, budget]`.
//! Combinations over any budget are skipped (no repair), infeasible ones are
//! dropped, and the rest are folded into an archive that keeps only
//! non-dominated objective vectors. Cost grows as `points^(4 * slices)`, so
//! this is only meant for toy instances.

use super::{OptimizerError, Problem};

/// A point of the exhaustive front.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivePoint {
    pub genes: Vec<f64>,
    pub objectives: [f64; 4],
}

fn weakly_better(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Exact non-dominated set of all feasible grid allocations. Points with
/// identical objective vectors are kept once (the first enumerated).
pub fn exhaustive_front(problem: &Problem, points: usize) -> Result<Vec<ArchivePoint>, OptimizerError> {
    if points < 2 {
        return Err(OptimizerError::InvalidProblem("grid needs at least 2 points".into()));
    }
    let n = problem.gene_count();
    let limits = problem.budget.as_array();
    let values: Vec<Vec<f64>> = (0..4)
        .map(|d| (0..points).map(|k| limits[d] * k as f64 / (points - 1) as f64).collect())
        .collect();
    let mut archive: Vec<ArchivePoint> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let genes: Vec<f64> = idx.iter().enumerate().map(|(g, &k)| values[g % 4][k]).collect();
        let over = (0..4).any(|d| {
            let sum: f64 = (0..problem.slices.len()).map(|i| genes[4 * i + d]).sum();
            sum > limits[d] * (1.0 + 1e-12)
        });
        if !over {
            let kpis = problem.kpis(&genes)?;
            if problem.violations(&kpis).is_empty() {
                let objectives = crate::kpi::objectives_from_kpis(kpis.iter().map(|(_, k)| k));
                if !archive.iter().any(|p| weakly_better(&p.objectives, &objectives)) {
                    archive.retain(|p| !weakly_better(&objectives, &p.objectives));
                    archive.push(ArchivePoint { genes, objectives });
                }
            }
        }
        // Odometer increment over all genes.
        let mut g = 0;
        loop {
            if g == n {
                return Ok(archive);
            }
            idx[g] += 1;
            if idx[g] < points {
                break;
            }
            idx[g] = 0;
            g += 1;
        }
    }
}
