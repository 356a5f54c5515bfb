use super::sorting::{crowding_distance, dominates, non_dominated_sort};
use super::{GlobalBudget, NsgaParams, Offer, OptimizerError, ParetoFront, Problem, Violation};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::cmp::Ordering;

/// One candidate allocation with its cached evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    /// `4 * slices` genes laid out as `(b, c, p, s)` per slice.
    pub genes: Vec<f64>,
    pub objectives: [f64; 4],
    pub feasible: bool,
    /// Sum of normalized clause violations; 0 when feasible.
    pub violation: f64,
    pub first_violation: Option<String>,
    pub rank: usize,
    pub crowding: f64,
}

/// Scales each resource dimension whose slice sum exceeds its budget by
/// `budget / sum`. Dimensions within budget are left alone.
pub fn repair(genes: &[f64], budget: &GlobalBudget) -> Vec<f64> {
    assert_eq!(genes.len() % 4, 0, "gene vector must hold whole slices");
    let slices = genes.len() / 4;
    let limits = budget.as_array();
    let mut out = genes.to_vec();
    for (d, limit) in limits.iter().enumerate() {
        let sum: f64 = (0..slices).map(|i| genes[4 * i + d]).sum();
        if sum > *limit {
            let scale = limit / sum;
            for i in 0..slices {
                out[4 * i + d] = genes[4 * i + d] * scale;
            }
        }
    }
    out
}

/// Computes objectives and feasibility for `genes`.
pub fn evaluate(problem: &Problem, genes: Vec<f64>) -> Result<Individual, OptimizerError> {
    let kpis = problem.kpis(&genes)?;
    let objectives = crate::kpi::objectives_from_kpis(kpis.iter().map(|(_, k)| k));
    let mut violations: Vec<Violation> = problem.violations(&kpis);
    if !problem.within_budget(&genes) {
        violations.push(Violation { slice: problem.slices[0].class, bound: "global_budget", limit: 0.0, achieved: 1.0 });
    }
    Ok(Individual {
        genes,
        objectives,
        feasible: violations.is_empty(),
        violation: violations.iter().map(Violation::magnitude).sum(),
        first_violation: violations.first().map(ToString::to_string),
        rank: usize::MAX,
        crowding: 0.0,
    })
}

struct Grid {
    steps: [f64; 4],
    points: usize,
}

impl Grid {
    fn new(budget: &GlobalBudget, points: usize) -> Self {
        let b = budget.as_array();
        let n = (points - 1) as f64;
        Self { steps: [b[0] / n, b[1] / n, b[2] / n, b[3] / n], points }
    }

    fn snap_nearest(&self, genes: &mut [f64]) {
        for (g, v) in genes.iter_mut().enumerate() {
            let step = self.steps[g % 4];
            let k = (*v / step).round().clamp(0.0, (self.points - 1) as f64);
            *v = k * step;
        }
    }

    fn snap_floor(&self, genes: &mut [f64]) {
        for (g, v) in genes.iter_mut().enumerate() {
            let step = self.steps[g % 4];
            // Tolerance keeps exact grid values from dropping a step.
            let k = (*v / step + 1e-9).floor().clamp(0.0, (self.points - 1) as f64);
            *v = k * step;
        }
    }
}

/// Ordering used for tournaments and survival: feasible before infeasible,
/// then rank and crowding for feasible, total violation for infeasible.
fn compare(a: &Individual, b: &Individual) -> Ordering {
    match (a.feasible, b.feasible) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => a
            .rank
            .cmp(&b.rank)
            .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal)),
        (false, false) => a.violation.partial_cmp(&b.violation).unwrap_or(Ordering::Equal),
    }
}

/// Assigns rank and crowding in place. Infeasible individuals share the
/// last rank with zero crowding.
fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].feasible).collect();
    let points: Vec<[f64; 4]> = feasible.iter().map(|&i| pop[i].objectives).collect();
    let fronts = non_dominated_sort(&points);
    for (r, front) in fronts.iter().enumerate() {
        let objs: Vec<[f64; 4]> = front.iter().map(|&k| points[k]).collect();
        let crowd = crowding_distance(&objs);
        for (pos, &k) in front.iter().enumerate() {
            let ind = &mut pop[feasible[k]];
            ind.rank = r;
            ind.crowding = crowd[pos];
        }
    }
    let last = fronts.len();
    for ind in pop.iter_mut().filter(|i| !i.feasible) {
        ind.rank = last;
        ind.crowding = 0.0;
    }
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
    let i = rng.gen_range(0..pop.len());
    let j = rng.gen_range(0..pop.len());
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    match compare(&pop[hi], &pop[lo]) {
        Ordering::Less => &pop[hi],
        _ => &pop[lo],
    }
}

/// Smallest per-slice bandwidth meeting each clause's throughput and latency
/// floor, with every other resource at zero. Used to seed tight phases.
fn minimal_allocation(problem: &Problem) -> Vec<f64> {
    let mut genes = vec![0.0; problem.gene_count()];
    for (i, spec) in problem.slices.iter().enumerate() {
        let Some(clause) = problem.clauses.iter().find(|c| c.slice == spec.class) else {
            continue;
        };
        let mut lo = 0.0;
        let mut hi = problem.budget.b_max;
        let meets = |b: f64| {
            let t = problem.model.throughput(b, spec.mcs).unwrap_or(0.0);
            let l = problem.model.latency(b, spec.mcs, spec.class).unwrap_or(f64::INFINITY);
            clause.min_throughput_mbps.map_or(true, |m| t >= m) && clause.max_latency_ms.map_or(true, |m| l <= m)
        };
        if !meets(hi) {
            genes[4 * i] = hi;
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if meets(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        genes[4 * i] = hi;
    }
    genes
}

/// Runs NSGA-II and returns the feasible non-dominated set of the final
/// population, deduplicated and ordered by descending aggregate throughput
/// (then ascending remaining objectives). Offer ids are 1-based in that order.
pub fn run_nsga2(problem: &Problem, params: &NsgaParams) -> Result<ParetoFront, OptimizerError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let budget = problem.budget;
    let limits = budget.as_array();
    let grid = params.grid_points.map(|n| Grid::new(&budget, n));
    let n_genes = problem.gene_count();
    let mut evaluations = 0usize;

    let finish = |mut genes: Vec<f64>| {
        if let Some(g) = &grid {
            g.snap_nearest(&mut genes);
        }
        let mut genes = repair(&genes, &budget);
        if let Some(g) = &grid {
            g.snap_floor(&mut genes);
        }
        genes
    };

    let mut pop = Vec::with_capacity(params.population);
    for _ in 0..params.population {
        let genes: Vec<f64> = (0..n_genes).map(|g| rng.gen_range(0.0..=limits[g % 4])).collect();
        pop.push(evaluate(problem, finish(genes))?);
        evaluations += 1;
    }
    if !pop.iter().any(|i| i.feasible) {
        let seeded = evaluate(problem, finish(minimal_allocation(problem)))?;
        evaluations += 1;
        tracing::debug!(feasible = seeded.feasible, "seeded minimal allocation");
        let last = pop.len() - 1;
        pop[last] = seeded;
    }
    assign_rank_and_crowding(&mut pop);

    let sigmas: Vec<Normal<f64>> = (0..4)
        .map(|d| Normal::new(0.0, params.mutation_sigma[d] * limits[d]).expect("sigma is finite"))
        .collect();

    for _ in 0..params.generations {
        let mut offspring = Vec::with_capacity(params.population);
        while offspring.len() < params.population {
            let mut a = tournament(&pop, &mut rng).genes.clone();
            let mut b = tournament(&pop, &mut rng).genes.clone();
            if rng.gen_bool(params.p_crossover) {
                for g in 0..n_genes {
                    if rng.gen_bool(0.5) {
                        std::mem::swap(&mut a[g], &mut b[g]);
                    }
                }
            }
            for child in [a, b] {
                let mut child = child;
                for (g, v) in child.iter_mut().enumerate() {
                    if rng.gen_bool(params.p_mutation) {
                        *v = (*v + sigmas[g % 4].sample(&mut rng)).abs();
                    }
                }
                offspring.push(evaluate(problem, finish(child))?);
                evaluations += 1;
            }
        }
        pop.extend(offspring);
        assign_rank_and_crowding(&mut pop);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&i, &j| compare(&pop[i], &pop[j]).then(i.cmp(&j)));
        // Exact duplicates survive only after every distinct individual.
        let mut seen: Vec<&[f64]> = Vec::with_capacity(order.len());
        let (mut unique, mut dupes) = (Vec::with_capacity(order.len()), Vec::new());
        for &i in &order {
            if seen.contains(&pop[i].genes.as_slice()) {
                dupes.push(i);
            } else {
                seen.push(&pop[i].genes);
                unique.push(i);
            }
        }
        unique.extend(dupes);
        let mut order = unique;
        order.truncate(params.population);
        order.sort_unstable();
        let mut keep = vec![false; pop.len()];
        for i in order {
            keep[i] = true;
        }
        let mut k = 0;
        pop.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        assign_rank_and_crowding(&mut pop);
    }

    let mut front: Vec<&Individual> = pop.iter().filter(|i| i.feasible && i.rank == 0).collect();
    if front.is_empty() {
        let best = pop
            .iter()
            .min_by(|a, b| a.violation.partial_cmp(&b.violation).unwrap_or(Ordering::Equal))
            .expect("population is non-empty");
        return Err(OptimizerError::Infeasible {
            clause: best.first_violation.clone().unwrap_or_else(|| "no feasible allocation".into()),
        });
    }
    front.sort_by(|a, b| {
        a.objectives
            .iter()
            .zip(&b.objectives)
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.genes.partial_cmp(&b.genes).unwrap_or(Ordering::Equal))
    });
    let mut offers: Vec<Offer> = Vec::with_capacity(front.len());
    let mut kept: Vec<&Individual> = Vec::with_capacity(front.len());
    for ind in front {
        let offer = to_offer(problem, ind, offers.len() as u32 + 1)?;
        if offers.iter().any(|o| o.per_slice == offer.per_slice) {
            continue;
        }
        debug_assert!(!kept.iter().any(|k| dominates(&k.objectives, &ind.objectives)));
        offers.push(offer);
        kept.push(ind);
    }
    let crowding = crowding_distance(&kept.iter().map(|i| i.objectives).collect::<Vec<_>>());
    let n = offers.len();
    if !(20..=40).contains(&n) {
        tracing::info!(front = n, "front size outside the usual 20-40 range");
    }
    Ok(ParetoFront { offers, crowding, generations: params.generations, evaluations })
}

fn to_offer(problem: &Problem, ind: &Individual, id: u32) -> Result<Offer, OptimizerError> {
    let kpis = problem.kpis(&ind.genes)?;
    Ok(Offer {
        id,
        per_slice: kpis.iter().map(|(a, k)| (a.class, *k)).collect(),
        per_slice_resources: kpis.iter().map(|(a, _)| (a.class, a.resources)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::{KpiModel, KpiModelParams, SliceClass};
    use crate::optimizer::{SlaClause, SliceSpec};

    fn budget() -> GlobalBudget {
        GlobalBudget { b_max: 40.0, c_max: 60.0, p_max: 40.0, s_max: 120.0 }
    }

    #[test]
    fn repair_identity_within_budget() {
        let g = vec![10.0, 1.0, 1.0, 1.0, 10.0, 1.0, 1.0, 1.0, 10.0, 1.0, 1.0, 1.0];
        assert_eq!(repair(&g, &budget()), g);
    }

    #[test]
    fn repair_scales_bandwidth() {
        let g = vec![30.0, 0.0, 0.0, 0.0, 20.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0];
        let r = repair(&g, &budget());
        assert!((r[0] - 20.0).abs() < 1e-12);
        assert!((r[4] - 40.0 / 3.0).abs() < 1e-12);
        assert!((r[8] - 20.0 / 3.0).abs() < 1e-12);
        assert!((r[0] + r[4] + r[8] - 40.0).abs() < 1e-12);
    }

    #[test]
    fn repair_zero_vector() {
        let g = vec![0.0; 12];
        assert_eq!(repair(&g, &budget()), g);
    }

    #[test]
    fn evaluate_zero_allocation_is_infeasible() {
        let model = KpiModel::new(KpiModelParams::default()).unwrap();
        let clause = SlaClause { max_latency_ms: Some(10.0), ..SlaClause::unbounded(SliceClass::Embb) };
        let p = Problem::new(vec![SliceSpec { class: SliceClass::Embb, mcs: 28 }], budget(), vec![clause], model)
            .unwrap();
        let ind = evaluate(&p, vec![0.0; 4]).unwrap();
        assert!(!ind.feasible);
        assert!(ind.objectives[1].is_infinite());
        assert!(ind.first_violation.unwrap().contains("max_latency_ms"));
    }

    #[test]
    fn grid_snapping() {
        let g = Grid::new(&budget(), 5);
        let mut genes = vec![11.0, 14.0, 29.0, 200.0];
        g.snap_nearest(&mut genes);
        assert_eq!(genes, vec![10.0, 15.0, 30.0, 120.0]);
        let mut genes = vec![19.99999999999, 14.9, 10.0, 0.0];
        g.snap_floor(&mut genes);
        assert_eq!(genes, vec![20.0, 0.0, 10.0, 0.0]);
    }
}
