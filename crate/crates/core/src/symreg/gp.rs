//! Genetic-programming search over expression trees.
//!
//! Tournament selection, subtree crossover with depth repair, subtree or
//! constant-perturbation mutation, and a Pareto archive over (complexity,
//! 1 - R²). Archive entries get their constants polished after evolution.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::constants::optimize_constants;
use super::expr::{complexity, Expr, Var};
use super::fitness::{derivative_pair_fitness, mean, r_squared, ss_tot, RegressionData, Target};
use super::pareto::ParetoFront;

/// Selection fitness criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    RSquared,
    DerivativePairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_depth: usize,
    pub fitness_mode: FitnessMode,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 512,
            generations: 200,
            tournament_size: 7,
            crossover_prob: 0.7,
            mutation_prob: 0.25,
            max_depth: 8,
            fitness_mode: FitnessMode::RSquared,
            seed: 0,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig("population_size must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob)
            || !(0.0..=1.0).contains(&self.mutation_prob)
        {
            return Err(Error::InvalidConfig("probabilities must be in [0,1]".into()));
        }
        if self.tournament_size == 0 || self.max_depth == 0 || self.generations == 0 {
            return Err(Error::InvalidConfig(
                "tournament_size, max_depth and generations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Ephemeral constants: random sign, log-uniform magnitude so that both
/// unit-scale and pixel-scale coefficients appear in the initial gene pool.
fn random_const(rng: &mut Rng) -> f64 {
    let magnitude = 10.0_f64.powf(rng.gen_range(-2.0..4.0));
    if rng.gen_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn random_terminal(rng: &mut Rng) -> Expr {
    if rng.gen_bool(0.5) {
        Expr::Const(random_const(rng))
    } else {
        Expr::Var(Var::ALL[rng.gen_range(0..4)])
    }
}

/// Random tree with depth at most `max_depth`; `full` forces operators
/// down to the depth limit.
pub fn random_expr(rng: &mut Rng, max_depth: usize, full: bool) -> Expr {
    if max_depth <= 1 || (!full && rng.gen_bool(0.3)) {
        return random_terminal(rng);
    }
    // Arithmetic is proposed more often than transcendentals.
    match rng.gen_range(0..12) {
        0..=2 => Expr::add(
            random_expr(rng, max_depth - 1, full),
            random_expr(rng, max_depth - 1, full),
        ),
        3..=5 => Expr::sub(
            random_expr(rng, max_depth - 1, full),
            random_expr(rng, max_depth - 1, full),
        ),
        6..=8 => Expr::mul(
            random_expr(rng, max_depth - 1, full),
            random_expr(rng, max_depth - 1, full),
        ),
        9 => Expr::div(
            random_expr(rng, max_depth - 1, full),
            random_expr(rng, max_depth - 1, full),
        ),
        10 => {
            if rng.gen_bool(0.5) {
                Expr::sin(random_expr(rng, max_depth - 1, full))
            } else {
                Expr::cos(random_expr(rng, max_depth - 1, full))
            }
        }
        _ => Expr::exp(random_expr(rng, max_depth - 1, full)),
    }
}

/// Replace a uniformly chosen subtree with a random tree (depth-limited),
/// or perturb a uniformly chosen constant by Gaussian noise with sigma of
/// 10% of its magnitude (floor 0.1).
pub fn mutate(expr: &Expr, config: &GpConfig, rng: &mut Rng) -> Expr {
    let mut out = expr.clone();
    let consts = out.const_indices();
    if !consts.is_empty() && rng.gen_bool(0.5) {
        let idx = consts[rng.gen_range(0..consts.len())];
        if let Some(Expr::Const(c)) = out.get(idx) {
            let sigma = (0.1 * c.abs()).max(0.1);
            let noise: f64 = StandardNormal.sample(rng);
            let c_new = c + sigma * noise;
            out.replace(idx, Expr::Const(c_new));
        }
        return out;
    }
    let idx = rng.gen_range(0..out.node_count());
    let depth = out.depth_of(idx).expect("valid index");
    let allowance = config.max_depth.saturating_sub(depth - 1).max(1);
    let replacement = random_expr(rng, allowance, false);
    out.replace(idx, replacement);
    out
}

/// Swap uniformly chosen subtrees; offspring deeper than `max_depth` are
/// repaired by re-picking points, falling back to parent clones.
pub fn crossover(a: &Expr, b: &Expr, config: &GpConfig, rng: &mut Rng) -> (Expr, Expr) {
    for _ in 0..8 {
        let ia = rng.gen_range(0..a.node_count());
        let ib = rng.gen_range(0..b.node_count());
        let sub_a = a.get(ia).expect("valid index").clone();
        let sub_b = b.get(ib).expect("valid index").clone();
        let mut child_a = a.clone();
        let mut child_b = b.clone();
        child_a.replace(ia, sub_b);
        child_b.replace(ib, sub_a);
        if child_a.depth() <= config.max_depth && child_b.depth() <= config.max_depth {
            return (child_a, child_b);
        }
    }
    (a.clone(), b.clone())
}

/// Best-fitness member of `tournament_size` distinct uniform draws.
/// Ties break toward lower complexity, then earlier creation order.
pub fn tournament_select<'a>(
    population: &'a [(Expr, f64)],
    config: &GpConfig,
    rng: &mut Rng,
) -> &'a Expr {
    assert!(!population.is_empty(), "population must be nonempty");
    let k = config.tournament_size.min(population.len());
    let drawn = sample(rng, population.len(), k);
    let mut best: Option<usize> = None;
    for idx in drawn {
        best = Some(match best {
            None => idx,
            Some(cur) => {
                let (cand_f, cur_f) = (population[idx].1, population[cur].1);
                if cand_f > cur_f {
                    idx
                } else if cand_f == cur_f {
                    let (cand_c, cur_c) = (
                        complexity(&population[idx].0),
                        complexity(&population[cur].0),
                    );
                    if cand_c < cur_c || (cand_c == cur_c && idx < cur) {
                        idx
                    } else {
                        cur
                    }
                } else {
                    cur
                }
            }
        });
    }
    &population[best.expect("nonempty tournament")].0
}

struct Evaluation {
    fitness: f64,
    error: f64,
    complexity: u32,
}

fn evaluate(
    population: &[Expr],
    data: &RegressionData,
    target: Target,
    mode: FitnessMode,
) -> Result<Vec<Evaluation>> {
    population
        .par_iter()
        .map(|expr| {
            let r2 = r_squared(expr, data, target)?;
            let error = if r2.is_finite() {
                1.0 - r2
            } else {
                f64::INFINITY
            };
            let fitness = match mode {
                FitnessMode::RSquared => r2,
                FitnessMode::DerivativePairs => derivative_pair_fitness(expr, data, target)?,
            };
            Ok(Evaluation {
                fitness,
                error,
                complexity: complexity(expr),
            })
        })
        .collect()
}

/// Evolve a population against one coordinate and return the final Pareto
/// front with post-optimized constants. Deterministic given `config.seed`.
pub fn run_gp(data: &RegressionData, target: Target, config: &GpConfig) -> Result<ParetoFront> {
    config.validate()?;
    if data.rows() == 0 {
        return Err(Error::Regression("empty regression data".into()));
    }

    // Constant targets short-circuit: the best fit is the mean itself.
    let obs = data.target(target);
    if ss_tot(obs) <= 1e-12 * data.rows() as f64 {
        let mut front = ParetoFront::new();
        front.update(1, 0.0, Expr::Const(mean(obs)));
        return Ok(front);
    }

    let mut rng = rng::stream(config.seed, "gp");
    let init_depth_span = config.max_depth.min(6).max(2);
    let mut population: Vec<Expr> = (0..config.population_size)
        .map(|i| {
            let depth = 2 + i % (init_depth_span - 1).max(1);
            random_expr(&mut rng, depth, i % 2 == 0)
        })
        .collect();

    let mut front = ParetoFront::new();
    for generation in 0..config.generations {
        let evals = evaluate(&population, data, target, config.fitness_mode)?;
        if evals.iter().all(|e| e.fitness == f64::NEG_INFINITY) {
            return Err(Error::Regression(format!(
                "every individual is invalid at generation {generation}"
            )));
        }
        for (expr, eval) in population.iter().zip(&evals) {
            front.update(eval.complexity, eval.error, expr.clone());
        }
        if generation + 1 == config.generations {
            break;
        }

        // Breed: keep the best individual, fill the rest by tournaments.
        let mut best = 0usize;
        for i in 1..population.len() {
            let (a, b) = (&evals[i], &evals[best]);
            if a.fitness > b.fitness
                || (a.fitness == b.fitness && a.complexity < b.complexity)
            {
                best = i;
            }
        }
        let scored: Vec<(Expr, f64)> = population
            .iter()
            .zip(&evals)
            .map(|(e, v)| (e.clone(), v.fitness))
            .collect();
        let mut next = Vec::with_capacity(config.population_size);
        next.push(population[best].clone());
        while next.len() < config.population_size {
            let p1 = tournament_select(&scored, config, &mut rng);
            let p2 = tournament_select(&scored, config, &mut rng);
            let (mut c1, mut c2) = if rng.gen_bool(config.crossover_prob) {
                crossover(p1, p2, config, &mut rng)
            } else {
                (p1.clone(), p2.clone())
            };
            if rng.gen_bool(config.mutation_prob) {
                c1 = mutate(&c1, config, &mut rng);
            }
            if rng.gen_bool(config.mutation_prob) {
                c2 = mutate(&c2, config, &mut rng);
            }
            next.push(c1);
            if next.len() < config.population_size {
                next.push(c2);
            }
        }
        population = next;
    }

    // Post-optimize archive constants, then re-establish dominance.
    let mut rebuilt = ParetoFront::new();
    for entry in &front.entries {
        let optimized = optimize_constants(&entry.expr, data, target);
        let r2 = r_squared(&optimized, data, target)?;
        if r2.is_finite() {
            rebuilt.update(complexity(&optimized), 1.0 - r2, optimized);
        } else {
            rebuilt.update(entry.complexity, entry.error, entry.expr.clone());
        }
    }
    Ok(rebuilt)
}

/// Front report rows: target, complexity, error, r_squared, infix.
pub fn front_csv(front: &ParetoFront, target: Target) -> String {
    let mut out = String::from("target,complexity,error,r_squared,expression_infix\n");
    for e in &front.entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            target.name(),
            e.complexity,
            e.error,
            1.0 - e.error,
            e.expr.infix()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(f: impl Fn(f64) -> f64, rows: usize) -> RegressionData {
        let mut data = RegressionData {
            x: vec![],
            y: vec![],
            t: vec![],
            l1: vec![],
            l2: vec![],
            l3: vec![],
            traj_count: 1,
            samples_per_traj: rows,
        };
        for i in 0..rows {
            let t = i as f64 * 0.05;
            data.t.push(t);
            data.x.push(f(t));
            data.y.push(1.0 + i as f64);
            data.l1.push(0.0);
            data.l2.push(0.0);
            data.l3.push(0.0);
        }
        data
    }

    #[test]
    fn mutation_and_crossover_respect_max_depth() {
        let config = GpConfig {
            max_depth: 5,
            seed: 3,
            ..GpConfig::default()
        };
        let mut rng = rng::stream(3, "test");
        let mut a = random_expr(&mut rng, 5, true);
        let mut b = random_expr(&mut rng, 5, false);
        for _ in 0..200 {
            let m = mutate(&a, &config, &mut rng);
            assert!(m.depth() <= 5, "mutation depth {}", m.depth());
            let (c1, c2) = crossover(&a, &b, &config, &mut rng);
            assert!(c1.depth() <= 5 && c2.depth() <= 5);
            a = c1;
            b = c2;
        }
    }

    #[test]
    fn exhaustive_tournament_returns_global_best() {
        let pop: Vec<(Expr, f64)> = (0..10)
            .map(|i| (Expr::constant(i as f64), i as f64 * 0.1))
            .collect();
        let config = GpConfig {
            tournament_size: 10,
            ..GpConfig::default()
        };
        let mut rng = rng::stream(0, "test");
        for _ in 0..5 {
            let winner = tournament_select(&pop, &config, &mut rng);
            assert_eq!(winner, &Expr::Const(9.0));
        }
    }

    #[test]
    fn constant_perturbation_preserves_structure() {
        let config = GpConfig {
            seed: 1,
            ..GpConfig::default()
        };
        let mut rng = rng::stream(1, "test");
        // A single Const node: mutation either perturbs it or replaces the
        // whole (depth-1) subtree; when it perturbs, the node count stays 1.
        let mut saw_perturbation = false;
        for _ in 0..50 {
            let m = mutate(&Expr::constant(1.0), &config, &mut rng);
            if let Expr::Const(c) = m {
                if c != 1.0 {
                    saw_perturbation = true;
                    assert!((c - 1.0).abs() < 2.0, "sigma floor 0.1 scale, got {c}");
                }
            }
        }
        assert!(saw_perturbation);
    }

    #[test]
    fn planted_linear_recovered() {
        let data = planted(|t| 5.0 * t, 200);
        let config = GpConfig {
            population_size: 256,
            generations: 50,
            seed: 11,
            ..GpConfig::default()
        };
        let front = run_gp(&data, Target::X, &config).unwrap();
        let hit = front
            .entries
            .iter()
            .any(|e| e.error < 1e-6 && e.complexity <= 3);
        assert!(
            hit,
            "no simple exact expression on front: {:?}",
            front
                .entries
                .iter()
                .map(|e| (e.complexity, e.error))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn constant_target_shortcut() {
        let data = planted(|_| 42.0, 50);
        let front = run_gp(&data, Target::X, &GpConfig::default()).unwrap();
        assert_eq!(front.len(), 1);
        assert_eq!(front.entries[0].complexity, 1);
        assert_eq!(front.entries[0].error, 0.0);
        match &front.entries[0].expr {
            Expr::Const(c) => assert!((c - 42.0).abs() < 1e-12),
            other => panic!("expected constant, got {other}"),
        }
    }

    #[test]
    fn same_seed_identical_front() {
        let data = planted(|t| 2.0 + t * t, 80);
        let config = GpConfig {
            population_size: 64,
            generations: 12,
            seed: 9,
            ..GpConfig::default()
        };
        let a = run_gp(&data, Target::X, &config).unwrap();
        let b = run_gp(&data, Target::X, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_invalid_population_aborts() {
        let data = planted(|t| t, 10);
        // Force an all-invalid generation through the evaluation helper.
        let population = vec![
            Expr::div(Expr::constant(1.0), Expr::constant(0.0)),
            Expr::div(Expr::var(Var::T), Expr::constant(0.0)),
        ];
        let evals = evaluate(&population, &data, Target::X, FitnessMode::RSquared).unwrap();
        assert!(evals.iter().all(|e| e.fitness == f64::NEG_INFINITY));
    }

    #[test]
    fn front_csv_layout() {
        let data = planted(|t| 3.0 * t, 50);
        let config = GpConfig {
            population_size: 64,
            generations: 10,
            seed: 2,
            ..GpConfig::default()
        };
        let front = run_gp(&data, Target::X, &config).unwrap();
        let csv = front_csv(&front, Target::X);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "target,complexity,error,r_squared,expression_infix"
        );
        assert!(lines.next().unwrap().starts_with("x,"));
    }
}
