//! Regression data assembly and fitness metrics.

use crate::error::{Error, Result};
use crate::scenario::Trajectory;

use super::expr::{Expr, Program};

/// Which coordinate an equation predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    X,
    Y,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::X => "x",
            Target::Y => "y",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Target::X),
            "y" => Ok(Target::Y),
            other => Err(Error::InvalidInput(format!("target must be x or y, got `{other}`"))),
        }
    }
}

/// Column-major rows of `(x, y, t, l1, l2, l3)`: M trajectories with K
/// uniformly strided samples each; the latent triple is constant within
/// a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub l3: Vec<f64>,
    pub traj_count: usize,
    pub samples_per_traj: usize,
}

impl RegressionData {
    pub fn rows(&self) -> usize {
        self.t.len()
    }

    pub fn vars(&self) -> [&[f64]; 4] {
        [&self.t, &self.l1, &self.l2, &self.l3]
    }

    pub fn target(&self, target: Target) -> &[f64] {
        match target {
            Target::X => &self.x,
            Target::Y => &self.y,
        }
    }

    /// Pair trajectories with their latent triples, taking every
    /// `stride`-th frame; the stride is widened if needed to keep the
    /// total row count at or below `row_cap`.
    pub fn build(
        trajs: &[&Trajectory],
        latents: &[[f64; 3]],
        stride: usize,
        row_cap: usize,
    ) -> Result<RegressionData> {
        if trajs.is_empty() || trajs.len() != latents.len() {
            return Err(Error::InvalidInput(format!(
                "need equal nonzero trajectory/latent counts, got {}/{}",
                trajs.len(),
                latents.len()
            )));
        }
        let frames = trajs[0].len();
        if trajs.iter().any(|t| t.len() != frames) {
            return Err(Error::InvalidInput(
                "trajectories differ in frame count".into(),
            ));
        }
        let mut stride = stride.max(1);
        loop {
            let k = frames.div_ceil(stride);
            if trajs.len() * k <= row_cap || k <= 1 {
                break;
            }
            stride += 1;
        }
        let k = frames.div_ceil(stride);
        let rows = trajs.len() * k;
        let mut data = RegressionData {
            x: Vec::with_capacity(rows),
            y: Vec::with_capacity(rows),
            t: Vec::with_capacity(rows),
            l1: Vec::with_capacity(rows),
            l2: Vec::with_capacity(rows),
            l3: Vec::with_capacity(rows),
            traj_count: trajs.len(),
            samples_per_traj: k,
        };
        for (traj, latent) in trajs.iter().zip(latents) {
            for i in (0..frames).step_by(stride) {
                data.t.push(traj.times[i]);
                data.x.push(traj.xs[i]);
                data.y.push(traj.ys[i]);
                data.l1.push(latent[0]);
                data.l2.push(latent[1]);
                data.l3.push(latent[2]);
            }
        }
        Ok(data)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Total sum of squares around the mean.
pub fn ss_tot(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum()
}

/// R² = 1 - SS_res / SS_tot over all rows. Invalid evaluations yield
/// negative infinity (worst fitness); a zero-variance target is an error
/// (callers use the constant-fit shortcut instead).
pub fn r_squared(expr: &Expr, data: &RegressionData, target: Target) -> Result<f64> {
    let obs = data.target(target);
    let tot = ss_tot(obs);
    if tot <= 0.0 {
        return Err(Error::Regression(
            "target variance is zero; fit a constant instead".into(),
        ));
    }
    let program = Program::compile(expr);
    let mut pred = Vec::new();
    if !program.eval_columns(data.vars(), &mut pred) {
        return Ok(f64::NEG_INFINITY);
    }
    let res: f64 = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok(1.0 - res / tot)
}

/// Residual sum of squares of `expr` against the target column; invalid
/// evaluations yield infinity.
pub fn ss_res(expr: &Expr, data: &RegressionData, target: Target) -> f64 {
    let obs = data.target(target);
    let program = Program::compile(expr);
    let mut pred = Vec::new();
    if !program.eval_columns(data.vars(), &mut pred) {
        return f64::INFINITY;
    }
    pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum()
}

/// Schmidt-style derivative-pair score: the mean absolute difference
/// between the expression's central-difference time derivative and the
/// data's, over interior samples of each trajectory, negated so that
/// higher is better.
pub fn derivative_pair_fitness(
    expr: &Expr,
    data: &RegressionData,
    target: Target,
) -> Result<f64> {
    let k = data.samples_per_traj;
    if k < 3 {
        return Err(Error::Regression(format!(
            "derivative pairs need >= 3 samples per trajectory, got {k}"
        )));
    }
    let obs = data.target(target);
    let program = Program::compile(expr);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for traj in 0..data.traj_count {
        let base = traj * k;
        let range = base..base + k;
        let t = &data.t[range.clone()];
        // Central differences of the expression in t, evaluated with the
        // same half-step the data derivative uses.
        let h: Vec<f64> = (1..k - 1).map(|i| (t[i + 1] - t[i - 1]) / 2.0).collect();
        let t_lo: Vec<f64> = (1..k - 1).map(|i| t[i] - h[i - 1]).collect();
        let t_hi: Vec<f64> = (1..k - 1).map(|i| t[i] + h[i - 1]).collect();
        let l1 = vec![data.l1[base]; k - 2];
        let l2 = vec![data.l2[base]; k - 2];
        let l3 = vec![data.l3[base]; k - 2];
        if !program.eval_columns([&t_lo, &l1, &l2, &l3], &mut lo)
            || !program.eval_columns([&t_hi, &l1, &l2, &l3], &mut hi)
        {
            return Ok(f64::NEG_INFINITY);
        }
        for i in 1..k - 1 {
            let dt = t[i + 1] - t[i - 1];
            let data_deriv = (obs[base + i + 1] - obs[base + i - 1]) / dt;
            let expr_deriv = (hi[i - 1] - lo[i - 1]) / dt;
            sum += (expr_deriv - data_deriv).abs();
            count += 1;
        }
    }
    Ok(-sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::expr::Var;

    /// Rows sampling x = 2 + 3 t^2 over 2 trajectories.
    fn planted_quadratic() -> RegressionData {
        let mut data = RegressionData {
            x: vec![],
            y: vec![],
            t: vec![],
            l1: vec![],
            l2: vec![],
            l3: vec![],
            traj_count: 2,
            samples_per_traj: 10,
        };
        for traj in 0..2 {
            for i in 0..10 {
                let t = i as f64 * 0.1;
                data.t.push(t);
                data.x.push(2.0 + 3.0 * t * t);
                data.y.push(5.0);
                data.l1.push(traj as f64);
                data.l2.push(0.0);
                data.l3.push(0.0);
            }
        }
        data
    }

    fn quadratic_expr() -> Expr {
        Expr::add(
            Expr::constant(2.0),
            Expr::mul(
                Expr::constant(3.0),
                Expr::mul(Expr::var(Var::T), Expr::var(Var::T)),
            ),
        )
    }

    #[test]
    fn exact_fit_has_unit_r_squared() {
        let data = planted_quadratic();
        let r2 = r_squared(&quadratic_expr(), &data, Target::X).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_constant_has_zero_r_squared() {
        let data = planted_quadratic();
        let m = mean(&data.x);
        let r2 = r_squared(&Expr::constant(m), &data, Target::X).unwrap();
        assert!(r2.abs() < 1e-12);
    }

    #[test]
    fn linear_candidate_matches_brute_force() {
        let data = planted_quadratic();
        let cand = Expr::add(
            Expr::constant(2.0),
            Expr::mul(Expr::constant(3.0), Expr::var(Var::T)),
        );
        let r2 = r_squared(&cand, &data, Target::X).unwrap();
        // Brute-force SS computation.
        let mut res = 0.0;
        for i in 0..data.rows() {
            let pred = 2.0 + 3.0 * data.t[i];
            res += (pred - data.x[i]).powi(2);
        }
        let expected = 1.0 - res / ss_tot(&data.x);
        assert!((r2 - expected).abs() < 1e-12);
        assert!(r2 < 1.0);
    }

    #[test]
    fn zero_variance_target_rejected() {
        let data = planted_quadratic();
        assert!(r_squared(&Expr::constant(5.0), &data, Target::Y).is_err());
    }

    #[test]
    fn r_squared_never_exceeds_one() {
        let data = planted_quadratic();
        for expr in [
            quadratic_expr(),
            Expr::var(Var::T),
            Expr::sin(Expr::var(Var::T)),
            Expr::constant(7.0),
        ] {
            let r2 = r_squared(&expr, &data, Target::X).unwrap();
            assert!(r2 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn derivative_fitness_ignores_additive_constants() {
        let data = planted_quadratic();
        let shifted = Expr::add(quadratic_expr(), Expr::constant(123.0));
        let score = derivative_pair_fitness(&shifted, &data, Target::X).unwrap();
        assert!(
            score.abs() < 1e-9,
            "derivative score should be perfect, got {score}"
        );
    }

    #[test]
    fn constant_candidate_scores_mean_abs_derivative() {
        let data = planted_quadratic();
        let score = derivative_pair_fitness(&Expr::constant(3.0), &data, Target::X).unwrap();
        // Hand-computed: d(2 + 3t^2)/dt sampled centrally at interior points.
        let mut expected = 0.0;
        let mut count = 0;
        for traj in 0..2 {
            let base = traj * 10;
            for i in 1..9 {
                let dt = data.t[base + i + 1] - data.t[base + i - 1];
                expected += ((data.x[base + i + 1] - data.x[base + i - 1]) / dt).abs();
                count += 1;
            }
        }
        expected /= count as f64;
        assert!((score + expected).abs() < 1e-12, "score {score}");
        let true_score =
            derivative_pair_fitness(&quadratic_expr(), &data, Target::X).unwrap();
        assert!(true_score > score);
    }

    #[test]
    fn linear_candidate_derivative_mae_hand_check() {
        let data = planted_quadratic();
        // Candidate 2 + 3t has derivative 3; data derivative is 6t exactly
        // under central differences of a quadratic.
        let cand = Expr::add(
            Expr::constant(2.0),
            Expr::mul(Expr::constant(3.0), Expr::var(Var::T)),
        );
        let score = derivative_pair_fitness(&cand, &data, Target::X).unwrap();
        let mut expected = 0.0;
        let mut count = 0;
        for _traj in 0..2 {
            for i in 1..9 {
                let t = i as f64 * 0.1;
                expected += (3.0 - 6.0 * t).abs();
                count += 1;
            }
        }
        expected /= count as f64;
        assert!((score + expected).abs() < 1e-9, "score {score} expected -{expected}");
    }

    #[test]
    fn too_few_samples_rejected() {
        let mut data = planted_quadratic();
        data.samples_per_traj = 2;
        assert!(derivative_pair_fitness(&Expr::constant(0.0), &data, Target::X).is_err());
    }

    #[test]
    fn build_respects_row_cap() {
        use crate::scenario::{generate_dataset, ScenarioConfig, ScenarioKind};
        let config = ScenarioConfig::defaults(ScenarioKind::UniformCircular);
        let dataset = generate_dataset(&config, 10, 1).unwrap();
        let trajs: Vec<&Trajectory> = dataset.trajectories.iter().collect();
        let latents = vec![[0.0; 3]; trajs.len()];
        let data = RegressionData::build(&trajs, &latents, 4, 200).unwrap();
        assert!(data.rows() <= 200);
        assert_eq!(data.rows(), data.traj_count * data.samples_per_traj);
        let full = RegressionData::build(&trajs, &latents, 4, 25_000).unwrap();
        assert_eq!(full.samples_per_traj, 50);
    }
}
