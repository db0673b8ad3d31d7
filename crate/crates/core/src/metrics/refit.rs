//! Least-squares latent refit and the trajectory error ε.
//!
//! Given discovered equations `x = f_x(t, l)` and `y = f_y(t, l)`, the
//! latents of an unseen trajectory are re-estimated by least squares.
//! When both expressions are affine in the latents at every sampled time
//! (checked by second-difference probes) the linear system is solved
//! directly; otherwise seeded multi-start coordinate descent is used.

use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::scenario::Trajectory;
use crate::symreg::constants::minimize_scalar;
use crate::symreg::{Expr, Program};

const AFFINE_TOL: f64 = 1e-7;
const DESCENT_TOL: f64 = 1e-10;
const DESCENT_STARTS: usize = 8;

/// Training-latent distribution used to seed descent starts.
#[derive(Clone, Copy, Debug)]
pub struct RefitContext {
    pub latent_mean: [f64; 3],
    pub latent_std: [f64; 3],
    pub seed: u64,
}

impl RefitContext {
    pub fn from_latents(latents: &[[f64; 3]], seed: u64) -> RefitContext {
        let k = latents.len().max(1) as f64;
        let mut mean = [0.0; 3];
        for l in latents {
            for i in 0..3 {
                mean[i] += l[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= k);
        let mut std = [0.0; 3];
        for l in latents {
            for i in 0..3 {
                std[i] += (l[i] - mean[i]) * (l[i] - mean[i]);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / k).sqrt());
        RefitContext {
            latent_mean: mean,
            latent_std: std,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefitResult {
    pub latents: [f64; 3],
    /// Sum of squared residuals over both coordinates.
    pub residual: f64,
    pub rank_deficient: bool,
    /// True when the direct linear solve was used.
    pub linear_path: bool,
}

/// Evaluate an expression over the trajectory's times at a fixed latent
/// triple. Returns None if any evaluation is invalid.
fn eval_with_latents(program: &Program, times: &[f64], l: &[f64; 3]) -> Option<Vec<f64>> {
    let n = times.len();
    let l1 = vec![l[0]; n];
    let l2 = vec![l[1]; n];
    let l3 = vec![l[2]; n];
    let mut out = Vec::new();
    if program.eval_columns([times, &l1, &l2, &l3], &mut out) {
        Some(out)
    } else {
        None
    }
}

fn sum_sq(pred: &[f64], obs: &[f64]) -> f64 {
    pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum()
}

/// Residual sum of squares of both coordinates at a latent triple;
/// infinity when evaluation is invalid.
pub fn residual_ss(expr_x: &Expr, expr_y: &Expr, traj: &Trajectory, l: &[f64; 3]) -> f64 {
    let px = Program::compile(expr_x);
    let py = Program::compile(expr_y);
    match (
        eval_with_latents(&px, &traj.times, l),
        eval_with_latents(&py, &traj.times, l),
    ) {
        (Some(fx), Some(fy)) => sum_sq(&fx, &traj.xs) + sum_sq(&fy, &traj.ys),
        _ => f64::INFINITY,
    }
}

/// Second-difference probes at unit steps in every latent direction and
/// every pair, at each sampled time.
fn is_affine_in_latents(expr: &Expr, times: &[f64]) -> bool {
    let program = Program::compile(expr);
    let probe = |l: [f64; 3]| eval_with_latents(&program, times, &l);
    let base = match probe([0.0; 3]) {
        Some(v) => v,
        None => return false,
    };
    let unit = |i: usize| {
        let mut l = [0.0; 3];
        l[i] = 1.0;
        l
    };
    let mut singles = Vec::new();
    for i in 0..3 {
        match probe(unit(i)) {
            Some(v) => singles.push(v),
            None => return false,
        }
    }
    for i in 0..3 {
        let mut l = [0.0; 3];
        l[i] = 2.0;
        let double = match probe(l) {
            Some(v) => v,
            None => return false,
        };
        for s in 0..times.len() {
            let scale = 1.0 + base[s].abs().max(singles[i][s].abs()).max(double[s].abs());
            if (double[s] - 2.0 * singles[i][s] + base[s]).abs() > AFFINE_TOL * scale {
                return false;
            }
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let mut l = [0.0; 3];
            l[i] = 1.0;
            l[j] = 1.0;
            let both = match probe(l) {
                Some(v) => v,
                None => return false,
            };
            for s in 0..times.len() {
                let scale = 1.0 + base[s].abs().max(both[s].abs());
                let dd = both[s] - singles[i][s] - singles[j][s] + base[s];
                if dd.abs() > AFFINE_TOL * scale {
                    return false;
                }
            }
        }
    }
    true
}

/// Jacobi eigendecomposition of a symmetric 3x3 matrix.
fn eigen_sym3(mut m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..50 {
        let mut off = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..3 {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..3 {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..3 {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([m[0][0], m[1][1], m[2][2]], v)
}

/// Direct least squares when both expressions are affine in the latents.
/// Rank-deficient systems get the minimum-norm solution and a flag.
pub fn refit_linear(expr_x: &Expr, expr_y: &Expr, traj: &Trajectory) -> Option<RefitResult> {
    if !is_affine_in_latents(expr_x, &traj.times) || !is_affine_in_latents(expr_y, &traj.times) {
        return None;
    }
    let times = &traj.times;
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (expr, obs) in [(expr_x, &traj.xs), (expr_y, &traj.ys)] {
        let program = Program::compile(expr);
        let base = eval_with_latents(&program, times, &[0.0; 3])?;
        let mut coeffs = Vec::new();
        for i in 0..3 {
            let mut l = [0.0; 3];
            l[i] = 1.0;
            let fi = eval_with_latents(&program, times, &l)?;
            coeffs.push(
                fi.iter()
                    .zip(&base)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>(),
            );
        }
        for s in 0..times.len() {
            let a = [coeffs[0][s], coeffs[1][s], coeffs[2][s]];
            let r = obs[s] - base[s];
            for i in 0..3 {
                rhs[i] += a[i] * r;
                for j in 0..3 {
                    m[i][j] += a[i] * a[j];
                }
            }
        }
    }
    let (eigvals, eigvecs) = eigen_sym3(m);
    let max_eig = eigvals.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * max_eig.max(1e-300);
    let mut l = [0.0; 3];
    let mut rank_deficient = false;
    for k in 0..3 {
        if eigvals[k] > tol {
            let vk = [eigvecs[0][k], eigvecs[1][k], eigvecs[2][k]];
            let proj = vk[0] * rhs[0] + vk[1] * rhs[1] + vk[2] * rhs[2];
            for i in 0..3 {
                l[i] += vk[i] * proj / eigvals[k];
            }
        } else {
            rank_deficient = true;
        }
    }
    let residual = residual_ss(expr_x, expr_y, traj, &l);
    Some(RefitResult {
        latents: l,
        residual,
        rank_deficient,
        linear_path: true,
    })
}

/// Multi-start coordinate descent on the squared residual.
pub fn refit_descent(
    expr_x: &Expr,
    expr_y: &Expr,
    traj: &Trajectory,
    ctx: &RefitContext,
) -> RefitResult {
    let mut rng = rng::seeded(rng::child_seed(ctx.seed, traj.id as u64));
    let mut best: Option<([f64; 3], f64)> = None;
    for _ in 0..DESCENT_STARTS {
        let mut l = [0.0; 3];
        for i in 0..3 {
            let eta: f64 = StandardNormal.sample(&mut rng);
            l[i] = ctx.latent_mean[i] + ctx.latent_std[i] * eta;
        }
        let mut current = residual_ss(expr_x, expr_y, traj, &l);
        for _ in 0..100 {
            let before = current;
            for coord in 0..3 {
                let mut f = |v: f64| {
                    let mut probe = l;
                    probe[coord] = v;
                    residual_ss(expr_x, expr_y, traj, &probe)
                };
                let (v, ss) = minimize_scalar(&mut f, l[coord], current);
                l[coord] = v;
                current = ss;
            }
            if !before.is_finite() {
                if !current.is_finite() {
                    break;
                }
            } else if before - current < DESCENT_TOL * (1.0 + before) {
                break;
            }
        }
        if best.map_or(true, |(_, b)| current < b) {
            best = Some((l, current));
        }
    }
    let (latents, residual) = best.expect("at least one start");
    RefitResult {
        latents,
        residual,
        rank_deficient: false,
        linear_path: false,
    }
}

/// Estimate a trajectory's latents by least squares against the
/// discovered equations.
pub fn refit_latents(
    expr_x: &Expr,
    expr_y: &Expr,
    traj: &Trajectory,
    ctx: &RefitContext,
) -> RefitResult {
    match refit_linear(expr_x, expr_y, traj) {
        Some(result) => result,
        None => refit_descent(expr_x, expr_y, traj, ctx),
    }
}

/// Mean trajectory error: sqrt(Σ(x - f_x)²/S + Σ(y - f_y)²/S) in pixels.
pub fn trajectory_error(traj: &Trajectory, expr_x: &Expr, expr_y: &Expr, l: &[f64; 3]) -> f64 {
    let s = traj.len() as f64;
    let px = Program::compile(expr_x);
    let py = Program::compile(expr_y);
    let fx = eval_with_latents(&px, &traj.times, l);
    let fy = eval_with_latents(&py, &traj.times, l);
    match (fx, fy) {
        (Some(fx), Some(fy)) => (sum_sq(&fx, &traj.xs) / s + sum_sq(&fy, &traj.ys) / s).sqrt(),
        _ => f64::INFINITY,
    }
}
