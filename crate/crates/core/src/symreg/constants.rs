//! Coordinate-wise refinement of expression constants against SS_res.
//!
//! Each constant is minimized in turn with a Newton step (numeric first and
//! second differences) and a golden-section fallback; only improvements are
//! accepted, so the residual is non-increasing and expressions without
//! constants pass through unchanged.

use super::expr::Expr;
use super::fitness::{ss_res, RegressionData, Target};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_SWEEPS: usize = 8;
const SWEEP_TOL: f64 = 1e-12;

/// One-dimensional descent from `x0`: damped Newton with numeric
/// derivatives, then a golden-section pass on an expanded bracket.
/// Returns the best `(x, f(x))` seen, never worse than `(x0, f0)`.
pub(crate) fn minimize_scalar(f: &mut dyn FnMut(f64) -> f64, x0: f64, f0: f64) -> (f64, f64) {
    let mut x = x0;
    let mut best = f0;

    for _ in 0..6 {
        let h = (1e-6 * x.abs()).max(1e-7);
        let fx = f(x);
        let fp = f(x + h);
        let fm = f(x - h);
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - 2.0 * fx + fm) / (h * h);
        if !(d2 > 0.0) || !d1.is_finite() {
            break;
        }
        let mut step = -d1 / d2;
        if !step.is_finite() || step == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..4 {
            let ft = f(x + step);
            if ft < best {
                x += step;
                best = ft;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || d1.abs() * step.abs() < SWEEP_TOL * (1.0 + best) {
            break;
        }
    }

    // Golden section around the current point, expanding the bracket while
    // an endpoint is lower than the middle.
    let mut d = x.abs().max(1.0);
    let mut c = x;
    let mut fc = f(c);
    let mut a = c - d;
    let mut b = c + d;
    let mut fa = f(a);
    let mut fb = f(b);
    let mut expansions = 0;
    while (fa < fc || fb < fc) && expansions < 12 {
        if fa < fc {
            b = c;
            fb = fc;
            c = a;
            fc = fa;
            d *= 2.0;
            a = c - d;
            fa = f(a);
        } else {
            a = c;
            fa = fc;
            c = b;
            fc = fb;
            d *= 2.0;
            b = c + d;
            fb = f(b);
        }
        expansions += 1;
    }
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
        if (hi - lo).abs() < 1e-12 * (1.0 + x1.abs()) {
            break;
        }
    }
    let (gx, gf) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if gf < best {
        x = gx;
        best = gf;
    }
    (x, best)
}

/// Refine every constant of `expr` by coordinate descent on SS_res.
/// Structure is never changed; the input is returned unchanged when no
/// improvement is found (including for constant-free expressions).
pub fn optimize_constants(expr: &Expr, data: &RegressionData, target: Target) -> Expr {
    let indices = expr.const_indices();
    if indices.is_empty() {
        return expr.clone();
    }
    let initial_ss = ss_res(expr, data, target);
    let mut work = expr.clone();
    let mut best_ss = initial_ss;
    for _ in 0..MAX_SWEEPS {
        let before = best_ss;
        for &idx in &indices {
            let current = match work.get(idx) {
                Some(Expr::Const(c)) => *c,
                _ => unreachable!("index points at a constant"),
            };
            let (value, ss) = {
                let mut probe = work.clone();
                let mut f = |v: f64| {
                    probe.replace(idx, Expr::Const(v));
                    ss_res(&probe, data, target)
                };
                minimize_scalar(&mut f, current, best_ss)
            };
            work.replace(idx, Expr::Const(value));
            best_ss = ss;
        }
        if !before.is_finite() {
            if !best_ss.is_finite() {
                break;
            }
        } else if before - best_ss <= SWEEP_TOL * (1.0 + before) {
            break;
        }
    }
    if best_ss < initial_ss {
        work
    } else {
        expr.clone()
    }
}
