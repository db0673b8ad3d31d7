//! Latent/parameter cross-correlation, affine fits and pair matching.

use crate::error::{Error, Result};

/// Population standard deviation (divide by K).
fn pop_std(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Normalized cross-correlation matrices between m parameter columns and
/// n latent columns over K samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrices {
    /// Literal (non-centered) form: Σ g l / (K σ_g σ_l).
    pub eq3: Vec<Vec<f64>>,
    /// Mean-centered (Pearson) companion.
    pub pearson: Vec<Vec<f64>>,
    /// True if any column had zero variance (entries set to NaN).
    pub has_undefined: bool,
}

/// Compute both correlation variants; `params` is m columns of length K,
/// `latents` is K rows of n values.
pub fn cross_correlation(params: &[Vec<f64>], latents: &[Vec<f64>]) -> Result<CorrelationMatrices> {
    let k = latents.len();
    if k < 2 {
        return Err(Error::InvalidInput("need K >= 2 samples".into()));
    }
    if params.iter().any(|p| p.len() != k) {
        return Err(Error::InvalidInput(
            "parameter columns must match latent row count".into(),
        ));
    }
    let n = latents[0].len();
    let latent_cols: Vec<Vec<f64>> = (0..n)
        .map(|j| latents.iter().map(|row| row[j]).collect())
        .collect();
    let mut eq3 = Vec::with_capacity(params.len());
    let mut pearson = Vec::with_capacity(params.len());
    let mut has_undefined = false;
    for g in params {
        let sg = pop_std(g);
        let gm = mean(g);
        let mut row_eq3 = Vec::with_capacity(n);
        let mut row_p = Vec::with_capacity(n);
        for l in &latent_cols {
            let sl = pop_std(l);
            if sg <= 0.0 || sl <= 0.0 {
                has_undefined = true;
                row_eq3.push(f64::NAN);
                row_p.push(f64::NAN);
                continue;
            }
            let lm = mean(l);
            let raw: f64 = g.iter().zip(l).map(|(a, b)| a * b).sum();
            let centered: f64 = g.iter().zip(l).map(|(a, b)| (a - gm) * (b - lm)).sum();
            row_eq3.push(raw / (k as f64 * sg * sl));
            row_p.push(centered / (k as f64 * sg * sl));
        }
        eq3.push(row_eq3);
        pearson.push(row_p);
    }
    Ok(CorrelationMatrices {
        eq3,
        pearson,
        has_undefined,
    })
}

/// Ordinary least squares of `param` on `latent` plus the squared Pearson
/// correlation as the fit quality.
pub fn affine_fit(latent: &[f64], param: &[f64]) -> Result<(f64, f64, f64)> {
    if latent.len() != param.len() || latent.len() < 2 {
        return Err(Error::InvalidInput(
            "affine fit needs two equal-length columns of K >= 2".into(),
        ));
    }
    let k = latent.len() as f64;
    let lm = mean(latent);
    let pm = mean(param);
    let var_l: f64 = latent.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>() / k;
    if var_l <= 0.0 {
        return Err(Error::InvalidInput("latent column has zero variance".into()));
    }
    let cov: f64 = latent
        .iter()
        .zip(param)
        .map(|(l, p)| (l - lm) * (p - pm))
        .sum::<f64>()
        / k;
    let slope = cov / var_l;
    let intercept = pm - slope * lm;
    let var_p: f64 = param.iter().map(|v| (v - pm) * (v - pm)).sum::<f64>() / k;
    let fit_r2 = if var_p <= 0.0 {
        1.0
    } else {
        (cov * cov) / (var_l * var_p)
    };
    Ok((slope, intercept, fit_r2))
}

/// Greedy one-to-one assignment of parameters to latent nodes by maximum
/// absolute correlation; nodes left unassigned are reported inactive.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// (parameter index, node index), sorted by parameter index.
    pub pairs: Vec<(usize, usize)>,
    pub inactive_nodes: Vec<usize>,
}

pub fn match_latents(pearson: &[Vec<f64>]) -> MatchResult {
    let m = pearson.len();
    let n = pearson.first().map_or(0, |r| r.len());
    let mut used_params = vec![false; m];
    let mut used_nodes = vec![false; n];
    let mut pairs = Vec::new();
    for _ in 0..m.min(n) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..m {
            if used_params[i] {
                continue;
            }
            for j in 0..n {
                if used_nodes[j] || pearson[i][j].is_nan() {
                    continue;
                }
                let v = pearson[i][j].abs();
                if best.map_or(true, |(_, _, b)| v > b) {
                    best = Some((i, j, v));
                }
            }
        }
        match best {
            Some((i, j, _)) => {
                used_params[i] = true;
                used_nodes[j] = true;
                pairs.push((i, j));
            }
            None => break,
        }
    }
    pairs.sort_by_key(|(i, _)| *i);
    let inactive_nodes = (0..n).filter(|j| !used_nodes[*j]).collect();
    MatchResult {
        pairs,
        inactive_nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq3_reduces_to_one_for_identical_zero_mean_columns() {
        let g = vec![vec![-1.0, 0.0, 1.0]];
        let l: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!((c.eq3[0][0] - 1.0).abs() < 1e-12);
        assert!((c.pearson[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negation_flips_sign() {
        let g = vec![vec![-1.0, 0.0, 1.0]];
        let l: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0], vec![-1.0]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!((c.eq3[0][0] + 1.0).abs() < 1e-12);
        assert!((c.pearson[0][0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eq3_literal_hand_evaluation() {
        // g = [1,2,3], l = [2,4,6]: Σgl = 28, σ_g = sqrt(2/3), σ_l = 2σ_g,
        // so C = 28 / (3 · 4/3) = 7; the Pearson variant is exactly 1.
        let g = vec![vec![1.0, 2.0, 3.0]];
        let l: Vec<Vec<f64>> = vec![vec![2.0], vec![4.0], vec![6.0]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!((c.eq3[0][0] - 7.0).abs() < 1e-12, "eq3 {}", c.eq3[0][0]);
        assert!((c.pearson[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eq3_equals_pearson_when_centered() {
        let g = vec![vec![-2.0, 1.0, 1.0]];
        let l: Vec<Vec<f64>> = vec![vec![0.5], vec![-1.0], vec![0.5]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!((c.eq3[0][0] - c.pearson[0][0]).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_column_flagged() {
        let g = vec![vec![1.0, 1.0, 1.0]];
        let l: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![3.0]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!(c.has_undefined);
        assert!(c.eq3[0][0].is_nan());
    }

    #[test]
    fn pearson_bounded_by_one() {
        let g = vec![vec![0.3, -1.2, 2.5, 0.1, -0.7]];
        let l: Vec<Vec<f64>> = vec![vec![1.0], vec![0.2], vec![-0.5], vec![2.0], vec![0.9]];
        let c = cross_correlation(&g, &l).unwrap();
        assert!(c.pearson[0][0].abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn exact_affine_fit() {
        let latent = vec![0.0, 1.0, 2.0, 3.0];
        let param: Vec<f64> = latent.iter().map(|l| 2.0 * l + 3.0).collect();
        let (slope, intercept, r2) = affine_fit(&latent, &param).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_define_a_line() {
        let (slope, intercept, r2) = affine_fit(&[1.0, 3.0], &[5.0, 9.0]).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_noise_fit_is_weak() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(2);
        let k = 10_000;
        let latent: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let param: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, _, r2) = affine_fit(&latent, &param).unwrap();
        assert!(r2 < 0.01, "r2 = {r2}");
    }

    #[test]
    fn zero_variance_latent_rejected() {
        assert!(affine_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn diagonal_dominant_matches_identity() {
        let pearson = vec![vec![0.99, 0.1, 0.2], vec![0.05, -0.97, 0.1]];
        let m = match_latents(&pearson);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.inactive_nodes, vec![2]);
    }

    #[test]
    fn single_parameter_takes_strongest_node() {
        let pearson = vec![vec![0.2, -0.9, 0.5]];
        let m = match_latents(&pearson);
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.inactive_nodes, vec![0, 2]);
    }

    /// Exhaustive oracle: lexicographically largest sorted |C| sequence
    /// over all one-to-one assignments (greedy secures the strongest pair
    /// first, then recurses, which is exactly this ordering).
    pub(super) fn exhaustive_match(pearson: &[Vec<f64>]) -> Vec<(usize, usize)> {
        let m = pearson.len();
        let n = pearson[0].len();
        let nodes: Vec<usize> = (0..n).collect();
        let mut best: Option<(Vec<f64>, Vec<(usize, usize)>)> = None;
        // All injective maps from params to nodes, m <= 3.
        fn visit(
            params_left: &[usize],
            nodes: &[usize],
            used: &mut Vec<bool>,
            current: &mut Vec<(usize, usize)>,
            pearson: &[Vec<f64>],
            best: &mut Option<(Vec<f64>, Vec<(usize, usize)>)>,
        ) {
            if params_left.is_empty() {
                let mut key: Vec<f64> = current
                    .iter()
                    .map(|(i, j)| pearson[*i][*j].abs())
                    .collect();
                key.sort_by(|a, b| b.partial_cmp(a).unwrap());
                // Lexicographic comparison of the sorted |C| sequences.
                if best.as_ref().map_or(true, |(bk, _)| key > *bk) {
                    *best = Some((key, current.clone()));
                }
                return;
            }
            let p = params_left[0];
            for &j in nodes {
                if !used[j] {
                    used[j] = true;
                    current.push((p, j));
                    visit(&params_left[1..], nodes, used, current, pearson, best);
                    current.pop();
                    used[j] = false;
                }
            }
        }
        let params: Vec<usize> = (0..m).collect();
        let mut used = vec![false; n];
        let mut current = Vec::new();
        visit(&params, &nodes, &mut used, &mut current, pearson, &mut best);
        let mut pairs = best.expect("nonempty").1;
        pairs.sort_by_key(|(i, _)| *i);
        pairs
    }

    #[test]
    fn greedy_equals_exhaustive_on_random_matrices() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(77);
        for _ in 0..200 {
            let m = rng.gen_range(1..=3);
            let pearson: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let greedy = match_latents(&pearson).pairs;
            let oracle = exhaustive_match(&pearson);
            assert_eq!(greedy, oracle, "matrix {pearson:?}");
        }
    }
}
