//! Flat CSV and minimal SVG emission for evaluation reports.

use super::EvalReport;

/// Flat `key,value` CSV covering every report field.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("key,value\n");
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push(',');
        out.push_str(&v);
        out.push('\n');
    };
    push("scenario", report.scenario.name().to_string());
    push("test_count", report.test_count.to_string());
    push("epsilon_mean_px", report.epsilon_mean_px.to_string());
    push("epsilon_mean_m", report.epsilon_mean_m.to_string());
    for node in 0..3 {
        push(
            &format!("latent_variance_l{}", node + 1),
            report.latent_variance[node].to_string(),
        );
    }
    push(
        "refit_rank_deficient",
        report.refit_rank_deficient.to_string(),
    );
    for (pi, name) in report.param_names.iter().enumerate() {
        for node in 0..3 {
            push(
                &format!("correlation_eq3_{name}_l{}", node + 1),
                report.correlation_eq3[pi][node].to_string(),
            );
            push(
                &format!("correlation_pearson_{name}_l{}", node + 1),
                report.correlation_pearson[pi][node].to_string(),
            );
        }
    }
    for pair in &report.matched_pairs {
        let p = &pair.param;
        push(&format!("matched_{p}_node"), format!("l{}", pair.node + 1));
        push(&format!("matched_{p}_pearson"), pair.pearson.to_string());
        push(&format!("matched_{p}_eq3"), pair.eq3.to_string());
        push(&format!("matched_{p}_slope"), pair.slope.to_string());
        push(&format!("matched_{p}_intercept"), pair.intercept.to_string());
        push(&format!("matched_{p}_fit_r2"), pair.fit_r2.to_string());
    }
    push(
        "inactive_nodes",
        report
            .inactive_nodes
            .iter()
            .map(|n| format!("l{}", n + 1))
            .collect::<Vec<_>>()
            .join(";"),
    );
    for (i, eps) in report.epsilon_per_trajectory_px.iter().enumerate() {
        push(&format!("epsilon_test_{i}_px"), eps.to_string());
    }
    out
}

/// Minimal scatter plot: one circle per point inside a framed 480x360 view.
pub fn svg_scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let (w, h) = (480.0, 360.0);
    let margin = 48.0;
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if !x_min.is_finite() || x_min == x_max {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if !y_min.is_finite() || y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let sx = (w - 2.0 * margin) / (x_max - x_min);
    let sy = (h - 2.0 * margin) / (y_max - y_min);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * margin,
        h - 2.0 * margin
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n",
        w / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{x_label}</text>\n",
        w / 2.0,
        h - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" \
         transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        h / 2.0,
        h / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"{}\" font-size=\"9\">{:.4}</text>\n",
        h - margin + 14.0,
        x_min
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{:.4}</text>\n",
        w - margin,
        h - margin + 14.0,
        x_max
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{:.4}</text>\n",
        margin - 4.0,
        h - margin,
        y_min
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{:.4}</text>\n",
        margin - 4.0,
        margin + 8.0,
        y_max
    ));
    for (x, y) in points {
        let px = margin + (x - x_min) * sx;
        let py = h - margin - (y - y_min) * sy;
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"steelblue\" \
             fill-opacity=\"0.7\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
