//! Static SVG figures for a [`DiagnosticTable`].
//!
//! Densities use a Gaussian kernel with Silverman's rule-of-thumb bandwidth
//! `0.9 min(sd, IQR / 1.34) n^(-1/5)`, evaluated at 256 points.

use std::fmt::Write;

use asif_core::randtest::DiagnosticTable;
use asif_core::{stats, DesignKind};

pub const KDE_POINTS: usize = 256;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Header comment contents shared by every figure.
#[derive(Debug, Clone, Default)]
pub struct SvgMeta {
    pub manifest: String,
    /// Omitted under `--reproducible`.
    pub timestamp: Option<String>,
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 1.0;
    }
    let sd = stats::sample_variance(values).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1e-3 * sorted[0].abs().max(1.0),
    };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian KDE of `values` at each of `xs`.
pub fn kde(values: &[f64], bandwidth: f64, xs: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    xs.iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Evaluation grid covering every sample and the observed value, padded by
/// three bandwidths.
pub fn density_grid(samples: &[&[f64]], bandwidths: &[f64], observed: f64) -> Vec<f64> {
    let pad = 3.0 * bandwidths.iter().cloned().fold(0.0, f64::max);
    let all = samples.iter().flat_map(|s| s.iter()).chain(std::iter::once(&observed));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let lo = (lo - pad).max(0.0_f64.min(lo));
    let hi = hi + pad;
    (0..KDE_POINTS).map(|i| lo + (hi - lo) * i as f64 / (KDE_POINTS - 1) as f64).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str, meta: &SvgMeta) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<!-- manifest: {} -->", escape(&meta.manifest));
    if let Some(t) = &meta.timestamp {
        let _ = writeln!(s, "<!-- generated: {} -->", escape(t));
    }
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

fn axes(s: &mut String, x_label: &str, x_max: f64) {
    let (x0, y0, x1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = x_max * i as f64 / 4.0;
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#, y0 + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label));
}

/// Mahalanobis balance densities, one path per design, with the observed
/// value as a vertical line.
pub fn density_overlay(table: &DiagnosticTable, meta: &SvgMeta) -> String {
    let observed = table.designs.first().map_or(0.0, |d| d.observed_mahalanobis);
    let samples: Vec<&[f64]> = table.designs.iter().map(|d| d.mahalanobis.as_slice()).collect();
    let bandwidths: Vec<f64> = samples.iter().map(|s| silverman_bandwidth(s)).collect();
    let xs = density_grid(&samples, &bandwidths, observed);
    let curves: Vec<Vec<f64>> = samples.iter().zip(&bandwidths).map(|(s, &h)| kde(s, h, &xs)).collect();
    let (x_lo, x_hi) = (xs[0], xs[KDE_POINTS - 1]);
    let y_max = curves.iter().flatten().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let px = |x: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * (x - x_lo) / (x_hi - x_lo);
    let py = |y: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * y / y_max;

    let mut s = open("Balance distribution by design", meta);
    axes(&mut s, "Mahalanobis distance", x_hi);
    for (d, (design, curve)) in table.designs.iter().zip(&curves).enumerate() {
        let mut path = String::new();
        for (i, (&x, &y)) in xs.iter().zip(curve).enumerate() {
            let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x), py(y));
        }
        let colour = PALETTE[d % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<path class="density" data-design="{}" d="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            escape(&design.label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 14.0 * d as f64,
            escape(&design.label)
        );
    }
    let x = px(observed);
    let _ = writeln!(
        s,
        r#"<line class="observed" x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
        HEIGHT - MARGIN
    );
    s.push_str("</svg>\n");
    s
}

/// Observed |SMD| per covariate with each design's 5%-95% |SMD| band;
/// complete randomization's band is drawn in grey.
pub fn love_plot(table: &DiagnosticTable, meta: &SvgMeta) -> String {
    let k = table.covariate_names.len();
    let x_max = table
        .observed_abs_smd
        .iter()
        .chain(table.designs.iter().flat_map(|d| d.abs_smd_q95.iter()))
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-6)
        * 1.1;
    let left = MARGIN + 60.0;
    let px = |v: f64| left + (WIDTH - left - MARGIN) * v / x_max;
    let row_h = (HEIGHT - 2.0 * MARGIN) / k.max(1) as f64;
    let n_designs = table.designs.len().max(1) as f64;

    let mut s = open("Absolute standardized mean differences", meta);
    let y0 = HEIGHT - MARGIN;
    let _ = writeln!(s, r#"<line class="axis" x1="{left}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, WIDTH - MARGIN);
    for i in 0..=4 {
        let v = x_max * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#, px(v), y0 + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">|SMD|</text>"#, (left + WIDTH - MARGIN) / 2.0, HEIGHT - 12.0);
    for (j, name) in table.covariate_names.iter().enumerate() {
        let yc = MARGIN + row_h * (j as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, yc + 4.0, escape(name));
        for (d, design) in table.designs.iter().enumerate() {
            let y = yc + row_h * 0.6 * ((d as f64 + 0.5) / n_designs - 0.5);
            let colour = if design.design.kind == DesignKind::Complete { "#999999" } else { PALETTE[d % PALETTE.len()] };
            let _ = writeln!(
                s,
                r#"<line class="band" data-design="{}" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="3"/>"#,
                escape(&design.label),
                px(design.abs_smd_q05[j]),
                px(design.abs_smd_q95[j])
            );
        }
        let _ = writeln!(s, r#"<circle class="smd" cx="{:.2}" cy="{yc:.2}" r="4" fill="black"/>"#, px(table.observed_abs_smd[j]));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use asif_core::randtest::diagnostic_export;
    use asif_core::{Assignment, Caps, Covariates, DesignSpec, MatchedDataset};

    fn balanced_pairs(n_pairs: usize) -> MatchedDataset {
        // Treated and control copies of the same points: observed SMD is 0.
        let base: Vec<f64> = (0..n_pairs).map(|i| ((i * 7 % 11) as f64).sqrt()).collect();
        let base2: Vec<f64> = (0..n_pairs).map(|i| (i as f64 * 0.9).cos()).collect();
        let a: Vec<f64> = base.iter().chain(&base).cloned().collect();
        let b: Vec<f64> = base2.iter().chain(&base2).cloned().collect();
        let x = Covariates::from_columns(vec![a, b]).unwrap();
        let w = Assignment::from_treated(2 * n_pairs, &(0..n_pairs).collect::<Vec<_>>());
        let pairs: Vec<(usize, usize)> = (0..n_pairs).map(|i| (i, i + n_pairs)).collect();
        MatchedDataset::from_raw(&x, MatchedDataset::default_names(2), w).unwrap().with_pairs(&pairs)
    }

    #[test]
    fn silverman_matches_hand_value() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sd = 2.5f64.sqrt();
        let iqr = 2.0;
        let expected = 0.9 * sd.min(iqr / 1.34) * 5f64.powf(-0.2);
        assert!((silverman_bandwidth(&v) - expected).abs() < 1e-12);
    }

    #[test]
    fn kde_integrates_to_one() {
        let v = [0.0, 1.0, 1.5, 4.0];
        let h = silverman_bandwidth(&v);
        let xs: Vec<f64> = (0..4001).map(|i| -10.0 + i as f64 * 0.005).collect();
        let total: f64 = kde(&v, h, &xs).iter().sum::<f64>() * 0.005;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_designs_give_two_paths_and_one_marker() {
        let ds = balanced_pairs(20);
        let designs = [DesignSpec::complete(), DesignSpec::paired()];
        let table = diagnostic_export(&ds, &designs, 1000, 3).unwrap();
        let svg = density_overlay(&table, &SvgMeta::default());
        assert_eq!(svg.matches(r#"class="density""#).count(), 2);
        assert_eq!(svg.matches(r#"class="observed""#).count(), 1);
        let love = love_plot(&table, &SvgMeta::default());
        assert_eq!(love.matches(r#"class="smd""#).count(), 2);
        assert_eq!(love.matches(r#"class="band""#).count(), 4);
    }

    #[test]
    fn balanced_observation_sits_left_of_modes() {
        let ds = balanced_pairs(20);
        let designs = [DesignSpec::complete(), DesignSpec::constrained(Caps::Uniform(0.5))];
        let table = diagnostic_export(&ds, &designs, 1000, 5).unwrap();
        let obs = table.designs[0].observed_mahalanobis;
        assert!(obs < 1e-12);
        for d in &table.designs {
            let h = silverman_bandwidth(&d.mahalanobis);
            let xs = density_grid(&[&d.mahalanobis], &[h], obs);
            let ys = kde(&d.mahalanobis, h, &xs);
            let mode = xs[ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
            assert!(obs < mode, "{}: observed {obs} vs mode {mode}", d.label);
        }
    }

    #[test]
    fn timestamp_is_optional() {
        let ds = balanced_pairs(10);
        let table = diagnostic_export(&ds, &[DesignSpec::complete()], 50, 1).unwrap();
        let meta = SvgMeta { manifest: "m.json".into(), timestamp: None };
        let a = density_overlay(&table, &meta);
        assert!(a.contains("manifest: m.json") && !a.contains("generated"));
        let b = density_overlay(&table, &SvgMeta { timestamp: Some("1".into()), ..meta });
        assert!(b.contains("<!-- generated: 1 -->"));
    }
}
