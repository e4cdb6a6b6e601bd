//! Scoring: per-image angular errors, success-rate curves, AUC, medians, paired significance
//! and the feature-noise stress test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::Feature;
use crate::geometry::{angular_error, Point2, VpEstimate};

/// Error assigned to failed detections when a number is needed.
pub const FAILED_ERROR_DEG: f64 = 180.0;
/// Largest number of nonzero differences for which the exact signed-rank distribution is used.
pub const EXACT_WILCOXON_MAX: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image_id: String,
    /// Angular error in degrees, `None` for a failed detection.
    pub error_deg: Option<f64>,
    pub runtime_ms: f64,
}

impl EvalRecord {
    pub fn error_or_failed(&self) -> f64 {
        self.error_deg.unwrap_or(FAILED_ERROR_DEG)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveData {
    pub thresholds: Vec<f64>,
    pub success_rate: Vec<f64>,
}

/// 0° to 10° in steps of 0.1°.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 10.0).collect()
}

/// Fraction of all records (failures included) with error at most each threshold.
pub fn curve(records: &[EvalRecord], grid: &[f64]) -> Result<CurveData> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to evaluate".into()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("threshold grid must be finite and strictly increasing".into()));
    }
    let mut errs: Vec<f64> = records.iter().filter_map(|r| r.error_deg).collect();
    errs.sort_by(f64::total_cmp);
    let n = records.len() as f64;
    let success_rate = grid.iter().map(|t| errs.partition_point(|e| e <= t) as f64 / n).collect();
    Ok(CurveData { thresholds: grid.to_vec(), success_rate })
}

/// Trapezoidal area under the success-rate curve from the first grid point to `theta_max`,
/// in degree·fraction units. `theta_max` between grid points is linearly interpolated.
pub fn auc_at(curve: &CurveData, theta_max: f64) -> Result<f64> {
    let t = &curve.thresholds;
    let r = &curve.success_rate;
    if t.is_empty() || t.len() != r.len() {
        return Err(Error::InvalidInput("malformed curve".into()));
    }
    if !(theta_max >= t[0] && theta_max <= t[t.len() - 1]) {
        return Err(Error::InvalidInput(format!(
            "threshold {theta_max} outside curve range [{}, {}]",
            t[0],
            t[t.len() - 1]
        )));
    }
    let mut area = 0.0;
    for i in 1..t.len() {
        if t[i - 1] >= theta_max {
            break;
        }
        let (x1, y1) = if t[i] > theta_max {
            let f = (theta_max - t[i - 1]) / (t[i] - t[i - 1]);
            (theta_max, r[i - 1] + f * (r[i] - r[i - 1]))
        } else {
            (t[i], r[i])
        };
        area += (x1 - t[i - 1]) * (r[i - 1] + y1) / 2.0;
    }
    Ok(area)
}

/// Median error with failures counted as 180°.
pub fn median_error(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to evaluate".into()));
    }
    let mut v: Vec<f64> = records.iter().map(EvalRecord::error_or_failed).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// `q`-quantile (linear interpolation) with failures counted as 180°.
pub fn quantile_error(records: &[EvalRecord], q: f64) -> Result<f64> {
    let v: Vec<f64> = records.iter().map(EvalRecord::error_or_failed).collect();
    crate::clustering::percentile(&v, q * 100.0).ok_or_else(|| Error::InvalidInput("no records to evaluate".into()))
}

/// Two-sided Wilcoxon signed-rank p-value for paired per-image errors (failures as 180°).
///
/// Records are paired by image id; both sets must cover the same images.
pub fn significance(a: &[EvalRecord], b: &[EvalRecord]) -> Result<f64> {
    let index = |rs: &[EvalRecord]| -> Result<BTreeMap<String, f64>> {
        let mut m = BTreeMap::new();
        for r in rs {
            if m.insert(r.image_id.clone(), r.error_or_failed()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate image id {:?}", r.image_id)));
            }
        }
        Ok(m)
    };
    let (ma, mb) = (index(a)?, index(b)?);
    if ma.keys().ne(mb.keys()) {
        return Err(Error::InvalidInput("record sets cover different images".into()));
    }
    if ma.len() < 6 {
        return Err(Error::InvalidInput(format!("need at least 6 paired records, got {}", ma.len())));
    }
    let diffs: Vec<f64> = ma.iter().map(|(k, va)| va - mb[k]).collect();
    Ok(wilcoxon_signed_rank(&diffs))
}

/// Two-sided p-value of the signed-rank statistic; zero differences are discarded.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> f64 {
    let mut d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    // doubled midranks stay integral
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        ranks2[i..=j].iter_mut().for_each(|r| *r = r2);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: u64 = d.iter().zip(&ranks2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    if n <= EXACT_WILCOXON_MAX {
        let total: u64 = ranks2.iter().sum();
        let mut counts = vec![0f64; total as usize + 1];
        counts[0] = 1.0;
        for &r in &ranks2 {
            for s in (r as usize..=total as usize).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2 as usize..].iter().sum::<f64>() / all;
        return (2.0 * lower.min(upper)).min(1.0);
    }

    let nf = n as f64;
    let w = w2 as f64 / 2.0;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let dev = ((w - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Detector under test: features, image width and height in, finite vanishing point out.
pub type Detector<'a> = dyn Fn(&[Feature<f64>], usize, usize) -> Option<Point2<f64>> + Sync + 'a;

/// A ground-truth instance for the stress test.
#[derive(Debug, Clone, PartialEq)]
pub struct StressInstance {
    pub features: Vec<Feature<f64>>,
    pub gt: Point2<f64>,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressRow {
    pub scale: f64,
    pub sigma: f64,
    pub threshold_deg: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(successes: usize, detections: usize, total: usize) -> (f64, f64, f64) {
    let precision = if detections > 0 { successes as f64 / detections as f64 } else { 0.0 };
    let recall = if total > 0 { successes as f64 / total as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    (precision, recall, f1)
}

/// Resizes each instance by `scale`, perturbs feature positions with Gaussian noise of standard
/// deviation `sigma` pixels and scores the detector at every threshold.
///
/// The noise stream for instance `i` at `(scale, sigma)` indices `(a, b)` is seeded from
/// `seed`, `a`, `b` and `i`, so rows do not depend on evaluation order.
pub fn stress_test(
    instances: &[StressInstance],
    sigmas: &[f64],
    scales: &[f64],
    thresholds: &[f64],
    seed: u64,
    detector: &Detector<'_>,
) -> Result<Vec<StressRow>> {
    if sigmas.iter().chain(scales).any(|v| !(v.is_finite() && *v >= 0.0)) || scales.contains(&0.0) {
        return Err(Error::InvalidInput("sigmas must be nonnegative and scales positive".into()));
    }
    let mut rows = Vec::new();
    for (a, &scale) in scales.iter().enumerate() {
        for (b, &sigma) in sigmas.iter().enumerate() {
            let errors: Vec<Option<f64>> = instances
                .iter()
                .enumerate()
                .map(|(i, inst)| {
                    let s = seed
                        ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
                        ^ (i as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let noise = NormalDist::new(0.0, sigma).expect("nonnegative sigma");
                    let features: Vec<Feature<f64>> = inst
                        .features
                        .iter()
                        .map(|f| {
                            let mut f = f.clone();
                            f.keypoint.x = f.keypoint.x * scale + noise.sample(&mut rng);
                            f.keypoint.y = f.keypoint.y * scale + noise.sample(&mut rng);
                            f.keypoint.size *= scale;
                            f
                        })
                        .collect();
                    let w = ((inst.width as f64 * scale).round() as usize).max(1);
                    let h = ((inst.height as f64 * scale).round() as usize).max(1);
                    let gt = inst.gt * scale;
                    detector(&features, w, h).and_then(|vp| {
                        angular_error(&VpEstimate::finite(vp), &VpEstimate::finite(gt), w as f64, h as f64, None).ok()
                    })
                })
                .collect();
            let detections = errors.iter().filter(|e| e.is_some()).count();
            for &theta in thresholds {
                let successes = errors.iter().filter(|e| e.is_some_and(|v| v <= theta)).count();
                let (precision, recall, f1) = f1_score(successes, detections, instances.len());
                rows.push(StressRow { scale, sigma, threshold_deg: theta, precision, recall, f1 });
            }
        }
    }
    Ok(rows)
}

/// A detector's answer for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub image_id: String,
    pub vp: Option<Point2<f64>>,
}

/// `imageId,x,y` sorted by image id, with `none` for misses.
pub fn predictions_csv(preds: &[Prediction]) -> String {
    let mut sorted: Vec<&Prediction> = preds.iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["imageId", "x", "y"]).expect("in-memory write");
    for p in sorted {
        let (x, y) = match p.vp {
            Some(v) => (v.x.to_string(), v.y.to_string()),
            None => ("none".to_string(), "none".to_string()),
        };
        w.write_record([p.image_id.as_str(), &x, &y]).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("utf-8 fields")
}

pub fn write_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, predictions_csv(preds)).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let hdr = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if hdr.iter().collect::<Vec<_>>() != ["imageId", "x", "y"] {
        return Err(Error::parse(path, 1, "expected header imageId,x,y"));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals: Vec<&str> = rec.iter().collect();
        let vp = match vals.as_slice() {
            [_, x, y] if x.eq_ignore_ascii_case("none") && y.eq_ignore_ascii_case("none") => None,
            [_, x] if x.eq_ignore_ascii_case("none") => None,
            [_, x, y] => {
                let num = |s: &str| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(path, line, format!("invalid coordinate {s:?}")))
                };
                Some(Point2::new(num(x)?, num(y)?))
            }
            _ => return Err(Error::parse(path, line, format!("expected 3 columns, found {}", vals.len()))),
        };
        let id = vals[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty image id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, line, format!("duplicate image id {id:?}")));
        }
        out.push(Prediction { image_id: id, vp });
    }
    Ok(out)
}

/// `imageId,errorDeg,runtimeMs`, failures written as `failed`.
pub fn write_results(records: &[EvalRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["imageId", "errorDeg", "runtimeMs"]).map_err(|e| csv_error(path, e))?;
    for r in records {
        let e = r.error_deg.map_or_else(|| "failed".to_string(), |v| v.to_string());
        w.write_record([r.image_id.as_str(), &e, &r.runtime_ms.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curve(c: &CurveData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["thresholdDeg", "successRate"]).map_err(|e| csv_error(path, e))?;
    for (t, r) in c.thresholds.iter().zip(&c.success_rate) {
        w.write_record([t.to_string(), r.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `scale,sigma,thresholdDeg,precision,recall,f1`.
pub fn stress_csv(rows: &[StressRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scale", "sigma", "thresholdDeg", "precision", "recall", "f1"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.scale, r.sigma, r.threshold_deg, r.precision, r.recall, r.f1].map(|v| v.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_stress(rows: &[StressRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, stress_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Line plot of success-rate curves.
pub fn curves_svg(curves: &[(String, CurveData)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let t_max = curves.iter().filter_map(|(_, c)| c.thresholds.last().copied()).fold(0.0f64, f64::max).max(1e-9);
    let px = |t: f64| M + t / t_max * (W - 2.0 * M);
    let py = |r: f64| H - M - r * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y0} L{x1} {y0} M{x0} {y0} L{x0} {y1}" stroke="black" fill="none"/>"#,
        x0 = M,
        y0 = H - M,
        x1 = W - M,
        y1 = M
    );
    for k in 0..=5 {
        let t = t_max * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            px(t),
            H - M + 16.0,
            (t * 100.0).round() / 100.0
        );
        let r = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{r}</text>"#,
            M - 6.0,
            py(r) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">angle threshold (degrees)</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">success rate</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> =
            c.thresholds.iter().zip(&c.success_rate).map(|(t, r)| format!("{:.2},{:.2}", px(*t), py(*r))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{}</text>"#,
            M + 10.0,
            M + 14.0 * (i as f64 + 1.0),
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(id: usize, e: Option<f64>) -> EvalRecord {
        EvalRecord { image_id: format!("img{id:03}"), error_deg: e, runtime_ms: 0.0 }
    }

    fn recs(errs: &[Option<f64>]) -> Vec<EvalRecord> {
        errs.iter().enumerate().map(|(i, e)| rec(i, *e)).collect()
    }

    #[test]
    fn curve_examples() {
        let c = curve(&recs(&[Some(0.0); 4]), &default_grid()).unwrap();
        assert!(c.success_rate.iter().all(|r| *r == 1.0));
        let c = curve(&recs(&[Some(1.0), Some(3.0), Some(7.0)]), &[2.0, 5.0, 10.0]).unwrap();
        assert_eq!(c.success_rate, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let c = curve(&recs(&[None, Some(0.0), None, Some(0.0)]), &default_grid()).unwrap();
        assert!(c.success_rate.iter().all(|r| *r == 0.5));
        assert!(curve(&[], &default_grid()).is_err());
    }

    #[test]
    fn auc_examples() {
        let perfect = curve(&recs(&[Some(0.0)]), &default_grid()).unwrap();
        assert!((auc_at(&perfect, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((auc_at(&perfect, 2.5).unwrap() - 2.5).abs() < 1e-12);
        let flat = CurveData { thresholds: default_grid(), success_rate: vec![0.744; 101] };
        assert!((auc_at(&flat, 10.0).unwrap() - 7.44).abs() < 1e-9);
        // step at 5°: trapezoid oracle on a dense grid
        let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 / 1000.0).collect();
        let step = curve(&recs(&[Some(5.0)]), &grid).unwrap();
        let a = auc_at(&step, 10.0).unwrap();
        assert!((a - 5.0).abs() < 2e-3, "{a}");
        assert!(auc_at(&perfect, 10.5).is_err());
        assert!(auc_at(&perfect, -0.1).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_error(&recs(&[Some(1.0), Some(2.0), Some(3.0)])).unwrap(), 2.0);
        assert_eq!(median_error(&recs(&[Some(1.0), Some(2.0), Some(3.0), Some(4.0)])).unwrap(), 2.5);
        assert_eq!(median_error(&recs(&[Some(0.0), None])).unwrap(), 90.0);
    }

    #[test]
    fn significance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a: Vec<_> = (0..20).map(|i| rec(i, Some(rng.random_range(0.0..5.0)))).collect();
        assert_eq!(significance(&a, &a).unwrap(), 1.0);
        let b: Vec<_> =
            a.iter().map(|r| EvalRecord { error_deg: r.error_deg.map(|e| e + 10.0), ..r.clone() }).collect();
        let p = significance(&b, &a).unwrap();
        assert!(p < 0.001, "{p}");
        assert!((p - 2.0 / 2f64.powi(20)).abs() < 1e-15);
        assert_eq!(p, significance(&a, &b).unwrap());
        assert!(significance(&a[..5], &a[..5]).is_err());
        assert!(significance(&a[..10], &a[1..11]).is_err());
    }

    #[test]
    fn exact_signed_rank_small_table() {
        // n = 6, all positive: W+ = 21, P = 2/64
        assert!((wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) - 2.0 / 64.0).abs() < 1e-15);
        // n = 6, W+ = 1 (only rank 1 positive): P(W <= 1) = 2/64, two sided 4/64
        assert!((wilcoxon_signed_rank(&[0.5, -2.0, -3.0, -4.0, -5.0, -6.0]) - 4.0 / 64.0).abs() < 1e-15);
        assert_eq!(wilcoxon_signed_rank(&[0.0; 8]), 1.0);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(6..12);
            let d: Vec<f64> = (0..n).map(|_| (rng.random_range(-4i32..=4) as f64) * 0.5).collect();
            let p = wilcoxon_signed_rank(&d);
            // oracle: enumerate sign flips of the nonzero |d| with midranks
            let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
            if nz.is_empty() {
                assert_eq!(p, 1.0);
                continue;
            }
            let m = nz.len();
            let rank = |v: f64| {
                let less = nz.iter().filter(|x| x.abs() < v.abs()).count() as f64;
                let eq = nz.iter().filter(|x| x.abs() == v.abs()).count() as f64;
                less + (eq + 1.0) / 2.0
            };
            let ranks: Vec<f64> = nz.iter().map(|v| rank(*v)).collect();
            let w: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
            let (mut lo, mut hi) = (0usize, 0usize);
            for mask in 0u32..(1 << m) {
                let s: f64 = (0..m).filter(|k| mask & (1 << k) != 0).map(|k| ranks[k]).sum();
                lo += (s <= w + 1e-9) as usize;
                hi += (s >= w - 1e-9) as usize;
            }
            let oracle = (2.0 * lo.min(hi) as f64 / 2f64.powi(m as i32)).min(1.0);
            assert!((p - oracle).abs() < 1e-12, "{p} vs {oracle}");
        }
    }

    #[test]
    fn normal_approximation_large_n() {
        let d: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        assert!(wilcoxon_signed_rank(&d) < 1e-6);
        let alt: Vec<f64> = (1..=40).map(|i| if i % 2 == 0 { i as f64 } else { -(i as f64) }).collect();
        assert!(wilcoxon_signed_rank(&alt) > 0.5);
    }

    #[test]
    fn stress_examples() {
        let inst = StressInstance { features: Vec::new(), gt: Point2::new(100.0, 50.0), width: 200, height: 100 };
        let perfect = |_: &[Feature<f64>], w: usize, _h: usize| {
            Some(Point2::new(100.0 * w as f64 / 200.0, 50.0 * w as f64 / 200.0))
        };
        let rows = stress_test(&[inst.clone(), inst.clone()], &[0.0], &[1.0, 0.5], &[5.0, 10.0], 1, &perfect).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.f1 == 1.0));
        let never = |_: &[Feature<f64>], _: usize, _: usize| None;
        let rows = stress_test(&[inst], &[0.5, 5.0], &[1.0], &[5.0], 1, &never).unwrap();
        assert!(rows.iter().all(|r| r.f1 == 0.0));
    }

    #[test]
    fn prediction_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.csv");
        let preds = vec![
            Prediction { image_id: "b".into(), vp: None },
            Prediction { image_id: "a".into(), vp: Some(Point2::new(1.25, -7.5)) },
        ];
        write_predictions(&preds, &p).unwrap();
        let back = read_predictions(&p).unwrap();
        assert_eq!(back, vec![preds[1].clone(), preds[0].clone()]);
        std::fs::write(&p, "imageId,x,y\na,1,2\na,3,4\n").unwrap();
        assert!(matches!(read_predictions(&p), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&p, "imageId,x,y\na,1,zz\n").unwrap();
        assert!(matches!(read_predictions(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn svg_mentions_axes() {
        let c = curve(&recs(&[Some(1.0)]), &default_grid()).unwrap();
        let s = curves_svg(&[("ours <a>".into(), c)]);
        assert!(s.starts_with("<svg") && s.contains("degrees") && s.contains("success rate"));
        assert!(s.contains("ours &lt;a&gt;"));
    }

    proptest! {
        #[test]
        fn curve_is_monotone(errs in prop::collection::vec(prop::option::of(0.0..20.0f64), 1..40)) {
            let c = curve(&recs(&errs), &default_grid()).unwrap();
            prop_assert!(c.success_rate.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.success_rate.iter().all(|r| (0.0..=1.0).contains(r)));
            let mut prev = 0.0;
            for t in [0.0, 1.0, 2.5, 5.0, 10.0] {
                let a = auc_at(&c, t).unwrap();
                prop_assert!(a >= prev - 1e-12);
                prev = a;
            }
        }

        #[test]
        fn adding_a_failure_never_lowers_median(errs in prop::collection::vec(prop::option::of(0.0..180.0f64), 1..30)) {
            let m = median_error(&recs(&errs)).unwrap();
            let mut more = errs.clone();
            more.push(None);
            prop_assert!(median_error(&recs(&more)).unwrap() >= m);
        }

        #[test]
        fn significance_symmetric(errs in prop::collection::vec((0.0..30.0f64, 0.0..30.0f64), 6..40)) {
            let a: Vec<_> = errs.iter().enumerate().map(|(i, e)| rec(i, Some(e.0))).collect();
            let b: Vec<_> = errs.iter().enumerate().map(|(i, e)| rec(i, Some(e.1))).collect();
            let p = significance(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p - significance(&b, &a).unwrap()).abs() < 1e-12);
        }
    }
}
