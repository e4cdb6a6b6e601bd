//! 2D points, normalized homogeneous lines, vanishing point estimates and the
//! angle-accuracy error measure.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point (or free vector) in pixel coordinates, image y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero() && n.is_finite()).then(|| Point2::new(self.x / n, self.y / n))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise perpendicular (in a y-down image this is a clockwise turn on screen).
    #[inline]
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Point2::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Point2::new(-self.x, -self.y)
    }
}

/// Line `a·x + b·y + c = 0` with `a² + b² = 1`, so `|a·x + b·y + c|` is the
/// perpendicular distance in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomLine<T> {
    a: T,
    b: T,
    c: T,
}

impl<T: Scalar> HomLine<T> {
    /// Normalizes arbitrary coefficients. Fails when `(a, b) = (0, 0)`.
    pub fn new(a: T, b: T, c: T) -> Result<Self> {
        let n = a.hypot(b);
        if !(n > T::zero()) || !n.is_finite() || !c.is_finite() {
            return Err(Error::InvalidInput("line normal is zero or not finite".into()));
        }
        Ok(HomLine { a: a / n, b: b / n, c: c / n })
    }

    /// Line through `p` with tangent `dir`.
    pub fn from_point_direction(p: Point2<T>, dir: Point2<T>) -> Result<Self> {
        let n = dir.perp();
        HomLine::new(n.x, n.y, -(n.x * p.x + n.y * p.y))
    }

    /// Line through two distinct points.
    pub fn through(p: Point2<T>, q: Point2<T>) -> Result<Self> {
        if p == q {
            return Err(Error::DegeneratePointSet);
        }
        HomLine::from_point_direction(p, q - p)
    }

    #[inline]
    pub fn coeffs(&self) -> [T; 3] {
        [self.a, self.b, self.c]
    }

    #[inline]
    pub fn normal(&self) -> Point2<T> {
        Point2::new(self.a, self.b)
    }

    /// Unit tangent `(-b, a)`.
    #[inline]
    pub fn tangent(&self) -> Point2<T> {
        Point2::new(-self.b, self.a)
    }

    /// Signed distance; the sign is positive on the side the normal points to.
    #[inline]
    pub fn signed_distance(&self, p: Point2<T>) -> T {
        self.a * p.x + self.b * p.y + self.c
    }

    /// Orthogonal projection of `p` onto the line.
    pub fn project(&self, p: Point2<T>) -> Point2<T> {
        p - self.normal() * self.signed_distance(p)
    }

    /// Same line expressed in coordinates `p' = (p - center) / scale`.
    pub fn conditioned(&self, center: Point2<T>, scale: T) -> Self {
        HomLine { a: self.a, b: self.b, c: (self.a * center.x + self.b * center.y + self.c) / scale }
    }

    pub fn cast<U: Scalar>(&self) -> HomLine<U> {
        HomLine { a: U::lit(self.a.to_f64_lossy()), b: U::lit(self.b.to_f64_lossy()), c: U::lit(self.c.to_f64_lossy()) }
    }
}

/// Whether a line was fitted through recurring features or detected as an image edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineSource {
    Implicit,
    Explicit,
}

/// An infinite line with an optional direction towards the vanishing point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedLine<T> {
    pub line: HomLine<T>,
    /// A point on the line.
    pub anchor: Point2<T>,
    /// Unit vector parallel to the line, or `None` for undirected lines.
    pub direction: Option<Point2<T>>,
    pub source: LineSource,
    pub weight: T,
}

impl<T: Scalar> OrientedLine<T> {
    pub fn undirected(line: HomLine<T>, anchor: Point2<T>, source: LineSource) -> Self {
        OrientedLine { line, anchor, direction: None, source, weight: T::zero() }
    }

    /// Directed line through `anchor` along `dir` (normalized here).
    pub fn directed(anchor: Point2<T>, dir: Point2<T>, source: LineSource) -> Result<Self> {
        let d = dir.normalized().ok_or_else(|| Error::InvalidInput("zero direction".into()))?;
        Ok(OrientedLine {
            line: HomLine::from_point_direction(anchor, d)?,
            anchor,
            direction: Some(d),
            source,
            weight: T::zero(),
        })
    }

    /// Direction if present, otherwise the line tangent.
    #[inline]
    pub fn axis(&self) -> Point2<T> {
        self.direction.unwrap_or_else(|| self.line.tangent())
    }

    /// Whether `p` lies ahead of the anchor along the direction. Undirected lines accept everything.
    pub fn points_towards(&self, p: Point2<T>) -> bool {
        match self.direction {
            Some(d) => (p - self.anchor).dot(d) > T::zero(),
            None => true,
        }
    }
}

/// Homogeneous image point `(x, y, w)`; `w = 0` is a point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpEstimate<T> {
    pub x: T,
    pub y: T,
    pub w: T,
}

impl<T: Scalar> VpEstimate<T> {
    pub fn finite(p: Point2<T>) -> Self {
        VpEstimate { x: p.x, y: p.y, w: T::one() }
    }

    /// Point at infinity in direction `(dx, dy)`.
    pub fn ideal(dx: T, dy: T) -> Self {
        VpEstimate { x: dx, y: dy, w: T::zero() }
    }

    pub fn from_homogeneous(v: [T; 3]) -> Result<Self> {
        if v.iter().all(|c| *c == T::zero()) || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("homogeneous point is zero or not finite".into()));
        }
        Ok(VpEstimate { x: v[0], y: v[1], w: v[2] })
    }

    #[inline]
    pub fn homogeneous(&self) -> [T; 3] {
        [self.x, self.y, self.w]
    }

    /// True when `|w|` is negligible relative to `(x, y)`.
    pub fn is_ideal(&self) -> bool {
        let m = self.x.abs().max(self.y.abs());
        self.w.abs() <= m * T::epsilon() * T::lit(64.0)
    }

    pub fn to_point(&self) -> Option<Point2<T>> {
        if self.is_ideal() {
            None
        } else {
            Some(Point2::new(self.x / self.w, self.y / self.w))
        }
    }

    /// Direction of an ideal point (or of the homogeneous `(x, y)` part in general).
    pub fn ideal_direction(&self) -> Option<Point2<T>> {
        Point2::new(self.x, self.y).normalized()
    }

    pub fn distance_to(&self, line: &HomLine<T>) -> Result<T> {
        let p = self.to_point().ok_or(Error::IdealPoint)?;
        Ok(point_line_distance(p, line))
    }

    pub fn cast<U: Scalar>(&self) -> VpEstimate<U> {
        VpEstimate {
            x: U::lit(self.x.to_f64_lossy()),
            y: U::lit(self.y.to_f64_lossy()),
            w: U::lit(self.w.to_f64_lossy()),
        }
    }
}

/// Result of a total-least-squares line fit.
#[derive(Debug, Clone, Copy)]
pub struct LineFit<T> {
    pub line: HomLine<T>,
    /// Weighted centroid of the input; lies on the line.
    pub centroid: Point2<T>,
    /// Weighted sum of squared perpendicular distances.
    pub residual: T,
}

/// Total-least-squares line: the principal axis of the (weighted) point covariance.
pub fn fit_line_lsq<T: Scalar>(points: &[Point2<T>], weights: Option<&[T]>) -> Result<LineFit<T>> {
    if points.len() < 2 {
        return Err(Error::DegeneratePointSet);
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::InvalidInput(format!("{} weights for {} points", w.len(), points.len())));
        }
        if w.iter().any(|w| *w < T::zero() || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
    }
    let weight = |i: usize| weights.map_or(T::one(), |w| w[i]);
    let total: T = (0..points.len()).map(weight).sum();
    if !(total > T::zero()) {
        return Err(Error::DegeneratePointSet);
    }
    let mut mx = T::zero();
    let mut my = T::zero();
    for (i, p) in points.iter().enumerate() {
        mx = mx + weight(i) * p.x;
        my = my + weight(i) * p.y;
    }
    let centroid = Point2::new(mx / total, my / total);
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (i, p) in points.iter().enumerate() {
        let d = *p - centroid;
        let w = weight(i);
        sxx = sxx + w * d.x * d.x;
        sxy = sxy + w * d.x * d.y;
        syy = syy + w * d.y * d.y;
    }
    let spread = sxx + syy;
    let scale = centroid.norm().max(T::one());
    if spread <= (scale * T::epsilon()).powi(2) * total {
        return Err(Error::DegeneratePointSet);
    }
    let theta = T::lit(0.5) * (sxy + sxy).atan2(sxx - syy);
    let tangent = Point2::new(theta.cos(), theta.sin());
    let line = HomLine::from_point_direction(centroid, tangent)?;
    // smallest eigenvalue of the scatter matrix
    let half_diff = T::lit(0.5) * (sxx - syy);
    let residual = (T::lit(0.5) * spread - half_diff.hypot(sxy)).max(T::zero());
    Ok(LineFit { line, centroid, residual })
}

/// Intersection of two lines as a homogeneous point. Parallel lines yield a point at infinity.
pub fn intersect<T: Scalar>(l1: &HomLine<T>, l2: &HomLine<T>) -> Result<VpEstimate<T>> {
    let [a1, b1, c1] = l1.coeffs();
    let [a2, b2, c2] = l2.coeffs();
    let x = b1 * c2 - c1 * b2;
    let y = c1 * a2 - a1 * c2;
    let w = a1 * b2 - b1 * a2;
    let n1 = (T::one() + c1 * c1).sqrt();
    let n2 = (T::one() + c2 * c2).sqrt();
    let m = x.abs().max(y.abs()).max(w.abs());
    if m <= n1 * n2 * T::epsilon() * T::lit(16.0) {
        return Err(Error::CoincidentLines);
    }
    Ok(VpEstimate { x, y, w })
}

/// Acute angle in `[0, π/2]` between the axes of two lines.
pub fn acute_angle<T: Scalar>(l1: &OrientedLine<T>, l2: &OrientedLine<T>) -> T {
    axis_angle(l1.axis(), l2.axis())
}

/// Acute angle between two undirected axes, via `atan2(|cross|, |dot|)`.
pub fn axis_angle<T: Scalar>(u: Point2<T>, v: Point2<T>) -> T {
    u.cross(v).abs().atan2(u.dot(v).abs())
}

#[inline]
pub fn point_line_distance<T: Scalar>(p: Point2<T>, l: &HomLine<T>) -> T {
    l.signed_distance(p).abs()
}

/// Angle accuracy in degrees: the angle between the viewing rays `(vp - center, f)` of two
/// vanishing points, with `f` defaulting to `(width + height) / 4`.
pub fn angular_error<T: Scalar>(
    detected: &VpEstimate<T>,
    truth: &VpEstimate<T>,
    width: T,
    height: T,
    focal: Option<T>,
) -> Result<T> {
    if !(width > T::zero() && height > T::zero()) {
        return Err(Error::InvalidInput("image dimensions must be positive".into()));
    }
    let f = focal.unwrap_or((width + height) / T::lit(4.0));
    if !(f > T::zero()) {
        return Err(Error::InvalidInput("focal length must be positive".into()));
    }
    let center = Point2::new(width / T::lit(2.0), height / T::lit(2.0));
    let (u, u_ideal) = viewing_ray(detected, center, f);
    let (v, v_ideal) = viewing_ray(truth, center, f);
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let mut angle = sin.atan2(cos);
    if u_ideal || v_ideal {
        // an ideal point names a direction, not an oriented ray
        angle = angle.min(T::PI() - angle);
    }
    Ok(angle.to_degrees())
}

/// Unit viewing ray folded into the forward hemisphere, plus whether the point was ideal.
fn viewing_ray<T: Scalar>(vp: &VpEstimate<T>, center: Point2<T>, f: T) -> ([T; 3], bool) {
    let ideal = vp.is_ideal();
    let w = if ideal { T::zero() } else { vp.w };
    let mut r = [vp.x - center.x * w, vp.y - center.y * w, f * w];
    if r[2] < T::zero() {
        r = [-r[0], -r[1], -r[2]];
    }
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    ([r[0] / n, r[1] / n, r[2] / n], ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn line(a: f64, b: f64, c: f64) -> HomLine<f64> {
        HomLine::new(a, b, c).unwrap()
    }

    #[test]
    fn fit_exactly_collinear() {
        let fit = fit_line_lsq(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0)], None).unwrap();
        assert_abs_diff_eq!(fit.residual, 0.0, epsilon = 1e-12);
        for q in [p(5.0, 5.0), p(-3.0, -3.0)] {
            assert_abs_diff_eq!(point_line_distance(q, &fit.line), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_matches_closed_form_eigenvector() {
        let eps = 0.01;
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 3.0 * eps), p(3.0, eps)];
        let fit = fit_line_lsq(&pts, None).unwrap();
        // oracle: eigenvector of the 2x2 covariance for the larger eigenvalue
        let (mx, my) = (1.5, eps);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for q in &pts {
            sxx += (q.x - mx) * (q.x - mx);
            sxy += (q.x - mx) * (q.y - my);
            syy += (q.y - my) * (q.y - my);
        }
        let tr = sxx + syy;
        let det = sxx * syy - sxy * sxy;
        let lmax = tr / 2.0 + (tr * tr / 4.0 - det).sqrt();
        let v = p(sxy, lmax - sxx).normalized().unwrap();
        let t = fit.line.tangent();
        assert!(t.cross(v).abs() < 1e-12);
        assert!(t.y.atan2(t.x).sin().abs() < 0.01);
    }

    #[test]
    fn fit_rejects_identical_points() {
        assert!(matches!(fit_line_lsq(&[p(0.0, 0.0), p(0.0, 0.0)], None), Err(Error::DegeneratePointSet)));
        assert!(fit_line_lsq(&[p(1.0, 2.0)], None).is_err());
    }

    #[test]
    fn weighted_fit_ignores_zero_weight_outlier() {
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(1.0, 50.0)];
        let fit = fit_line_lsq(&pts, Some(&[1.0, 1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(fit.line.tangent().y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn intersect_examples() {
        let v = intersect(&line(1.0, 0.0, -1.0), &line(0.0, 1.0, -2.0)).unwrap();
        let q = v.to_point().unwrap();
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.y, 2.0, epsilon = 1e-12);

        let v = intersect(&line(0.0, 1.0, 0.0), &line(0.0, 1.0, -1.0)).unwrap();
        assert!(v.is_ideal());
        assert_eq!(v.w, 0.0);
        assert_eq!(v.y, 0.0);
        assert_eq!(v.x.abs(), 1.0);

        let v = intersect(&line(1.0, -1.0, 0.0), &line(1.0, 1.0, -2.0)).unwrap();
        let q = v.to_point().unwrap();
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.y, 1.0, epsilon = 1e-12);

        assert!(matches!(intersect(&line(1.0, 1.0, 3.0), &line(2.0, 2.0, 6.0)), Err(Error::CoincidentLines)));
    }

    fn dir_line(dx: f64, dy: f64) -> OrientedLine<f64> {
        OrientedLine::directed(p(0.0, 0.0), p(dx, dy), LineSource::Implicit).unwrap()
    }

    #[test]
    fn acute_angle_examples() {
        assert_abs_diff_eq!(acute_angle(&dir_line(1.0, 0.0), &dir_line(-3.0, 0.0)), 0.0);
        assert_abs_diff_eq!(acute_angle(&dir_line(1.0, 0.0), &dir_line(0.0, 1.0)), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(acute_angle(&dir_line(1.0, 0.0), &dir_line(-1.0, 1.0)), FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(point_line_distance(p(0.0, 0.0), &line(0.0, 1.0, -1.0)), 1.0);
        assert_eq!(point_line_distance(p(3.0, 4.0), &line(1.0, 0.0, 0.0)), 3.0);
        assert_eq!(point_line_distance(p(2.0, 2.0), &line(1.0, -1.0, 0.0)), 0.0);
        assert!(matches!(VpEstimate::ideal(1.0, 0.0).distance_to(&line(0.0, 1.0, 0.0)), Err(Error::IdealPoint)));
    }

    #[test]
    fn angular_error_examples() {
        let t = VpEstimate::finite(p(256.0, 256.0));
        assert_eq!(angular_error(&t, &t, 512.0, 512.0, None).unwrap(), 0.0);
        let d = VpEstimate::finite(p(512.0, 256.0));
        assert_abs_diff_eq!(angular_error(&d, &t, 512.0, 512.0, None).unwrap(), 45.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angular_error(&d, &t, 512.0, 512.0, Some(256.0)).unwrap(), 45.0, epsilon = 1e-9);
        // f = (640 + 480) / 4 = 280
        let t = VpEstimate::finite(p(320.0, 240.0));
        let d = VpEstimate::finite(p(600.0, 240.0));
        assert_abs_diff_eq!(angular_error(&d, &t, 640.0, 480.0, None).unwrap(), 45.0, epsilon = 1e-9);
        assert!(angular_error(&d, &t, 0.0, 480.0, None).is_err());
    }

    #[test]
    fn angular_error_handles_ideal_and_negative_w() {
        let a = VpEstimate::ideal(1.0, 0.0);
        let b = VpEstimate::ideal(-1.0, 0.0);
        assert_abs_diff_eq!(angular_error(&a, &b, 100.0, 100.0, None).unwrap(), 0.0, epsilon = 1e-12);
        let c = VpEstimate::finite(p(50.0, 50.0));
        assert_abs_diff_eq!(angular_error(&a, &c, 100.0, 100.0, None).unwrap(), 90.0, epsilon = 1e-9);
        let neg = VpEstimate { x: -60.0, y: -50.0, w: -1.0 };
        let pos = VpEstimate::finite(p(60.0, 50.0));
        assert_abs_diff_eq!(angular_error(&neg, &pos, 100.0, 100.0, None).unwrap(), 0.0, epsilon = 1e-12);
    }

    fn arb_line() -> impl Strategy<Value = HomLine<f64>> {
        (0.0..std::f64::consts::TAU, -500.0..500.0).prop_map(|(t, c)| line(t.cos(), t.sin(), c))
    }

    proptest! {
        #[test]
        fn intersection_lies_on_both_lines(l1 in arb_line(), l2 in arb_line()) {
            if let Ok(v) = intersect(&l1, &l2) {
                if let Some(q) = v.to_point() {
                    let scale = q.norm().max(1.0);
                    prop_assert!(point_line_distance(q, &l1) <= 1e-9 * scale);
                    prop_assert!(point_line_distance(q, &l2) <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn acute_angle_symmetric_and_flip_invariant(a in 0.0..6.3f64, b in 0.0..6.3f64) {
            let l1 = dir_line(a.cos(), a.sin());
            let l2 = dir_line(b.cos(), b.sin());
            let l2f = dir_line(-b.cos(), -b.sin());
            let t = acute_angle(&l1, &l2);
            prop_assert!((0.0..=FRAC_PI_2 + 1e-15).contains(&t));
            prop_assert!((t - acute_angle(&l2, &l1)).abs() < 1e-14);
            prop_assert!((t - acute_angle(&l1, &l2f)).abs() < 1e-14);
        }

        #[test]
        fn angular_error_symmetric_and_translation_invariant(
            x1 in -1000.0..1000.0f64, y1 in -1000.0..1000.0f64,
            x2 in -1000.0..1000.0f64, y2 in -1000.0..1000.0f64,
            dx in -200.0..300.0f64,
        ) {
            let a = VpEstimate::finite(p(x1, y1));
            let b = VpEstimate::finite(p(x2, y2));
            let e = angular_error(&a, &b, 640.0, 480.0, None).unwrap();
            prop_assert!((e - angular_error(&b, &a, 640.0, 480.0, None).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&e));
            // shifting both points and the image center together (width grows by 2·dx keeps f fixed only
            // if height shrinks by the same amount)
            let at = VpEstimate::finite(p(x1 + dx, y1 + dx));
            let bt = VpEstimate::finite(p(x2 + dx, y2 + dx));
            let e2 = angular_error(&at, &bt, 640.0 + 2.0 * dx, 480.0 + 2.0 * dx, Some(280.0)).unwrap();
            let e1 = angular_error(&a, &b, 640.0, 480.0, Some(280.0)).unwrap();
            prop_assert!((e1 - e2).abs() < 1e-8);
        }

        #[test]
        fn fit_is_permutation_and_rotation_equivariant(
            pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..12),
            rot in 0.0..std::f64::consts::TAU,
            shift in 1usize..11,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
            let Ok(fit) = fit_line_lsq(&pts, None) else { return Ok(()) };
            let mut perm = pts.clone();
            perm.rotate_left(shift % pts.len());
            let fp = fit_line_lsq(&perm, None).unwrap();
            prop_assert!(fit.line.tangent().cross(fp.line.tangent()).abs() < 1e-9);
            prop_assert!((fit.line.signed_distance(fp.centroid)).abs() < 1e-9);

            let (s, c) = rot.sin_cos();
            let rotate = |q: Point2<f64>| p(c * q.x - s * q.y, s * q.x + c * q.y);
            let rotated: Vec<_> = pts.iter().map(|q| rotate(*q)).collect();
            let fr = fit_line_lsq(&rotated, None).unwrap();
            // the fitted tangent rotates with the point set unless the scatter is isotropic
            let spread: f64 = pts.iter().map(|q| (*q - fit.centroid).norm().powi(2)).sum();
            if spread - 2.0 * fit.residual > 1e-6 * spread {
                let expected = rotate(fit.line.tangent());
                prop_assert!(fr.line.tangent().cross(expected).abs() < 1e-6);
            }
            prop_assert!((fr.residual - fit.residual).abs() < 1e-6 * (1.0 + fit.residual));
        }
    }
}
