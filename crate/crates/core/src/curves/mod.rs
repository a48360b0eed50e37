//! Sampled curves, arc length, discrete measures and regularity.

mod cubes;
mod nets;

pub use cubes::{build_cubes, Cube, CubeTree, CubeVerification};
pub use nets::{build_nets, multiresolution, Ball, NetFamily, NetLevel};

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};
use crate::horizontal;
use crate::metric::MetricKind;
use crate::sampling;

/// On-disk form of a curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub closed: bool,
}

/// A polyline with its arc-length table in a fixed metric.
#[derive(Clone, Debug)]
pub struct Curve {
    points: Vec<Point>,
    closed: bool,
    cumlen: Vec<f64>,
    closing: f64,
    metric: MetricKind,
}

impl Curve {
    pub fn new(points: Vec<Point>, closed: bool, g: &CarnotGroup, metric: MetricKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty);
        }
        for p in &points {
            g.check_dim(p)?;
        }
        let mut cumlen = Vec::with_capacity(points.len());
        cumlen.push(0.0);
        for (k, w) in points.windows(2).enumerate() {
            let d = metric.dist(g, &w[0], &w[1]);
            if d == 0.0 {
                return Err(Error::InvalidCurve(format!("samples {k} and {} coincide", k + 1)));
            }
            cumlen.push(cumlen[k] + d);
        }
        let closing = if closed && points.len() > 2 {
            metric.dist(g, points.last().unwrap(), &points[0])
        } else {
            0.0
        };
        let closed = closed && points.len() > 2;
        Ok(Self {
            points,
            closed,
            cumlen,
            closing,
            metric,
        })
    }

    pub fn from_file(path: impl AsRef<Path>, g: &CarnotGroup, metric: MetricKind) -> Result<Self> {
        let file: CurveFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_curve_file(&file, g, metric)
    }

    pub fn from_curve_file(file: &CurveFile, g: &CarnotGroup, metric: MetricKind) -> Result<Self> {
        let pts = file
            .points
            .iter()
            .map(|p| g.point(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts, file.closed, g, metric)
    }

    pub fn to_file(&self, group: Option<String>) -> CurveFile {
        CurveFile {
            group,
            points: self.points.iter().map(|p| p.to_vec()).collect(),
            closed: self.closed,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn cumlen(&self) -> &[f64] {
        &self.cumlen
    }

    /// Polyline length, closing edge included.
    pub fn length(&self) -> f64 {
        self.cumlen.last().unwrap() + self.closing
    }

    fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.cumlen.windows(2).map(|w| w[1] - w[0]).collect();
        if self.closed {
            e.push(self.closing);
        }
        e
    }

    /// Longest edge.
    pub fn resolution(&self) -> f64 {
        self.edges().into_iter().fold(0.0, f64::max)
    }

    pub fn diameter(&self, g: &CarnotGroup) -> f64 {
        horizontal::diameter(&self.points, g, self.metric)
    }

    /// Dilated copy of diameter 1.
    pub fn normalized(&self, g: &CarnotGroup) -> Result<(Self, f64)> {
        let d = self.diameter(g);
        if d == 0.0 {
            return Err(Error::InvalidCurve("zero diameter".into()));
        }
        Ok((self.dilated(g, 1.0 / d)?, 1.0 / d))
    }

    pub fn dilated(&self, g: &CarnotGroup, s: f64) -> Result<Self> {
        let pts = self
            .points
            .iter()
            .map(|p| g.dilate(s, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts, self.closed, g, self.metric)
    }

    /// Trapezoidal arc-length weights: half of each adjacent edge.
    pub fn measure(&self) -> MeasuredSet {
        let n = self.points.len();
        let mut w = vec![0.0; n];
        for (k, e) in self.edges().into_iter().enumerate() {
            w[k] += 0.5 * e;
            w[(k + 1) % n] += 0.5 * e;
        }
        MeasuredSet {
            points: self.points.clone(),
            weights: w,
            resolution: self.resolution(),
        }
    }

    pub fn beta_arc(&self, i0: usize, i1: usize, g: &CarnotGroup) -> Result<horizontal::ArcBeta> {
        horizontal::beta_arc(&self.points, i0, i1, g, self.metric)
    }
}

/// Finite set with nonnegative weights.
#[derive(Clone, Debug)]
pub struct MeasuredSet {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Scale below which the weights no longer model a continuum.
    pub resolution: f64,
}

impl MeasuredSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &[Point], g: &CarnotGroup, kind: MetricKind) -> Self {
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { kind.dist(g, &points[i], &points[j]) }).collect())
            .collect();
        let mut d = rows.concat();
        for i in 0..n {
            for j in i + 1..n {
                let m = d[i * n + j].max(d[j * n + i]);
                d[i * n + j] = m;
                d[j * n + i] = m;
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub c_mu: f64,
    pub scales: Vec<f64>,
    /// `(sample index, scale)` of the extreme ratios.
    pub argmin: (usize, f64),
    pub argmax: (usize, f64),
}

/// Extreme values of `mu(B(x, r)) / r` over every sample `x` and the given scales.
pub fn regularity_constants(
    set: &MeasuredSet,
    dm: &DistanceMatrix,
    scales: &[f64],
) -> Result<RegularityReport> {
    if set.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&s) = scales.iter().find(|&&s| s < set.resolution) {
        return Err(Error::ScaleBelowResolution {
            scale: s,
            resolution: set.resolution,
        });
    }
    let per_center: Vec<(f64, f64, f64, f64)> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<usize> = (0..set.len()).collect();
            order.sort_by(|&a, &b| dm.get(i, a).total_cmp(&dm.get(i, b)));
            let mut prefix = Vec::with_capacity(order.len());
            let mut acc = 0.0;
            for &k in &order {
                acc += set.weights[k];
                prefix.push(acc);
            }
            let (mut lo, mut lo_s, mut hi, mut hi_s) = (f64::INFINITY, 0.0, 0.0, 0.0);
            for &r in scales {
                let cnt = order.partition_point(|&k| dm.get(i, k) <= r);
                let mu = if cnt == 0 { 0.0 } else { prefix[cnt - 1] };
                let q = mu / r;
                if q < lo {
                    (lo, lo_s) = (q, r);
                }
                if q > hi {
                    (hi, hi_s) = (q, r);
                }
            }
            (lo, lo_s, hi, hi_s)
        })
        .collect();
    let mut rep = RegularityReport {
        c_lower: f64::INFINITY,
        c_upper: 0.0,
        c_mu: 0.0,
        scales: scales.to_vec(),
        argmin: (0, 0.0),
        argmax: (0, 0.0),
    };
    for (i, &(lo, lo_s, hi, hi_s)) in per_center.iter().enumerate() {
        if lo < rep.c_lower {
            rep.c_lower = lo;
            rep.argmin = (i, lo_s);
        }
        if hi > rep.c_upper {
            rep.c_upper = hi;
            rep.argmax = (i, hi_s);
        }
    }
    rep.c_mu = rep.c_lower.min(1.0 / rep.c_upper);
    Ok(rep)
}

/// Dyadic scales `2^{-k}` from `2^{-1}` down to the resolution.
pub fn dyadic_scales(top: f64, resolution: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = top;
    while s >= resolution {
        out.push(s);
        s *= 0.5;
    }
    out
}

/// Planar shapes lifted horizontally into the first two coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum PlanarShape {
    Circle {
        #[serde(default = "one")]
        radius: f64,
        /// Angle swept, in full turns.
        #[serde(default = "one")]
        turns: f64,
    },
    FigureEight {
        #[serde(default = "one")]
        scale: f64,
    },
    Polyline {
        points: Vec<[f64; 2]>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveSpec {
    HorizontalSegment {
        /// Length in the chosen metric.
        length: f64,
        samples: usize,
    },
    LiftedPlanar {
        #[serde(flatten)]
        shape: PlanarShape,
        samples: usize,
    },
    /// Lift of the planar spiral `(r0 + growth * theta / 2pi) (cos theta, sin theta)`.
    CoordinateSpiral {
        turns: f64,
        r0: f64,
        growth: f64,
        samples: usize,
    },
    /// Lift of `x -> (x, amplitude * noise(x))` with piecewise-linear noise through
    /// `knots` random values in `[-1, 1]`, pinned to zero at both ends.
    PerturbedLine {
        length: f64,
        amplitude: f64,
        knots: usize,
        samples: usize,
        seed: u64,
    },
}

impl CurveSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Horizontal lift of a planar polyline: the first layer copies the planar
/// coordinates and the higher layers accumulate through the group product.
pub fn lift_planar(planar: &[[f64; 2]], g: &CarnotGroup) -> Result<Vec<Point>> {
    if g.horizontal_dim() < 2 {
        return Err(Error::InvalidCurve("planar lift needs a first layer of dimension >= 2".into()));
    }
    let mut out: Vec<Point> = Vec::with_capacity(planar.len());
    let mut p = g.horizontal(&planar[0]);
    out.push(p.clone());
    for w in planar.windows(2) {
        let step = g.horizontal(&[w[1][0] - w[0][0], w[1][1] - w[0][1]]);
        p = g.mul(&p, &step);
        p[0] = w[1][0];
        p[1] = w[1][1];
        out.push(p.clone());
    }
    Ok(out)
}

fn planar_samples(shape: &PlanarShape, samples: usize) -> Vec<[f64; 2]> {
    let n = samples.max(2);
    match shape {
        PlanarShape::Circle { radius, turns } => (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * turns * k as f64 / (n - 1) as f64;
                [radius * th.cos(), radius * th.sin()]
            })
            .collect(),
        PlanarShape::FigureEight { scale } => (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / (n - 1) as f64;
                [scale * th.sin(), scale * th.sin() * th.cos()]
            })
            .collect(),
        PlanarShape::Polyline { points } => {
            let seg: Vec<f64> = points
                .windows(2)
                .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
                .collect();
            let total: f64 = seg.iter().sum();
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let mut s = total * k as f64 / (n - 1) as f64;
                let mut i = 0;
                while i + 1 < seg.len() && s > seg[i] {
                    s -= seg[i];
                    i += 1;
                }
                let f = if seg[i] > 0.0 { (s / seg[i]).min(1.0) } else { 0.0 };
                let (a, b) = (points[i], points[i + 1]);
                out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
            }
            out
        }
    }
}

/// Drops a duplicated final sample and marks the curve closed when the lift
/// returns to its start, compared coordinatewise.
fn close_if_returning(mut pts: Vec<Point>) -> (Vec<Point>, bool) {
    if pts.len() > 3 {
        let first = &pts[0];
        let last = pts.last().unwrap();
        let scale = pts.iter().flat_map(|p| p.iter()).fold(1.0f64, |m, x| m.max(x.abs()));
        if first.iter().zip(last.iter()).all(|(a, b)| (a - b).abs() <= 1e-12 * scale) {
            pts.pop();
            return (pts, true);
        }
    }
    (pts, false)
}

pub fn generate_curve(spec: &CurveSpec, g: &CarnotGroup, kind: MetricKind) -> Result<Curve> {
    let check_samples = |n: usize| {
        if n < 2 {
            Err(Error::InvalidCurve(format!("need at least 2 samples, got {n}")))
        } else {
            Ok(n)
        }
    };
    let line = |length: f64, n: usize| -> Vec<[f64; 2]> {
        let l = length / kind.horizontal_factor(g);
        (0..n).map(|k| [l * k as f64 / (n - 1) as f64, 0.0]).collect()
    };
    let (pts, closed) = match spec {
        CurveSpec::HorizontalSegment { length, samples } => {
            let n = check_samples(*samples)?;
            (lift_planar(&line(*length, n), g)?, false)
        }
        CurveSpec::LiftedPlanar { shape, samples } => {
            let n = check_samples(*samples)?;
            close_if_returning(lift_planar(&planar_samples(shape, n), g)?)
        }
        CurveSpec::CoordinateSpiral { turns, r0, growth, samples } => {
            let n = check_samples(*samples)?;
            let planar: Vec<[f64; 2]> = (0..n)
                .map(|k| {
                    let th = std::f64::consts::TAU * turns * k as f64 / (n - 1) as f64;
                    let r = r0 + growth * th / std::f64::consts::TAU;
                    [r * th.cos(), r * th.sin()]
                })
                .collect();
            (lift_planar(&planar, g)?, false)
        }
        CurveSpec::PerturbedLine { length, amplitude, knots, samples, seed } => {
            let n = check_samples(*samples)?;
            let mut rng = sampling::rng(*seed, 0);
            let k = (*knots).max(1);
            let mut vals: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            vals[0] = 0.0;
            vals[k] = 0.0;
            let mut planar = line(*length, n);
            let l = planar[n - 1][0];
            for p in planar.iter_mut() {
                let s = if l > 0.0 { p[0] / l * k as f64 } else { 0.0 };
                let i = (s.floor() as usize).min(k - 1);
                let f = s - i as f64;
                p[1] = amplitude * l * ((1.0 - f) * vals[i] + f * vals[i + 1]);
            }
            (lift_planar(&planar, g)?, false)
        }
    };
    Curve::new(pts, closed, g, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> CarnotGroup {
        CarnotGroup::heisenberg()
    }

    #[test]
    fn segment_has_requested_length() {
        let g = h();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 65 }, &g, MetricKind::Hs).unwrap();
        assert!((c.length() - 1.0).abs() < 1e-12);
        assert!(!c.closed());
    }

    #[test]
    fn zero_amplitude_perturbation_is_the_segment() {
        let g = CarnotGroup::engel();
        let a = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 33 }, &g, MetricKind::Hs).unwrap();
        let b = generate_curve(
            &CurveSpec::PerturbedLine { length: 1.0, amplitude: 0.0, knots: 8, samples: 33, seed: 4 },
            &g,
            MetricKind::Hs,
        )
        .unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn lifted_circle_is_open_with_area_gap() {
        let g = h();
        let spec = CurveSpec::LiftedPlanar { shape: PlanarShape::Circle { radius: 1.0, turns: 1.0 }, samples: 4097 };
        let c = generate_curve(&spec, &g, MetricKind::Hs).unwrap();
        assert!(!c.closed());
        let last = c.points().last().unwrap();
        assert!((last[2] - std::f64::consts::PI).abs() < 1e-5, "{last:?}");
    }

    #[test]
    fn figure_eight_closes() {
        let g = h();
        let spec = CurveSpec::LiftedPlanar { shape: PlanarShape::FigureEight { scale: 1.0 }, samples: 513 };
        let c = generate_curve(&spec, &g, MetricKind::Hs).unwrap();
        assert!(c.closed());
        assert_eq!(c.len(), 512);
    }

    #[test]
    fn lifted_points_are_joined_by_horizontal_segments() {
        let g = h();
        let spec = CurveSpec::CoordinateSpiral { turns: 1.5, r0: 0.2, growth: 0.3, samples: 200 };
        let c = generate_curve(&spec, &g, MetricKind::Hs).unwrap();
        for w in c.points().windows(2) {
            let nh = g.nh(&g.left_diff(&w[0], &w[1]));
            assert!(nh.euclidean_norm() < 1e-13);
        }
    }

    #[test]
    fn circle_length_converges() {
        let g = h();
        let len = |n| {
            generate_curve(
                &CurveSpec::LiftedPlanar { shape: PlanarShape::Circle { radius: 1.0, turns: 1.0 }, samples: n },
                &g,
                MetricKind::Hs,
            )
            .unwrap()
            .length()
        };
        let exact = std::f64::consts::TAU / 0.4;
        let (a, b) = (len(257), len(513));
        assert!((b - exact).abs() < (a - exact).abs());
        assert!((b / exact - 1.0).abs() < 1e-4);
    }

    #[test]
    fn segment_regularity() {
        let g = h();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 1025 }, &g, MetricKind::Hs).unwrap();
        let m = c.measure();
        assert!((m.total() - 1.0).abs() < 1e-12);
        let dm = DistanceMatrix::new(c.points(), &g, MetricKind::Hs);
        let interior = MeasuredSet { points: m.points.clone(), weights: m.weights.clone(), resolution: m.resolution };
        let rep = regularity_constants(&interior, &dm, &[0.05, 0.1, 0.2]).unwrap();
        assert!(rep.c_upper <= 2.0 + 0.05 && rep.c_upper >= 2.0 - 1e-9, "{rep:?}");
        assert!((rep.c_lower - 1.0).abs() < 0.05, "{rep:?}");
        assert!(matches!(
            regularity_constants(&interior, &dm, &[1e-5]),
            Err(Error::ScaleBelowResolution { .. })
        ));
    }

    #[test]
    fn rejects_empty_and_repeated() {
        let g = h();
        assert!(matches!(Curve::new(vec![], false, &g, MetricKind::Hs), Err(Error::Empty)));
        let p = g.identity();
        assert!(Curve::new(vec![p.clone(), p], false, &g, MetricKind::Hs).is_err());
    }

    #[test]
    fn curve_spec_json() {
        let s = r#"{"kind":"lifted-planar","shape":"circle","radius":2.0,"samples":10}"#;
        let spec = CurveSpec::from_json(s).unwrap();
        assert_eq!(
            spec,
            CurveSpec::LiftedPlanar { shape: PlanarShape::Circle { radius: 2.0, turns: 1.0 }, samples: 10 }
        );
    }
}
