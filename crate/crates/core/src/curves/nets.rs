use serde::Serialize;

use super::Curve;
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};

#[derive(Clone, Debug, Serialize)]
pub struct NetLevel {
    pub level: i32,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetFamily {
    pub n_min: i32,
    pub n_max: i32,
    pub levels: Vec<NetLevel>,
}

impl NetFamily {
    pub fn level(&self, n: i32) -> Option<&NetLevel> {
        self.levels.iter().find(|l| l.level == n)
    }
}

/// Greedy `2^{-n}`-separated nets in sample order, one per level, with
/// separation and covering re-checked afterwards.
pub fn build_nets(curve: &Curve, n_min: i32, n_max: i32, g: &CarnotGroup) -> Result<NetFamily> {
    if n_min > n_max {
        return Err(Error::InvalidParameter(format!("n_min {n_min} > n_max {n_max}")));
    }
    let res = curve.resolution();
    let finest = 2f64.powi(-n_max);
    if curve.len() > 1 && finest <= res {
        return Err(Error::ResolutionTooCoarse {
            level: n_max,
            spacing: finest,
            resolution: res,
        });
    }
    let kind = curve.metric();
    let pts = curve.points();
    let d = |i: usize, j: usize| kind.dist(g, &pts[i], &pts[j]);
    let mut levels = Vec::new();
    for n in n_min..=n_max {
        let sep = 2f64.powi(-n);
        let mut net: Vec<usize> = Vec::new();
        for i in 0..pts.len() {
            if net.iter().rev().all(|&j| d(i, j) >= sep) {
                net.push(i);
            }
        }
        for (a, &i) in net.iter().enumerate() {
            if let Some(&j) = net[a + 1..].iter().find(|&&j| d(i, j) < sep) {
                return Err(Error::InvalidParameter(format!("level {n}: net points {i} and {j} closer than {sep}")));
            }
        }
        for i in 0..pts.len() {
            if !net.iter().rev().any(|&j| d(i, j) < sep) {
                return Err(Error::InvalidParameter(format!("level {n}: sample {i} not covered")));
            }
        }
        levels.push(NetLevel { level: n, indices: net });
    }
    Ok(NetFamily { n_min, n_max, levels })
}

#[derive(Clone, Debug, Serialize)]
pub struct Ball {
    pub level: i32,
    pub center_index: usize,
    pub center: Point,
    pub radius: f64,
    /// Radius below 1/100.
    pub small: bool,
}

/// `B(x, 10 * 2^{-n})` for every net point `x` of every level.
pub fn multiresolution(nets: &NetFamily, curve: &Curve) -> Vec<Ball> {
    nets.levels
        .iter()
        .flat_map(|l| {
            let radius = 10.0 * 2f64.powi(-l.level);
            l.indices.iter().map(move |&i| Ball {
                level: l.level,
                center_index: i,
                center: curve.points()[i].clone(),
                radius,
                small: radius < 0.01,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{generate_curve, CurveSpec};
    use crate::metric::MetricKind;

    #[test]
    fn unit_segment_level_zero() {
        let g = CarnotGroup::heisenberg();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 257 }, &g, MetricKind::Hs).unwrap();
        let nets = build_nets(&c, 0, 6, &g).unwrap();
        let l0 = nets.level(0).unwrap();
        assert!((1..=3).contains(&l0.indices.len()));
        for l in &nets.levels {
            assert!(l.indices.len() as f64 <= 2f64.powi(l.level) * 1.0 + 1.0);
        }
    }

    #[test]
    fn single_point() {
        let g = CarnotGroup::heisenberg();
        let c = Curve::new(vec![g.identity()], false, &g, MetricKind::Hs).unwrap();
        let nets = build_nets(&c, -2, 5, &g).unwrap();
        assert!(nets.levels.iter().all(|l| l.indices == vec![0]));
    }

    #[test]
    fn too_fine() {
        let g = CarnotGroup::heisenberg();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 17 }, &g, MetricKind::Hs).unwrap();
        assert!(matches!(build_nets(&c, 0, 4, &g), Err(Error::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn ball_radii() {
        let g = CarnotGroup::heisenberg();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 2049 }, &g, MetricKind::Hs).unwrap();
        let nets = build_nets(&c, 9, 10, &g).unwrap();
        let balls = multiresolution(&nets, &c);
        let b10 = balls.iter().find(|b| b.level == 10).unwrap();
        assert_eq!(b10.radius, 10.0 / 1024.0);
        assert!(b10.small);
        assert!(!balls.iter().find(|b| b.level == 9).unwrap().small);
        let empty = NetFamily { n_min: 0, n_max: 0, levels: vec![NetLevel { level: 0, indices: vec![] }] };
        assert!(multiresolution(&empty, &c).is_empty());
    }
}
