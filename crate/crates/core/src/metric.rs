//! Homogeneous norms and the induced left-invariant distances.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};
use crate::sampling::{self, par_argmax};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "hs")]
    Hs,
    #[serde(rename = "linf")]
    MaxInfinity,
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" => Ok(Self::Hs),
            "linf" | "max" | "maxinfinity" => Ok(Self::MaxInfinity),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hs => "hs",
            Self::MaxInfinity => "linf",
        })
    }
}

impl MetricKind {
    /// Norm without argument checks.
    #[inline]
    pub fn norm(self, g: &CarnotGroup, p: &[f64]) -> f64 {
        let sq = g.layer_sq_norms(p);
        match self {
            Self::Hs => hs_from_layers(&sq, g.eta()),
            Self::MaxInfinity => max_from_layers(&sq),
        }
    }

    /// `||q^{-1} p||`.
    #[inline]
    pub fn dist(self, g: &CarnotGroup, p: &[f64], q: &[f64]) -> f64 {
        self.norm(g, &g.left_diff(q, p))
    }

    /// `c` with `||h|| = c |h|` for horizontal `h`.
    pub fn horizontal_factor(self, g: &CarnotGroup) -> f64 {
        match self {
            Self::Hs => 1.0 / g.eta(),
            Self::MaxInfinity => 1.0,
        }
    }
}

/// Root of `sum_i a_i s^{2i} = eta^2` in `s = 1/t`, from the squared layer norms.
///
/// Step two is a quadratic in `s^2`. Otherwise Newton from the right on a convex
/// increasing function, kept inside a shrinking bracket.
pub fn hs_from_layers(sq: &[f64], eta: f64) -> f64 {
    if sq[1..].iter().all(|&a| a == 0.0) {
        return sq[0].sqrt() / eta;
    }
    let eta2 = eta * eta;
    if let [a1, a2] = *sq {
        return ((a1 + (a1 * a1 + 4.0 * a2 * eta2).sqrt()) / (2.0 * eta2)).sqrt();
    }
    let mut hi = f64::INFINITY;
    for (i, &a) in sq.iter().enumerate() {
        if a > 0.0 {
            hi = hi.min((eta2 / a).powf(0.5 / (i + 1) as f64));
        }
    }
    let mut lo = hi / (sq.len() as f64).sqrt();
    let eval = |s: f64| {
        let s2 = s * s;
        let (mut g, mut dg, mut pw) = (-eta2, 0.0, 1.0);
        for (i, &a) in sq.iter().enumerate() {
            let k = (i + 1) as f64;
            dg += 2.0 * k * a * pw * s;
            pw *= s2;
            g += a * pw;
        }
        (g, dg)
    };
    let mut s = hi;
    for _ in 0..200 {
        let (gv, dg) = eval(s);
        if gv == 0.0 {
            break;
        }
        if gv < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = s - gv / dg;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - s).abs() <= 1e-16 * s || hi - lo <= 1e-16 * hi;
        s = next;
        if done {
            break;
        }
    }
    1.0 / s
}

pub fn max_from_layers(sq: &[f64]) -> f64 {
    sq.iter()
        .enumerate()
        .map(|(i, &a)| a.sqrt().powf(1.0 / (i + 1) as f64))
        .fold(0.0, f64::max)
}

pub fn hs_norm(p: &[f64], g: &CarnotGroup) -> Result<f64> {
    g.check_dim(p)?;
    Ok(MetricKind::Hs.norm(g, p))
}

pub fn max_norm(p: &[f64], g: &CarnotGroup) -> Result<f64> {
    g.check_dim(p)?;
    Ok(MetricKind::MaxInfinity.norm(g, p))
}

pub fn hs_dist(p: &[f64], q: &[f64], g: &CarnotGroup) -> Result<f64> {
    g.check_dim(p)?;
    g.check_dim(q)?;
    Ok(MetricKind::Hs.dist(g, p, q))
}

pub fn max_dist(p: &[f64], q: &[f64], g: &CarnotGroup) -> Result<f64> {
    g.check_dim(p)?;
    g.check_dim(q)?;
    Ok(MetricKind::MaxInfinity.dist(g, p, q))
}

/// `|delta_{1/||p||}(p)| - eta` for the HS norm.
pub fn hs_residual(g: &CarnotGroup, p: &[f64]) -> f64 {
    let t = MetricKind::Hs.norm(g, p);
    if t == 0.0 {
        return 0.0;
    }
    g.scale(1.0 / t, p).euclidean_norm() - g.eta()
}

#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityReport {
    pub eta: f64,
    pub metric: MetricKind,
    pub samples: usize,
    pub box_radius: f64,
    pub worst_defect: f64,
    pub argmax_pair: (Point, Point),
}

impl SubadditivityReport {
    pub fn certified(&self) -> bool {
        self.worst_defect <= 0.0
    }
}

/// Worst `||xy|| - ||x|| - ||y||` over random pairs in the box.
///
/// Half the pairs are dilated by a log-uniform factor so small and mixed scales
/// are exercised.
pub fn check_subadditivity(
    g: &CarnotGroup,
    kind: MetricKind,
    samples: usize,
    box_radius: f64,
    seed: u64,
) -> SubadditivityReport {
    let n = g.dim();
    let (_, worst, pair) = par_argmax(samples, seed, |r, i| {
        let mut x = sampling::uniform_box(r, n, box_radius);
        let mut y = sampling::uniform_box(r, n, box_radius);
        if i % 2 == 1 {
            x = g.scale(sampling::log_uniform(r, 1e-3, 1.0), &x);
            y = g.scale(sampling::log_uniform(r, 1e-3, 1.0), &y);
        }
        let d = kind.norm(g, &g.mul(&x, &y)) - kind.norm(g, &x) - kind.norm(g, &y);
        (d, (x, y))
    })
    .unwrap_or((0, f64::NEG_INFINITY, (g.identity(), g.identity())));
    SubadditivityReport {
        eta: g.eta(),
        metric: kind,
        samples,
        box_radius,
        worst_defect: worst,
        argmax_pair: pair,
    }
}

fn random_on_sphere(g: &CarnotGroup, kind: MetricKind, r: &mut sampling::Rng) -> Point {
    loop {
        let u = sampling::uniform_box(r, g.dim(), 1.0);
        let nu = kind.norm(g, &u);
        if nu > 1e-9 {
            return g.scale(1.0 / nu, &u);
        }
    }
}

/// Empirical `L` with `L^{-1} d_a <= d_b <= L d_a`.
pub fn metric_equivalence_constant(
    g: &CarnotGroup,
    a: MetricKind,
    b: MetricKind,
    samples: usize,
    seed: u64,
) -> f64 {
    if a == b {
        return 1.0;
    }
    par_argmax(samples, seed, |r, _| {
        let p = random_on_sphere(g, a, r);
        let nb = b.norm(g, &p);
        (nb.max(1.0 / nb), ())
    })
    .map_or(1.0, |(_, l, _)| l)
}

/// Empirical quasi-triangle constant `sup d(x,z) / (d(x,y) + d(y,z))`.
pub fn quasi_triangle_constant(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> f64 {
    let n = g.dim();
    par_argmax(samples, seed, |r, _| {
        let x = sampling::uniform_box(r, n, 1.0);
        let y = sampling::uniform_box(r, n, 1.0);
        let z = sampling::uniform_box(r, n, 1.0);
        let num = kind.dist(g, &x, &z);
        let den = kind.dist(g, &x, &y) + kind.dist(g, &y, &z);
        (if den > 0.0 { num / den } else { 0.0 }, ())
    })
    .map_or(1.0, |(_, c, _)| c)
}

/// Largest `d(x,y)^r / |x - y|` over pairs in the Euclidean unit ball, with half
/// the pairs at small separation.
pub fn holder_constant(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> f64 {
    let n = g.dim();
    let r = g.step() as i32;
    par_argmax(samples, seed, |rng, i| {
        let x = sampling::euclidean_ball(rng, n, 1.0);
        let y = if i % 2 == 0 {
            sampling::euclidean_ball(rng, n, 1.0)
        } else {
            let h = sampling::log_uniform(rng, 1e-6, 1e-1);
            let dir = sampling::unit_vector(rng, n);
            x.iter().zip(&dir).map(|(a, d)| a + h * d).collect::<Vec<_>>().into()
        };
        let e = x.iter().zip(y.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let v = if e > 0.0 { kind.dist(g, &x, &y).powi(r) / e } else { 0.0 };
        (v, ())
    })
    .map_or(0.0, |(_, c, _)| c)
}

/// Sampled diameter of `B(center, rho)`: best pair among `samples` sphere
/// points, then a random local ascent.
pub fn ball_diameter_estimate(
    g: &CarnotGroup,
    kind: MetricKind,
    center: &[f64],
    rho: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut r = sampling::rng(seed, u64::MAX);
    let pts: Vec<Point> = (0..samples).map(|_| random_on_sphere(g, kind, &mut r)).collect();
    let d = |a: &[f64], b: &[f64]| kind.dist(g, a, b);
    let (mut best, mut pa, mut pb) = (0.0, pts[0].clone(), pts[0].clone());
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let v = d(&pts[i], &pts[j]);
            if v > best {
                (best, pa, pb) = (v, pts[i].clone(), pts[j].clone());
            }
        }
    }
    let mut step = 0.1;
    for it in 0..4000 {
        let perturb = |p: &Point, r: &mut sampling::Rng| {
            let q: Point = p
                .iter()
                .map(|x| x + step * r.random_range(-1.0..=1.0))
                .collect::<Vec<_>>()
                .into();
            let nq = kind.norm(g, &q);
            g.scale(1.0 / nq, &q)
        };
        let (qa, qb) = (perturb(&pa, &mut r), perturb(&pb, &mut r));
        let v = d(&qa, &qb);
        if v > best {
            (best, pa, pb) = (v, qa, qb);
        }
        if it % 500 == 499 {
            step *= 0.5;
        }
    }
    let map = |p: &Point| g.mul(center, &g.scale(rho, p));
    d(&map(&pa), &map(&pb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_closed_form() {
        let g = CarnotGroup::heisenberg();
        assert_eq!(MetricKind::Hs.norm(&g, &[0.6, 0.8, 0.0]), 1.0 / 0.4);
        assert_eq!(MetricKind::Hs.norm(&g, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn heisenberg_vertical() {
        let g = CarnotGroup::heisenberg();
        let v = MetricKind::Hs.norm(&g, &[0.0, 0.0, 1.0]);
        assert!((v - (1.0f64 / 0.4).sqrt()).abs() < 1e-12);
        assert!((v - 1.58114).abs() < 1e-5);
    }

    #[test]
    fn n_infinity_examples() {
        let g = CarnotGroup::heisenberg();
        assert_eq!(MetricKind::MaxInfinity.norm(&g, &[3.0, 4.0, 0.0]), 5.0);
        assert_eq!(MetricKind::MaxInfinity.norm(&g, &[0.0, 0.0, 4.0]), 2.0);
    }

    #[test]
    fn residual_is_small() {
        let g = CarnotGroup::engel();
        for p in [[1.0, 2.0, -3.0, 4.0], [1e-6, 0.0, 0.0, 1e3], [0.0, 0.0, 1e-9, 0.0]] {
            assert!(hs_residual(&g, &p).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn checked_norm_rejects_nan() {
        let g = CarnotGroup::heisenberg();
        assert!(matches!(hs_norm(&[f64::NAN, 0.0, 0.0], &g), Err(Error::NonFinite)));
        assert!(matches!(max_dist(&[0.0; 3], &[0.0; 2], &g), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn abelian_is_subadditive() {
        let g = CarnotGroup::builtin("abelian3").unwrap();
        let rep = check_subadditivity(&g, MetricKind::Hs, 2000, 10.0, 3);
        assert!(rep.certified(), "{}", rep.worst_defect);
    }

    #[test]
    fn equivalence_of_a_metric_with_itself() {
        let g = CarnotGroup::heisenberg();
        assert_eq!(metric_equivalence_constant(&g, MetricKind::Hs, MetricKind::Hs, 10, 0), 1.0);
    }

    #[test]
    fn parse_metric() {
        assert_eq!("hs".parse::<MetricKind>().unwrap(), MetricKind::Hs);
        assert_eq!("linf".parse::<MetricKind>().unwrap(), MetricKind::MaxInfinity);
        assert!("l2".parse::<MetricKind>().is_err());
    }
}
