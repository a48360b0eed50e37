//! Sampled checks of the curvature inequalities, and empirical constants.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{generate_curve, CurveSpec, PlanarShape};
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};
use crate::horizontal::{
    diameter, dist_point_segment_with, estimate_r0, r0_line_ratio, segment_between, HorizontalLine, HorizontalSegment,
    LineSearch,
};
use crate::metric::MetricKind;
use crate::optimize::grid_then_golden;
use crate::sampling::{self, par_sample, Rng};

/// Exponent choice for curvature and Carleson sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    /// 4 in step 2, `2r^2` otherwise.
    Auto,
    TwoRSquared,
    Value(f64),
}

impl Exponent {
    pub fn resolve(self, g: &CarnotGroup) -> f64 {
        let r = g.step() as f64;
        match self {
            Self::Auto if g.step() == 2 => 4.0,
            Self::Auto | Self::TwoRSquared => 2.0 * r * r,
            Self::Value(p) => p,
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "2r2" | "2r^2" => Ok(Self::TwoRSquared),
            other => match other.parse::<f64>() {
                Ok(p) if p > 0.0 && p.is_finite() => Ok(Self::Value(p)),
                _ => Err(Error::InvalidParameter(format!("bad exponent `{s}`"))),
            },
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::TwoRSquared => f.write_str("2r2"),
            Self::Value(p) => write!(f, "{p}"),
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance from `c` to the segment `[0, s]`.
pub fn euclid_dist_to_segment(c: &[f64], s: &[f64]) -> f64 {
    let ss: f64 = s.iter().map(|x| x * x).sum();
    let t = if ss > 0.0 {
        (c.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / ss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    c.iter().zip(s).map(|(a, b)| (a - t * b).powi(2)).sum::<f64>().sqrt()
}

/// `|c| |d| |c/|c| - d/|d||`, zero when either vector vanishes.
pub fn angular_product(c: &[f64], d: &[f64]) -> f64 {
    let (nc, nd) = (norm2(c), norm2(d));
    if nc == 0.0 || nd == 0.0 {
        return 0.0;
    }
    nc * nd * c.iter().zip(d).map(|(a, b)| (a / nc - b / nd).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct Quadruple {
    pub a: Point,
    pub z: Point,
    pub v: Point,
    pub w: Point,
    pub rho: f64,
    pub m: f64,
}

impl Quadruple {
    /// `[d(a,z), d(a,v), d(z,v), d(v,w), d(a,w)]`.
    pub fn distances(&self, g: &CarnotGroup, kind: MetricKind) -> [f64; 5] {
        let d = |p: &Point, q: &Point| kind.dist(g, p, q);
        [
            d(&self.a, &self.z),
            d(&self.a, &self.v),
            d(&self.z, &self.v),
            d(&self.v, &self.w),
            d(&self.a, &self.w),
        ]
    }

    pub fn admissible(&self, g: &CarnotGroup, kind: MetricKind) -> bool {
        let d = self.distances(g, kind);
        let lo = self.m * self.rho;
        d[..4].iter().all(|&x| x >= lo) && d.iter().all(|&x| x <= self.rho)
    }
}

/// `d(a,z) + d(z,v) + d(v,w) - d(a,w)`.
pub fn excess(a: &[f64], z: &[f64], v: &[f64], w: &[f64], g: &CarnotGroup, kind: MetricKind) -> f64 {
    kind.dist(g, a, z) + kind.dist(g, z, v) + kind.dist(g, v, w) - kind.dist(g, a, w)
}

fn inner_search(g: &CarnotGroup) -> LineSearch {
    LineSearch {
        grid: if g.step() <= 2 { 0 } else { 32 },
        tol: 1e-10,
        max_iter: 120,
    }
}

/// `sup_t d(f(t), target)` over `t` in `[0, 1]`.
pub fn segment_sup(f: &HorizontalSegment, target: &HorizontalSegment, g: &CarnotGroup, kind: MetricKind) -> f64 {
    let search = inner_search(g);
    let d = |t: f64| dist_point_segment_with(&f.at(g, t), target, g, kind, search).0;
    -grid_then_golden(|t| -d(t), 0.0, 1.0, 16, 1e-9, 80).1
}

/// `(sup_t d(L_av(t), L_aw), sup_t d(L_vw(t), L_aw))`.
pub fn goal_sups(a: &[f64], v: &[f64], w: &[f64], g: &CarnotGroup, kind: MetricKind) -> (f64, f64) {
    let aw = segment_between(a, w, g);
    let s1 = segment_sup(&segment_between(a, v, g), &aw, g, kind);
    let s2 = segment_sup(&segment_between(v, w, g), &aw, g, kind);
    (s1, s2)
}

/// Sum of the two powered segment deviations.
pub fn goal_lhs(a: &[f64], v: &[f64], w: &[f64], g: &CarnotGroup, kind: MetricKind, exponent: f64) -> f64 {
    let (s1, s2) = goal_sups(a, v, w, g, kind);
    s1.powf(exponent) + s2.powf(exponent)
}

/// `lhs / (rho^{p-1} Delta)`, or `None` when `Delta < 1e-12 rho`.
pub fn goal_ratio(q: &Quadruple, g: &CarnotGroup, kind: MetricKind, exponent: f64) -> Option<f64> {
    let delta = excess(&q.a, &q.z, &q.v, &q.w, g, kind);
    if delta < 1e-12 * q.rho {
        return None;
    }
    Some(goal_lhs(&q.a, &q.v, &q.w, g, kind, exponent) / (q.rho.powf(exponent - 1.0) * delta))
}

/// The two-sided excess bound of the first step of the proof, for the pair
/// `(v, w)` based at `a = 0`:
/// `(rho^{1-2r} ||NH(w)||^{2r} + rho^{-1} d(v_1, l_{w_1})^2) / (d(0,v) + d(v,w) - d(0,w))`.
pub fn delta_part_ratio(v: &[f64], w: &[f64], rho: f64, g: &CarnotGroup, kind: MetricKind) -> Option<f64> {
    let r = g.step() as i32;
    let o = g.identity();
    let den = kind.dist(g, v, &o) + kind.dist(g, w, v) - kind.dist(g, w, &o);
    if den < 1e-12 * rho {
        return None;
    }
    let h = g.layer_range(1);
    let num = rho.powi(1 - 2 * r) * kind.norm(g, &g.nh(w)).powi(2 * r)
        + euclid_dist_to_segment(&v[h.clone()], &w[h]).powi(2) / rho;
    Some(num / den)
}

#[derive(Clone, Debug, Serialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).floor() as usize];
        Some(Self {
            p50: q(0.5),
            p90: q(0.9),
            p99: q(0.99),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GoalWitness {
    pub quadruple: Quadruple,
    pub delta: f64,
    pub lhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentStats {
    pub exponent: f64,
    pub max_ratio: f64,
    pub quantiles: Option<Quantiles>,
    pub witness: Option<GoalWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoalReport {
    pub group: String,
    pub metric: MetricKind,
    pub m: f64,
    pub rho: f64,
    pub samples: usize,
    pub attempts: usize,
    pub skipped_degenerate: usize,
    pub exponents: Vec<ExponentStats>,
    /// Largest excess-part ratio over both consecutive pairs of each quadruple.
    pub delta_part_max: f64,
}

impl GoalReport {
    pub fn stats(&self, exponent: f64) -> Option<&ExponentStats> {
        self.exponents.iter().find(|s| s.exponent == exponent)
    }
}

#[derive(Clone, Debug)]
pub struct GoalConfig {
    pub samples: usize,
    pub m: f64,
    pub rho: f64,
    pub exponents: Vec<f64>,
    pub seed: u64,
    /// Rejection attempts allowed per accepted quadruple.
    pub max_attempts: usize,
}

impl GoalConfig {
    pub fn new(g: &CarnotGroup) -> Self {
        let r = g.step() as f64;
        Self {
            samples: 10_000,
            m: 0.1,
            rho: 1.0,
            exponents: vec![2.0 * r * r],
            seed: 0,
            max_attempts: 100_000,
        }
    }
}

/// Point of the coordinate box containing the ball `B(0, rho)`.
fn box_point(r: &mut Rng, g: &CarnotGroup, kind: MetricKind, rho: f64) -> Point {
    let c = match kind {
        MetricKind::Hs => g.eta(),
        MetricKind::MaxInfinity => 1.0,
    };
    g.scale(rho, &sampling::uniform_box(r, g.dim(), c))
}

/// Admissible quadruple with `a = 0` by rejection, and the attempts used.
pub fn sample_quadruple(
    r: &mut Rng,
    g: &CarnotGroup,
    kind: MetricKind,
    m: f64,
    rho: f64,
    max_attempts: usize,
) -> Option<(Quadruple, usize)> {
    for k in 1..=max_attempts {
        let q = Quadruple {
            a: g.identity(),
            z: box_point(r, g, kind, rho),
            v: box_point(r, g, kind, rho),
            w: box_point(r, g, kind, rho),
            rho,
            m,
        };
        if q.admissible(g, kind) {
            return Some((q, k));
        }
    }
    None
}

/// Empirical `C_0`: ratios `lhs / (rho^{p-1} Delta)` over sampled admissible
/// quadruples, one set of segment sups shared by every exponent.
pub fn check_goal(g: &CarnotGroup, kind: MetricKind, cfg: &GoalConfig) -> Result<GoalReport> {
    if !(cfg.m > 0.0 && cfg.m < 1.0) {
        return Err(Error::InvalidParameter(format!("m = {} outside (0, 1)", cfg.m)));
    }
    if !(cfg.rho > 0.0 && cfg.rho.is_finite()) {
        return Err(Error::NonPositiveRadius(cfg.rho));
    }
    let rows = par_sample(cfg.samples, cfg.seed, |r, _| {
        let (q, tries) = sample_quadruple(r, g, kind, cfg.m, cfg.rho, cfg.max_attempts)?;
        let delta = excess(&q.a, &q.z, &q.v, &q.w, g, kind);
        let sups = goal_sups(&q.a, &q.v, &q.w, g, kind);
        let dp = [
            delta_part_ratio(&q.v, &q.w, cfg.rho, g, kind),
            delta_part_ratio(&q.z, &q.v, cfg.rho, g, kind),
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
        Some((q, tries, delta, sups, dp))
    });
    let mut attempts = 0;
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        let Some(row) = row else {
            return Err(Error::NoAdmissibleSamples { attempts: cfg.max_attempts });
        };
        attempts += row.1;
        kept.push(row);
    }
    let guard = 1e-12 * cfg.rho;
    let skipped = kept.iter().filter(|k| k.2 < guard).count();
    let delta_part_max = kept.iter().map(|k| k.4).fold(0.0, f64::max);
    let exponents = cfg
        .exponents
        .iter()
        .map(|&p| {
            let mut ratios = Vec::new();
            let mut witness: Option<GoalWitness> = None;
            for (q, _, delta, (s1, s2), _) in kept.iter().filter(|k| k.2 >= guard) {
                let lhs = s1.powf(p) + s2.powf(p);
                let ratio = lhs / (cfg.rho.powf(p - 1.0) * delta);
                if witness.as_ref().is_none_or(|w| ratio > w.ratio) {
                    witness = Some(GoalWitness { quadruple: q.clone(), delta: *delta, lhs, ratio });
                }
                ratios.push(ratio);
            }
            ExponentStats {
                exponent: p,
                max_ratio: witness.as_ref().map_or(0.0, |w| w.ratio),
                quantiles: Quantiles::of(&ratios),
                witness,
            }
        })
        .collect();
    Ok(GoalReport {
        group: g.name().to_string(),
        metric: kind,
        m: cfg.m,
        rho: cfg.rho,
        samples: kept.len(),
        attempts,
        skipped_degenerate: skipped,
        exponents,
        delta_part_max,
    })
}

/// `d(c, l_{c+d})^2 - |c||d| |c/|c| - d/|d||^2 / 2`; never positive.
pub fn height_defect(c: &[f64], d: &[f64]) -> f64 {
    let s: Vec<f64> = c.iter().zip(d).map(|(a, b)| a + b).collect();
    let lhs = euclid_dist_to_segment(c, &s).powi(2);
    let ap = angular_product(c, d);
    let rhs = if ap == 0.0 { 0.0 } else { 0.5 * ap * ap / (norm2(c) * norm2(d)) };
    lhs - rhs
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightReport {
    pub dim: usize,
    pub samples: usize,
    pub violations: usize,
    pub worst_defect: f64,
    pub witness: (Vec<f64>, Vec<f64>),
}

/// Random pairs in `R^dim`: half Gaussian, half nearly parallel or antiparallel.
pub fn check_lemma_height(dim: usize, samples: usize, seed: u64) -> HeightReport {
    let rows = par_sample(samples, seed, |r, i| {
        let c = sampling::gaussian(r, dim);
        let d = if i % 2 == 0 {
            sampling::gaussian(r, dim)
        } else {
            let lam = r.random_range(-2.0..2.0);
            let eps = sampling::log_uniform(r, 1e-9, 1.0);
            let noise = sampling::gaussian(r, dim);
            c.iter().zip(&noise).map(|(x, n)| lam * x + eps * n).collect()
        };
        let scale = (norm2(&c) + norm2(&d)).powi(2).max(1.0);
        (height_defect(&c, &d), scale, c, d)
    });
    let violations = rows.iter().filter(|(def, scale, ..)| *def > 1e-12 * scale).count();
    let worst = rows
        .into_iter()
        .fold(None::<(f64, f64, Vec<f64>, Vec<f64>)>, |acc, row| match acc {
            Some(a) if a.0 >= row.0 => Some(a),
            _ => Some(row),
        })
        .unwrap_or((f64::NEG_INFINITY, 0.0, vec![0.0; dim], vec![0.0; dim]));
    HeightReport {
        dim,
        samples,
        violations,
        worst_defect: worst.0,
        witness: (worst.2, worst.3),
    }
}

fn split_layers<'a>(g: &CarnotGroup, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    p.split_at(g.horizontal_dim())
}

/// `(|a1||b1||a1/|a1| - b1/|b1||, |a2|(|b1|+|b2|) + |b2|(|a1|+|a2|))`.
pub fn nh_terms(g: &CarnotGroup, a: &[f64], b: &[f64]) -> (f64, f64) {
    let (a1, a2) = split_layers(g, a);
    let (b1, b2) = split_layers(g, b);
    let (na1, na2, nb1, nb2) = (norm2(a1), norm2(a2), norm2(b1), norm2(b2));
    (angular_product(a1, b1), na2 * (nb1 + nb2) + nb2 * (na1 + na2))
}

/// Shrinks by dilation until strictly inside the Euclidean unit ball.
fn into_unit_ball(g: &CarnotGroup, mut p: Point) -> Point {
    while p.euclidean_norm() >= 1.0 {
        p = g.scale(0.9, &p);
    }
    p
}

/// Pairs for the product estimates: uniform in the box, dilated, or nearly
/// collinear horizontal points with small higher layers.
pub fn sample_pair(r: &mut Rng, g: &CarnotGroup, i: usize, radius: f64) -> (Point, Point) {
    let n = g.dim();
    match i % 3 {
        0 => (sampling::uniform_box(r, n, radius), sampling::uniform_box(r, n, radius)),
        1 => {
            let s = sampling::log_uniform(r, 1e-2, 1.0);
            let t = sampling::log_uniform(r, 1e-2, 1.0);
            (
                g.scale(s, &sampling::uniform_box(r, n, radius)),
                g.scale(t, &sampling::uniform_box(r, n, radius)),
            )
        }
        _ => {
            let v1 = g.horizontal_dim();
            let u = sampling::unit_vector(r, v1);
            let eps = sampling::log_uniform(r, 1e-4, 1.0);
            let noise = sampling::gaussian(r, v1);
            let u2: Vec<f64> = u.iter().zip(&noise).map(|(a, b)| a + eps * b).collect();
            let make = |dir: &[f64], r: &mut Rng| {
                let lam = radius * r.random_range(0.05..1.0) / norm2(dir);
                let h: Vec<f64> = dir.iter().map(|x| lam * x).collect();
                let mut bump = g.scale(eps, &sampling::uniform_box(r, n, radius));
                bump[..v1].fill(0.0);
                g.mul(&g.horizontal(&h), &bump)
            };
            let a = make(&u, r);
            let b = make(&u2, r);
            (a, b)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NhReport {
    pub samples: usize,
    /// Pairs whose bracket terms vanish while `NH(ab)` does not.
    pub counterexamples: usize,
    /// `sup ||NH(ab)||^r / (t1 + t2)` over general pairs with `t1 + t2 > 0`.
    pub max_ratio: f64,
    pub witness: (Point, Point),
    /// The same ratio over the horizontal projections of the pairs.
    pub horizontal_max_ratio: f64,
    pub horizontal_witness: (Point, Point),
}

/// `||NH(ab)||^r / (t1 + t2)`; `Err(())` when only the right side vanishes and
/// `None` when both do.
fn nh_ratio(g: &CarnotGroup, kind: MetricKind, a: &[f64], b: &[f64]) -> std::result::Result<Option<f64>, ()> {
    let nh = kind.norm(g, &g.nh(&g.mul(a, b))).powi(g.step() as i32);
    let (t1, t2) = nh_terms(g, a, b);
    match (t1 + t2 > 1e-300, nh > 1e-12) {
        (true, _) => Ok(Some(nh / (t1 + t2))),
        (false, true) => Err(()),
        (false, false) => Ok(None),
    }
}

/// The non-horizontal part of a product against the bracket terms, over pairs
/// inside the Euclidean unit ball and over their horizontal projections.
pub fn check_lemma_nh(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> NhReport {
    let rows = par_sample(samples, seed, |rng, i| {
        let (a, b) = sample_pair(rng, g, i, 1.0);
        let (a, b) = (into_unit_ball(g, a), into_unit_ball(g, b));
        let (ha, hb) = (g.tilde_pi(&a), g.tilde_pi(&b));
        (nh_ratio(g, kind, &a, &b), nh_ratio(g, kind, &ha, &hb), a, b, ha, hb)
    });
    let counterexamples = rows.iter().filter(|x| x.0.is_err() || x.1.is_err()).count();
    let mut best = (0.0, g.identity(), g.identity());
    let mut hbest = (0.0, g.identity(), g.identity());
    for (ratio, hratio, a, b, ha, hb) in rows {
        if let Ok(Some(x)) = ratio {
            if x > best.0 {
                best = (x, a, b);
            }
        }
        if let Ok(Some(x)) = hratio {
            if x > hbest.0 {
                hbest = (x, ha, hb);
            }
        }
    }
    NhReport {
        samples,
        counterexamples,
        max_ratio: best.0,
        witness: (best.1, best.2),
        horizontal_max_ratio: hbest.0,
        horizontal_witness: (hbest.1, hbest.2),
    }
}

/// `0.9 * min(1, inf (t1^2 + t2^2) / ||NH(ab)||^{2r})` over horizontal pairs in
/// the unit ball.
pub fn estimate_alpha(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> ConstantEstimate {
    let v1 = g.horizontal_dim();
    let rows = par_sample(samples, seed, |r, _| {
        let a = g.horizontal(&sampling::euclidean_ball(r, v1, 1.0));
        let b = g.horizontal(&sampling::euclidean_ball(r, v1, 1.0));
        (alpha_ratio(g, kind, &a, &b), a, b)
    });
    let mut best = (f64::INFINITY, g.identity(), g.identity());
    for (v, a, b) in rows {
        if let Some(v) = v.filter(|&v| v < best.0) {
            best = (v, a, b);
        }
    }
    let mut c = ConstantEstimate::from_ratio(best.0, samples, vec![best.1, best.2], vec![]);
    c.value = 0.9 * c.ratio.min(1.0);
    c
}

/// `m^{2r} / k * (alpha ||NH(xy)||^{2r} / s^{2r-1} + d(x_1, l_{x_1+y_1})^2 / s)` with
/// `s = ||x|| + ||y||`.
fn ti_quantity(g: &CarnotGroup, kind: MetricKind, x: &[f64], y: &[f64], alpha: f64, m: f64, k: f64) -> f64 {
    let r = g.step() as i32;
    let s = kind.norm(g, x) + kind.norm(g, y);
    if s == 0.0 {
        return 0.0;
    }
    let h = g.layer_range(1);
    let xy = g.mul(x, y);
    let sum1: Vec<f64> = h.clone().map(|i| x[i] + y[i]).collect();
    let nh = kind.norm(g, &g.nh(&xy));
    m.powi(2 * r) / k * (alpha * nh.powi(2 * r) / s.powi(2 * r - 1) + euclid_dist_to_segment(&x[h], &sum1).powi(2) / s)
}

#[derive(Clone, Debug, Serialize)]
pub struct TiReport {
    pub alpha: f64,
    pub m: f64,
    pub samples: usize,
    /// Pairs meeting the hypothesis.
    pub tested: usize,
    pub rejected: usize,
    pub violations: usize,
    pub tolerance: f64,
    /// Smallest `excess - A` over tested pairs.
    pub min_slack: f64,
    pub witness: (Point, Point),
}

fn ti_like(
    g: &CarnotGroup,
    samples: usize,
    seed: u64,
    alpha: f64,
    m: f64,
    tolerance: f64,
    // (x, y) -> (hypothesis holds, A, excess)
    eval: impl Fn(&Point, &Point) -> (bool, f64, f64) + Sync,
) -> TiReport {
    let rows = par_sample(samples, seed, |rng, i| {
        let (x, y) = sample_pair(rng, g, i, 1.0);
        let (ok, a, ex) = eval(&x, &y);
        (ok, ex - a, x, y)
    });
    let tested = rows.iter().filter(|r| r.0).count();
    let violations = rows.iter().filter(|r| r.0 && r.1 < -tolerance).count();
    let mut best = (f64::INFINITY, g.identity(), g.identity());
    for (ok, slack, x, y) in rows {
        if ok && slack < best.0 {
            best = (slack, x, y);
        }
    }
    TiReport {
        alpha,
        m,
        samples,
        tested,
        rejected: samples - tested,
        violations,
        tolerance,
        min_slack: best.0,
        witness: (best.1, best.2),
    }
}

/// `||x|| + ||y|| - ||xy|| >= A` whenever `4A <= min(||x||, ||y||)`.
pub fn check_lemma_ti(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64, alpha: f64, m: f64) -> TiReport {
    ti_like(g, samples, seed, alpha, m, 1e-10, |x, y| {
        let a = ti_quantity(g, kind, x, y, alpha, m, 16.0);
        let (nx, ny) = (kind.norm(g, x), kind.norm(g, y));
        (4.0 * a <= nx.min(ny), a, nx + ny - kind.norm(g, &g.mul(x, y)))
    })
}

/// The corollary form for `(v, w)` based at the identity, with `x = v` and
/// `y = v^{-1} w` drawn from the pair sampler.
pub fn check_ti_corollary(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64, alpha: f64, m: f64) -> TiReport {
    let r = g.step() as i32;
    let o = g.identity();
    ti_like(g, samples, seed, alpha, m, 1e-10, |x, y| {
        let v = x.clone();
        let w = g.mul(x, y);
        let (d0v, dvw, d0w) = (kind.dist(g, &v, &o), kind.dist(g, &w, &v), kind.dist(g, &w, &o));
        let s = d0v + dvw;
        let h = g.layer_range(1);
        let q = if s > 0.0 {
            alpha * kind.norm(g, &g.nh(&w)).powi(2 * r) / s.powi(2 * r - 1)
                + euclid_dist_to_segment(&v[h.clone()], &w[h]).powi(2) / s
        } else {
            0.0
        };
        let mm = m.powi(2 * r);
        (mm / 4.0 * q <= d0v.min(dvw), mm / 16.0 * q, s - d0w)
    })
}

/// One empirical constant with the sample attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantEstimate {
    pub value: f64,
    /// The extremal ratio at the witness; `value` may add a safety factor.
    pub ratio: f64,
    pub samples: usize,
    pub witness: Vec<Point>,
    pub params: Vec<f64>,
}

impl ConstantEstimate {
    fn from_ratio(ratio: f64, samples: usize, witness: Vec<Point>, params: Vec<f64>) -> Self {
        Self { value: ratio, ratio, samples, witness, params }
    }
}

/// `|R_1(a,b)| / (|a1||b1||a1/|a1| - b1/|b1||)`.
pub fn c1_ratio(g: &CarnotGroup, a: &[f64], b: &[f64]) -> Option<f64> {
    let v1 = g.horizontal_dim();
    let (a1, _) = split_layers(g, a);
    let (b1, _) = split_layers(g, b);
    let r1 = g.mul(&g.horizontal(a1), &g.horizontal(b1));
    let den = angular_product(a1, b1);
    (den > 1e-300).then(|| norm2(&r1[v1..]) / den)
}

/// `|R_2(a,b)| / (|a1||b2| + |a2||b1| + |a2||b2|)`.
pub fn c2_ratio(g: &CarnotGroup, a: &[f64], b: &[f64]) -> Option<f64> {
    let v1 = g.horizontal_dim();
    let (a1, a2) = split_layers(g, a);
    let (b1, b2) = split_layers(g, b);
    let ab = g.mul(a, b);
    let r1 = g.mul(&g.horizontal(a1), &g.horizontal(b1));
    let r2: Vec<f64> = (v1..g.dim()).map(|k| ab[k] - a[k] - b[k] - r1[k]).collect();
    let (na1, na2, nb1, nb2) = (norm2(a1), norm2(a2), norm2(b1), norm2(b2));
    let den = na1 * nb2 + na2 * nb1 + na2 * nb2;
    (den > 1e-300).then(|| norm2(&r2) / den)
}

/// `(t1^2 + t2^2) / ||NH(ab)||^{2r}`.
pub fn alpha_ratio(g: &CarnotGroup, kind: MetricKind, a: &[f64], b: &[f64]) -> Option<f64> {
    let nh = kind.norm(g, &g.nh(&g.mul(a, b)));
    let (t1, t2) = nh_terms(g, a, b);
    (nh > 0.0).then(|| (t1 * t1 + t2 * t2) / nh.powi(2 * g.step() as i32))
}

/// `d(x,y)^r / |x - y|`.
pub fn compact_ratio(g: &CarnotGroup, kind: MetricKind, x: &[f64], y: &[f64]) -> Option<f64> {
    let e = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    (e > 0.0).then(|| kind.dist(g, x, y).powi(g.step() as i32) / e)
}

/// Segment-proximity ratio `sup_t d(f(t), g(t)) / (omega^{1/r} rho)` for
/// `f(t) = p delta_t(hf)`, `g(t) = q delta_t(hg)`, with `rho` the larger speed
/// and `omega rho` the larger endpoint gap; `None` unless `0 < omega < big_m`.
pub fn seglem_ratio(
    g: &CarnotGroup,
    kind: MetricKind,
    p: &[f64],
    hf: &[f64],
    q: &[f64],
    hg: &[f64],
    big_m: f64,
) -> Option<f64> {
    let rho = kind.norm(g, hf).max(kind.norm(g, hg));
    if rho == 0.0 {
        return None;
    }
    let f = |t: f64| g.mul(p, &g.scale(t, hf));
    let h = |t: f64| g.mul(q, &g.scale(t, hg));
    let omega = kind.dist(g, &f(0.0), &h(0.0)).max(kind.dist(g, &f(1.0), &h(1.0))) / rho;
    if !(omega > 0.0 && omega < big_m) {
        return None;
    }
    let sup = -grid_then_golden(|t| -kind.dist(g, &f(t), &h(t)), 0.0, 1.0, 32, 1e-10, 80).1;
    Some(sup / (omega.powf(1.0 / g.step() as f64) * rho))
}

/// `d_tau^{2r^2} / diam(tau)^{2r^2-1}` over the three-generation length excess of
/// a dyadic arc, for `tau` the `index`-th arc at dyadic `level` of `points`
/// (which has `2^K + 1` samples).
pub fn dyadic_arc_ratio(g: &CarnotGroup, kind: MetricKind, points: &[Point], level: u32, index: usize) -> Option<f64> {
    let n = points.len() - 1;
    let len = n >> level;
    if len < 8 || len << level != n {
        return None;
    }
    let (i0, i1) = (index * len, (index + 1) * len);
    let seg = segment_between(&points[i0], &points[i1], g);
    let child = len / 2;
    let d_tau = (0..2)
        .map(|c| {
            let s = segment_between(&points[i0 + c * child], &points[i0 + (c + 1) * child], g);
            segment_sup(&s, &seg, g, kind)
        })
        .fold(0.0, f64::max);
    let gg = len / 8;
    let chord_sum: f64 = (0..8).map(|c| kind.dist(g, &points[i0 + c * gg], &points[i0 + (c + 1) * gg])).sum();
    let rhs = chord_sum - kind.dist(g, &points[i0], &points[i1]);
    if rhs < 1e-12 {
        return None;
    }
    let diam = diameter(&points[i0..=i1], g, kind);
    let r = g.step() as f64;
    let p = 2.0 * r * r;
    Some(d_tau.powf(p) / diam.powf(p - 1.0) / rhs)
}

fn arc_curve(g: &CarnotGroup, kind: MetricKind, log2_samples: u32) -> Result<Vec<Point>> {
    let spec = CurveSpec::LiftedPlanar {
        shape: PlanarShape::Circle { radius: 1.0, turns: 1.0 },
        samples: (1 << log2_samples) + 1,
    };
    Ok(generate_curve(&spec, g, kind)?.points().to_vec())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    pub group: String,
    pub metric: MetricKind,
    pub samples: usize,
    pub seed: u64,
    pub c1: ConstantEstimate,
    pub c2: ConstantEstimate,
    /// `0.9 * min(inf ratio, 1)`.
    pub alpha: ConstantEstimate,
    pub compact: ConstantEstimate,
    pub seg_lem: ConstantEstimate,
    pub c0: ConstantEstimate,
    pub c_double_prime: ConstantEstimate,
    pub r0: ConstantEstimate,
}

#[derive(Clone, Debug)]
pub struct ConstantsConfig {
    pub samples: usize,
    pub goal_samples: usize,
    pub m: f64,
    pub seg_lem_m: f64,
    pub arc_log2_samples: u32,
    pub r0_lines: usize,
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            goal_samples: 2_000,
            m: 0.1,
            seg_lem_m: 4.0,
            arc_log2_samples: 10,
            r0_lines: 200,
            seed: 0,
        }
    }
}

fn argmax_pairs(
    g: &CarnotGroup,
    samples: usize,
    seed: u64,
    f: impl Fn(&Point, &Point) -> Option<f64> + Sync,
) -> ConstantEstimate {
    let rows = par_sample(samples, seed, |rng, i| {
        let (a, b) = sample_pair(rng, g, i, 1.0);
        let (a, b) = (into_unit_ball(g, a), into_unit_ball(g, b));
        (f(&a, &b), a, b)
    });
    let mut best: Option<(f64, Point, Point)> = None;
    for (v, a, b) in rows {
        let Some(v) = v else { continue };
        let better = best.as_ref().is_none_or(|b0| v > b0.0);
        if better {
            best = Some((v, a, b));
        }
    }
    let (v, a, b) = best.unwrap_or((0.0, g.identity(), g.identity()));
    ConstantEstimate::from_ratio(v, samples, vec![a, b], vec![])
}

/// Every constant of the curvature argument, estimated on samples.
pub fn estimate_constants(g: &CarnotGroup, kind: MetricKind, cfg: &ConstantsConfig) -> Result<ConstantsReport> {
    let seed = cfg.seed;
    let c1 = argmax_pairs(g, cfg.samples, seed, |a, b| c1_ratio(g, a, b));
    let c2 = argmax_pairs(g, cfg.samples, seed ^ 1, |a, b| c2_ratio(g, a, b));
    let alpha = estimate_alpha(g, kind, cfg.samples, seed ^ 2);
    let compact = estimate_compact(g, kind, cfg.samples, seed ^ 3);
    let seg_lem = estimate_seglem(g, kind, cfg.samples / 4, seed ^ 4, cfg.seg_lem_m);
    let r = g.step() as f64;
    let p = 2.0 * r * r;
    let goal = check_goal(
        g,
        kind,
        &GoalConfig {
            samples: cfg.goal_samples,
            m: cfg.m,
            rho: 1.0,
            exponents: vec![p],
            seed: seed ^ 5,
            max_attempts: 100_000,
        },
    )?;
    let gw = goal.exponents[0].witness.clone();
    let c0 = match gw {
        Some(w) => {
            let q = w.quadruple;
            ConstantEstimate::from_ratio(w.ratio, goal.samples, vec![q.a, q.z, q.v, q.w], vec![q.rho, q.m, p])
        }
        None => ConstantEstimate::from_ratio(0.0, goal.samples, vec![], vec![1.0, cfg.m, p]),
    };
    let pts = arc_curve(g, kind, cfg.arc_log2_samples)?;
    let mut arcs = Vec::new();
    for level in 0..=cfg.arc_log2_samples.saturating_sub(3) {
        for index in 0..(1usize << level) {
            arcs.push((level, index));
        }
    }
    let vals: Vec<Option<f64>> = arcs
        .par_iter()
        .map(|&(l, i)| dyadic_arc_ratio(g, kind, &pts, l, i))
        .collect();
    let (mut best, mut at) = (0.0, (0, 0));
    for (v, a) in vals.iter().zip(&arcs) {
        if let Some(v) = *v {
            if v > best {
                (best, at) = (v, *a);
            }
        }
    }
    let c_double_prime = ConstantEstimate::from_ratio(
        best,
        arcs.len(),
        vec![],
        vec![cfg.arc_log2_samples as f64, at.0 as f64, at.1 as f64],
    );
    let r0e = estimate_r0(g, kind, cfg.r0_lines, seed ^ 6);
    let r0 = ConstantEstimate {
        value: r0e.r0,
        ratio: r0e.min_ratio,
        samples: cfg.r0_lines,
        witness: r0e.witness.iter().map(|l| l.base.clone()).collect(),
        params: r0e.witness.iter().flat_map(|l| l.dir.clone()).collect(),
    };
    Ok(ConstantsReport {
        group: g.name().to_string(),
        metric: kind,
        samples: cfg.samples,
        seed,
        c1,
        c2,
        alpha,
        compact,
        seg_lem,
        c0,
        c_double_prime,
        r0,
    })
}

/// Pairs in the Euclidean unit ball, every other one at a small separation.
fn estimate_compact(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> ConstantEstimate {
    let n = g.dim();
    let rows = par_sample(samples, seed, |r, i| {
        let x = sampling::euclidean_ball(r, n, 1.0);
        let y = if i % 2 == 0 {
            sampling::euclidean_ball(r, n, 1.0)
        } else {
            let h = sampling::log_uniform(r, 1e-6, 1e-1);
            let dir = sampling::unit_vector(r, n);
            into_unit_ball(g, x.iter().zip(&dir).map(|(a, d)| a + h * d).collect::<Vec<_>>().into())
        };
        (compact_ratio(g, kind, &x, &y), x, y)
    });
    let mut best = (0.0, g.identity(), g.identity());
    for (v, x, y) in rows {
        if let Some(v) = v.filter(|&v| v > best.0) {
            best = (v, x, y);
        }
    }
    ConstantEstimate::from_ratio(best.0, samples, vec![best.1, best.2], vec![])
}

fn estimate_seglem(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64, big_m: f64) -> ConstantEstimate {
    let n = g.dim();
    let v1 = g.horizontal_dim();
    let rows = par_sample(samples, seed, |r, _| {
        let p = sampling::uniform_box(r, n, 1.0);
        let dir = sampling::unit_vector(r, v1);
        let len = r.random_range(0.1..1.0);
        let hf = g.horizontal(&dir.iter().map(|x| x * len).collect::<Vec<_>>());
        let eps = sampling::log_uniform(r, 1e-4, 1.0);
        let q = g.mul(&p, &g.scale(eps, &sampling::uniform_box(r, n, 1.0)));
        let tilt = sampling::gaussian(r, v1);
        let hg = g.horizontal(&dir.iter().zip(&tilt).map(|(x, t)| len * (x + eps * t)).collect::<Vec<_>>());
        (seglem_ratio(g, kind, &p, &hf, &q, &hg, big_m), vec![p, hf, q, hg])
    });
    let mut best = (0.0, vec![]);
    for (v, w) in rows {
        if let Some(v) = v.filter(|&v| v > best.0) {
            best = (v, w);
        }
    }
    ConstantEstimate::from_ratio(best.0, samples, best.1, vec![big_m])
}

impl ConstantsReport {
    /// `(name, recorded ratio, ratio recomputed from the witness)`.
    pub fn reevaluate(&self, g: &CarnotGroup) -> Result<Vec<(&'static str, f64, f64)>> {
        let kind = self.metric;
        let pair = |c: &ConstantEstimate, f: &dyn Fn(&Point, &Point) -> Option<f64>| {
            if c.witness.len() == 2 { f(&c.witness[0], &c.witness[1]).unwrap_or(0.0) } else { 0.0 }
        };
        let mut out = vec![
            ("c1", self.c1.ratio, pair(&self.c1, &|a, b| c1_ratio(g, a, b))),
            ("c2", self.c2.ratio, pair(&self.c2, &|a, b| c2_ratio(g, a, b))),
            ("alpha", self.alpha.ratio, pair(&self.alpha, &|a, b| alpha_ratio(g, kind, a, b))),
            ("compact", self.compact.ratio, pair(&self.compact, &|a, b| compact_ratio(g, kind, a, b))),
        ];
        let s = &self.seg_lem;
        let seg = if s.witness.len() == 4 {
            seglem_ratio(g, kind, &s.witness[0], &s.witness[1], &s.witness[2], &s.witness[3], s.params[0]).unwrap_or(0.0)
        } else {
            0.0
        };
        out.push(("seg_lem", s.ratio, seg));
        let c = &self.c0;
        let c0 = if c.witness.len() == 4 {
            let q = Quadruple {
                a: c.witness[0].clone(),
                z: c.witness[1].clone(),
                v: c.witness[2].clone(),
                w: c.witness[3].clone(),
                rho: c.params[0],
                m: c.params[1],
            };
            goal_ratio(&q, g, kind, c.params[2]).unwrap_or(0.0)
        } else {
            0.0
        };
        out.push(("c0", c.ratio, c0));
        let d = &self.c_double_prime;
        let pts = arc_curve(g, kind, d.params[0] as u32)?;
        let cdp = dyadic_arc_ratio(g, kind, &pts, d.params[1] as u32, d.params[2] as usize).unwrap_or(0.0);
        out.push(("c_double_prime", d.ratio, cdp));
        let r0 = match (self.r0.witness.first(), self.r0.params.is_empty()) {
            (Some(base), false) => {
                r0_line_ratio(g, kind, &HorizontalLine { base: base.clone(), dir: self.r0.params.clone() })
            }
            _ => 1.0,
        };
        out.push(("r0", self.r0.ratio, r0));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> CarnotGroup {
        CarnotGroup::heisenberg()
    }

    #[test]
    fn collinear_excess_is_zero() {
        let g = h();
        let p = |x: f64| g.horizontal(&[x, 0.0]);
        let d = excess(&p(0.0), &p(1.0), &p(2.0), &p(3.0), &g, MetricKind::Hs);
        assert!(d.abs() < 1e-12);
        assert!(goal_lhs(&p(0.0), &p(2.0), &p(3.0), &g, MetricKind::Hs, 8.0) < 1e-60);
    }

    #[test]
    fn closed_loop_excess_is_perimeter() {
        let g = h();
        let (a, z, v) = (g.identity(), Point::from_slice(&[0.3, 0.1, 0.2]), Point::from_slice(&[-0.1, 0.4, 0.0]));
        let k = MetricKind::Hs;
        let want = k.dist(&g, &a, &z) + k.dist(&g, &z, &v) + k.dist(&g, &v, &a);
        assert!((excess(&a, &z, &v, &a, &g, k) - want).abs() < 1e-14);
    }

    #[test]
    fn lhs_shrinks_as_v_approaches_the_line() {
        let g = h();
        let w = Point::from_slice(&[1.0, 0.0, 0.0]);
        let vals: Vec<f64> = [0.3, 0.1, 0.03, 0.01]
            .iter()
            .map(|&e| goal_lhs(&g.identity(), &[0.5, e, 0.0], &w, &g, MetricKind::Hs, 8.0))
            .collect();
        assert!(vals[0] > 0.0);
        assert!(vals.windows(2).all(|p| p[1] < p[0]), "{vals:?}");
    }

    #[test]
    fn lhs_is_homogeneous() {
        for g in [h(), CarnotGroup::engel()] {
            let n = g.dim();
            let mut r = sampling::rng(3, 0);
            let v = sampling::uniform_box(&mut r, n, 0.3);
            let w = sampling::uniform_box(&mut r, n, 0.3);
            let a = g.identity();
            let p = 8.0;
            let base = goal_lhs(&a, &v, &w, &g, MetricKind::Hs, p);
            let s = 2.5;
            let scaled = goal_lhs(&a, &g.scale(s, &v), &g.scale(s, &w), &g, MetricKind::Hs, p);
            assert!((scaled / base - s.powf(p)).abs() / s.powf(p) < 1e-6, "{base} {scaled}");
        }
    }

    #[test]
    fn height_examples() {
        assert!(height_defect(&[1.0, 0.0], &[1.0, 0.0]).abs() < 1e-15);
        let c = [1.0, 0.0];
        let d = [0.0, 1.0];
        let s = [1.0, 1.0];
        assert!((euclid_dist_to_segment(&c, &s).powi(2) - 0.5).abs() < 1e-15);
        assert!((height_defect(&c, &d) - (0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn height_holds_on_samples() {
        let rep = check_lemma_height(3, 20_000, 1);
        assert_eq!(rep.violations, 0, "{rep:?}");
    }

    #[test]
    fn nh_ratio_finite_for_horizontal_pairs() {
        let g = h();
        let mut r = sampling::rng(5, 0);
        let mut worst = 0.0f64;
        for _ in 0..2000 {
            let a = g.horizontal(&sampling::euclidean_ball(&mut r, 2, 0.99));
            let b = g.horizontal(&sampling::euclidean_ball(&mut r, 2, 0.99));
            let lhs = MetricKind::Hs.norm(&g, &g.nh(&g.mul(&a, &b))).powi(2);
            let (t1, t2) = nh_terms(&g, &a, &b);
            assert_eq!(t2, 0.0);
            worst = worst.max(lhs / t1);
        }
        assert!(worst <= 1.0 / (2.0 * g.eta()) + 1e-12, "{worst}");
    }

    #[test]
    fn nh_counterexample_without_brackets() {
        let g = h();
        let a = [0.0, 0.0, 0.3];
        assert_eq!(nh_ratio(&g, MetricKind::Hs, &a, &[0.0; 3]), Err(()));
        let rep = check_lemma_nh(&g, MetricKind::Hs, 3000, 7);
        assert!(rep.horizontal_max_ratio > 0.0 && rep.horizontal_max_ratio <= (1.0 + 1e-8) / (2.0 * g.eta()), "{rep:?}");
    }

    #[test]
    fn exponent_parsing() {
        let g = h();
        assert_eq!("auto".parse::<Exponent>().unwrap().resolve(&g), 4.0);
        assert_eq!("2r2".parse::<Exponent>().unwrap().resolve(&g), 8.0);
        assert_eq!("auto".parse::<Exponent>().unwrap().resolve(&CarnotGroup::engel()), 18.0);
        assert_eq!("6".parse::<Exponent>().unwrap().resolve(&g), 6.0);
        assert!("-1".parse::<Exponent>().is_err());
    }

    #[test]
    fn small_goal_run() {
        let g = h();
        let cfg = GoalConfig { samples: 200, exponents: vec![8.0, 4.0], ..GoalConfig::new(&g) };
        let rep = check_goal(&g, MetricKind::Hs, &cfg).unwrap();
        assert_eq!(rep.samples, 200);
        let s8 = rep.stats(8.0).unwrap();
        assert!(s8.max_ratio.is_finite() && s8.max_ratio > 0.0);
        let w = s8.witness.as_ref().unwrap();
        assert!(w.quadruple.admissible(&g, MetricKind::Hs));
        let again = goal_ratio(&w.quadruple, &g, MetricKind::Hs, 8.0).unwrap();
        assert!((again - w.ratio).abs() <= 1e-9 * w.ratio);
    }

    #[test]
    fn impossible_m_errors() {
        let g = h();
        let cfg = GoalConfig { samples: 4, m: 0.999, max_attempts: 50, ..GoalConfig::new(&g) };
        assert!(matches!(check_goal(&g, MetricKind::Hs, &cfg), Err(Error::NoAdmissibleSamples { .. })));
    }

    #[test]
    fn corollary_holds() {
        let g = h();
        let alpha = estimate_alpha(&g, MetricKind::Hs, 3000, 2).value;
        assert!(alpha > 0.5 && alpha < 0.6, "{alpha}");
        let rep = check_ti_corollary(&g, MetricKind::Hs, 3000, 3, alpha, 0.1);
        assert!(rep.tested > 2000);
        assert_eq!(rep.violations, 0, "{rep:?}");
        let ti = check_lemma_ti(&g, MetricKind::Hs, 3000, 4, alpha, 0.1);
        assert_eq!(ti.violations, 0, "{ti:?}");
    }

    #[test]
    fn constants_witnesses_reevaluate() {
        let g = h();
        let cfg = ConstantsConfig { samples: 600, goal_samples: 60, arc_log2_samples: 7, r0_lines: 8, ..Default::default() };
        let rep = estimate_constants(&g, MetricKind::Hs, &cfg).unwrap();
        for (name, rec, again) in rep.reevaluate(&g).unwrap() {
            assert!(rec.is_finite() && rec > 0.0, "{name} {rec}");
            assert!((rec - again).abs() <= 1e-9 * rec.abs().max(1.0), "{name}: {rec} vs {again}");
        }
        assert!(rep.alpha.value > 0.0 && rep.alpha.value < 1.0);
    }
}
