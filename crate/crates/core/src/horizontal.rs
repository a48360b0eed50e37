//! Horizontal lines and segments, distances to them, and Jones beta numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CarnotGroup, CoordPoly, Point};
use crate::metric::MetricKind;
use crate::optimize::{golden_section, grid_then_golden, NelderMead};
use crate::sampling;

/// `t -> p * delta_t((len u, 0))` for `t` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalSegment {
    pub base: Point,
    pub dir: Vec<f64>,
    pub len: f64,
}

impl HorizontalSegment {
    pub fn increment(&self, g: &CarnotGroup) -> Point {
        let v: Vec<f64> = self.dir.iter().map(|u| u * self.len).collect();
        g.horizontal(&v)
    }

    pub fn at(&self, g: &CarnotGroup, t: f64) -> Point {
        let v: Vec<f64> = self.dir.iter().map(|u| u * self.len * t).collect();
        g.mul(&self.base, &g.horizontal(&v))
    }

    pub fn end(&self, g: &CarnotGroup) -> Point {
        self.at(g, 1.0)
    }

    /// Metric speed `||(len u, 0)||`.
    pub fn speed(&self, g: &CarnotGroup, kind: MetricKind) -> f64 {
        self.len * kind.horizontal_factor(g)
    }

    pub fn line(&self) -> HorizontalLine {
        HorizontalLine {
            base: self.base.clone(),
            dir: self.dir.clone(),
        }
    }
}

/// `t -> base * delta_t((dir, 0))` for all real `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalLine {
    pub base: Point,
    pub dir: Vec<f64>,
}

impl HorizontalLine {
    pub fn at(&self, g: &CarnotGroup, t: f64) -> Point {
        let v: Vec<f64> = self.dir.iter().map(|u| u * t).collect();
        g.mul(&self.base, &g.horizontal(&v))
    }

    pub fn through_identity(g: &CarnotGroup, dir: &[f64]) -> Self {
        Self {
            base: g.identity(),
            dir: dir.to_vec(),
        }
    }
}

fn unit_or_e1(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        (v.iter().map(|x| x / n).collect(), n)
    } else {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        (e, 0.0)
    }
}

/// The horizontal segment from `p` in the direction of `tilde_pi(p^{-1} q)`.
pub fn segment_between(p: &[f64], q: &[f64], g: &CarnotGroup) -> HorizontalSegment {
    let h = g.layer_range(1);
    let diff: Vec<f64> = h.map(|k| q[k] - p[k]).collect();
    let (dir, len) = unit_or_e1(&diff);
    HorizontalSegment {
        base: Point::from_slice(p),
        dir,
        len,
    }
}

/// One-dimensional search settings. `grid == 0` means golden-section only,
/// which is exact when the distance along a line is quasiconvex (step <= 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl LineSearch {
    pub fn precise(g: &CarnotGroup) -> Self {
        Self {
            grid: if g.step() <= 2 { 0 } else { 256 },
            tol: 1e-13,
            max_iter: 200,
        }
    }

    pub fn coarse(g: &CarnotGroup) -> Self {
        Self {
            grid: if g.step() <= 2 { 0 } else { 24 },
            tol: 1e-7,
            max_iter: 80,
        }
    }

    /// Dense grid regardless of step.
    pub fn gridded(n: usize) -> Self {
        Self {
            grid: n,
            tol: 1e-13,
            max_iter: 200,
        }
    }

    fn run<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> (f64, f64) {
        let tol = self.tol * (b - a).abs().max(f64::MIN_POSITIVE);
        if self.grid == 0 {
            golden_section(f, a, b, tol, self.max_iter)
        } else {
            grid_then_golden(f, a, b, self.grid, tol, self.max_iter)
        }
    }
}

/// `t -> ||poly(t)||`.
fn pencil_norm<'a>(g: &'a CarnotGroup, kind: MetricKind, poly: &'a CoordPoly) -> impl Fn(f64) -> f64 + 'a {
    let n = g.dim();
    move |t| {
        let mut buf: smallvec::SmallVec<[f64; 8]> = smallvec::SmallVec::from_elem(0.0, n);
        poly.eval_into(t, &mut buf);
        kind.norm(g, &buf)
    }
}

/// `t -> L(t)^{-1} x` for `L(t) = base * (t w, 0)`.
fn pencil(g: &CarnotGroup, base: &[f64], w: &[f64], x: &[f64]) -> CoordPoly {
    let y = g.left_diff(base, x);
    let minus_w: Vec<f64> = w.iter().map(|v| -v).collect();
    g.bch_poly_left(&g.horizontal(&minus_w), &y)
}

/// `min_{t in [0,1]} d(x, L(t))` and its argmin.
pub fn dist_point_segment(x: &[f64], seg: &HorizontalSegment, g: &CarnotGroup, kind: MetricKind) -> (f64, f64) {
    dist_point_segment_with(x, seg, g, kind, LineSearch::gridded(256))
}

pub fn dist_point_segment_with(
    x: &[f64],
    seg: &HorizontalSegment,
    g: &CarnotGroup,
    kind: MetricKind,
    search: LineSearch,
) -> (f64, f64) {
    if seg.len == 0.0 {
        return (kind.dist(g, x, &seg.base), 0.0);
    }
    let w: Vec<f64> = seg.dir.iter().map(|u| u * seg.len).collect();
    let poly = pencil(g, &seg.base, &w, x);
    let (t, d) = search.run(pencil_norm(g, kind, &poly), 0.0, 1.0);
    (d, t)
}

/// `inf_t d(x, L(t))` over the whole line, and the argmin.
///
/// The first layer alone forces `||L(t)^{-1} x|| >= c |t - t0|`, which bounds the
/// search window around the projected foot `t0`.
pub fn dist_point_line(x: &[f64], line: &HorizontalLine, g: &CarnotGroup, kind: MetricKind, search: LineSearch) -> (f64, f64) {
    let poly = pencil(g, &line.base, &line.dir, x);
    dist_on_pencil(g, kind, &poly, &line.dir, search)
}

fn dist_on_pencil(g: &CarnotGroup, kind: MetricKind, poly: &CoordPoly, dir: &[f64], search: LineSearch) -> (f64, f64) {
    let y1 = poly.eval(0.0);
    let t0: f64 = dir.iter().zip(y1.iter()).map(|(u, y)| u * y).sum();
    let f = pencil_norm(g, kind, poly);
    let d0 = f(t0);
    let half = d0 / kind.horizontal_factor(g);
    if half == 0.0 {
        return (d0, t0);
    }
    let (t, d) = search.run(&f, t0 - half, t0 + half);
    if d < d0 { (d, t) } else { (d0, t0) }
}

/// Hyperspherical coordinates: `u_0 = cos a_0`, `u_1 = sin a_0 cos a_1`, ...
pub fn direction_from_angles(angles: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n];
    let mut s = 1.0;
    for i in 0..n - 1 {
        u[i] = s * angles[i].cos();
        s *= angles[i].sin();
    }
    u[n - 1] = s;
    u
}

pub fn angles_from_direction(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n.saturating_sub(1))
        .map(|i| {
            if i + 2 == n {
                u[n - 1].atan2(u[n - 2])
            } else {
                let tail = u[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                tail.atan2(u[i])
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaConfig {
    pub restarts: usize,
    pub max_evals: usize,
    /// Points used inside the search; the final sup uses every point.
    pub search_points: usize,
    pub search: LineSearch,
    pub seed: u64,
    pub spread_flag: f64,
    /// Values below this are reported as exactly zero.
    pub zero_snap: f64,
}

impl BetaConfig {
    pub fn new(g: &CarnotGroup) -> Self {
        Self {
            restarts: 16,
            max_evals: 300,
            search_points: 48,
            search: LineSearch::coarse(g),
            seed: 0,
            spread_flag: 0.05,
            zero_snap: 1e-7,
        }
    }

    /// Fewer restarts for sums over many balls.
    pub fn fast(g: &CarnotGroup) -> Self {
        Self {
            restarts: 4,
            max_evals: 200,
            search_points: 32,
            ..Self::new(g)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaResult {
    pub beta: f64,
    pub line: HorizontalLine,
    pub restarts_spread: f64,
    pub flagged: bool,
    pub points: usize,
    /// Rigorous lower bound from the first-layer projection.
    pub lower_bound: f64,
}

/// Points of `E` in the closed ball, mapped to the unit ball at the identity.
fn normalize_ball(e: &[Point], center: &[f64], radius: f64, g: &CarnotGroup, kind: MetricKind) -> Result<Vec<Point>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::NonPositiveRadius(radius));
    }
    g.check_dim(center)?;
    let cinv = g.inv(center);
    Ok(e.iter()
        .map(|z| g.scale(1.0 / radius, &g.mul(&cinv, z)))
        .filter(|z| kind.norm(g, z) <= 1.0 + 1e-12)
        .collect())
}

fn line_params(base: &[f64], dir: &[f64]) -> Vec<f64> {
    let mut x = base.to_vec();
    x.extend(angles_from_direction(dir));
    x
}

fn params_line(g: &CarnotGroup, x: &[f64]) -> HorizontalLine {
    let n = g.dim();
    HorizontalLine {
        base: Point::from_slice(&x[..n]),
        dir: direction_from_angles(&x[n..], g.horizontal_dim()),
    }
}

/// `sup_z inf_t d(z, L(t))`.
pub fn line_sup(g: &CarnotGroup, kind: MetricKind, line: &HorizontalLine, pts: &[Point], search: LineSearch) -> f64 {
    pts.iter()
        .map(|z| dist_point_line(z, line, g, kind, search).0)
        .fold(0.0, f64::max)
}

fn first_layer(g: &CarnotGroup, p: &[f64]) -> Vec<f64> {
    p[g.layer_range(1)].to_vec()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dist_to_euclid_line(p: &[f64], a: &[f64], u: &[f64]) -> f64 {
    let d: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
    let s: f64 = d.iter().zip(u).map(|(x, y)| x * y).sum();
    d.iter().zip(u).map(|(x, y)| (x - s * y).powi(2)).sum::<f64>().max(0.0).sqrt()
}

/// Lower bound `c * h_min / 2` for the farthest projected pair and the
/// projected point farthest from their chord; valid in the normalized frame.
fn projection_lower_bound(g: &CarnotGroup, kind: MetricKind, pts: &[Point]) -> f64 {
    if pts.len() < 3 || g.horizontal_dim() < 2 {
        return 0.0;
    }
    let proj: Vec<Vec<f64>> = pts.iter().map(|p| first_layer(g, p)).collect();
    let (mut ia, mut ib, mut best) = (0, 0, -1.0);
    for i in 0..proj.len() {
        for j in i + 1..proj.len() {
            let d = euclid(&proj[i], &proj[j]);
            if d > best {
                (ia, ib, best) = (i, j, d);
            }
        }
    }
    if best <= 0.0 {
        return 0.0;
    }
    let u: Vec<f64> = proj[ib].iter().zip(&proj[ia]).map(|(b, a)| (b - a) / best).collect();
    let (ic, h) = proj
        .iter()
        .enumerate()
        .map(|(i, p)| (i, dist_to_euclid_line(p, &proj[ia], &u)))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if h == 0.0 {
        return 0.0;
    }
    let area2 = h * best;
    let sides = [best, euclid(&proj[ia], &proj[ic]), euclid(&proj[ib], &proj[ic])];
    let longest = sides.iter().cloned().fold(0.0, f64::max);
    kind.horizontal_factor(g) * (area2 / longest) / 2.0
}

/// Farthest-point subsample of size `k`, seeded at the point farthest from `pts[0]`.
fn farthest_subset(g: &CarnotGroup, kind: MetricKind, pts: &[Point], k: usize) -> Vec<Point> {
    if pts.len() <= k {
        return pts.to_vec();
    }
    let mut dmin: Vec<f64> = pts.iter().map(|z| kind.dist(g, z, &pts[0])).collect();
    let start = argmax(&dmin);
    let mut chosen = vec![start];
    dmin = pts.iter().map(|z| kind.dist(g, z, &pts[start])).collect();
    while chosen.len() < k {
        let next = argmax(&dmin);
        chosen.push(next);
        for (d, z) in dmin.iter_mut().zip(pts) {
            *d = d.min(kind.dist(g, z, &pts[next]));
        }
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| pts[i].clone()).collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
        .0
}

fn seeds(g: &CarnotGroup, kind: MetricKind, pts: &[Point], cfg: &BetaConfig) -> Vec<HorizontalLine> {
    let v1 = g.horizontal_dim();
    let a = argmax(&pts.iter().map(|z| kind.dist(g, z, &pts[0])).collect::<Vec<_>>());
    let b = argmax(&pts.iter().map(|z| kind.dist(g, z, &pts[a])).collect::<Vec<_>>());
    let chord: Vec<f64> = first_layer(g, &pts[b]).iter().zip(first_layer(g, &pts[a])).map(|(x, y)| x - y).collect();
    let (chord_dir, _) = unit_or_e1(&chord);

    let m = pts.len() as f64;
    let mean: Vec<f64> = (0..g.dim()).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / m).collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(v1, v1);
    for p in pts {
        for i in 0..v1 {
            for j in 0..v1 {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    let eig = cov.symmetric_eigen();
    let top = (0..v1).max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
    let pca: Vec<f64> = eig.eigenvectors.column(top).iter().cloned().collect();
    let (pca_dir, _) = unit_or_e1(&pca);

    let mut out = vec![
        HorizontalLine { base: pts[a].clone(), dir: chord_dir.clone() },
        HorizontalLine { base: Point::from(mean), dir: pca_dir },
        HorizontalLine { base: g.identity(), dir: chord_dir },
    ];
    let mut rng = sampling::rng(cfg.seed, 0x5eed);
    let total = cfg.restarts.max(1);
    while out.len() < total {
        let base = pts[rand::Rng::random_range(&mut rng, 0..pts.len())].clone();
        out.push(HorizontalLine { base, dir: sampling::unit_vector(&mut rng, v1) });
    }
    out.truncate(total);
    out
}

/// Jones beta number of `E` in the closed ball `B(center, radius)`.
pub fn beta_ball(
    e: &[Point],
    center: &[f64],
    radius: f64,
    g: &CarnotGroup,
    kind: MetricKind,
    cfg: &BetaConfig,
) -> Result<BetaResult> {
    let pts = normalize_ball(e, center, radius, g, kind)?;
    let lower = projection_lower_bound(g, kind, &pts);
    let to_original = |line: HorizontalLine| HorizontalLine {
        base: g.mul(center, &g.scale(radius, &line.base)),
        dir: line.dir,
    };
    if pts.len() <= 1 {
        let mut dir = vec![0.0; g.horizontal_dim()];
        dir[0] = 1.0;
        return Ok(BetaResult {
            beta: 0.0,
            line: to_original(HorizontalLine::through_identity(g, &dir)),
            restarts_spread: 0.0,
            flagged: false,
            points: pts.len(),
            lower_bound: 0.0,
        });
    }
    let search_pts = farthest_subset(g, kind, &pts, cfg.search_points);
    let objective = |x: &[f64]| {
        let line = params_line(g, x);
        let nb = kind.norm(g, &line.base);
        let penalty = if nb > 2.0 { 10.0 * (nb - 2.0) } else { 0.0 };
        line_sup(g, kind, &line, &search_pts, cfg.search) + penalty
    };
    let nm = NelderMead {
        max_evals: cfg.max_evals,
        f_tol: 1e-9,
        x_tol: 1e-9,
    };
    let steps: Vec<f64> = (0..g.dim())
        .map(|_| 0.1)
        .chain((1..g.horizontal_dim()).map(|_| 0.3))
        .collect();
    let runs: Vec<(Vec<f64>, f64)> = seeds(g, kind, &search_pts, cfg)
        .par_iter()
        .map(|seed| {
            let x0 = line_params(&seed.base, &seed.dir);
            let r = nm.minimize(objective, &x0, &steps);
            (r.x, r.f)
        })
        .collect();
    let (fmin, fmax) = runs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.1), hi.max(r.1)));
    let best = runs.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
    let polished = nm.minimize(objective, &best.0, &small);
    let x = if polished.f < best.1 { polished.x } else { best.0.clone() };
    let line = params_line(g, &x);
    let mut beta = line_sup(g, kind, &line, &pts, LineSearch::precise(g));
    if beta <= cfg.zero_snap {
        beta = 0.0;
    }
    let spread = if fmax > 0.0 { (fmax - fmin) / fmax } else { 0.0 };
    Ok(BetaResult {
        beta,
        line: to_original(line),
        restarts_spread: spread,
        flagged: spread > cfg.spread_flag,
        points: pts.len(),
        lower_bound: lower,
    })
}

/// Brute-force grid over base points and directions, best few lines polished.
/// Intended for small point sets and `v_1 <= 3`.
pub fn beta_grid_oracle(
    e: &[Point],
    center: &[f64],
    radius: f64,
    g: &CarnotGroup,
    kind: MetricKind,
    res: usize,
) -> Result<BetaResult> {
    let pts = normalize_ball(e, center, radius, g, kind)?;
    let n = g.dim();
    let v1 = g.horizontal_dim();
    if pts.len() <= 1 {
        return beta_ball(e, center, radius, g, kind, &BetaConfig::new(g));
    }
    let res = res.max(2);
    let search = LineSearch::precise(g);
    let lo: Vec<f64> = (0..n).map(|k| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..n).map(|k| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let axis = |k: usize, i: usize| {
        let pad = 0.1 * (hi[k] - lo[k]).max(1e-3);
        let (a, b) = (lo[k] - pad, hi[k] + pad);
        a + (b - a) * i as f64 / (res - 1) as f64
    };
    let n_angle = v1.saturating_sub(1);
    let angle_res = 2 * res;
    let angle = |j: usize, i: usize| {
        let top = if j + 1 == n_angle { std::f64::consts::PI } else { std::f64::consts::FRAC_PI_2 };
        top * i as f64 / angle_res as f64
    };
    let n_bases = res.pow(n as u32);
    let n_dirs = angle_res.pow(n_angle as u32);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..n_bases * n_dirs)
        .into_par_iter()
        .map(|idx| {
            let (mut bi, mut di) = (idx / n_dirs, idx % n_dirs);
            let mut x = Vec::with_capacity(n + n_angle);
            for k in 0..n {
                x.push(axis(k, bi % res));
                bi /= res;
            }
            for j in 0..n_angle {
                x.push(angle(j, di % angle_res));
                di /= angle_res;
            }
            (line_sup(g, kind, &params_line(g, &x), &pts, search), x)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nm = NelderMead {
        max_evals: 2000,
        f_tol: 1e-12,
        x_tol: 1e-10,
    };
    let steps: Vec<f64> = (0..n)
        .map(|k| (hi[k] - lo[k]).max(1e-3) / res as f64)
        .chain((0..n_angle).map(|_| 0.5 / res as f64))
        .collect();
    let best = scored
        .iter()
        .take(5)
        .map(|(_, x)| nm.minimize(|x| line_sup(g, kind, &params_line(g, x), &pts, search), x, &steps))
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .unwrap();
    let line = params_line(g, &best.x);
    Ok(BetaResult {
        beta: best.f.min(scored[0].0),
        line: HorizontalLine {
            base: g.mul(center, &g.scale(radius, &line.base)),
            dir: line.dir,
        },
        restarts_spread: 0.0,
        flagged: false,
        points: pts.len(),
        lower_bound: projection_lower_bound(g, kind, &pts),
    })
}

/// Diameter of a finite set, by brute force.
pub fn diameter(pts: &[Point], g: &CarnotGroup, kind: MetricKind) -> f64 {
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            pts[i + 1..]
                .iter()
                .map(|q| kind.dist(g, &pts[i], q))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct ArcBeta {
    pub beta: f64,
    pub diam: f64,
    pub segment: HorizontalSegment,
}

/// `sup_{p in tau} d(p, L_tau) / diam(tau)` for the arc of samples `i0..=i1`.
pub fn beta_arc(points: &[Point], i0: usize, i1: usize, g: &CarnotGroup, kind: MetricKind) -> Result<ArcBeta> {
    if i0 >= i1 || i1 >= points.len() {
        return Err(Error::DegenerateArc(i0, i1));
    }
    let arc = &points[i0..=i1];
    let diam = diameter(arc, g, kind);
    if diam == 0.0 {
        return Err(Error::DegenerateArc(i0, i1));
    }
    let segment = segment_between(&points[i0], &points[i1], g);
    let sup = arc
        .par_iter()
        .map(|p| dist_point_segment(p, &segment, g, kind).0)
        .reduce(|| 0.0, f64::max);
    Ok(ArcBeta {
        beta: sup / diam,
        diam,
        segment,
    })
}

/// `sup_{x in L_tau} d(x, tau)`, with `L_tau` sampled at `samples + 1` points.
pub fn arc_segment_excursion(points: &[Point], i0: usize, i1: usize, g: &CarnotGroup, kind: MetricKind, samples: usize) -> f64 {
    let seg = segment_between(&points[i0], &points[i1], g);
    let arc = &points[i0..=i1];
    (0..=samples)
        .into_par_iter()
        .map(|k| {
            let x = seg.at(g, k as f64 / samples as f64);
            arc.iter().map(|p| kind.dist(g, &x, p)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// `d(L_tau(1), gamma(b))`.
pub fn arc_endpoint_gap(points: &[Point], i0: usize, i1: usize, g: &CarnotGroup, kind: MetricKind) -> f64 {
    let seg = segment_between(&points[i0], &points[i1], g);
    kind.dist(g, &seg.end(g), &points[i1])
}

#[derive(Clone, Debug, Serialize)]
pub struct R0Estimate {
    pub r0: f64,
    pub min_ratio: f64,
    pub lines: usize,
    pub witness: Option<HorizontalLine>,
}

/// `d(0, L) / ||L(t*)||` minimized over the positive critical values of
/// `t -> ||L(t)||`, or 1 when there are none.
pub fn r0_line_ratio(g: &CarnotGroup, kind: MetricKind, line: &HorizontalLine) -> f64 {
    let poly = g.bch_poly_right(&line.base, &g.horizontal(&line.dir));
    let f = pencil_norm(g, kind, &poly);
    let reach = first_layer(g, &line.base).iter().map(|x| x * x).sum::<f64>().sqrt() + 3.0;
    let grid = 400;
    let ts: Vec<f64> = (0..=grid).map(|k| -reach + 2.0 * reach * k as f64 / grid as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let dmin = dist_point_line(&g.identity(), line, g, kind, LineSearch::precise(g)).0;
    let mut ratio = 1.0f64;
    for k in 1..grid {
        let (a, b) = (ts[k - 1], ts[k + 1]);
        let crit = if vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1] {
            Some(golden_section(&f, a, b, 1e-12, 200).1)
        } else if vals[k] >= vals[k - 1] && vals[k] >= vals[k + 1] {
            Some(-golden_section(|t| -f(t), a, b, 1e-12, 200).1)
        } else {
            None
        };
        if let Some(c) = crit.filter(|&c| c > 0.0) {
            ratio = ratio.min(dmin / c);
        }
    }
    ratio
}

/// Smallest [`r0_line_ratio`] over random horizontal lines, capped at 1/2. A line
/// through the ball of radius `r0` is then never tangent to the unit sphere.
pub fn estimate_r0(g: &CarnotGroup, kind: MetricKind, lines: usize, seed: u64) -> R0Estimate {
    let n = g.dim();
    let v1 = g.horizontal_dim();
    let results = sampling::par_sample(lines, seed, |r, _| {
        let base = sampling::uniform_box(r, n, 1.0);
        let line = HorizontalLine { base, dir: sampling::unit_vector(r, v1) };
        (r0_line_ratio(g, kind, &line), line)
    });
    let (min_ratio, witness) = results
        .into_iter()
        .fold((1.0f64, None), |acc, (r, l)| if r < acc.0 { (r, Some(l)) } else { acc });
    R0Estimate {
        r0: min_ratio.min(0.5),
        min_ratio,
        lines,
        witness,
    }
}
