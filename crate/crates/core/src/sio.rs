//! The kernel `K(p) = ||NH(p)||^{2r^3} / ||p||^{2r^3+1}`, truncated singular
//! integrals on weighted samples, and their dyadic pieces.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{build_cubes, CubeTree, Curve, DistanceMatrix, MeasuredSet};
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};
use crate::horizontal::{beta_ball, dist_point_line, BetaConfig, LineSearch};
use crate::metric::MetricKind;
use crate::sampling::{self, par_sample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    pub metric: MetricKind,
    /// `2r^3`.
    pub num_exp: i32,
    /// `2r^3 + 1`.
    pub den_exp: i32,
}

impl KernelSpec {
    pub fn new(g: &CarnotGroup, metric: MetricKind) -> Self {
        let r = g.step() as i32;
        Self {
            metric,
            num_exp: 2 * r * r * r,
            den_exp: 2 * r * r * r + 1,
        }
    }

    /// `K(p)`, infinite at the identity.
    #[inline]
    pub fn eval(&self, g: &CarnotGroup, p: &[f64]) -> f64 {
        let n = self.metric.norm(g, p);
        if n == 0.0 {
            return f64::INFINITY;
        }
        let h = self.metric.norm(g, &g.nh(p));
        if h == 0.0 {
            return 0.0;
        }
        (h / n).powi(self.num_exp) / n.powi(self.den_exp - self.num_exp)
    }
}

pub fn kernel_eval(p: &[f64], g: &CarnotGroup, spec: &KernelSpec) -> Result<f64> {
    g.check_dim(p)?;
    if p.iter().all(|&x| x == 0.0) {
        return Err(Error::KernelPole);
    }
    Ok(spec.eval(g, p))
}

#[derive(Clone, Debug, Serialize)]
pub struct CzReport {
    pub samples: usize,
    /// `sup K(p) ||p||` on the unit sphere.
    pub size_max: f64,
    pub size_witness: Point,
    /// `2^{2r^3}`, from `||NH(p)|| <= 2 ||p||`.
    pub size_bound: f64,
    pub gamma: f64,
    pub smoothness_max: f64,
    pub smoothness_witness: Vec<Point>,
}

fn on_unit_sphere(g: &CarnotGroup, kind: MetricKind, r: &mut sampling::Rng) -> Point {
    loop {
        let u = sampling::uniform_box(r, g.dim(), 1.0);
        let n = kind.norm(g, &u);
        if n > 1e-9 {
            return g.scale(1.0 / n, &u);
        }
    }
}

/// Size bound on the unit sphere and the Hoelder modulus
/// `|K(q^{-1}p) - K(q'^{-1}p)| d(p,q)^{1+gamma} / d(q,q')^gamma` over triples with
/// `d(q,q') <= d(p,q)/2`, `gamma = 1/r`.
pub fn check_cz_bounds(g: &CarnotGroup, spec: &KernelSpec, samples: usize, seed: u64) -> CzReport {
    let kind = spec.metric;
    let gamma = 1.0 / g.step() as f64;
    let sizes = par_sample(samples, seed, |r, _| {
        let p = on_unit_sphere(g, kind, r);
        (spec.eval(g, &p) * kind.norm(g, &p), p)
    });
    let (size_max, size_witness) = sizes
        .into_iter()
        .fold((0.0, g.identity()), |acc, (v, p)| if v > acc.0 { (v, p) } else { acc });
    let smooth = par_sample(samples, seed ^ 0x5eed, |r, _| {
        let p = sampling::uniform_box(r, g.dim(), 1.0);
        let q = sampling::uniform_box(r, g.dim(), 1.0);
        let dpq = kind.dist(g, &p, &q);
        let u = on_unit_sphere(g, kind, r);
        let t = 0.5 * dpq * sampling::log_uniform(r, 1e-3, 1.0);
        let q2 = g.mul(&q, &g.scale(t, &u));
        let dqq = kind.dist(g, &q, &q2);
        if dpq == 0.0 || dqq == 0.0 || dqq > 0.5 * dpq {
            return (0.0, vec![]);
        }
        let k1 = spec.eval(g, &g.left_diff(&q, &p));
        let k2 = spec.eval(g, &g.left_diff(&q2, &p));
        ((k1 - k2).abs() * dpq.powf(1.0 + gamma) / dqq.powf(gamma), vec![p, q, q2])
    });
    let (smoothness_max, smoothness_witness) = smooth
        .into_iter()
        .fold((0.0, vec![]), |acc, (v, w)| if v > acc.0 { (v, w) } else { acc });
    CzReport {
        samples,
        size_max,
        size_witness,
        size_bound: 2f64.powi(spec.num_exp),
        gamma,
        smoothness_max,
        smoothness_witness,
    }
}

/// `K(q_j^{-1} q_i)` and `d(q_i, q_j)` for all sample pairs.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub n: usize,
    pub weights: Vec<f64>,
    kernel: Vec<f64>,
    dist: Vec<f64>,
    /// `max |K(q_j^{-1} q_i) - K(q_i^{-1} q_j)|` relative to the larger value.
    pub max_asymmetry: f64,
}

pub const MAX_DENSE_SAMPLES: usize = 20_000;

impl KernelMatrix {
    pub fn new(set: &MeasuredSet, g: &CarnotGroup, spec: &KernelSpec) -> Result<Self> {
        let n = set.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if n > MAX_DENSE_SAMPLES {
            return Err(Error::TooManySamples(n, MAX_DENSE_SAMPLES));
        }
        if let Some(&w) = set.weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("non-positive weight {w}")));
        }
        let pts = &set.points;
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut k = vec![0.0; n];
                let mut d = vec![0.0; n];
                let mut asym = 0.0f64;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let p = g.left_diff(&pts[j], &pts[i]);
                    k[j] = spec.eval(g, &p);
                    d[j] = spec.metric.norm(g, &p);
                    let back = spec.eval(g, &g.inv(&p));
                    let top = k[j].max(back);
                    if top > 0.0 {
                        asym = asym.max((k[j] - back).abs() / top);
                    }
                }
                (k, d, asym)
            })
            .collect();
        let mut kernel = Vec::with_capacity(n * n);
        let mut dist = Vec::with_capacity(n * n);
        let mut max_asymmetry = 0.0f64;
        for (k, d, a) in rows {
            kernel.extend(k);
            dist.extend(d);
            max_asymmetry = max_asymmetry.max(a);
        }
        Ok(Self {
            n,
            weights: set.weights.clone(),
            kernel,
            dist,
            max_asymmetry,
        })
    }

    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    fn check_eps(eps: f64) -> Result<()> {
        if eps > 0.0 && eps.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveTruncation(eps))
        }
    }

    /// Dense `M[i][j] = K(q_j^{-1} q_i) w_j` for `d(q_i, q_j) > eps`.
    pub fn operator(&self, eps: f64) -> Result<DiscreteOperator> {
        Self::check_eps(eps)?;
        let n = self.n;
        let matrix = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                if i != j && self.dist[ij] > eps { self.kernel[ij] * self.weights[j] } else { 0.0 }
            })
            .collect();
        Ok(DiscreteOperator { eps, n, weights: self.weights.clone(), matrix })
    }

    /// `T^eps f` at every sample.
    pub fn apply(&self, eps: f64, f: &[f64]) -> Result<Vec<f64>> {
        Self::check_eps(eps)?;
        let n = self.n;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.dist[i * n + j] > eps)
                    .map(|j| self.kernel[i * n + j] * self.weights[j] * f[j])
                    .sum()
            })
            .collect())
    }

    /// `L^2(mu)` norm of `T^eps`.
    pub fn op_norm(&self, eps: f64) -> Result<OpNorm> {
        Self::check_eps(eps)?;
        let n = self.n;
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let a = |i: usize, j: usize| {
            let ij = i * n + j;
            if i != j && self.dist[ij] > eps { sw[i] * self.kernel[ij] * sw[j] } else { 0.0 }
        };
        Ok(power_iteration(n, a))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteOperator {
    pub eps: f64,
    pub n: usize,
    pub weights: Vec<f64>,
    /// Row-major.
    pub matrix: Vec<f64>,
}

impl DiscreteOperator {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn op_norm(&self) -> OpNorm {
        let n = self.n;
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        power_iteration(n, |i, j| sw[i] * self.matrix[i * n + j] / sw[j])
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpNorm {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of the matrix `a(i, j)` by power iteration on `A^T A`
/// from the all-ones vector, to `1e-8` relative.
fn power_iteration(n: usize, a: impl Fn(usize, usize) -> f64 + Sync) -> OpNorm {
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma = 0.0;
    for it in 1..=5000 {
        let y: Vec<f64> = (0..n).into_par_iter().map(|i| (0..n).map(|j| a(i, j) * x[j]).sum()).collect();
        let mut z: Vec<f64> = (0..n).into_par_iter().map(|j| (0..n).map(|i| a(i, j) * y[i]).sum()).collect();
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nz == 0.0 {
            return OpNorm { norm: 0.0, iterations: it, converged: true };
        }
        let next = nz.sqrt();
        z.iter_mut().for_each(|v| *v /= nz);
        x = z;
        if (next - sigma).abs() <= 1e-8 * next {
            return OpNorm { norm: next, iterations: it, converged: true };
        }
        sigma = next;
    }
    OpNorm { norm: sigma, iterations: 5000, converged: false }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub eps: f64,
    pub op_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn norm_sweep(km: &KernelMatrix, eps_list: &[f64]) -> Result<Vec<NormRow>> {
    eps_list
        .iter()
        .map(|&eps| {
            let r = km.op_norm(eps)?;
            Ok(NormRow { eps, op_norm: r.norm, iterations: r.iterations, converged: r.converged })
        })
        .collect()
}

/// `psi(s)`: 1 on `[0, 1/2]`, linear down to 0 at 2.
pub fn psi(s: f64) -> f64 {
    ((2.0 - s) / 1.5).clamp(0.0, 1.0)
}

/// `phi_j` at distance `d`.
pub fn phi(j: i32, d: f64) -> f64 {
    psi(2f64.powi(j) * d) - psi(2f64.powi(j + 1) * d)
}

/// `T_(j) 1(x)` at sample `x`.
pub fn annular_sum(km: &KernelMatrix, x: usize, j: i32) -> f64 {
    (0..km.n)
        .filter(|&y| y != x)
        .map(|y| phi(j, km.dist(x, y)) * km.kernel(x, y) * km.weights[y])
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    pub n: i32,
    /// `sum_{m <= n} T_(m) 1(x)`.
    pub partial: f64,
    /// `T^{2^{-n}} 1(x)`.
    pub lower: f64,
    /// `T^{2^{-n-2}} 1(x)`.
    pub upper: f64,
    pub holds: bool,
}

/// Partial sums of the annular pieces against hard truncations at `x`. The
/// coarsest piece is the first one whose inner radius exceeds every distance.
pub fn sandwich(km: &KernelMatrix, x: usize, n: i32) -> Sandwich {
    let far = (0..km.n).map(|y| km.dist(x, y)).fold(0.0, f64::max);
    let start = if far > 0.0 { (-(far.log2()) - 3.0).floor() as i32 } else { n };
    let partial: f64 = (start.min(n)..=n).map(|m| annular_sum(km, x, m)).sum();
    let trunc = |eps: f64| -> f64 {
        (0..km.n)
            .filter(|&y| y != x && km.dist(x, y) > eps)
            .map(|y| km.kernel(x, y) * km.weights[y])
            .sum()
    };
    let lower = trunc(2f64.powi(-n));
    let upper = trunc(2f64.powi(-n - 2));
    let slack = 1e-12 * upper.max(f64::MIN_POSITIVE);
    Sandwich {
        n,
        partial,
        lower,
        upper,
        holds: lower <= partial + slack && partial <= upper + slack,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TjReport {
    pub x_index: usize,
    pub j: i32,
    pub value: f64,
    pub sandwich: Sandwich,
}

pub fn tj_report(km: &KernelMatrix, x: usize, j: i32) -> Result<TjReport> {
    if x >= km.n {
        return Err(Error::InvalidParameter(format!("x index {x} out of range 0..{}", km.n)));
    }
    Ok(TjReport {
        x_index: x,
        j,
        value: annular_sum(km, x, j),
        sandwich: sandwich(km, x, j),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub samples: usize,
    pub exponent: f64,
    /// `sup T_(j) 1(x) / beta_E(x, 2^{1-j})^p` over pairs with positive beta.
    pub max_ratio: f64,
    pub witness: Option<(usize, i32)>,
    /// Pairs with `beta = 0` and `T_(j) 1(x) > 0`.
    pub unresolved: usize,
    pub max_unresolved_tj: f64,
}

/// Random points `x` spread evenly over the levels `j` with `2^{1-j}` between
/// `4 * resolution` and `diam`.
pub fn beta_domination(
    set: &MeasuredSet,
    km: &KernelMatrix,
    g: &CarnotGroup,
    kind: MetricKind,
    samples: usize,
    seed: u64,
    beta: &BetaConfig,
) -> Result<DominationReport> {
    let r = g.step() as f64;
    let p = 2.0 * r * r;
    let diam = (0..km.n).map(|i| (0..km.n).map(|j| km.dist(i, j)).fold(0.0, f64::max)).fold(0.0, f64::max);
    let res = set.resolution.max(f64::MIN_POSITIVE);
    let j_lo = (1.0 - diam.log2()).ceil() as i32;
    let j_hi = (1.0 - (4.0 * res).log2()).floor() as i32;
    if j_hi < j_lo {
        return Err(Error::ScaleBelowResolution { scale: diam, resolution: res });
    }
    let levels = (j_hi - j_lo + 1) as usize;
    let picks = par_sample(samples, seed, |rng, i| (rng.random_range(0..km.n), j_lo + (i % levels) as i32));
    let rows: Vec<(f64, f64)> = picks
        .par_iter()
        .enumerate()
        .map(|(k, &(x, j))| {
            let t = annular_sum(km, x, j);
            let cfg = beta.clone().with_seed(beta.seed.wrapping_add(k as u64));
            let b = beta_ball(&set.points, &set.points[x], 2f64.powi(1 - j), g, kind, &cfg)?;
            Ok((t, b.beta))
        })
        .collect::<Result<_>>()?;
    let mut rep = DominationReport {
        samples,
        exponent: p,
        max_ratio: 0.0,
        witness: None,
        unresolved: 0,
        max_unresolved_tj: 0.0,
    };
    for (&(x, j), &(t, b)) in picks.iter().zip(&rows) {
        if b > 0.0 {
            let ratio = t / b.powf(p);
            if ratio > rep.max_ratio {
                rep.max_ratio = ratio;
                rep.witness = Some((x, j));
            }
        } else if t > 0.0 {
            rep.unresolved += 1;
            rep.max_unresolved_tj = rep.max_unresolved_tj.max(t);
        }
    }
    Ok(rep)
}

/// `||NH(a^{-1}b)||^r / d(a,b)^{r-1}` over `max(d(a,L), d(b,L))` for the best
/// horizontal line `L` of `{a, b}`, computed in the frame `a = 0`, `d(a,b) = 1`.
/// `None` when both sides are below `1e-12`.
pub fn kernel_lemma_ratio(a: &[f64], b: &[f64], g: &CarnotGroup, kind: MetricKind, cfg: &BetaConfig) -> Result<Option<f64>> {
    let d = kind.dist(g, b, a);
    if d == 0.0 {
        return Ok(None);
    }
    let p = g.scale(1.0 / d, &g.left_diff(a, b));
    let o = g.identity();
    let lhs = kind.norm(g, &g.nh(&p)).powi(g.step() as i32);
    let pts = [o.clone(), p.clone()];
    let line = beta_ball(&pts, &o, 1.0, g, kind, cfg)?.line;
    let search = LineSearch::precise(g);
    let rhs = dist_point_line(&o, &line, g, kind, search).0.max(dist_point_line(&p, &line, g, kind, search).0);
    if lhs < 1e-12 && rhs < 1e-12 {
        return Ok(None);
    }
    Ok(Some(lhs / rhs))
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelLemmaReport {
    pub samples: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub witness: (Point, Point),
}

/// Line search settings for two-point sets.
pub fn pair_beta_config(g: &CarnotGroup) -> BetaConfig {
    BetaConfig {
        restarts: 2,
        max_evals: 60,
        search_points: 2,
        ..BetaConfig::new(g)
    }
}

pub fn check_kernel_lemma(g: &CarnotGroup, kind: MetricKind, samples: usize, seed: u64) -> Result<KernelLemmaReport> {
    let cfg = pair_beta_config(g);
    let rows = par_sample(samples, seed, |r, i| {
        let a = sampling::uniform_box(r, g.dim(), 1.0);
        let b = if i % 2 == 0 {
            sampling::uniform_box(r, g.dim(), 1.0)
        } else {
            let s = sampling::log_uniform(r, 1e-3, 1.0);
            g.mul(&a, &g.scale(s, &sampling::uniform_box(r, g.dim(), 1.0)))
        };
        let ratio = kernel_lemma_ratio(&a, &b, g, kind, &cfg.clone().with_seed(i as u64));
        (ratio, a, b)
    });
    let mut rep = KernelLemmaReport { samples, skipped: 0, max_ratio: 0.0, witness: (g.identity(), g.identity()) };
    for (ratio, a, b) in rows {
        match ratio? {
            Some(v) if v > rep.max_ratio => {
                rep.max_ratio = v;
                rep.witness = (a, b);
            }
            Some(_) => {}
            None => rep.skipped += 1,
        }
    }
    Ok(rep)
}

/// Cubes on a set with their kernel data, for the cube-level bounds.
pub struct CubeAnalysis<'a> {
    pub set: &'a MeasuredSet,
    pub km: &'a KernelMatrix,
    pub tree: CubeTree,
}

/// Default cube window: a root level above the diameter down to cubes whose
/// net spacing `2^{-j}/4` is at least twice the sample resolution.
pub fn cube_window(diam: f64, resolution: f64) -> (i32, i32) {
    let j_min = -(diam.max(f64::MIN_POSITIVE).log2().ceil() as i32) - 2;
    let j_max = if resolution > 0.0 { (1.0 / (8.0 * resolution)).log2().floor() as i32 } else { j_min };
    (j_min, j_max.max(j_min))
}

#[derive(Clone, Debug, Serialize)]
pub struct SnBoundReport {
    /// `sup ||S_n chi_S||^2_{L^2(S)} / mu(S)` over cubes `S` and levels `n`.
    pub max_ratio: f64,
    pub witness: Option<(usize, i32)>,
    pub cubes: usize,
    pub n_range: (i32, i32),
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonCubeReport {
    pub exponent: f64,
    /// `beta_E(Q)` uses radius `(2 / c_d + 1) 2^{-j}`.
    pub radius_factor: f64,
    /// `sup_P sum_{Q in Delta(P)} beta_E(Q)^p mu(Q) / mu(P)`.
    pub max_ratio: f64,
    pub witness: Option<usize>,
    pub betas: Vec<f64>,
}

impl<'a> CubeAnalysis<'a> {
    pub fn new(set: &'a MeasuredSet, dm: &DistanceMatrix, km: &'a KernelMatrix) -> Result<Self> {
        let diam = (0..dm.len()).map(|i| dm.row(i).iter().copied().fold(0.0, f64::max)).fold(0.0, f64::max);
        let (j_min, j_max) = cube_window(diam, set.resolution);
        let tree = build_cubes(set, dm, j_min, j_max)?;
        Ok(Self { set, km, tree })
    }

    /// `S_n chi_S(x) = sum_{y in S} (1 - psi_{n+1}(y^{-1}x)) K(y^{-1}x) w_y`.
    fn sn_chi(&self, members: &[usize], x: usize, n: i32) -> f64 {
        let s = 2f64.powi(n + 1);
        members
            .iter()
            .filter(|&&y| y != x)
            .map(|&y| (1.0 - psi(s * self.km.dist(x, y))) * self.km.kernel(x, y) * self.km.weights[y])
            .sum()
    }

    pub fn sn_bound(&self) -> SnBoundReport {
        let t = &self.tree;
        let n_range = (t.j_min, t.j_max + 2);
        let rows: Vec<(f64, usize, i32)> = (0..t.cubes.len())
            .into_par_iter()
            .flat_map_iter(|id| {
                let q = &t.cubes[id];
                (n_range.0..=n_range.1).map(move |n| {
                    let norm2: f64 = q
                        .members
                        .iter()
                        .map(|&x| self.km.weights[x] * self.sn_chi(&q.members, x, n).powi(2))
                        .sum();
                    (norm2 / q.measure, id, n)
                })
            })
            .collect();
        let best = rows.iter().fold(None::<(f64, usize, i32)>, |acc, &r| match acc {
            Some(a) if a.0 >= r.0 => Some(a),
            _ => Some(r),
        });
        SnBoundReport {
            max_ratio: best.map_or(0.0, |b| b.0),
            witness: best.map(|b| (b.1, b.2)),
            cubes: t.cubes.len(),
            n_range,
        }
    }

    pub fn carleson_cubes(&self, g: &CarnotGroup, kind: MetricKind, cfg: &BetaConfig) -> Result<CarlesonCubeReport> {
        let t = &self.tree;
        let r = g.step() as f64;
        let p = 2.0 * r * r;
        let factor = 2.0 / t.c_d + 1.0;
        let betas: Vec<f64> = t
            .cubes
            .par_iter()
            .enumerate()
            .map(|(id, q)| {
                let radius = factor * 2f64.powi(-q.level);
                let c = cfg.clone().with_seed(cfg.seed.wrapping_add(id as u64));
                Ok(beta_ball(&self.set.points, &self.set.points[q.center], radius, g, kind, &c)?.beta)
            })
            .collect::<Result<_>>()?;
        let mut best = (0.0, None);
        for (id, q) in t.cubes.iter().enumerate() {
            let sum: f64 = t
                .descendants(id)
                .iter()
                .map(|&c| betas[c].powf(p) * t.cubes[c].measure)
                .sum();
            let ratio = sum / q.measure;
            if ratio > best.0 {
                best = (ratio, Some(id));
            }
        }
        Ok(CarlesonCubeReport { exponent: p, radius_factor: factor, max_ratio: best.0, witness: best.1, betas })
    }
}

/// Serpentine polyline through a `cols x rows` grid of the coordinate patch
/// `[0, width] x [0, height]` spanned by the first and the last (top-layer)
/// coordinates. Its arc-length measure is far from 1-regular.
pub fn negative_control(g: &CarnotGroup, kind: MetricKind, cols: usize, rows: usize, width: f64, height: f64) -> Result<Curve> {
    if cols < 1 || rows < 2 {
        return Err(Error::InvalidParameter("grid needs cols >= 1 and rows >= 2".into()));
    }
    let n = g.dim();
    let x_at = |c: usize| if cols == 1 { 0.0 } else { width * c as f64 / (cols - 1) as f64 };
    let mut pts = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        let z = height * row as f64 / (rows - 1) as f64;
        for c in 0..cols {
            let c = if row % 2 == 0 { c } else { cols - 1 - c };
            let mut p = Point::zeros(n);
            p[0] = x_at(c);
            p[n - 1] = z;
            pts.push(p);
        }
    }
    Curve::new(pts, false, g, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{generate_curve, CurveSpec, PlanarShape};

    fn h() -> CarnotGroup {
        CarnotGroup::heisenberg()
    }

    #[test]
    fn vertical_closed_form() {
        let g = h();
        let spec = KernelSpec::new(&g, MetricKind::Hs);
        assert_eq!((spec.num_exp, spec.den_exp), (16, 17));
        let k = kernel_eval(&[0.0, 0.0, 1.0], &g, &spec).unwrap();
        assert!((k - 0.4f64.sqrt()).abs() < 1e-12);
        assert!(matches!(kernel_eval(&[0.0; 3], &g, &spec), Err(Error::KernelPole)));
    }

    #[test]
    fn horizontal_points_vanish() {
        let g = CarnotGroup::engel();
        let spec = KernelSpec::new(&g, MetricKind::Hs);
        assert_eq!(spec.eval(&g, &g.horizontal(&[0.3, -1.7])), 0.0);
    }

    #[test]
    fn homogeneity() {
        let g = h();
        let spec = KernelSpec::new(&g, MetricKind::Hs);
        let p = [0.3, -0.2, 0.7];
        let k = spec.eval(&g, &p);
        assert!((spec.eval(&g, &g.scale(2.0, &p)) - k / 2.0).abs() < 1e-10 * k);
    }

    #[test]
    fn psi_partition_telescopes() {
        for d in [1e-3, 0.1, 0.3, 1.0, 3.7] {
            let s: f64 = (-10..=4).map(|j| phi(j, d)).sum();
            let want = 1.0 - psi(2f64.powi(5) * d);
            assert!((s - want).abs() < 1e-12, "{d}: {s} {want}");
        }
        assert_eq!(psi(0.5), 1.0);
        assert_eq!(psi(2.0), 0.0);
    }

    fn circle(samples: usize) -> MeasuredSet {
        let g = h();
        let spec = CurveSpec::LiftedPlanar { shape: PlanarShape::Circle { radius: 1.0, turns: 1.0 }, samples };
        generate_curve(&spec, &g, MetricKind::Hs).unwrap().measure()
    }

    #[test]
    fn segment_operator_is_zero() {
        let g = h();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 65 }, &g, MetricKind::Hs).unwrap();
        let km = KernelMatrix::new(&c.measure(), &g, &KernelSpec::new(&g, MetricKind::Hs)).unwrap();
        assert_eq!(km.op_norm(1e-3).unwrap().norm, 0.0);
        assert!((0..65).all(|x| annular_sum(&km, x, 3) == 0.0));
    }

    #[test]
    fn operator_norm_matches_dense() {
        let g = h();
        let set = circle(120);
        let km = KernelMatrix::new(&set, &g, &KernelSpec::new(&g, MetricKind::Hs)).unwrap();
        assert!(km.max_asymmetry < 1e-12);
        let a = km.op_norm(0.05).unwrap();
        let b = km.operator(0.05).unwrap().op_norm();
        assert!(a.converged && (a.norm - b.norm).abs() < 1e-8 * a.norm);
        let op = km.operator(0.05).unwrap();
        for i in 0..120 {
            assert_eq!(op.get(i, i), 0.0);
            for j in 0..120 {
                assert!((op.get(i, j) * set.weights[i] - op.get(j, i) * set.weights[j]).abs() <= 1e-12 * (op.get(i, j) * set.weights[i]).max(1e-300));
            }
        }
        // permutation invariance
        let mut perm: Vec<usize> = (0..120).collect();
        perm.reverse();
        perm.swap(3, 70);
        let shuffled = MeasuredSet {
            points: perm.iter().map(|&i| set.points[i].clone()).collect(),
            weights: perm.iter().map(|&i| set.weights[i]).collect(),
            resolution: set.resolution,
        };
        let km2 = KernelMatrix::new(&shuffled, &g, &KernelSpec::new(&g, MetricKind::Hs)).unwrap();
        assert!((km2.op_norm(0.05).unwrap().norm - a.norm).abs() < 1e-7 * a.norm);
        assert!(matches!(km.op_norm(0.0), Err(Error::NonPositiveTruncation(_))));
    }

    #[test]
    fn doubling_weights_doubles_output() {
        let g = h();
        let set = circle(80);
        let spec = KernelSpec::new(&g, MetricKind::Hs);
        let km = KernelMatrix::new(&set, &g, &spec).unwrap();
        let mut twice = set.clone();
        twice.weights.iter_mut().for_each(|w| *w *= 2.0);
        let km2 = KernelMatrix::new(&twice, &g, &spec).unwrap();
        let one = vec![1.0; 80];
        let (a, b) = (km.apply(0.01, &one).unwrap(), km2.apply(0.01, &one).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (2.0 * x - y).abs() <= 1e-12 * y.abs()));
    }

    #[test]
    fn sandwich_holds_on_circle() {
        let g = h();
        let km = KernelMatrix::new(&circle(200), &g, &KernelSpec::new(&g, MetricKind::Hs)).unwrap();
        for x in [0, 50, 199] {
            for n in -2..6 {
                let s = sandwich(&km, x, n);
                assert!(s.holds, "{s:?}");
            }
        }
    }

    #[test]
    fn kernel_lemma_vertical_sweep() {
        let g = h();
        let cfg = pair_beta_config(&g);
        let mut prev = None;
        for hgt in [1.0, 0.3, 0.1, 0.03] {
            let v = kernel_lemma_ratio(&[0.0; 3], &[1.0, 0.0, hgt], &g, MetricKind::Hs, &cfg).unwrap().unwrap();
            assert!(v.is_finite() && v > 0.0);
            prev = Some(v);
        }
        assert!(prev.is_some());
        assert_eq!(kernel_lemma_ratio(&[0.0; 3], &[1.0, 0.0, 0.0], &g, MetricKind::Hs, &cfg).unwrap(), None);
    }

    #[test]
    fn cube_bounds_on_circle() {
        let g = h();
        let set = circle(257);
        let dm = DistanceMatrix::new(&set.points, &g, MetricKind::Hs);
        let km = KernelMatrix::new(&set, &g, &KernelSpec::new(&g, MetricKind::Hs)).unwrap();
        let ca = CubeAnalysis::new(&set, &dm, &km).unwrap();
        ca.tree.verify(&set, &dm).unwrap();
        let sn = ca.sn_bound();
        assert!(sn.max_ratio.is_finite() && sn.max_ratio >= 0.0);
    }
}
