//! Multiresolution Carleson sums of beta numbers against curve length.

use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{build_nets, multiresolution, Curve};
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Point};
use crate::harness::Exponent;
use crate::horizontal::{beta_ball, BetaConfig};
use crate::metric::MetricKind;

#[derive(Clone, Debug, Serialize)]
pub struct BallRecord {
    pub level: i32,
    pub center_index: usize,
    pub center: Point,
    pub radius: f64,
    pub beta: f64,
    pub beta_lower: f64,
    pub flagged: bool,
    /// `beta^p * 2 radius`.
    pub contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelTotal {
    pub level: i32,
    pub balls: usize,
    pub total: f64,
    pub max_beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    pub group: String,
    pub metric: MetricKind,
    pub exponent: f64,
    pub n_min: i32,
    pub n_max: i32,
    /// Factor applied to the curve before summing (1 if not normalized).
    pub scale: f64,
    pub length: f64,
    pub total: f64,
    /// Sum over balls of radius below 1/100 only.
    pub total_small: f64,
    pub ratio: f64,
    pub max_beta: f64,
    pub flagged: usize,
    pub levels: Vec<LevelTotal>,
    pub balls: Vec<BallRecord>,
}

#[derive(Clone, Debug)]
pub struct CarlesonConfig {
    pub exponent: Exponent,
    /// `None` picks a window from the curve.
    pub n_min: Option<i32>,
    pub n_max: Option<i32>,
    pub beta: BetaConfig,
    /// Rescale to diameter 1 first.
    pub normalize: bool,
}

impl CarlesonConfig {
    pub fn new(g: &CarnotGroup) -> Self {
        Self {
            exponent: Exponent::Auto,
            n_min: None,
            n_max: None,
            beta: BetaConfig::fast(g),
            normalize: true,
        }
    }
}

/// Default window: from the level whose balls first contain the whole curve
/// down to the finest level with spacing above twice the sample resolution.
pub fn default_window(curve: &Curve, g: &CarnotGroup) -> (i32, i32) {
    let diam = curve.diameter(g).max(f64::MIN_POSITIVE);
    let n_min = (10.0 / diam).log2().floor() as i32;
    let res = curve.resolution();
    let n_max = if res > 0.0 { (1.0 / (2.0 * res)).log2().floor() as i32 } else { n_min };
    (n_min, n_max.max(n_min))
}

impl CarlesonReport {
    /// Totals for another exponent from the same betas.
    pub fn total_for(&self, exponent: f64) -> f64 {
        self.balls.iter().map(|b| b.beta.powf(exponent) * 2.0 * b.radius).sum()
    }

    /// Per-ball CSV rows `level,center_index,radius,beta,beta_lower,contribution`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,center_index,radius,beta,beta_lower,contribution\n");
        for b in &self.balls {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.level,
                b.center_index,
                fmt17(b.radius),
                fmt17(b.beta),
                fmt17(b.beta_lower),
                fmt17(b.contribution)
            ));
        }
        s
    }
}

/// Seventeen significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `sum beta(B)^p diam(B)` over the multiresolution balls of the curve.
pub fn carleson_sum(curve: &Curve, g: &CarnotGroup, cfg: &CarlesonConfig) -> Result<CarlesonReport> {
    let (curve, scale) = if cfg.normalize { curve.normalized(g)? } else { (curve.clone(), 1.0) };
    let (auto_min, auto_max) = default_window(&curve, g);
    let n_min = cfg.n_min.unwrap_or(auto_min);
    let n_max = cfg.n_max.unwrap_or(auto_max);
    let nets = build_nets(&curve, n_min, n_max, g)?;
    let balls = multiresolution(&nets, &curve);
    let p = cfg.exponent.resolve(g);
    let kind = curve.metric();
    let pts = curve.points();
    let records: Vec<BallRecord> = balls
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            let bc = cfg.beta.clone().with_seed(cfg.beta.seed.wrapping_add(k as u64));
            let res = beta_ball(pts, &b.center, b.radius, g, kind, &bc)?;
            Ok(BallRecord {
                level: b.level,
                center_index: b.center_index,
                center: b.center.clone(),
                radius: b.radius,
                beta: res.beta,
                beta_lower: res.lower_bound,
                flagged: res.flagged,
                contribution: res.beta.powf(p) * 2.0 * b.radius,
            })
        })
        .collect::<Result<_>>()?;
    let levels: Vec<LevelTotal> = (n_min..=n_max)
        .map(|n| {
            let here = records.iter().filter(|b| b.level == n);
            let (balls, total, max_beta) =
                here.fold((0, 0.0, 0.0f64), |(c, t, m), b| (c + 1, t + b.contribution, m.max(b.beta)));
            LevelTotal { level: n, balls, total, max_beta }
        })
        .collect();
    let total: f64 = records.iter().map(|b| b.contribution).sum();
    let total_small: f64 = records.iter().filter(|b| b.radius < 0.01).map(|b| b.contribution).sum();
    let length = curve.length();
    if length <= 0.0 && total > 0.0 {
        return Err(Error::InvalidCurve("zero length with nonzero sum".into()));
    }
    Ok(CarlesonReport {
        group: g.name().to_string(),
        metric: kind,
        exponent: p,
        n_min,
        n_max,
        scale,
        length,
        total,
        total_small,
        ratio: if length > 0.0 { total / length } else { 0.0 },
        max_beta: records.iter().map(|b| b.beta).fold(0.0, f64::max),
        flagged: records.iter().filter(|b| b.flagged).count(),
        levels,
        balls: records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub exponent: f64,
    pub total: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentSweep {
    pub rows: Vec<SweepRow>,
    pub max_beta: f64,
    /// Totals nonincreasing in the exponent; only asserted when every beta <= 1.
    pub monotone: bool,
}

/// Totals for several exponents from one set of betas.
pub fn exponent_sweep(report: &CarlesonReport, exponents: &[f64]) -> ExponentSweep {
    let mut ps = exponents.to_vec();
    ps.sort_by(f64::total_cmp);
    let rows: Vec<SweepRow> = ps
        .iter()
        .map(|&p| {
            let total = report.total_for(p);
            SweepRow {
                exponent: p,
                total,
                ratio: if report.length > 0.0 { total / report.length } else { 0.0 },
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].total <= w[0].total);
    ExponentSweep { rows, max_beta: report.max_beta, monotone }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{generate_curve, CurveSpec, PlanarShape};

    fn h() -> CarnotGroup {
        CarnotGroup::heisenberg()
    }

    #[test]
    fn segment_total_is_zero() {
        let g = h();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 257 }, &g, MetricKind::Hs).unwrap();
        let rep = carleson_sum(&c, &g, &CarlesonConfig::new(&g)).unwrap();
        assert_eq!(rep.total, 0.0);
        assert!(rep.balls.iter().all(|b| b.beta == 0.0));
        let sweep = exponent_sweep(&rep, &[2.0, 4.0, 8.0]);
        assert!(sweep.rows.iter().all(|r| r.total == 0.0));
    }

    #[test]
    fn circle_totals_are_consistent() {
        let g = h();
        let spec = CurveSpec::LiftedPlanar { shape: PlanarShape::Circle { radius: 1.0, turns: 1.0 }, samples: 257 };
        let c = generate_curve(&spec, &g, MetricKind::Hs).unwrap();
        let cfg = CarlesonConfig { n_min: Some(2), n_max: Some(5), ..CarlesonConfig::new(&g) };
        let rep = carleson_sum(&c, &g, &cfg).unwrap();
        assert_eq!(rep.exponent, 4.0);
        assert!(rep.total > 0.0 && rep.total.is_finite());
        let sum: f64 = rep.balls.iter().map(|b| b.contribution).sum();
        assert_eq!(sum, rep.total);
        let lv: f64 = rep.levels.iter().map(|l| l.total).sum();
        assert!((lv - rep.total).abs() <= 1e-12 * rep.total);
        for b in &rep.balls {
            assert_eq!(b.contribution, b.beta.powf(4.0) * 2.0 * b.radius);
            assert!(b.beta_lower <= b.beta + 1e-9);
        }
        let sweep = exponent_sweep(&rep, &[8.0, 2.0, 4.0]);
        assert!(rep.max_beta <= 1.0 && sweep.monotone);
        assert_eq!(sweep.rows[1].total, rep.total);
        assert!(rep.to_csv().lines().count() == rep.balls.len() + 1);
    }

    #[test]
    fn too_fine_window_errors() {
        let g = h();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples: 9 }, &g, MetricKind::Hs).unwrap();
        let cfg = CarlesonConfig { n_min: Some(0), n_max: Some(6), ..CarlesonConfig::new(&g) };
        assert!(matches!(carleson_sum(&c, &g, &cfg), Err(Error::ResolutionTooCoarse { .. })));
    }
}
