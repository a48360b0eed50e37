//! The test corpus of rectifiable curves and the per-curve analysis run over it.

use std::path::Path;

use serde::Serialize;

use crate::curves::{generate_curve, Curve, CurveSpec, CubeVerification, DistanceMatrix, PlanarShape};
use crate::error::{Error, Result};
use crate::group::CarnotGroup;
use crate::horizontal::BetaConfig;
use crate::metric::MetricKind;
use crate::sio::{beta_domination, sandwich, CubeAnalysis, DominationReport, KernelMatrix, KernelSpec, SnBoundReport};
use crate::tsp::{carleson_sum, exponent_sweep, CarlesonConfig};

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub curve: Curve,
}

/// Curve specs of the default corpus, each with `samples` points.
pub fn default_specs(samples: usize) -> Vec<(&'static str, CurveSpec)> {
    let planar = |shape| CurveSpec::LiftedPlanar { shape, samples };
    vec![
        ("segment", CurveSpec::HorizontalSegment { length: 1.0, samples }),
        ("circle", planar(PlanarShape::Circle { radius: 1.0, turns: 1.0 })),
        ("figure-eight", planar(PlanarShape::FigureEight { scale: 1.0 })),
        ("spiral", CurveSpec::CoordinateSpiral { turns: 2.0, r0: 0.5, growth: 0.5, samples }),
        (
            "perturbed-line",
            CurveSpec::PerturbedLine { length: 1.0, amplitude: 0.1, knots: 8, samples, seed: 7 },
        ),
        (
            "square",
            planar(PlanarShape::Polyline { points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]] }),
        ),
    ]
}

pub fn default_corpus(g: &CarnotGroup, kind: MetricKind, samples: usize) -> Result<Vec<CorpusEntry>> {
    default_specs(samples)
        .into_iter()
        .map(|(name, spec)| Ok(CorpusEntry { name: name.into(), curve: generate_curve(&spec, g, kind)? }))
        .collect()
}

/// Every `*.json` curve file in `dir`, in file-name order.
pub fn load_corpus_dir(dir: &Path, g: &CarnotGroup, kind: MetricKind) -> Result<Vec<CorpusEntry>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty);
    }
    files
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(CorpusEntry { name, curve: Curve::from_file(p, g, kind)? })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub carleson: CarlesonConfig,
    pub domination_samples: usize,
    pub seeds: [u64; 2],
    pub beta: BetaConfig,
}

impl AnalysisConfig {
    pub fn new(g: &CarnotGroup) -> Self {
        Self {
            carleson: CarlesonConfig::new(g),
            domination_samples: 100,
            seeds: [1, 2],
            beta: BetaConfig::fast(g),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichSummary {
    pub checked: usize,
    pub failures: usize,
    pub n_range: (i32, i32),
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveAnalysis {
    pub name: String,
    pub samples: usize,
    /// Length after rescaling to diameter 1.
    pub length: f64,
    pub carleson_total: f64,
    pub carleson_ratio: f64,
    pub carleson_window: (i32, i32),
    pub max_beta: f64,
    /// Totals nonincreasing over exponents 2, 4, 8, 18 when every beta is at most 1.
    pub exponent_monotone: bool,
    pub cubes: CubeVerification,
    pub sandwich: SandwichSummary,
    pub sn_bound: SnBoundReport,
    pub carleson_cubes_ratio: f64,
    pub cube_beta_radius_factor: f64,
    pub domination: [DominationReport; 2],
}

/// Every corpus check for one curve, rescaled to diameter 1.
pub fn analyze_curve(name: &str, curve: &Curve, g: &CarnotGroup, cfg: &AnalysisConfig) -> Result<CurveAnalysis> {
    let kind = curve.metric();
    let carleson = carleson_sum(curve, g, &CarlesonConfig { normalize: true, ..cfg.carleson.clone() })?;
    let sweep = exponent_sweep(&carleson, &[2.0, 4.0, 8.0, 18.0]);
    let (curve, _) = curve.normalized(g)?;
    let set = curve.measure();
    let dm = DistanceMatrix::new(&set.points, g, kind);
    let km = KernelMatrix::new(&set, g, &KernelSpec::new(g, kind))?;
    let ca = CubeAnalysis::new(&set, &dm, &km)?;
    let cubes = ca.tree.verify(&set, &dm)?;
    let n_range = (ca.tree.j_min, ca.tree.j_max + 2);
    let mut sw = SandwichSummary { checked: 0, failures: 0, n_range };
    for x in 0..set.len() {
        for n in n_range.0..=n_range.1 {
            sw.checked += 1;
            if !sandwich(&km, x, n).holds {
                sw.failures += 1;
            }
        }
    }
    let sn_bound = ca.sn_bound();
    let cc = ca.carleson_cubes(g, kind, &cfg.beta)?;
    let dom = |seed| beta_domination(&set, &km, g, kind, cfg.domination_samples, seed, &cfg.beta);
    Ok(CurveAnalysis {
        name: name.to_string(),
        samples: set.len(),
        length: carleson.length,
        carleson_total: carleson.total,
        carleson_ratio: carleson.ratio,
        carleson_window: (carleson.n_min, carleson.n_max),
        max_beta: carleson.max_beta,
        exponent_monotone: carleson.max_beta > 1.0 || sweep.monotone,
        cubes,
        sandwich: sw,
        sn_bound,
        carleson_cubes_ratio: cc.max_ratio,
        cube_beta_radius_factor: cc.radius_factor,
        domination: [dom(cfg.seeds[0])?, dom(cfg.seeds[1])?],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub group: String,
    pub metric: MetricKind,
    pub curves: Vec<CurveAnalysis>,
    pub max_carleson_ratio: f64,
    pub max_sn_bound: f64,
    pub max_carleson_cubes_ratio: f64,
    /// Largest domination ratio per seed.
    pub max_domination: [f64; 2],
}

pub fn analyze_corpus(corpus: &[CorpusEntry], g: &CarnotGroup, cfg: &AnalysisConfig) -> Result<CorpusReport> {
    let curves: Vec<CurveAnalysis> = corpus
        .iter()
        .map(|e| analyze_curve(&e.name, &e.curve, g, cfg))
        .collect::<Result<_>>()?;
    let max = |f: &dyn Fn(&CurveAnalysis) -> f64| curves.iter().map(f).fold(0.0, f64::max);
    Ok(CorpusReport {
        group: g.name().to_string(),
        metric: corpus.first().map_or(MetricKind::Hs, |e| e.curve.metric()),
        max_carleson_ratio: max(&|c| c.carleson_ratio),
        max_sn_bound: max(&|c| c.sn_bound.max_ratio),
        max_carleson_cubes_ratio: max(&|c| c.carleson_cubes_ratio),
        max_domination: [max(&|c| c.domination[0].max_ratio), max(&|c| c.domination[1].max_ratio)],
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_corpus_has_six_curves() {
        let g = CarnotGroup::heisenberg();
        let c = default_corpus(&g, MetricKind::Hs, 65).unwrap();
        assert_eq!(c.len(), 6);
        for e in &c {
            let n = if e.curve.closed() { 64 } else { 65 };
            assert_eq!(e.curve.len(), n, "{}", e.name);
            assert!(e.curve.length() > 0.0);
        }
        assert!(c.iter().find(|e| e.name == "figure-eight").unwrap().curve.closed());
    }

    #[test]
    fn segment_analysis() {
        let g = CarnotGroup::heisenberg();
        let c = generate_curve(&default_specs(129)[0].1, &g, MetricKind::Hs).unwrap();
        let cfg = AnalysisConfig { domination_samples: 10, ..AnalysisConfig::new(&g) };
        let a = analyze_curve("segment", &c, &g, &cfg).unwrap();
        assert_eq!(a.carleson_total, 0.0);
        assert_eq!(a.sandwich.failures, 0);
        assert_eq!(a.sn_bound.max_ratio, 0.0);
        assert_eq!(a.carleson_cubes_ratio, 0.0);
        assert!(a.cubes.d1 && a.cubes.d2 && a.cubes.d3);
    }
}
