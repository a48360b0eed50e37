use std::path::{Path, PathBuf};

use carnot_tsp::corpus::{load_corpus_dir, CorpusEntry};
use carnot_tsp::curves::{build_cubes, build_nets, dyadic_scales, generate_curve, multiresolution, regularity_constants, Curve, CurveFile, CurveSpec, DistanceMatrix};
use carnot_tsp::harness::{check_goal, estimate_constants, ConstantsConfig, Exponent, GoalConfig};
use carnot_tsp::horizontal::{beta_ball, beta_grid_oracle, BetaConfig};
use carnot_tsp::metric::check_subadditivity;
use carnot_tsp::pipeline::{run_all, Sizes};
use carnot_tsp::sio::{cube_window, kernel_eval, norm_sweep, tj_report, KernelMatrix, KernelSpec};
use carnot_tsp::tsp::{carleson_sum, default_window, CarlesonConfig};
use carnot_tsp::{validate_group, CarnotGroup, Error, GroupSpec};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::args::*;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INPUT: i32 = 64;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Json(_)
            | Error::Io(_)
            | Error::InvalidGroup(_)
            | Error::InvalidCurve(_)
            | Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::NonFinite
            | Error::NonPositiveScale(_)
            | Error::NonPositiveRadius(_)
            | Error::NonPositiveTruncation(_)
            | Error::KernelPole
            | Error::Empty
            | Error::TooManySamples(..)
            | Error::ResolutionTooCoarse { .. }
            | Error::ScaleBelowResolution { .. }
            | Error::DegenerateArc(..) => EXIT_INPUT,
            Error::CubeVerification { .. } => EXIT_VALIDATION,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

/// What a command produced.
pub enum Output {
    Json { value: Value, ok: bool, diagnostics: Option<String> },
    Text(String),
}

struct Loaded {
    group: CarnotGroup,
    hash: String,
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_group(name: Option<&str>, relative_to: Option<&Path>) -> Result<Loaded, Failure> {
    let name = name.unwrap_or("heisenberg");
    let path = match relative_to {
        Some(dir) if Path::new(name).is_relative() => dir.join(name),
        _ => PathBuf::from(name),
    };
    let text = if path.is_file() {
        std::fs::read_to_string(&path).map_err(Error::from)?
    } else {
        let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name);
        CarnotGroup::builtin_json(stem)
            .ok_or_else(|| input(format!("no group file or built-in group `{name}`")))?
            .to_string()
    };
    let group = CarnotGroup::from_json(&text)?;
    Ok(Loaded { group, hash: sha(text.as_bytes()) })
}

fn load_curve(arg: &CurveArg) -> Result<(Loaded, Curve), Failure> {
    let text = std::fs::read_to_string(&arg.curve).map_err(Error::from)?;
    let file: CurveFile = serde_json::from_str(&text).map_err(Error::from)?;
    let dir = arg.curve.parent();
    let loaded = match (&arg.group.group, &file.group) {
        (Some(g), _) => load_group(Some(g), None)?,
        (None, Some(g)) => load_group(Some(g), dir)?,
        (None, None) => load_group(None, None)?,
    };
    let curve = Curve::from_curve_file(&file, &loaded.group, arg.group.metric)?;
    Ok((loaded, curve))
}

fn parse_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| input(format!("bad number `{x}` in `{s}`"))))
        .collect()
}

fn exponent(s: &str) -> Result<Exponent, Failure> {
    Ok(s.parse::<Exponent>()?)
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    group_hash: &'a str,
    config: &'a C,
    report: Value,
}

fn envelope<C: Serialize>(command: &'static str, config: &C, group_hash: &str, report: Value) -> Value {
    let config_hash = sha(serde_json::to_string(&json!({"command": command, "config": config})).unwrap_or_default().as_bytes());
    serde_json::to_value(Envelope {
        tool: "carnot-tsp",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash,
        group_hash,
        config,
        report,
    })
    .unwrap_or(Value::Null)
}

fn ok<C: Serialize, R: Serialize>(command: &'static str, config: &C, hash: &str, report: &R) -> Result<Output, Failure> {
    let report = serde_json::to_value(report).map_err(Error::from)?;
    Ok(Output::Json { value: envelope(command, config, hash, report), ok: true, diagnostics: None })
}

fn checked<C: Serialize, R: Serialize>(
    command: &'static str,
    config: &C,
    hash: &str,
    report: &R,
    passed: bool,
    diagnostics: impl FnOnce() -> String,
) -> Result<Output, Failure> {
    let report = serde_json::to_value(report).map_err(Error::from)?;
    Ok(Output::Json {
        value: envelope(command, config, hash, report),
        ok: passed,
        diagnostics: (!passed).then(diagnostics),
    })
}

pub fn run(command: &Command) -> Result<Output, Failure> {
    match command {
        Command::GroupCheck(a) => group_check(a),
        Command::Norm(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let p = l.group.point(&parse_list(&a.point)?)?;
            let norm = a.group.metric.norm(&l.group, &p);
            ok("norm", a, &l.hash, &json!({"point": p, "metric": a.group.metric, "norm": norm}))
        }
        Command::Dist(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let p = l.group.point(&parse_list(&a.p)?)?;
            let q = l.group.point(&parse_list(&a.q)?)?;
            let d = a.group.metric.dist(&l.group, &p, &q);
            ok("dist", a, &l.hash, &json!({"p": p, "q": q, "metric": a.group.metric, "dist": d}))
        }
        Command::CertifyEta(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let r = check_subadditivity(&l.group, a.group.metric, a.samples, a.box_radius, a.seed);
            let pass = r.certified();
            checked("certify-eta", a, &l.hash, &r, pass, || format!("worst defect {} > 0", r.worst_defect))
        }
        Command::Beta(a) => {
            let (l, c) = load_curve(&a.curve)?;
            let g = &l.group;
            let center = g.point(&parse_list(&a.center)?)?;
            let r = if a.oracle_grid {
                beta_grid_oracle(c.points(), &center, a.radius, g, c.metric(), a.grid_res)?
            } else {
                beta_ball(c.points(), &center, a.radius, g, c.metric(), &BetaConfig::new(g).with_seed(a.seed))?
            };
            ok("beta", a, &l.hash, &r)
        }
        Command::Nets(a) => {
            let (l, c) = load_curve(&a.curve)?;
            let (lo, hi) = default_window(&c, &l.group);
            let nets = build_nets(&c, a.nmin.unwrap_or(lo), a.nmax.unwrap_or(hi), &l.group)?;
            let balls = multiresolution(&nets, &c);
            let small = balls.iter().filter(|b| b.small).count();
            ok("nets", a, &l.hash, &json!({"nets": nets, "balls": balls.len(), "small_balls": small}))
        }
        Command::Cubes(a) => cubes(a),
        Command::Regularity(a) => {
            let (l, c) = load_curve(&a.curve)?;
            let set = c.measure();
            let scales = match &a.scales {
                Some(s) => parse_list(s)?,
                None => dyadic_scales(c.diameter(&l.group), set.resolution),
            };
            let dm = DistanceMatrix::new(&set.points, &l.group, c.metric());
            let r = regularity_constants(&set, &dm, &scales)?;
            ok("regularity", a, &l.hash, &r)
        }
        Command::Carleson(a) => carleson(a),
        Command::CurvatureScan(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let g = &l.group;
            let exponents = a
                .exponent
                .split(',')
                .map(|s| Ok(exponent(s)?.resolve(g)))
                .collect::<Result<Vec<_>, Failure>>()?;
            let cfg = GoalConfig { samples: a.samples, m: a.m, rho: a.rho, exponents, seed: a.seed, ..GoalConfig::new(g) };
            let r = check_goal(g, a.group.metric, &cfg)?;
            let max_ratio = r.exponents.iter().map(|s| s.max_ratio).fold(0.0, f64::max);
            let mut v = serde_json::to_value(&r).map_err(Error::from)?;
            v["max_ratio"] = json!(max_ratio);
            ok("curvature-scan", a, &l.hash, &v)
        }
        Command::Constants(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let cfg = ConstantsConfig { samples: a.samples, goal_samples: a.goal_samples, seed: a.seed, ..Default::default() };
            let r = estimate_constants(&l.group, a.group.metric, &cfg)?;
            ok("constants", a, &l.hash, &r)
        }
        Command::SioNorm(a) => {
            let (l, c) = load_curve(&a.curve)?;
            let g = match a.eta {
                Some(eta) => l.group.with_eta(eta)?,
                None => l.group.clone(),
            };
            let c = Curve::new(c.points().to_vec(), c.closed(), &g, c.metric())?;
            let km = KernelMatrix::new(&c.measure(), &g, &KernelSpec::new(&g, c.metric()))?;
            let rows = norm_sweep(&km, &parse_list(&a.eps_list)?)?;
            ok("sio-norm", a, &l.hash, &json!({"eta": g.eta(), "samples": km.n, "max_asymmetry": km.max_asymmetry, "rows": rows}))
        }
        Command::Kernel(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let p = parse_list(&a.point)?;
            let k = kernel_eval(&p, &l.group, &KernelSpec::new(&l.group, a.group.metric))?;
            ok("kernel", a, &l.hash, &json!({"point": p, "kernel": k}))
        }
        Command::Tj(a) => {
            let (l, c) = load_curve(&a.curve)?;
            let km = KernelMatrix::new(&c.measure(), &l.group, &KernelSpec::new(&l.group, c.metric()))?;
            let r = tj_report(&km, a.x_index, a.j)?;
            let pass = r.sandwich.holds;
            checked("tj", a, &l.hash, &r, pass, || format!("sandwich fails: {:?}", r.sandwich))
        }
        Command::CorpusRun(a) => corpus_run(a),
        Command::CurveGen(a) => {
            let l = load_group(a.group.group.as_deref(), None)?;
            let text = if Path::new(&a.spec).is_file() {
                std::fs::read_to_string(&a.spec).map_err(Error::from)?
            } else {
                a.spec.clone()
            };
            let spec = CurveSpec::from_json(&text)?;
            let c = generate_curve(&spec, &l.group, a.group.metric)?;
            let file = c.to_file(Some(a.group.group.clone().unwrap_or_else(|| l.group.name().to_string())));
            Ok(Output::Json { value: serde_json::to_value(file).map_err(Error::from)?, ok: true, diagnostics: None })
        }
    }
}

fn group_check(a: &GroupCheckArgs) -> Result<Output, Failure> {
    let name = a.file.as_deref().or(a.group.as_deref()).unwrap_or("heisenberg");
    let text = if Path::new(name).is_file() {
        std::fs::read_to_string(name).map_err(Error::from)?
    } else {
        let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name);
        CarnotGroup::builtin_json(stem)
            .ok_or_else(|| input(format!("no group file or built-in group `{name}`")))?
            .to_string()
    };
    let spec = GroupSpec::from_json(&text)?;
    let r = validate_group(&spec);
    let pass = r.passed();
    let report = json!({"passed": pass, "checks": r});
    checked("group-check", a, &sha(text.as_bytes()), &report, pass, || r.summary())
}

fn cubes(a: &CubesArgs) -> Result<Output, Failure> {
    let (l, c) = load_curve(&a.curve)?;
    let set = c.measure();
    let dm = DistanceMatrix::new(&set.points, &l.group, c.metric());
    let (lo, hi) = cube_window(c.diameter(&l.group), set.resolution);
    let tree = build_cubes(&set, &dm, a.jmin.unwrap_or(lo), a.jmax.unwrap_or(hi))?;
    let levels: Vec<Value> = (tree.j_min..=tree.j_max).map(|j| json!({"level": j, "cubes": tree.level(j).len()})).collect();
    let cubes: Vec<Value> = tree
        .cubes
        .iter()
        .map(|q| json!({"level": q.level, "center": q.center, "parent": q.parent, "members": q.members.len(), "measure": q.measure, "diam": q.diam}))
        .collect();
    match tree.verify(&set, &dm) {
        Ok(v) => ok("cubes", a, &l.hash, &json!({"verification": v, "levels": levels, "cubes": cubes})),
        Err(e) => {
            let msg = e.to_string();
            checked("cubes", a, &l.hash, &json!({"error": msg, "levels": levels, "cubes": cubes}), false, || msg.clone())
        }
    }
}

fn carleson(a: &CarlesonArgs) -> Result<Output, Failure> {
    let (l, c) = load_curve(&a.curve)?;
    let g = &l.group;
    let cfg = CarlesonConfig {
        exponent: exponent(&a.exponent)?,
        n_min: a.nmin,
        n_max: a.nmax,
        beta: BetaConfig::fast(g).with_seed(a.seed),
        normalize: !a.no_normalize,
    };
    let r = carleson_sum(&c, g, &cfg)?;
    if a.csv {
        let env = envelope("carleson", a, &l.hash, Value::Null);
        let mut s = format!(
            "# carnot-tsp {} config_hash={} group_hash={}\n",
            env["version"].as_str().unwrap_or_default(),
            env["config_hash"].as_str().unwrap_or_default(),
            l.hash
        );
        s.push_str(&r.to_csv());
        return Ok(Output::Text(s));
    }
    ok("carleson", a, &l.hash, &r)
}

fn corpus_run(a: &CorpusArgs) -> Result<Output, Failure> {
    let sizes = if a.quick { Sizes::quick() } else { Sizes::full() };
    let dir = Path::new(&a.corpus);
    let builtin = a.corpus.trim_end_matches('/') == "default" && !dir.is_dir();
    let heis = CarnotGroup::heisenberg();
    let hash = sha(CarnotGroup::builtin_json("heisenberg").unwrap_or_default().as_bytes());
    let corpus: Option<Vec<CorpusEntry>> = if builtin {
        None
    } else {
        Some(load_corpus_dir(dir, &heis, carnot_tsp::MetricKind::Hs)?)
    };
    let r = run_all(&sizes, a.seed, corpus.as_deref())?;
    for c in &r.criteria {
        eprintln!("{}", c.line());
    }
    let pass = r.passed();
    checked("corpus-run", a, &hash, &r, pass, || {
        let failed: Vec<String> = r.criteria.iter().filter(|c| !c.pass).map(|c| format!("{} ({})", c.id, c.name)).collect();
        format!("failed criteria: {}", failed.join(", "))
    })
}
