//! Stratified nilpotent Lie algebras in exponential coordinates of the first kind.
//!
//! Points of the group are identified with vectors of the Lie algebra; the
//! product is the truncated Baker-Campbell-Hausdorff series.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Deref, DerefMut, Range};
use std::path::Path;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[f64; 8]>;

const MAX_STEP: usize = 10;
const MAX_VIOLATIONS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Coords);

impl Point {
    pub fn zeros(n: usize) -> Self {
        Point(SmallVec::from_elem(0.0, n))
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        Point(SmallVec::from_slice(xs))
    }

    /// Rejects NaN and infinite coordinates.
    pub fn try_from_slice(xs: &[f64]) -> Result<Self> {
        if xs.iter().all(|x| x.is_finite()) {
            Ok(Self::from_slice(xs))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(SmallVec::from_vec(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketTerm {
    pub k: usize,
    pub c: f64,
}

/// One row `[e_i, e_j] = sum c e_k`, indices 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub terms: Vec<BracketTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub step: usize,
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
    pub eta: f64,
}

impl GroupSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }
}

/// Dense table `c[i][j][k]` after antisymmetric completion.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    n: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    /// Entries with `i < j` are mirrored to `(j, i)` with opposite sign; entries
    /// listed with `i >= j` are written verbatim afterwards, so a malformed table
    /// stays visible to the antisymmetry check.
    pub fn from_spec(spec: &GroupSpec) -> Result<Self> {
        let n = spec.dim();
        let mut c = vec![0.0; n * n * n];
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let check = |x: usize| -> Result<usize> {
            if x == 0 || x > n {
                Err(Error::InvalidGroup(format!("basis index {x} outside 1..={n}")))
            } else {
                Ok(x - 1)
            }
        };
        for e in spec.brackets.iter().filter(|e| e.i < e.j) {
            let (i, j) = (check(e.i)?, check(e.j)?);
            for t in &e.terms {
                let k = check(t.k)?;
                c[idx(i, j, k)] += t.c;
                c[idx(j, i, k)] -= t.c;
            }
        }
        for e in spec.brackets.iter().filter(|e| e.i >= e.j) {
            let (i, j) = (check(e.i)?, check(e.j)?);
            for k in 0..n {
                c[idx(i, j, k)] = 0.0;
            }
            for t in &e.terms {
                let k = check(t.k)?;
                c[idx(i, j, k)] += t.c;
            }
        }
        Ok(Self { n, c })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += self.get(i, j, k) * x[i] * y[j];
                }
            }
        }
        out
    }

    fn basis_bracket(&self, i: usize, j: usize) -> &[f64] {
        let s = (i * self.n + j) * self.n;
        &self.c[s..s + self.n]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub violations: Vec<String>,
}

impl Check {
    fn from_violations(violations: Vec<String>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations: violations.into_iter().take(MAX_VIOLATIONS).collect(),
        }
    }

    fn skipped() -> Self {
        Self {
            passed: false,
            violations: vec!["skipped: malformed definition".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub shape: Check,
    pub antisymmetry: Check,
    pub jacobi: Check,
    pub grading: Check,
    pub stratification: Check,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }

    pub fn checks(&self) -> [(&'static str, &Check); 5] {
        [
            ("shape", &self.shape),
            ("antisymmetry", &self.antisymmetry),
            ("jacobi", &self.jacobi),
            ("grading", &self.grading),
            ("stratification", &self.stratification),
        ]
    }

    pub fn summary(&self) -> String {
        self.checks()
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(name, c)| format!("{name}: {}", c.violations.join("; ")))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

fn layer_of(layer_dims: &[usize]) -> Vec<usize> {
    layer_dims
        .iter()
        .enumerate()
        .flat_map(|(l, &d)| std::iter::repeat_n(l + 1, d))
        .collect()
}

/// Checks shape, antisymmetry, Jacobi, grading and that the first layer generates.
pub fn validate_group(spec: &GroupSpec) -> ValidationReport {
    let mut shape = Vec::new();
    if spec.step == 0 || spec.step > MAX_STEP {
        shape.push(format!("step {} outside 1..={MAX_STEP}", spec.step));
    }
    if spec.layer_dims.len() != spec.step {
        shape.push(format!(
            "layer_dims has {} entries for step {}",
            spec.layer_dims.len(),
            spec.step
        ));
    }
    if spec.layer_dims.contains(&0) {
        shape.push("layer dimensions must be positive".into());
    }
    if !(spec.eta > 0.0 && spec.eta < 0.5) {
        shape.push(format!("eta {} outside (0, 1/2)", spec.eta));
    }
    if spec.brackets.iter().flat_map(|e| e.terms.iter()).any(|t| !t.c.is_finite()) {
        shape.push("non-finite structure constant".into());
    }
    let table = StructureConstants::from_spec(spec);
    if let Err(e) = &table {
        shape.push(e.to_string());
    }
    let table = match (shape.is_empty(), table) {
        (true, Ok(t)) => t,
        _ => {
            return ValidationReport {
                shape: Check::from_violations(shape),
                antisymmetry: Check::skipped(),
                jacobi: Check::skipped(),
                grading: Check::skipped(),
                stratification: Check::skipped(),
            }
        }
    };
    let n = table.dim();
    let layers = layer_of(&spec.layer_dims);

    let mut anti = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let s = table.get(i, j, k) + table.get(j, i, k);
                if s.abs() > 1e-12 {
                    anti.push(format!("c[{}][{}][{}] + c[{}][{}][{}] = {s}", i + 1, j + 1, k + 1, j + 1, i + 1, k + 1));
                }
            }
        }
    }

    let mut jac = Vec::new();
    let e = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                let a = table.bracket(&e(i), &table.bracket(&e(j), &e(l)));
                let b = table.bracket(&e(j), &table.bracket(&e(l), &e(i)));
                let c = table.bracket(&e(l), &table.bracket(&e(i), &e(j)));
                let worst = (0..n).map(|k| (a[k] + b[k] + c[k]).abs()).fold(0.0, f64::max);
                if worst > 1e-10 {
                    jac.push(format!("Jacobi defect {worst:e} at ({}, {}, {})", i + 1, j + 1, l + 1));
                }
            }
        }
    }

    let mut grading = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if table.get(i, j, k) != 0.0 && layers[k] != layers[i] + layers[j] {
                    grading.push(format!(
                        "[e{}, e{}] has a component on e{} in layer {} (expected layer {})",
                        i + 1,
                        j + 1,
                        k + 1,
                        layers[k],
                        layers[i] + layers[j]
                    ));
                }
            }
        }
    }

    let mut strat = Vec::new();
    let offsets = offsets(&spec.layer_dims);
    for s in 2..=spec.step {
        let rows = offsets[s - 1]..offsets[s];
        let mut cols = Vec::new();
        for i in offsets[0]..offsets[1] {
            for l in offsets[s - 2]..offsets[s - 1] {
                let v = table.basis_bracket(i, l);
                cols.push(rows.clone().map(|k| v[k]).collect::<Vec<_>>());
            }
        }
        let dim = rows.len();
        let m = DMatrix::from_fn(dim, cols.len(), |r, c| cols[c][r]);
        let rank = m.rank(1e-10);
        if rank != dim {
            strat.push(format!("[V1, V{}] spans rank {rank}, layer {s} has dimension {dim}", s - 1));
        }
    }

    ValidationReport {
        shape: Check::from_violations(Vec::new()),
        antisymmetry: Check::from_violations(anti),
        jacobi: Check::from_violations(jac),
        grading: Check::from_violations(grading),
        stratification: Check::from_violations(strat),
    }
}

fn offsets(layer_dims: &[usize]) -> Vec<usize> {
    let mut o = vec![0];
    for d in layer_dims {
        o.push(o.last().unwrap() + d);
    }
    o
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Letter {
    X,
    Y,
}

#[derive(Clone, Debug)]
struct WordNode {
    letter: Letter,
    tail: Option<usize>,
}

#[derive(Clone, Debug)]
struct BchTerm {
    node: usize,
    coef: f64,
    xs: usize,
    ys: usize,
}

/// Dynkin's form of the series truncated at the step, words stored as a suffix
/// trie so each right-nested bracket is computed once.
#[derive(Clone, Debug)]
struct BchPlan {
    nodes: Vec<WordNode>,
    terms: Vec<BchTerm>,
}

type Q = Ratio<i128>;

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

fn dynkin_words(step: usize) -> BTreeMap<Vec<Letter>, Q> {
    fn rec(
        remaining: usize,
        pairs: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if remaining == 0 {
            out.push(pairs.clone());
            return;
        }
        for r in 0..=remaining {
            for s in 0..=remaining - r {
                if r + s == 0 {
                    continue;
                }
                pairs.push((r, s));
                rec(remaining - r - s, pairs, out);
                pairs.pop();
            }
        }
    }

    let mut words: BTreeMap<Vec<Letter>, Q> = BTreeMap::new();
    for n in 1..=step {
        let mut seqs = Vec::new();
        rec(n, &mut Vec::new(), &mut seqs);
        for pairs in seqs {
            let &(rk, sk) = pairs.last().unwrap();
            if sk > 1 || (sk == 0 && rk > 1) {
                continue;
            }
            let k = pairs.len() as i128;
            let denom: i128 = pairs.iter().map(|&(r, s)| factorial(r) * factorial(s)).product::<i128>()
                * k
                * n as i128;
            let sign = if k % 2 == 1 { 1 } else { -1 };
            let mut coef = Q::new(sign, denom);
            let mut word: Vec<Letter> = pairs
                .iter()
                .flat_map(|&(r, s)| {
                    std::iter::repeat_n(Letter::X, r).chain(std::iter::repeat_n(Letter::Y, s))
                })
                .collect();
            let m = word.len();
            if m >= 2 {
                if word[m - 1] == word[m - 2] {
                    continue;
                }
                if word[m - 1] == Letter::X {
                    word.swap(m - 1, m - 2);
                    coef = -coef;
                }
            }
            *words.entry(word).or_insert_with(|| Q::from_integer(0)) += coef;
        }
    }
    words.retain(|_, c| *c.numer() != 0);
    words
}

impl BchPlan {
    fn new(step: usize) -> Self {
        let words = dynkin_words(step);
        let mut index: HashMap<Vec<Letter>, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut ordered: Vec<_> = words.into_iter().collect();
        ordered.sort_by_key(|(w, _)| w.len());
        let mut terms = Vec::new();
        for (word, coef) in ordered {
            for start in (0..word.len()).rev() {
                let suffix = &word[start..];
                if index.contains_key(suffix) {
                    continue;
                }
                let tail = (suffix.len() > 1).then(|| index[&suffix[1..]]);
                index.insert(suffix.to_vec(), nodes.len());
                nodes.push(WordNode {
                    letter: suffix[0],
                    tail,
                });
            }
            terms.push(BchTerm {
                node: index[&word],
                coef: *coef.numer() as f64 / *coef.denom() as f64,
                xs: word.iter().filter(|&&l| l == Letter::X).count(),
                ys: word.iter().filter(|&&l| l == Letter::Y).count(),
            });
        }
        Self { nodes, terms }
    }

    fn for_each_term(
        &self,
        g: &CarnotGroup,
        x: &[f64],
        y: &[f64],
        mut sink: impl FnMut(&BchTerm, &[f64]),
    ) {
        let n = g.dim;
        let mut vals: SmallVec<[f64; 96]> = SmallVec::from_elem(0.0, self.nodes.len() * n);
        for (idx, node) in self.nodes.iter().enumerate() {
            let letter = match node.letter {
                Letter::X => x,
                Letter::Y => y,
            };
            let (done, rest) = vals.split_at_mut(idx * n);
            let out = &mut rest[..n];
            match node.tail {
                None => out.copy_from_slice(letter),
                Some(t) => g.bracket_into(letter, &done[t * n..(t + 1) * n], out),
            }
        }
        for term in &self.terms {
            sink(term, &vals[term.node * n..(term.node + 1) * n]);
        }
    }
}

/// Polynomial curve `t -> sum_p t^p c_p` in the coordinates.
#[derive(Clone, Debug)]
pub struct CoordPoly {
    dim: usize,
    coeffs: Vec<f64>,
}

impl CoordPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len() / self.dim - 1
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim;
        let deg = self.degree();
        out.copy_from_slice(&self.coeffs[deg * n..(deg + 1) * n]);
        for p in (0..deg).rev() {
            for (k, o) in out.iter_mut().enumerate() {
                *o = *o * t + self.coeffs[p * n + k];
            }
        }
    }

    pub fn eval(&self, t: f64) -> Point {
        let mut p = Point::zeros(self.dim);
        self.eval_into(t, &mut p);
        p
    }
}

/// A Carnot group with a validated multiplication table.
#[derive(Clone, Debug)]
pub struct CarnotGroup {
    spec: GroupSpec,
    dim: usize,
    offsets: Vec<usize>,
    layer_of: Vec<usize>,
    table: Vec<(usize, usize, usize, f64)>,
    bch: BchPlan,
}

const BUILTIN: &[(&str, &str)] = &[
    ("heisenberg", include_str!("../groups/heisenberg.json")),
    ("engel", include_str!("../groups/engel.json")),
    ("h2", include_str!("../groups/h2.json")),
    ("abelian3", include_str!("../groups/abelian3.json")),
];

impl CarnotGroup {
    pub fn from_spec(spec: GroupSpec) -> Result<Self> {
        let report = validate_group(&spec);
        if !report.passed() {
            return Err(Error::InvalidGroup(report.summary()));
        }
        let sc = StructureConstants::from_spec(&spec)?;
        let dim = sc.dim();
        let mut table = Vec::new();
        for i in 0..dim {
            for j in i + 1..dim {
                for k in 0..dim {
                    let c = sc.get(i, j, k);
                    if c != 0.0 {
                        table.push((i, j, k, c));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            offsets: offsets(&spec.layer_dims),
            layer_of: layer_of(&spec.layer_dims),
            bch: BchPlan::new(spec.step),
            table,
            spec,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(GroupSpec::from_json(s)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn builtin_json(name: &str) -> Option<&'static str> {
        BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let json = Self::builtin_json(name)
            .ok_or_else(|| Error::InvalidGroup(format!("no builtin group named `{name}`")))?;
        Self::from_json(json)
    }

    pub fn heisenberg() -> Self {
        Self::builtin("heisenberg").expect("bundled group")
    }

    pub fn engel() -> Self {
        Self::builtin("engel").expect("bundled group")
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.eta = eta;
        Self::from_spec(spec)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        self.spec.name.as_deref().unwrap_or("custom")
    }

    pub fn step(&self) -> usize {
        self.spec.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizontal_dim(&self) -> usize {
        self.spec.layer_dims[0]
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.spec.layer_dims
    }

    /// Homogeneous dimension `sum i * v_i`.
    pub fn homogeneous_dim(&self) -> usize {
        self.spec
            .layer_dims
            .iter()
            .enumerate()
            .map(|(i, d)| (i + 1) * d)
            .sum()
    }

    pub fn eta(&self) -> f64 {
        self.spec.eta
    }

    /// Coordinate range of layer `i` (1-based).
    pub fn layer_range(&self, i: usize) -> Range<usize> {
        self.offsets[i - 1]..self.offsets[i]
    }

    /// Layer (1-based) of coordinate `k` (0-based).
    pub fn layer_of(&self, k: usize) -> usize {
        self.layer_of[k]
    }

    pub fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        self.check_dim(coords)?;
        Ok(Point::from_slice(coords))
    }

    pub fn identity(&self) -> Point {
        Point::zeros(self.dim)
    }

    /// Horizontal point with first-layer coordinates `v`.
    pub fn horizontal(&self, v: &[f64]) -> Point {
        let mut p = self.identity();
        p[..v.len()].copy_from_slice(v);
        p
    }

    #[inline]
    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(i, j, k, c) in &self.table {
            out[k] += c * (x[i] * y[j] - x[j] * y[i]);
        }
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Point {
        let mut out = Point::zeros(self.dim);
        self.bracket_into(x, y, &mut out);
        out
    }

    /// `log(exp X exp Y)`.
    pub fn bch_log_product(&self, x: &[f64], y: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.mul(x, y))
    }

    /// Group product; panics on dimension mismatch.
    pub fn mul(&self, x: &[f64], y: &[f64]) -> Point {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        assert_eq!(y.len(), self.dim, "dimension mismatch");
        let mut z = Point::zeros(self.dim);
        self.bch.for_each_term(self, x, y, |term, v| {
            for (zk, vk) in z.iter_mut().zip(v) {
                *zk += term.coef * vk;
            }
        });
        z
    }

    /// `a^{-1} b`.
    pub fn left_diff(&self, a: &[f64], b: &[f64]) -> Point {
        self.mul(&self.inv(a), b)
    }

    pub fn inv(&self, p: &[f64]) -> Point {
        Point(p.iter().map(|x| -x).collect())
    }

    pub fn dilate(&self, s: f64, p: &[f64]) -> Result<Point> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveScale(s));
        }
        self.check_dim(p)?;
        Ok(self.scale(s, p))
    }

    /// Dilation without argument checks.
    pub fn scale(&self, s: f64, p: &[f64]) -> Point {
        let mut out = Point::from_slice(p);
        let mut f = 1.0;
        for i in 1..=self.step() {
            f *= s;
            for k in self.layer_range(i) {
                out[k] *= f;
            }
        }
        out
    }

    /// Projection to the first layer, as a horizontal point.
    pub fn tilde_pi(&self, p: &[f64]) -> Point {
        let mut out = self.identity();
        let r = self.layer_range(1);
        out[r.clone()].copy_from_slice(&p[r]);
        out
    }

    /// `tilde_pi(p)^{-1} p`, the part of `p` with no first-layer component.
    pub fn nh(&self, p: &[f64]) -> Point {
        self.mul(&self.inv(&self.tilde_pi(p)), p)
    }

    /// Squared Euclidean norm of each layer.
    pub fn layer_sq_norms(&self, p: &[f64]) -> SmallVec<[f64; 8]> {
        (1..=self.step())
            .map(|i| p[self.layer_range(i)].iter().map(|x| x * x).sum())
            .collect()
    }

    /// Coefficients of `t -> log(exp(tX) exp(Y))`.
    pub fn bch_poly_left(&self, x: &[f64], y: &[f64]) -> CoordPoly {
        self.bch_poly(x, y, true)
    }

    /// Coefficients of `t -> log(exp(X) exp(tY))`.
    pub fn bch_poly_right(&self, x: &[f64], y: &[f64]) -> CoordPoly {
        self.bch_poly(x, y, false)
    }

    fn bch_poly(&self, x: &[f64], y: &[f64], left: bool) -> CoordPoly {
        let n = self.dim;
        let mut coeffs = vec![0.0; (self.step() + 1) * n];
        self.bch.for_each_term(self, x, y, |term, v| {
            let p = if left { term.xs } else { term.ys };
            for (k, vk) in v.iter().enumerate() {
                coeffs[p * n + k] += term.coef * vk;
            }
        });
        CoordPoly { dim: n, coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn heisenberg_product_closed_form() {
        let g = CarnotGroup::heisenberg();
        let p = g.mul(&[1.0, 2.0, 3.0], &[-0.5, 4.0, 1.0]);
        let z = 3.0 + 1.0 + 0.5 * (1.0 * 4.0 - 2.0 * -0.5);
        assert!(close(&p, &[0.5, 6.0, z], 1e-14));
    }

    #[test]
    fn engel_basis_product() {
        let g = CarnotGroup::engel();
        let p = g.mul(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        assert!(close(&p, &[1.0, 1.0, 0.5, 1.0 / 12.0], 1e-15));
    }

    #[test]
    fn dynkin_step_two_words() {
        let w = dynkin_words(2);
        assert_eq!(w.len(), 3);
        assert_eq!(w[&vec![Letter::X, Letter::Y]], Q::new(1, 2));
    }

    #[test]
    fn dynkin_step_three_words() {
        let w = dynkin_words(3);
        assert_eq!(w[&vec![Letter::X, Letter::X, Letter::Y]], Q::new(1, 12));
        assert_eq!(w[&vec![Letter::Y, Letter::X, Letter::Y]], Q::new(-1, 12));
    }

    #[test]
    fn bundled_groups_validate() {
        for name in CarnotGroup::builtin_names() {
            let g = CarnotGroup::builtin(name).unwrap();
            assert_eq!(g.name(), name);
            assert!(validate_group(g.spec()).passed());
        }
    }

    #[test]
    fn antisymmetry_violation_is_reported() {
        let mut spec = CarnotGroup::heisenberg().spec().clone();
        spec.brackets.push(BracketEntry {
            i: 2,
            j: 1,
            terms: vec![BracketTerm { k: 3, c: 1.0 }],
        });
        let r = validate_group(&spec);
        assert!(!r.antisymmetry.passed);
        assert!(CarnotGroup::from_spec(spec).is_err());
    }

    #[test]
    fn grading_violation_is_reported() {
        let spec = GroupSpec {
            name: None,
            step: 2,
            layer_dims: vec![2, 1],
            brackets: vec![BracketEntry {
                i: 1,
                j: 2,
                terms: vec![BracketTerm { k: 1, c: 1.0 }],
            }],
            eta: 0.4,
        };
        let r = validate_group(&spec);
        assert!(!r.grading.passed);
        assert!(!r.stratification.passed);
    }

    #[test]
    fn jacobi_violation_is_reported() {
        let spec = GroupSpec {
            name: None,
            step: 1,
            layer_dims: vec![3],
            brackets: vec![
                BracketEntry { i: 1, j: 2, terms: vec![BracketTerm { k: 3, c: 1.0 }] },
                BracketEntry { i: 2, j: 3, terms: vec![BracketTerm { k: 1, c: 1.0 }] },
                BracketEntry { i: 1, j: 3, terms: vec![BracketTerm { k: 1, c: 1.0 }] },
            ],
            eta: 0.4,
        };
        assert!(!validate_group(&spec).jacobi.passed);
    }

    #[test]
    fn bad_shape_rejected() {
        let mut spec = CarnotGroup::heisenberg().spec().clone();
        spec.eta = 0.7;
        assert!(!validate_group(&spec).shape.passed);
        spec.eta = 0.4;
        spec.layer_dims = vec![2];
        assert!(CarnotGroup::from_spec(spec).is_err());
    }

    #[test]
    fn dilation_rejects_nonpositive() {
        let g = CarnotGroup::heisenberg();
        assert!(matches!(g.dilate(0.0, &[1.0, 0.0, 0.0]), Err(Error::NonPositiveScale(_))));
        assert!(matches!(g.dilate(2.0, &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(g.dilate(2.0, &[f64::NAN, 0.0, 0.0]), Err(Error::NonFinite)));
    }

    #[test]
    fn poly_matches_product() {
        let g = CarnotGroup::engel();
        let x = [0.3, -0.7, 0.2, 0.1];
        let y = [1.1, 0.4, -0.3, 0.9];
        let poly = g.bch_poly_left(&x, &y);
        let polr = g.bch_poly_right(&x, &y);
        for t in [-2.0, -0.3, 0.0, 0.5, 1.7] {
            let tx = g.scale(1.0, &x.map(|v| v * t));
            assert!(close(&poly.eval(t), &g.mul(&tx, &y), 1e-12));
            let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
            assert!(close(&polr.eval(t), &g.mul(&x, &ty), 1e-12));
        }
    }

    #[test]
    fn nh_has_no_horizontal_part() {
        let g = CarnotGroup::engel();
        let p = g.nh(&[1.0, 2.0, 3.0, 4.0]);
        assert!(close(&p[..2], &[0.0, 0.0], 1e-15));
    }
}
