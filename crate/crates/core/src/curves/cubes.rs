//! Dyadic cubes on a finite set from nested nets.

use rayon::prelude::*;
use serde::Serialize;

use super::{DistanceMatrix, MeasuredSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Cube {
    pub level: i32,
    /// Sample index `p_Q`.
    pub center: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub members: Vec<usize>,
    pub measure: f64,
    pub diam: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeTree {
    pub j_min: i32,
    pub j_max: i32,
    pub cubes: Vec<Cube>,
    /// Cube ids per level, coarsest first.
    pub levels: Vec<Vec<usize>>,
    /// `labels[l][s]`: cube at level `j_min + l` containing sample `s`.
    pub labels: Vec<Vec<usize>>,
    pub c_d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeVerification {
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    pub c_d: f64,
    pub cubes: usize,
    /// `min diam(Q) / 2^{-j}` over non-singleton cubes.
    pub min_diam_ratio: f64,
}

impl CubeTree {
    pub fn level(&self, j: i32) -> &[usize] {
        &self.levels[(j - self.j_min) as usize]
    }

    pub fn cube_of(&self, j: i32, sample: usize) -> usize {
        self.labels[(j - self.j_min) as usize][sample]
    }

    /// `Delta(S)`: the cube and every cube below it.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut k = 0;
        while k < out.len() {
            out.extend(self.cubes[out[k]].children.iter().copied());
            k += 1;
        }
        out
    }

    /// Checks (D1)-(D3) on the samples; the first failure is returned as an error.
    pub fn verify(&self, set: &MeasuredSet, dm: &DistanceMatrix) -> Result<CubeVerification> {
        let n = set.len();
        for (l, ids) in self.levels.iter().enumerate() {
            let j = self.j_min + l as i32;
            let mut seen = vec![false; n];
            for &id in ids {
                for &s in &self.cubes[id].members {
                    if seen[s] || self.labels[l][s] != id {
                        return Err(Error::CubeVerification {
                            axiom: "D1",
                            level: j,
                            cube: id,
                            detail: format!("sample {s} is not in exactly one cube"),
                        });
                    }
                    seen[s] = true;
                }
            }
            if let Some(s) = seen.iter().position(|&b| !b) {
                return Err(Error::CubeVerification {
                    axiom: "D1",
                    level: j,
                    cube: usize::MAX,
                    detail: format!("sample {s} uncovered"),
                });
            }
            if l > 0 {
                for s in 0..n {
                    let (c, p) = (self.labels[l][s], self.labels[l - 1][s]);
                    if self.cubes[c].parent != Some(p) {
                        return Err(Error::CubeVerification {
                            axiom: "D1",
                            level: j,
                            cube: c,
                            detail: format!("sample {s} leaves its parent cube"),
                        });
                    }
                }
            }
        }
        let mut min_diam_ratio = f64::INFINITY;
        for (id, q) in self.cubes.iter().enumerate() {
            let side = 2f64.powi(-q.level);
            let diam = members_diam(&q.members, dm);
            if diam > side {
                return Err(Error::CubeVerification {
                    axiom: "D2",
                    level: q.level,
                    cube: id,
                    detail: format!("diam {diam} > {side}"),
                });
            }
            if q.members.len() > 1 {
                min_diam_ratio = min_diam_ratio.min(diam / side);
            }
            let l = (q.level - self.j_min) as usize;
            let reach = self.c_d * side;
            if let Some(s) = (0..n).find(|&s| dm.get(q.center, s) < reach && self.labels[l][s] != id) {
                return Err(Error::CubeVerification {
                    axiom: "D3",
                    level: q.level,
                    cube: id,
                    detail: format!("sample {s} within {reach} of the centre lies outside"),
                });
            }
        }
        Ok(CubeVerification {
            d1: true,
            d2: true,
            d3: true,
            c_d: self.c_d,
            cubes: self.cubes.len(),
            min_diam_ratio,
        })
    }
}

fn members_diam(members: &[usize], dm: &DistanceMatrix) -> f64 {
    members
        .par_iter()
        .enumerate()
        .map(|(a, &i)| members[a + 1..].iter().map(|&j| dm.get(i, j)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Nearest point of `candidates` to sample `s`, ties to the lowest index.
fn nearest(s: usize, candidates: &[usize], dm: &DistanceMatrix) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &c in candidates {
        let d = dm.get(s, c);
        if d < best.0 || (d == best.0 && c < best.1) {
            best = (d, c);
        }
    }
    best.1
}

/// Cubes of levels `j_min..=j_max` from nested greedy nets of separation
/// `2^{-j}/4`. Each cube's centre is the member farthest from the other cubes of
/// its level; `c_d` is the smallest such clearance over `2^{-j}`, capped at 1.
/// The (D3) ball is open.
pub fn build_cubes(set: &MeasuredSet, dm: &DistanceMatrix, j_min: i32, j_max: i32) -> Result<CubeTree> {
    if set.is_empty() {
        return Err(Error::Empty);
    }
    if j_min > j_max {
        return Err(Error::InvalidParameter(format!("j_min {j_min} > j_max {j_max}")));
    }
    let n = set.len();
    let mut nets: Vec<Vec<usize>> = Vec::new();
    for j in j_min..=j_max {
        let sep = 2f64.powi(-j) / 4.0;
        let mut net: Vec<usize> = nets.last().cloned().unwrap_or_default();
        for s in 0..n {
            if net.iter().all(|&x| dm.get(s, x) >= sep) {
                net.push(s);
            }
        }
        net.sort_unstable();
        nets.push(net);
    }
    let depth = nets.len();
    // net-point labels: finest level by nearest finest net point, coarser via parents
    let mut owner: Vec<Vec<usize>> = vec![vec![usize::MAX; n]; depth];
    for s in 0..n {
        owner[depth - 1][s] = nearest(s, &nets[depth - 1], dm);
    }
    for l in (0..depth - 1).rev() {
        let parent_of: std::collections::HashMap<usize, usize> =
            nets[l + 1].iter().map(|&x| (x, nearest(x, &nets[l], dm))).collect();
        for s in 0..n {
            owner[l][s] = parent_of[&owner[l + 1][s]];
        }
    }
    let mut cubes = Vec::new();
    let mut levels = Vec::new();
    let mut labels = vec![vec![usize::MAX; n]; depth];
    for l in 0..depth {
        let j = j_min + l as i32;
        let mut ids = Vec::new();
        let mut id_of = std::collections::HashMap::new();
        for &x in &nets[l] {
            id_of.insert(x, cubes.len());
            ids.push(cubes.len());
            cubes.push(Cube {
                level: j,
                center: x,
                parent: None,
                children: Vec::new(),
                members: Vec::new(),
                measure: 0.0,
                diam: 0.0,
            });
        }
        for s in 0..n {
            let id = id_of[&owner[l][s]];
            labels[l][s] = id;
            cubes[id].members.push(s);
            cubes[id].measure += set.weights[s];
        }
        levels.push(ids);
    }
    for l in 1..depth {
        for &id in &levels[l] {
            let s = cubes[id].members[0];
            let p = labels[l - 1][s];
            cubes[id].parent = Some(p);
            cubes[p].children.push(id);
        }
    }
    let mut c_d = 1.0f64;
    let updates: Vec<(usize, usize, f64, f64)> = cubes
        .par_iter()
        .enumerate()
        .map(|(id, q)| {
            let l = (q.level - j_min) as usize;
            let side = 2f64.powi(-q.level);
            let (mut center, mut clearance) = (q.members[0], f64::NEG_INFINITY);
            for &z in &q.members {
                let c = (0..n)
                    .filter(|&s| labels[l][s] != id)
                    .map(|s| dm.get(z, s))
                    .fold(f64::INFINITY, f64::min);
                if c > clearance {
                    (center, clearance) = (z, c);
                }
            }
            (id, center, clearance / side, members_diam(&q.members, dm))
        })
        .collect();
    for (id, center, ratio, diam) in updates {
        cubes[id].center = center;
        cubes[id].diam = diam;
        c_d = c_d.min(ratio);
    }
    Ok(CubeTree {
        j_min,
        j_max,
        cubes,
        levels,
        labels,
        c_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{generate_curve, CurveSpec};
    use crate::group::CarnotGroup;
    use crate::metric::MetricKind;

    fn segment(samples: usize) -> (MeasuredSet, DistanceMatrix) {
        let g = CarnotGroup::heisenberg();
        let c = generate_curve(&CurveSpec::HorizontalSegment { length: 1.0, samples }, &g, MetricKind::Hs).unwrap();
        let dm = DistanceMatrix::new(c.points(), &g, MetricKind::Hs);
        (c.measure(), dm)
    }

    #[test]
    fn segment_cubes_verify() {
        let (set, dm) = segment(257);
        let t = build_cubes(&set, &dm, 0, 5).unwrap();
        let v = t.verify(&set, &dm).unwrap();
        assert!(v.c_d > 0.0 && v.c_d <= 1.0);
        for &id in t.level(1) {
            assert!(t.cubes[id].diam <= 0.5);
        }
        let total: usize = t.level(1).iter().map(|&id| t.cubes[id].members.len()).sum();
        assert_eq!(total, 257);
    }

    #[test]
    fn root_descendants_are_everything() {
        let (set, dm) = segment(129);
        let t = build_cubes(&set, &dm, -3, 4).unwrap();
        assert_eq!(t.level(-3).len(), 1);
        let mut all = t.descendants(t.level(-3)[0]);
        all.sort_unstable();
        assert_eq!(all, (0..t.cubes.len()).collect::<Vec<_>>());
    }

    #[test]
    fn single_point_chain() {
        let g = CarnotGroup::heisenberg();
        let set = MeasuredSet { points: vec![g.identity()], weights: vec![1.0], resolution: 0.0 };
        let dm = DistanceMatrix::new(&set.points, &g, MetricKind::Hs);
        let t = build_cubes(&set, &dm, 0, 3).unwrap();
        assert_eq!(t.cubes.len(), 4);
        assert!(t.cubes.iter().all(|q| q.members == vec![0]));
        assert_eq!(t.c_d, 1.0);
        t.verify(&set, &dm).unwrap();
    }

    #[test]
    fn tampered_tree_fails() {
        let (set, dm) = segment(129);
        let mut t = build_cubes(&set, &dm, 0, 4).unwrap();
        t.c_d *= 4.0;
        assert!(matches!(t.verify(&set, &dm), Err(Error::CubeVerification { axiom: "D3", .. })));
    }
}
