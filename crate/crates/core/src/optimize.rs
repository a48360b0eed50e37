//! Derivative-free minimizers: golden-section search and Nelder-Mead.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[a, b]`; exact for quasiconvex `f`. Returns the
/// best evaluated `(t, f(t))`, endpoints included.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut best = {
        let (fa, fb) = (f(lo), f(hi));
        if fb < fa { (hi, fb) } else { (lo, fa) }
    };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Uniform grid of `n + 1` points, then golden-section on the cells around the
/// best grid point.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let mut best = (a, f(a));
    let mut k_best = 0;
    for k in 1..=n {
        let t = if k == n { b } else { a + h * k as f64 };
        let v = f(t);
        if v < best.1 {
            best = (t, v);
            k_best = k;
        }
    }
    let lo = a + h * k_best.saturating_sub(1) as f64;
    let hi = if k_best + 1 >= n { b } else { a + h * (k_best + 1) as f64 };
    let refined = golden_section(&mut f, lo, hi, tol, max_iter);
    if refined.1 < best.1 { refined } else { best }
}

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 400,
            f_tol: 1e-9,
            x_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

impl NelderMead {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge `step[i]`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: &[f64]) -> NmResult {
        let n = x0.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() { f64::INFINITY } else { v }
        };
        if n == 0 {
            let v = eval(x0, &mut evals);
            return NmResult { x: vec![], f: v, evals };
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0, &mut evals)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step[i];
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        let lerp = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect()
        };
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (fb, fw) = (simplex[0].1, simplex[n].1);
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (fw - fb).abs() <= self.f_tol * (1.0 + fb.abs()) && size <= self.x_tol {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = simplex[n].0.clone();
            let xr = lerp(&centroid, &worst, -1.0);
            let fr = eval(&xr, &mut evals);
            if fr < fb {
                let xe = lerp(&centroid, &worst, -2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < fw {
                    let xc = lerp(&centroid, &xr, 0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = lerp(&centroid, &worst, 0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < fr.min(fw) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        s.0 = lerp(&best, &s.0, 0.5);
                        s.1 = eval(&s.0, &mut evals);
                    }
                }
            }
        }
        let (x, f) = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        NmResult { x, f, evals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (t, v) = golden_section(|t| (t - 0.3).powi(2), -1.0, 2.0, 1e-10, 200);
        assert!((t - 0.3).abs() < 1e-8 && v < 1e-15);
    }

    #[test]
    fn golden_handles_boundary_minimum() {
        let (t, _) = golden_section(|t| t, 0.0, 1.0, 1e-10, 200);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn grid_escapes_local_minimum() {
        let f = |t: f64| (t - 0.8).powi(2) * (t - 0.1).powi(2) + 0.1 * (t - 0.8).abs();
        let (t, _) = grid_then_golden(f, 0.0, 1.0, 64, 1e-12, 200);
        assert!((t - 0.8).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let nm = NelderMead { max_evals: 5000, f_tol: 1e-14, x_tol: 1e-10 };
        let r = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn nelder_mead_minimax() {
        let nm = NelderMead::default();
        let r = nm.minimize(|x| (x[0] - 1.0).abs().max((x[1] + 2.0).abs()), &[0.0, 0.0], &[0.5, 0.5]);
        assert!(r.f < 1e-6, "{:?}", r);
    }
}
