//! Seeded random streams and chunked parallel sampling.
//!
//! Every chunk of `CHUNK` samples draws from its own ChaCha stream, so results do
//! not depend on the number of worker threads.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::group::Point;

pub type Rng = ChaCha8Rng;

pub const CHUNK: usize = 256;

pub fn rng(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `n` samples of `f`, in a deterministic order.
pub fn par_sample<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> T + Sync,
{
    let chunks: Vec<Vec<T>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng(seed, c as u64);
            (c * CHUNK..n.min((c + 1) * CHUNK)).map(|i| f(&mut r, i)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Largest `score` over `n` samples, ties to the lowest sample index.
pub fn par_argmax<T, F>(n: usize, seed: u64, f: F) -> Option<(usize, f64, T)>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> (f64, T) + Sync,
{
    let best: Vec<Option<(usize, f64, T)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng(seed, c as u64);
            let mut best: Option<(usize, f64, T)> = None;
            for i in c * CHUNK..n.min((c + 1) * CHUNK) {
                let (s, t) = f(&mut r, i);
                if best.as_ref().is_none_or(|b| s > b.1 || (b.1.is_nan() && !s.is_nan())) {
                    best = Some((i, s, t));
                }
            }
            best
        })
        .collect();
    best.into_iter().flatten().fold(None, |acc, b| match acc {
        Some(a) if a.1 >= b.1 => Some(a),
        _ => Some(b),
    })
}

pub fn uniform_box(r: &mut Rng, n: usize, radius: f64) -> Point {
    (0..n).map(|_| r.random_range(-radius..=radius)).collect::<Vec<_>>().into()
}

pub fn gaussian(r: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// Uniform direction on the Euclidean unit sphere.
pub fn unit_vector(r: &mut Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian(r, n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point of the Euclidean ball.
pub fn euclidean_ball(r: &mut Rng, n: usize, radius: f64) -> Point {
    let u: f64 = r.random();
    let rho = radius * u.powf(1.0 / n as f64);
    unit_vector(r, n).into_iter().map(|x| x * rho).collect::<Vec<_>>().into()
}

pub fn log_uniform(r: &mut Rng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..=hi.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_sample_is_deterministic_across_pools() {
        let a = par_sample(1000, 7, |r, _| r.random::<f64>());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| par_sample(1000, 7, |r, _| r.random::<f64>()));
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_picks_lowest_index_on_ties() {
        let (i, s, _) = par_argmax(1000, 1, |_, i| ((i % 10) as f64, ())).unwrap();
        assert_eq!((i, s), (9, 9.0));
    }
}
