//! Reference implementations shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use eegseg::grabcut::FlowNetwork;
use eegseg::imaging::PixelMap;

pub fn blobs(n_per: usize, dim: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..2 * n_per {
        let target = i % 2 == 0;
        let shift = if target { sep / 2.0 } else { -sep / 2.0 };
        x.push(
            (0..dim)
                .map(|d| rng.sample::<f64, _>(StandardNormal) + if d == 0 { shift } else { 0.0 })
                .collect(),
        );
        y.push(target);
    }
    (x, y)
}

/// Minimizes ½αᵀQα − Σα over the box and the equality constraint by accelerated
/// projected gradient. The projection solves for the multiplier by bisection.
pub fn qp_oracle(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64) -> f64 {
    let n = x.len();
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 { v.sqrt() } else { 1.0 }
        })
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect())
        .collect();
    let s: Vec<f64> = y.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dist: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    s[i] * s[j] * (-gamma * dist).exp()
                })
                .collect()
        })
        .collect();
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |lam: f64| -> Vec<f64> { v.iter().zip(&s).map(|(&a, &yi)| (a - lam * yi).clamp(0.0, c)).collect() };
        let excess = |lam: f64| at(lam).iter().zip(&s).map(|(a, yi)| a * yi).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 { lo = mid } else { hi = mid }
        }
        at(0.5 * (lo + hi))
    };
    let obj = |a: &[f64]| {
        let mut o = 0.0;
        for i in 0..n {
            for j in 0..n {
                o += 0.5 * a[i] * q[i][j] * a[j];
            }
            o -= a[i];
        }
        o
    };
    let lip: f64 = (0..n).map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut a = vec![0.0; n];
    let mut w = a.clone();
    let mut t: f64 = 1.0;
    for _ in 0..60_000 {
        let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * w[j]).sum::<f64>() - 1.0).collect();
        let step: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - gi / lip).collect();
        let next = project(&step);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        w = next.iter().zip(&a).map(|(nx, ax)| nx + (t - 1.0) / t_next * (nx - ax)).collect();
        a = next;
        t = t_next;
    }
    obj(&a)
}

/// Minimum s–t cut by enumerating every source side.
pub fn exhaustive_min_cut(net: &FlowNetwork<f64>) -> f64 {
    let n = net.nodes();
    (0u32..1 << n)
        .map(|bits| {
            let side: Vec<bool> = (0..n).map(|v| bits >> v & 1 == 1).collect();
            net.cut_capacity(&side)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Integer-capacity network on 1..=10 pixel nodes.
pub fn random_network(rng: &mut ChaCha8Rng) -> FlowNetwork<f64> {
    let n = rng.gen_range(1..=10);
    let mut net = FlowNetwork::new(n);
    for v in 0..n {
        let a = if rng.gen_bool(0.6) { rng.gen_range(0..20) as f64 } else { 0.0 };
        let b = if rng.gen_bool(0.6) { rng.gen_range(0..20) as f64 } else { 0.0 };
        net.add_terminal_edges(v, a, b);
    }
    for _ in 0..rng.gen_range(0..3 * n + 1) {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            net.add_edge(u, v, rng.gen_range(0..15) as f64, rng.gen_range(0..15) as f64);
        }
    }
    net
}

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Direct 2D convolution with the product kernel `g(dx)·g(dy)` truncated at
/// `ceil(3σ)` and half-sample reflective borders.
pub fn brute_force_gaussian(map: &PixelMap<f64>, sigma: f64) -> PixelMap<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let g = |d: i64| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-r..=r).map(g).sum::<f64>().powi(2);
    let (w, h) = map.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    acc += g(dx) * g(dy) * map.get(reflect(x + dx, w), reflect(y + dy, h));
                }
            }
            out.push(acc / norm);
        }
    }
    PixelMap::new(w, h, out).unwrap()
}

/// Fraction of (target, distractor) pairs ranked correctly, ties counting half.
pub fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}
