//! Brute-force oracles and random instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use persot::{PersistenceMeasure, PlanarPoint};
use rand::Rng;

/// Points of a diagram repeated by multiplicity.
pub fn expand(mu: &PersistenceMeasure) -> Vec<PlanarPoint> {
    let mut out = Vec::new();
    for a in mu.atoms() {
        assert_eq!(a.mass.fract(), 0.0, "oracle needs integer masses");
        out.extend(std::iter::repeat_n(a.point, a.mass as usize));
    }
    out
}

/// Visits every partial matching between `xs` and `ys`: `f` receives, for
/// each `x`, `Some(j)` or `None` (to the diagonal).
fn for_each_partial_matching(n: usize, m: usize, f: &mut impl FnMut(&[Option<usize>])) {
    fn rec(i: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, f: &mut impl FnMut(&[Option<usize>])) {
        if i == n {
            f(cur);
            return;
        }
        cur.push(None);
        rec(i + 1, n, used, cur, f);
        cur.pop();
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                rec(i + 1, n, used, cur, f);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(0, n, &mut vec![false; m], &mut Vec::new(), f);
}

/// Edge lengths of a partial matching: matched pairs plus every unmatched
/// point's distance to the diagonal.
fn matching_edges(xs: &[PlanarPoint], ys: &[PlanarPoint], assign: &[Option<usize>]) -> Vec<f64> {
    let mut hit = vec![false; ys.len()];
    let mut edges = Vec::with_capacity(xs.len() + ys.len());
    for (x, a) in xs.iter().zip(assign) {
        match a {
            Some(j) => {
                hit[*j] = true;
                edges.push(x.distance(&ys[*j]));
            }
            None => edges.push(x.diag_distance()),
        }
    }
    for (y, h) in ys.iter().zip(&hit) {
        if !h {
            edges.push(y.diag_distance());
        }
    }
    edges
}

/// `d_p` by exhaustive enumeration of partial matchings.
pub fn brute_force_dp(a: &PersistenceMeasure, b: &PersistenceMeasure, p: f64) -> f64 {
    let (xs, ys) = (expand(a), expand(b));
    let mut best = f64::INFINITY;
    for_each_partial_matching(xs.len(), ys.len(), &mut |assign| {
        let cost: f64 = matching_edges(&xs, &ys, assign).iter().map(|e| e.powf(p)).sum();
        best = best.min(cost);
    });
    best.powf(1.0 / p)
}

/// Bottleneck distance as the minimum over partial matchings of the longest
/// edge.
pub fn brute_force_bottleneck(a: &PersistenceMeasure, b: &PersistenceMeasure) -> f64 {
    let (xs, ys) = (expand(a), expand(b));
    let mut best = f64::INFINITY;
    for_each_partial_matching(xs.len(), ys.len(), &mut |assign| {
        let longest = matching_edges(&xs, &ys, assign).into_iter().fold(0.0, f64::max);
        best = best.min(longest);
    });
    best
}

pub fn random_point<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> PlanarPoint {
    loop {
        let (u, v) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        if u != v {
            return PlanarPoint::new(u.min(v), u.max(v)).unwrap();
        }
    }
}

/// Diagram with `0..=max_atoms` unit atoms in `[lo, hi]²`.
pub fn random_diagram<R: Rng>(rng: &mut R, max_atoms: usize, lo: f64, hi: f64) -> PersistenceMeasure {
    let k = rng.gen_range(0..=max_atoms);
    PersistenceMeasure::new((0..k).map(|_| (random_point(rng, lo, hi), 1.0))).unwrap()
}

/// Measure with real masses in `[0.1, 3]`.
pub fn random_measure<R: Rng>(rng: &mut R, max_atoms: usize, lo: f64, hi: f64) -> PersistenceMeasure {
    let k = rng.gen_range(0..=max_atoms);
    PersistenceMeasure::new((0..k).map(|_| (random_point(rng, lo, hi), rng.gen_range(0.1..3.0)))).unwrap()
}

/// Random probability vector with entries bounded away from zero.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}
