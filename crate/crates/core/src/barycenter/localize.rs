//! Minimizer of `y ↦ Σ λ_i ρ(x_i, y)^p` over the half-plane plus the diagonal.
//!
//! `ρ(x, y)^p` is the minimum of the direct term `‖x − y‖^p` and the diagonal
//! term `(d(x,Δ) + d(y,Δ))^p`. Fixing which inputs use the direct term gives a
//! convex function of `y`, because `d(y,Δ)` is linear above the diagonal. The
//! global minimum is the best of the per-subset minima and of `y = Δ`. If a
//! per-subset minimizer falls below the diagonal, its constrained minimum lies
//! on the diagonal, where it cannot beat `Δ`.
//!
//! Work is done in rotated coordinates `(t, n)` with `t` along the diagonal and
//! `n = d(·, Δ)` the signed distance to it.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::measure::{ground_rho, PlanarPoint, Site};

/// Above this many off-diagonal inputs the subset enumeration is replaced by
/// a fixed-point search over branch assignments.
const EXACT_SUBSET_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy)]
struct Rotated {
    t: f64,
    n: f64,
}

fn rotate(x: &PlanarPoint) -> Rotated {
    Rotated {
        t: (x.birth() + x.death()) * FRAC_1_SQRT_2,
        n: (x.death() - x.birth()) * FRAC_1_SQRT_2,
    }
}

fn unrotate(y: Rotated) -> Option<PlanarPoint> {
    let birth = (y.t - y.n) * FRAC_1_SQRT_2;
    let death = (y.t + y.n) * FRAC_1_SQRT_2;
    PlanarPoint::new(birth, death).ok()
}

/// `Σ λ_i ρ(x_i, y)^p`.
pub fn grouping_cost(points: &[Site], weights: &[f64], y: &Site, p: f64) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(x, &w)| w * ground_rho(x, y).powf(p))
        .sum()
}

/// The minimizer over the quotient space of `y ↦ Σ λ_i ρ(x_i, y)^p`.
///
/// Exact for `p = 2` (closed form per branch assignment). For other `p > 1`
/// each branch assignment is minimized by damped Newton iterations started
/// from its `p = 2` solution.
pub fn localized_candidate(points: &[Site], weights: &[f64], p: f64) -> Result<Site> {
    if points.is_empty() {
        return Err(Error::EmptyInput("localized_candidate needs at least one point"));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "expected {} weights, got {}",
            points.len(),
            weights.len()
        )));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::BarycenterExponent(p));
    }
    let terms: Vec<Term> = points
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| match x {
            Site::Point(x) => Term { w, point: Some(*x), x: Some(rotate(x)), a: x.diag_distance() },
            Site::Diag => Term { w, point: None, x: None, a: 0.0 },
        })
        .collect();
    let off_diag: Vec<usize> = (0..terms.len()).filter(|&i| terms[i].x.is_some()).collect();

    let mut best = Site::Diag;
    let mut best_cost = grouping_cost(points, weights, &best, p);
    let mut consider = |y: Site| {
        let c = grouping_cost(points, weights, &y, p);
        if c < best_cost {
            best_cost = c;
            best = y;
        }
    };
    // inputs themselves: the minimizer can sit on a kink when p < 2
    for x in points.iter().filter(|x| !x.is_diag()) {
        consider(*x);
    }

    if off_diag.len() <= EXACT_SUBSET_LIMIT {
        let mut direct = vec![false; terms.len()];
        for mask in 1u32..(1u32 << off_diag.len()) {
            for (bit, &i) in off_diag.iter().enumerate() {
                direct[i] = mask & (1 << bit) != 0;
            }
            if let Some(y) = minimize_branch(&terms, &direct, p) {
                consider(y);
            }
        }
    } else {
        // Majorize-minimize: fix the branch each input currently prefers and
        // re-solve; the objective never increases.
        let starts: Vec<Site> = std::iter::once(weighted_mean(&terms))
            .flatten()
            .chain(points.iter().filter(|x| !x.is_diag()).copied())
            .collect();
        for start in starts {
            let mut y = start;
            for _ in 0..100 {
                let direct: Vec<bool> = terms.iter().map(|term| term.prefers_direct(&y)).collect();
                if !direct.iter().any(|&d| d) {
                    break;
                }
                match minimize_branch(&terms, &direct, p) {
                    Some(next) if next != y => y = next,
                    _ => break,
                }
            }
            consider(y);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy)]
struct Term {
    w: f64,
    point: Option<PlanarPoint>,
    x: Option<Rotated>,
    a: f64,
}

impl Term {
    fn prefers_direct(&self, y: &Site) -> bool {
        match (self.x, y) {
            (Some(x), Site::Point(y)) => {
                let y = rotate(y);
                (x.t - y.t).hypot(x.n - y.n) < self.a + y.n
            }
            _ => false,
        }
    }
}

fn weighted_mean(terms: &[Term]) -> Option<Site> {
    let (mut t, mut n, mut w) = (0.0, 0.0, 0.0);
    for term in terms {
        if let Some(x) = term.x {
            t += term.w * x.t;
            n += term.w * x.n;
            w += term.w;
        }
    }
    if w == 0.0 {
        return None;
    }
    unrotate(Rotated { t: t / w, n: n / w }).map(Site::Point)
}

/// Closed-form minimizer of the quadratic branch objective, as `(birth, death)`.
///
/// Along the diagonal direction the minimizer is the weighted mean of the
/// direct inputs; across it, the mean is shifted by the pull of the diagonal
/// terms.
fn quadratic_branch(terms: &[Term], direct: &[bool]) -> Option<(f64, f64)> {
    let (mut ws, mut mb, mut md, mut total, mut n_num, mut n_direct) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (term, &d) in terms.iter().zip(direct) {
        total += term.w;
        if d {
            let x = term.point?;
            ws += term.w;
            mb += term.w * x.birth();
            md += term.w * x.death();
            n_num += term.w * term.a;
            n_direct += term.w * term.a;
        } else {
            n_num -= term.w * term.a;
        }
    }
    if ws == 0.0 {
        return None;
    }
    let shift = n_num / total - n_direct / ws;
    Some((mb / ws - shift * FRAC_1_SQRT_2, md / ws + shift * FRAC_1_SQRT_2))
}

fn minimize_branch(terms: &[Term], direct: &[bool], p: f64) -> Option<Site> {
    let (b, d) = quadratic_branch(terms, direct)?;
    if p == 2.0 {
        return PlanarPoint::new(b, d).ok().map(Site::Point);
    }
    let start = Rotated {
        t: (b + d) * FRAC_1_SQRT_2,
        n: (d - b) * FRAC_1_SQRT_2,
    };
    let y = newton_branch(terms, direct, p, start);
    if y.n > 0.0 {
        unrotate(y).map(Site::Point)
    } else {
        None
    }
}

fn branch_value(terms: &[Term], direct: &[bool], p: f64, y: Rotated) -> f64 {
    terms
        .iter()
        .zip(direct)
        .map(|(term, &d)| {
            if d {
                let x = term.x.unwrap();
                term.w * (x.t - y.t).hypot(x.n - y.n).powf(p)
            } else {
                term.w * (term.a + y.n).max(0.0).powf(p)
            }
        })
        .sum()
}

// gradient and Hessian of the branch objective in (t, n)
fn branch_derivatives(terms: &[Term], direct: &[bool], p: f64, y: Rotated) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for (term, &d) in terms.iter().zip(direct) {
        if d {
            let x = term.x.unwrap();
            let (dt, dn) = (y.t - x.t, y.n - x.n);
            let r = dt.hypot(dn);
            if r == 0.0 {
                continue;
            }
            let c1 = term.w * p * r.powf(p - 2.0);
            let c2 = term.w * p * (p - 2.0) * r.powf(p - 4.0);
            g[0] += c1 * dt;
            g[1] += c1 * dn;
            h[0][0] += c1 + c2 * dt * dt;
            h[0][1] += c2 * dt * dn;
            h[1][1] += c1 + c2 * dn * dn;
        } else {
            let s = term.a + y.n;
            if s > 0.0 {
                g[1] += term.w * p * s.powf(p - 1.0);
                h[1][1] += term.w * p * (p - 1.0) * s.powf(p - 2.0);
            }
        }
    }
    h[1][0] = h[0][1];
    (g, h)
}

fn newton_branch(terms: &[Term], direct: &[bool], p: f64, start: Rotated) -> Rotated {
    let mut y = start;
    let mut f = branch_value(terms, direct, p, y);
    let scale = terms
        .iter()
        .filter_map(|t| t.x)
        .map(|x| x.t.abs().max(x.n.abs()))
        .fold(1.0, f64::max);
    for _ in 0..200 {
        let (g, h) = branch_derivatives(terms, direct, p, y);
        let gnorm = g[0].hypot(g[1]);
        if gnorm == 0.0 {
            break;
        }
        // Newton direction when the Hessian is positive definite, else gradient
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut dir = if h[0][0] > 0.0 && det > 1e-300 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        if dir[0] * g[0] + dir[1] * g[1] >= 0.0 {
            dir = [-g[0], -g[1]];
        }
        let slope = dir[0] * g[0] + dir[1] * g[1];
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = Rotated { t: y.t + step * dir[0], n: y.n + step * dir[1] };
            let fc = branch_value(terms, direct, p, cand);
            if fc <= f + 1e-4 * step * slope {
                moved = (step * dir[0]).hypot(step * dir[1]) > 1e-15 * scale;
                y = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(b: f64, d: f64) -> Site {
        Site::Point(PlanarPoint::new(b, d).unwrap())
    }

    /// Grid search over a window, refined around the best cell down to 1e-6.
    pub(crate) fn grid_oracle(points: &[Site], weights: &[f64], p: f64) -> (Site, f64) {
        let mut best = Site::Diag;
        let mut best_cost = grouping_cost(points, weights, &best, p);
        let (mut lo_b, mut hi_b, mut lo_d, mut hi_d) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for x in points {
            if let Site::Point(x) = x {
                lo_b = lo_b.min(x.birth());
                hi_b = hi_b.max(x.birth());
                lo_d = lo_d.min(x.death());
                hi_d = hi_d.max(x.death());
            }
        }
        if lo_b.is_infinite() {
            return (best, best_cost);
        }
        let pad = 1.0;
        let (mut b0, mut b1, mut d0, mut d1) = (lo_b - pad, hi_b + pad, lo_d - pad, hi_d + pad);
        let steps = 200;
        loop {
            let hb = (b1 - b0) / steps as f64;
            let hd = (d1 - d0) / steps as f64;
            let mut center = None;
            for i in 0..=steps {
                for j in 0..=steps {
                    let (b, d) = (b0 + hb * i as f64, d0 + hd * j as f64);
                    if d <= b {
                        continue;
                    }
                    let y = pt(b, d);
                    let c = grouping_cost(points, weights, &y, p);
                    if c < best_cost {
                        best_cost = c;
                        best = y;
                        center = Some((b, d));
                    }
                }
            }
            let Some((b, d)) = center.or(match best {
                Site::Point(x) => Some((x.birth(), x.death())),
                Site::Diag => None,
            }) else {
                break;
            };
            if hb.max(hd) < 1e-6 {
                break;
            }
            b0 = b - 2.0 * hb;
            b1 = b + 2.0 * hb;
            d0 = d - 2.0 * hd;
            d1 = d + 2.0 * hd;
        }
        (best, best_cost)
    }

    fn dist(a: &Site, b: &Site) -> f64 {
        match (a, b) {
            (Site::Point(x), Site::Point(y)) => x.distance(y),
            (Site::Diag, Site::Diag) => 0.0,
            _ => f64::INFINITY,
        }
    }

    #[test]
    fn identical_inputs_return_the_input() {
        let x = pt(1.0, 3.0);
        for p in [1.5, 2.0, 3.0] {
            let y = localized_candidate(&[x, x, x], &[0.2, 0.3, 0.5], p).unwrap();
            assert!(dist(&x, &y) < 1e-9, "p={p}: {y:?}");
        }
        let y = localized_candidate(&[Site::Diag, Site::Diag], &[0.5, 0.5], 2.0).unwrap();
        assert_eq!(y, Site::Diag);
    }

    #[test]
    fn two_points_p2_matches_grid_oracle() {
        let pts = [pt(0.0, 2.0), pt(2.0, 4.0)];
        let w = [0.5, 0.5];
        let y = localized_candidate(&pts, &w, 2.0).unwrap();
        let (_, gc) = grid_oracle(&pts, &w, 2.0);
        // the midpoint (1, 3) and the diagonal tie at cost 2
        assert!((grouping_cost(&pts, &w, &y, 2.0) - 2.0).abs() < 1e-12);
        assert!(grouping_cost(&pts, &w, &y, 2.0) <= gc + 1e-12);

        let pts = [pt(0.0, 2.0), pt(0.0, 4.0)];
        let y = localized_candidate(&pts, &w, 2.0).unwrap();
        let (g, _) = grid_oracle(&pts, &w, 2.0);
        assert!(dist(&y, &g) < 1e-4, "{y:?} vs {g:?}");
        assert!(dist(&y, &pt(0.0, 3.0)) < 1e-12);
    }

    #[test]
    fn far_apart_points_collapse_to_diagonal() {
        let pts = [pt(0.0, 0.5), pt(100.0, 100.5)];
        let y = localized_candidate(&pts, &[0.5, 0.5], 2.0).unwrap();
        let (_, gc) = grid_oracle(&pts, &[0.5, 0.5], 2.0);
        assert!(grouping_cost(&pts, &[0.5, 0.5], &y, 2.0) <= gc + 1e-12);
    }

    #[test]
    fn beats_grid_oracle_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let k = rng.gen_range(1..=4);
            let mut pts = Vec::new();
            for _ in 0..k {
                if rng.gen_bool(0.2) {
                    pts.push(Site::Diag);
                } else {
                    let b: f64 = rng.gen_range(0.0..5.0);
                    pts.push(pt(b, b + rng.gen_range(0.05..3.0)));
                }
            }
            let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            for p in [1.5, 2.0, 3.0] {
                let y = localized_candidate(&pts, &w, p).unwrap();
                let (_, gc) = grid_oracle(&pts, &w, p);
                let c = grouping_cost(&pts, &w, &y, p);
                assert!(c <= gc + 1e-9 * (1.0 + gc), "trial {trial} p={p}: {c} > grid {gc}");
            }
        }
    }

    #[test]
    fn many_inputs_use_fixed_point_search() {
        let pts: Vec<Site> = (0..20).map(|i| pt(0.01 * i as f64, 2.0 + 0.01 * i as f64)).collect();
        let w = vec![0.05; 20];
        let y = localized_candidate(&pts, &w, 2.0).unwrap();
        let mean = pt(0.095, 2.095);
        assert!(dist(&y, &mean) < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(localized_candidate(&[], &[], 2.0).is_err());
        assert!(localized_candidate(&[Site::Diag], &[1.0], 1.0).is_err());
        assert!(localized_candidate(&[Site::Diag], &[0.5, 0.5], 2.0).is_err());
    }
}
