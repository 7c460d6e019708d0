//! Linear representations `μ ↦ Σ mass · f(x)` sampled on grids.
//!
//! Each representation weights an atom by a power of its distance to the
//! diagonal, which is what makes it continuous with respect to `OT_p`:
//!
//! * persistence surface: `d(x,Δ)^p · exp(−‖x − g‖² / 2σ²)` at node `g`;
//! * silhouette: `d(x,Δ)^{p−1} · max((death − birth)/2 − |t − (birth + death)/2|, 0)`;
//! * weighted Betti curve: `d(x,Δ)^{p−1/q} · 1{birth ≤ t ≤ death}`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint};

/// Evenly spaced nodes `t_min, …, t_max` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1d {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
}

impl Grid1d {
    pub fn new(t_min: f64, t_max: f64, samples: usize) -> Result<Self> {
        check_axis("t", t_min, t_max, samples)?;
        Ok(Self { t_min, t_max, samples })
    }

    pub fn node(&self, k: usize) -> f64 {
        axis_node(self.t_min, self.t_max, self.samples, k)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.samples).map(|k| self.node(k)).collect()
    }
}

/// Lattice over `(birth, death)`: `nx` columns along birth, `ny` rows along death.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2d {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2d {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        check_axis("x", x_min, x_max, nx)?;
        check_axis("y", y_min, y_max, ny)?;
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    pub fn x(&self, i: usize) -> f64 {
        axis_node(self.x_min, self.x_max, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        axis_node(self.y_min, self.y_max, self.ny, j)
    }
}

fn check_axis(name: &str, lo: f64, hi: f64, n: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidGrid(format!("{name} bounds must be finite and ordered, got [{lo}, {hi}]")));
    }
    if n == 0 {
        return Err(Error::InvalidGrid(format!("{name} resolution must be at least 1")));
    }
    Ok(())
}

fn axis_node(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if n == 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    /// Gaussian bandwidth σ > 0.
    pub bandwidth: f64,
    /// Exponent of the persistence weight. Continuity in `OT_p` needs
    /// `weight_power ≥ p`; smaller values (down to 0, unweighted) are allowed
    /// for comparison.
    pub weight_power: f64,
}

impl SurfaceConfig {
    pub fn new(bandwidth: f64, weight_power: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(weight_power.is_finite() && weight_power >= 0.0) {
            return Err(Error::InvalidConfig(format!("weight power must be nonnegative, got {weight_power}")));
        }
        Ok(Self { bandwidth, weight_power })
    }
}

/// Surface values, row-major with one row per death node.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub grid: Grid2d,
    pub values: Vec<f64>,
}

impl Surface {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn sup_distance(&self, other: &Surface) -> f64 {
        sup_distance(&self.values, &other.values)
    }

    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "# x_min={} x_max={} nx={} y_min={} y_max={} ny={}\n",
            g.x_min, g.x_max, g.nx, g.y_min, g.y_max, g.ny
        );
        for row in self.values.chunks(g.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn persistence_surface(mu: &PersistenceMeasure, cfg: &SurfaceConfig, grid: &Grid2d) -> Surface {
    let inv = 1.0 / (2.0 * cfg.bandwidth * cfg.bandwidth);
    let weighted: Vec<(PlanarPoint, f64)> = mu
        .atoms()
        .iter()
        .map(|a| (a.point, a.mass * a.point.diag_distance().powf(cfg.weight_power)))
        .collect();
    let values: Vec<f64> = (0..grid.ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = grid.y(j);
            let weighted = &weighted;
            (0..grid.nx).map(move |i| {
                let x = grid.x(i);
                weighted
                    .iter()
                    .map(|(pt, w)| {
                        let (dx, dy) = (pt.birth() - x, pt.death() - y);
                        w * (-(dx * dx + dy * dy) * inv).exp()
                    })
                    .sum::<f64>()
            })
        })
        .collect();
    Surface { grid: *grid, values }
}

fn tent(x: &PlanarPoint, t: f64) -> f64 {
    ((x.death() - x.birth()) / 2.0 - (t - (x.birth() + x.death()) / 2.0).abs()).max(0.0)
}

pub fn silhouette(mu: &PersistenceMeasure, p: f64, grid: &Grid1d) -> Result<Vec<f64>> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(sample(grid, |t| {
        mu.atoms()
            .iter()
            .map(|a| a.mass * a.point.diag_distance().powf(p - 1.0) * tent(&a.point, t))
            .sum()
    }))
}

pub fn betti_curve(mu: &PersistenceMeasure, p: f64, q: f64, grid: &Grid1d) -> Result<Vec<f64>> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::InvalidConfig(format!("q must be at least 1, got {q}")));
    }
    let exponent = p - 1.0 / q;
    Ok(sample(grid, |t| {
        mu.atoms()
            .iter()
            .filter(|a| a.point.birth() <= t && t <= a.point.death())
            .map(|a| a.mass * a.point.diag_distance().powf(exponent))
            .sum()
    }))
}

fn sample(grid: &Grid1d, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    (0..grid.samples).into_par_iter().map(|k| f(grid.node(k))).collect()
}

/// `t value` rows with a header line.
pub fn curve_to_csv(grid: &Grid1d, values: &[f64]) -> String {
    let mut out = String::from("t,value\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", grid.node(k), v);
    }
    out
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A test function on the half-plane.
///
/// The stability bound of [`lipschitz_feature_gap`] holds for 1-Lipschitz
/// functions vanishing on the diagonal; that property is the caller's
/// responsibility.
pub trait Feature: Sync {
    fn eval(&self, x: &PlanarPoint) -> f64;
}

impl<F: Fn(&PlanarPoint) -> f64 + Sync> Feature for F {
    fn eval(&self, x: &PlanarPoint) -> f64 {
        self(x)
    }
}

/// `x ↦ min(d(x, Δ), cap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedPersistence(pub f64);

impl Feature for CappedPersistence {
    fn eval(&self, x: &PlanarPoint) -> f64 {
        x.diag_distance().min(self.0)
    }
}

/// Stock family of capped persistence features with caps `t_min..t_max`.
pub fn capped_persistence_family(grid: &Grid1d) -> Vec<CappedPersistence> {
    grid.nodes().into_iter().map(CappedPersistence).collect()
}

/// `μ(f) = Σ mass · f(x)`.
pub fn integrate<F: Feature + ?Sized>(mu: &PersistenceMeasure, f: &F) -> f64 {
    mu.atoms().iter().map(|a| a.mass * f.eval(&a.point)).sum()
}

/// `sup_f |μ(f) − ν(f)|` over the given features.
pub fn lipschitz_feature_gap<F: Feature>(mu: &PersistenceMeasure, nu: &PersistenceMeasure, features: &[F]) -> f64 {
    features
        .iter()
        .map(|f| (integrate(mu, f) - integrate(nu, f)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagram(points: &[(f64, f64)]) -> PersistenceMeasure {
        PersistenceMeasure::diagram(points.iter().copied()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1d::new(1.0, 0.0, 5).is_err());
        assert!(Grid1d::new(0.0, 1.0, 0).is_err());
        assert!(Grid2d::new(0.0, 1.0, 0.0, f64::NAN, 2, 2).is_err());
        let g = Grid1d::new(0.0, 2.0, 5).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(Grid1d::new(3.0, 3.0, 1).unwrap().nodes(), vec![3.0]);
        assert!(SurfaceConfig::new(0.0, 1.0).is_err());
    }

    #[test]
    fn surface_examples() {
        let grid = Grid2d::new(0.0, 2.0, 0.0, 4.0, 3, 5).unwrap();
        let cfg = SurfaceConfig::new(0.5, 2.0).unwrap();
        let empty = persistence_surface(&PersistenceMeasure::empty(), &cfg, &grid);
        assert!(empty.values.iter().all(|&v| v == 0.0));

        // atom on node (x=1, y=3)
        let mu = diagram(&[(1.0, 3.0)]);
        let s = persistence_surface(&mu, &cfg, &grid);
        let peak = mu.atoms()[0].point.diag_distance().powi(2);
        assert!((s.get(1, 3) - peak).abs() < 1e-12);
        assert!(s.values.iter().all(|&v| v <= peak + 1e-12));

        let nu = diagram(&[(0.2, 1.5)]);
        let both = persistence_surface(&mu.add(&nu), &cfg, &grid);
        let sum: Vec<f64> = s
            .values
            .iter()
            .zip(&persistence_surface(&nu, &cfg, &grid).values)
            .map(|(a, b)| a + b)
            .collect();
        assert!(sup_distance(&both.values, &sum) < 1e-12);
    }

    #[test]
    fn silhouette_examples() {
        let grid = Grid1d::new(0.0, 2.0, 5).unwrap();
        let s = silhouette(&diagram(&[(0.0, 2.0)]), 1.0, &grid).unwrap();
        assert_eq!(s, vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(silhouette(&PersistenceMeasure::empty(), 2.0, &grid).unwrap().iter().all(|&v| v == 0.0));
        assert!(silhouette(&PersistenceMeasure::empty(), 0.5, &grid).is_err());
    }

    #[test]
    fn betti_examples() {
        let grid = Grid1d::new(-1.0, 3.0, 9).unwrap();
        let b = betti_curve(&diagram(&[(0.0, 2.0)]), 1.0, 1.0, &grid).unwrap();
        assert_eq!(b, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let g = Grid1d::new(1.5, 1.5, 1).unwrap();
        let two = betti_curve(&diagram(&[(0.0, 2.0), (1.0, 3.0)]), 1.0, 1.0, &g).unwrap();
        assert_eq!(two, vec![2.0]);
        assert!(betti_curve(&PersistenceMeasure::empty(), 1.0, 2.0, &grid).unwrap().iter().all(|&v| v == 0.0));
        assert!(betti_curve(&PersistenceMeasure::empty(), 1.0, 0.5, &grid).is_err());
    }

    #[test]
    fn feature_gap_examples() {
        let mu = diagram(&[(0.0, 2.0)]);
        let family = [CappedPersistence(10.0)];
        assert_eq!(lipschitz_feature_gap(&mu, &mu, &family), 0.0);
        let gap = lipschitz_feature_gap(&mu, &PersistenceMeasure::empty(), &family);
        assert!((gap - std::f64::consts::SQRT_2).abs() < 1e-15);
        let closure = |x: &PlanarPoint| x.diag_distance().min(1.0);
        assert_eq!(lipschitz_feature_gap(&mu, &PersistenceMeasure::empty(), &[closure]), 1.0);
    }

    #[test]
    fn csv_shapes() {
        let grid = Grid1d::new(0.0, 1.0, 3).unwrap();
        let csv = curve_to_csv(&grid, &[1.0, 2.0, 3.0]);
        assert_eq!(csv, "t,value\n0,1\n0.5,2\n1,3\n");
        let g2 = Grid2d::new(0.0, 1.0, 0.0, 1.0, 2, 3).unwrap();
        let s = persistence_surface(&PersistenceMeasure::empty(), &SurfaceConfig::new(1.0, 1.0).unwrap(), &g2);
        let csv = s.to_csv();
        assert!(csv.starts_with("# x_min=0 x_max=1 nx=2 y_min=0 y_max=1 ny=3\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
