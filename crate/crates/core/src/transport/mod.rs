//! Optimal partial transport between finite persistence measures.
//!
//! Both measures are completed with mass on a single virtual diagonal point
//! so that they reach the common total `r = μ(Ω) + ν(Ω)`. The partial problem
//! then becomes a balanced one on the quotient space with ground metric
//! [`ground_rho`], solved exactly by [`simplex::solve`]. Plans are mapped back
//! by splitting every through-the-diagonal edge into `x → Δ` and `Δ → y`.

mod bottleneck;
pub mod simplex;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::measure::{ground_rho, Atom, Exponent, PersistenceMeasure, Site};

pub use bottleneck::bottleneck_distance;

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// `ρ(x_i, y_j)^p` over two lists of sites.
    pub fn rho_power(sources: &[Site], targets: &[Site], p: f64) -> Self {
        Self::from_fn(sources.len(), targets.len(), |i, j| {
            let d = ground_rho(&sources[i], &targets[j]);
            if p == 1.0 {
                d
            } else {
                d.powf(p)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub(crate) fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        if rows.len() == self.rows && cols.len() == self.cols {
            return self.clone();
        }
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }
}

/// A measure on the quotient space: sites with masses, diagonal last.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMeasure {
    pub sites: Vec<Site>,
    pub masses: Vec<f64>,
}

impl AugmentedMeasure {
    /// `μ + (r − μ(Ω))·δ_Δ`; the diagonal entry is always present, possibly
    /// with zero mass.
    pub fn with_diag_mass(mu: &PersistenceMeasure, diag_mass: f64) -> Self {
        let mut sites: Vec<Site> = mu.points().map(Site::Point).collect();
        let mut masses: Vec<f64> = mu.atoms().iter().map(|a| a.mass).collect();
        sites.push(Site::Diag);
        masses.push(diag_mass.max(0.0));
        Self { sites, masses }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn diag_mass(&self) -> f64 {
        *self.masses.last().unwrap_or(&0.0)
    }
}

/// Completes both measures to the common mass `r = μ(Ω) + ν(Ω)`.
pub fn augment(mu: &PersistenceMeasure, nu: &PersistenceMeasure) -> (AugmentedMeasure, AugmentedMeasure) {
    let (m_mu, m_nu) = (mu.total_mass(), nu.total_mass());
    // r − μ(Ω) = ν(Ω) and r − ν(Ω) = μ(Ω); written this way the totals agree
    // up to the order of one floating addition.
    (
        AugmentedMeasure::with_diag_mass(mu, m_nu),
        AugmentedMeasure::with_diag_mass(nu, m_mu),
    )
}

/// Exact balanced transport between two augmented measures under `ρ^p`.
pub fn solve_augmented(source: &AugmentedMeasure, target: &AugmentedMeasure, p: f64) -> Result<simplex::Flow> {
    let cost = CostMatrix::rho_power(&source.sites, &target.sites, p);
    simplex::solve(&source.masses, &target.masses, &cost)
}

fn finite_exponent(p: f64) -> Result<f64> {
    match Exponent::finite(p)? {
        Exponent::Finite(p) => Ok(p),
        Exponent::Infinity => Err(Error::InvalidExponent(p)),
    }
}

/// `OT_p(μ, ν)` for finite `p ≥ 1`.
///
/// For `p = ∞` use [`bottleneck_distance`].
pub fn ot_distance(mu: &PersistenceMeasure, nu: &PersistenceMeasure, p: f64) -> Result<f64> {
    let p = finite_exponent(p)?;
    let cost = ot_cost(mu, nu, p)?;
    Ok(cost.max(0.0).powf(1.0 / p))
}

/// `OT_p(μ, ν)^p`, avoiding the final root.
pub fn ot_cost(mu: &PersistenceMeasure, nu: &PersistenceMeasure, p: f64) -> Result<f64> {
    let p = finite_exponent(p)?;
    if mu.is_empty() && nu.is_empty() {
        return Ok(0.0);
    }
    // a fixed argument order makes the value symmetric bit for bit
    let (first, second) = if canonical_order(mu, nu) == Ordering::Greater {
        (nu, mu)
    } else {
        (mu, nu)
    };
    let (a, b) = augment(first, second);
    Ok(solve_augmented(&a, &b, p)?.cost)
}

fn canonical_order(mu: &PersistenceMeasure, nu: &PersistenceMeasure) -> Ordering {
    let key = |a: &Atom| [a.point.birth(), a.point.death(), a.mass];
    mu.len().cmp(&nu.len()).then_with(|| {
        mu.atoms()
            .iter()
            .zip(nu.atoms())
            .flat_map(|(x, y)| key(x).into_iter().zip(key(y)))
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Endpoint of a plan edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Atom(usize),
    Diag,
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Endpoint::Atom(i) => s.serialize_u64(*i as u64),
            Endpoint::Diag => s.serialize_str("DIAG"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEdge {
    pub src: Endpoint,
    pub tgt: Endpoint,
    pub mass: f64,
    /// Ground distance `ρ(src, tgt)` of the edge.
    pub distance: f64,
}

impl Serialize for PlanEdge {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PlanEdge", 3)?;
        st.serialize_field("src", &self.src)?;
        st.serialize_field("tgt", &self.tgt)?;
        st.serialize_field("mass", &self.mass)?;
        st.end()
    }
}

/// Admissible plan between `μ` and `ν`: atom-to-atom edges plus edges to and
/// from the diagonal. Diagonal-to-diagonal mass is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub p: f64,
    pub edges: Vec<PlanEdge>,
}

impl TransportPlan {
    pub fn total_cost(&self) -> f64 {
        total_cost(self, self.p)
    }

    /// Mass leaving each atom of the source measure.
    pub fn source_marginal(&self, atoms: usize) -> Vec<f64> {
        let mut out = vec![0.0; atoms];
        for e in &self.edges {
            if let Endpoint::Atom(i) = e.src {
                out[i] += e.mass;
            }
        }
        out
    }

    /// Mass arriving at each atom of the target measure.
    pub fn target_marginal(&self, atoms: usize) -> Vec<f64> {
        let mut out = vec![0.0; atoms];
        for e in &self.edges {
            if let Endpoint::Atom(j) = e.tgt {
                out[j] += e.mass;
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.p,
            "cost": self.total_cost(),
            "edges": self.edges,
        })
    }
}

/// `Σ mass · ρ(src, tgt)^p` over the edges of a plan.
pub fn total_cost(plan: &TransportPlan, p: f64) -> f64 {
    plan.edges.iter().map(|e| e.mass * e.distance.powf(p)).sum()
}

/// An optimal plan realizing `OT_p(μ, ν)^p`.
pub fn optimal_plan(mu: &PersistenceMeasure, nu: &PersistenceMeasure, p: f64) -> Result<TransportPlan> {
    let p = finite_exponent(p)?;
    if mu.is_empty() && nu.is_empty() {
        return Ok(TransportPlan { p, edges: Vec::new() });
    }
    let (a, b) = augment(mu, nu);
    let flow = solve_augmented(&a, &b, p)?;
    let (n, m) = (mu.len(), nu.len());
    let mut merged: BTreeMap<(Endpoint, Endpoint), (f64, f64)> = BTreeMap::new();
    let mut push = |src: Endpoint, tgt: Endpoint, mass: f64, distance: f64| {
        let slot = merged.entry((src, tgt)).or_insert((0.0, distance));
        slot.0 += mass;
    };
    for &(i, j, f) in &flow.entries {
        match (i < n, j < m) {
            (true, true) => {
                let (x, y) = (mu.atoms()[i].point, nu.atoms()[j].point);
                let direct = x.distance(&y);
                let (dx, dy) = (x.diag_distance(), y.diag_distance());
                if direct <= dx + dy {
                    push(Endpoint::Atom(i), Endpoint::Atom(j), f, direct);
                } else {
                    push(Endpoint::Atom(i), Endpoint::Diag, f, dx);
                    push(Endpoint::Diag, Endpoint::Atom(j), f, dy);
                }
            }
            (true, false) => push(Endpoint::Atom(i), Endpoint::Diag, f, mu.atoms()[i].point.diag_distance()),
            (false, true) => push(Endpoint::Diag, Endpoint::Atom(j), f, nu.atoms()[j].point.diag_distance()),
            (false, false) => {}
        }
    }
    let edges = merged
        .into_iter()
        .map(|((src, tgt), (mass, distance))| PlanEdge { src, tgt, mass, distance })
        .collect();
    Ok(TransportPlan { p, edges })
}

/// Finite linear expectation `Σ_i w_i μ_i`.
pub fn mean_measure(measures: &[PersistenceMeasure], weights: &[f64]) -> Result<PersistenceMeasure> {
    if measures.is_empty() {
        return Err(Error::EmptyInput("mean_measure needs at least one measure"));
    }
    validate_weights(weights, measures.len(), false)?;
    let atoms = measures
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(mu, &w)| mu.atoms().iter().map(move |a| (a.point, a.mass * w)));
    PersistenceMeasure::new(atoms)
}

/// Checks a probability vector of length `len`.
pub(crate) fn validate_weights(weights: &[f64], len: usize, strictly_positive: bool) -> Result<()> {
    if weights.len() != len {
        return Err(Error::InvalidWeights(format!("expected {len} weights, got {}", weights.len())));
    }
    if weights
        .iter()
        .any(|&w| !w.is_finite() || w < 0.0 || (strictly_positive && w == 0.0))
    {
        return Err(Error::InvalidWeights(format!("weights must be finite and {}", if strictly_positive { "positive" } else { "nonnegative" })));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}
