//! Finite persistence measures on the open upper half-plane.
//!
//! A measure is a finite list of weighted atoms `(birth, death, mass)` with
//! `death > birth`. Diagrams are the integer-mass special case. The diagonal
//! `{death = birth}` is never an atom; it is represented by [`Site::Diag`]
//! when a transport problem needs a virtual reservoir.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A birth/death pair strictly above the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    birth: f64,
    death: f64,
}

impl PlanarPoint {
    pub fn new(birth: f64, death: f64) -> Result<Self> {
        if !birth.is_finite() || !death.is_finite() {
            return Err(Error::InvalidPoint {
                birth,
                death,
                reason: "coordinates must be finite (infinite bars are not supported)",
            });
        }
        if death <= birth {
            return Err(Error::InvalidPoint {
                birth,
                death,
                reason: "death must be strictly greater than birth",
            });
        }
        Ok(Self { birth, death })
    }

    pub fn birth(&self) -> f64 {
        self.birth
    }

    pub fn death(&self) -> f64 {
        self.death
    }

    /// Euclidean distance to the orthogonal projection on the diagonal.
    pub fn diag_distance(&self) -> f64 {
        (self.death - self.birth) / std::f64::consts::SQRT_2
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.birth - other.birth).hypot(self.death - other.death)
    }

    // exact-equality key; -0.0 and 0.0 collapse
    fn key(&self) -> (u64, u64) {
        ((self.birth + 0.0).to_bits(), (self.death + 0.0).to_bits())
    }
}

impl fmt::Display for PlanarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.birth, self.death)
    }
}

/// Either a point of the half-plane or the diagonal collapsed to one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Site {
    Point(PlanarPoint),
    Diag,
}

impl Site {
    pub fn diag_distance(&self) -> f64 {
        match self {
            Site::Point(x) => x.diag_distance(),
            Site::Diag => 0.0,
        }
    }

    pub fn is_diag(&self) -> bool {
        matches!(self, Site::Diag)
    }
}

impl From<PlanarPoint> for Site {
    fn from(x: PlanarPoint) -> Self {
        Site::Point(x)
    }
}

/// Transport exponent: `p` in `[1, ∞)` or the bottleneck case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(Exponent::Infinity);
        }
        Ok(Exponent::Finite(p))
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(p) => *p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::InvalidConfig(format!("cannot parse exponent {s:?}")))?;
                Exponent::finite(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: PlanarPoint,
    pub mass: f64,
}

/// Finite atomic measure on the open upper half-plane.
///
/// Atoms sharing exactly the same coordinates are merged at construction by
/// summing their masses; the first occurrence fixes the atom order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceMeasure {
    atoms: Vec<Atom>,
}

impl PersistenceMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PlanarPoint, f64)>,
    {
        let mut out: Vec<Atom> = Vec::new();
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        for (point, mass) in atoms {
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::InvalidMass(mass));
            }
            match index.get(&point.key()) {
                Some(&i) => out[i].mass += mass,
                None => {
                    index.insert(point.key(), out.len());
                    out.push(Atom { point, mass });
                }
            }
        }
        Ok(Self { atoms: out })
    }

    /// Builds a measure from raw `(birth, death, mass)` triples.
    pub fn from_triples<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let atoms = triples
            .into_iter()
            .map(|(b, d, m)| PlanarPoint::new(b, d).map(|x| (x, m)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    /// A diagram: each point counted once (repeated points accumulate multiplicity).
    pub fn diagram<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::from_triples(points.into_iter().map(|(b, d)| (b, d, 1.0)))
    }

    pub fn dirac(point: PlanarPoint, mass: f64) -> Result<Self> {
        Self::new([(point, mass)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = PlanarPoint> + '_ {
        self.atoms.iter().map(|a| a.point)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// True when every mass is a positive integer.
    pub fn is_diagram(&self) -> bool {
        self.atoms.iter().all(|a| a.mass.fract() == 0.0)
    }

    pub fn pers(&self, p: Exponent) -> f64 {
        pers_p(self, p)
    }

    pub fn truncate(&self, r: f64) -> Self {
        truncate(self, r)
    }

    /// Multiplies every mass by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (a.point, a.mass * c)))
    }

    /// Sum of two measures.
    pub fn add(&self, other: &Self) -> Self {
        let mut merged = self.clone();
        merged.extend(other.atoms.iter().copied());
        merged
    }

    fn extend<I: IntoIterator<Item = Atom>>(&mut self, atoms: I) {
        let mut index: HashMap<(u64, u64), usize> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.point.key(), i))
            .collect();
        for atom in atoms {
            match index.get(&atom.point.key()) {
                Some(&i) => self.atoms[i].mass += atom.mass,
                None => {
                    index.insert(atom.point.key(), self.atoms.len());
                    self.atoms.push(atom);
                }
            }
        }
    }
}

/// `(death − birth)/√2`.
pub fn diag_distance(x: &PlanarPoint) -> f64 {
    x.diag_distance()
}

/// Total persistence: `Σ mass · d(x, Δ)^p`, or the largest distance to the
/// diagonal when `p` is infinite. Zero for the empty measure.
pub fn pers_p(mu: &PersistenceMeasure, p: Exponent) -> f64 {
    match p {
        Exponent::Finite(p) => mu
            .atoms
            .iter()
            .map(|a| a.mass * a.point.diag_distance().powf(p))
            .sum(),
        Exponent::Infinity => mu
            .atoms
            .iter()
            .map(|a| a.point.diag_distance())
            .fold(0.0, f64::max),
    }
}

/// Restriction to the atoms whose distance to the diagonal exceeds `r`.
pub fn truncate(mu: &PersistenceMeasure, r: f64) -> PersistenceMeasure {
    PersistenceMeasure {
        atoms: mu
            .atoms
            .iter()
            .filter(|a| a.point.diag_distance() > r)
            .copied()
            .collect(),
    }
}

/// Quotient metric on the half-plane with the diagonal collapsed to a point:
/// the direct Euclidean distance or the route through the diagonal,
/// whichever is shorter.
pub fn ground_rho(x: &Site, y: &Site) -> f64 {
    match (x, y) {
        (Site::Diag, Site::Diag) => 0.0,
        (Site::Point(a), Site::Diag) | (Site::Diag, Site::Point(a)) => a.diag_distance(),
        (Site::Point(a), Site::Point(b)) => a.distance(b).min(a.diag_distance() + b.diag_distance()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn pt(b: f64, d: f64) -> PlanarPoint {
        PlanarPoint::new(b, d).unwrap()
    }

    #[test]
    fn rejects_points_on_or_below_diagonal() {
        assert!(PlanarPoint::new(1.0, 1.0).is_err());
        assert!(PlanarPoint::new(2.0, 1.0).is_err());
        assert!(PlanarPoint::new(0.0, f64::INFINITY).is_err());
        assert!(PlanarPoint::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn diag_distance_examples() {
        assert!((pt(0.0, 2.0).diag_distance() - SQRT_2).abs() < 1e-15);
        for n in [0.0, 1.0, 17.0, 1e6] {
            assert!((pt(n, n + 1.0).diag_distance() - SQRT_2 / 2.0).abs() < 1e-12);
        }
        assert!(pt(0.0, 1e-300).diag_distance() < 1e-299);
    }

    #[test]
    fn pers_examples() {
        let empty = PersistenceMeasure::empty();
        assert_eq!(pers_p(&empty, Exponent::Finite(2.0)), 0.0);
        assert_eq!(pers_p(&empty, Exponent::Infinity), 0.0);
        let single = PersistenceMeasure::diagram([(0.0, 2.0)]).unwrap();
        assert!((pers_p(&single, Exponent::Finite(2.0)) - 2.0).abs() < 1e-14);
        let two = PersistenceMeasure::from_triples([(0.0, 2.0, 2.0), (1.0, 2.0, 1.0)]).unwrap();
        let expected = 2.0 * SQRT_2 + SQRT_2 / 2.0;
        assert!((pers_p(&two, Exponent::Finite(1.0)) - expected).abs() < 1e-14);
        assert!((pers_p(&two, Exponent::Infinity) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        assert!(truncate(&PersistenceMeasure::empty(), 0.5).is_empty());
        let mu = PersistenceMeasure::diagram([(0.0, 2.0), (0.0, 0.1)]).unwrap();
        let kept = truncate(&mu, 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.atoms()[0].point, pt(0.0, 2.0));
        assert_eq!(truncate(&mu, f64::MIN_POSITIVE), mu);
    }

    #[test]
    fn duplicates_merge_exactly() {
        let mu = PersistenceMeasure::from_triples([(0.0, 1.0, 1.0), (0.0, 1.0, 2.5), (-0.0, 1.0, 0.5), (0.0, 1.0 + 1e-15, 1.0)])
            .unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].mass, 4.0);
        assert!(PersistenceMeasure::from_triples([(0.0, 1.0, 0.0)]).is_err());
        assert!(PersistenceMeasure::from_triples([(0.0, 1.0, -1.0)]).is_err());
    }

    #[test]
    fn rho_examples() {
        let x = Site::Point(pt(0.0, 1.0));
        let y = Site::Point(pt(10.0, 11.0));
        assert_eq!(ground_rho(&x, &x), 0.0);
        assert!((ground_rho(&x, &y) - SQRT_2).abs() < 1e-14);
        assert!((ground_rho(&Site::Point(pt(0.0, 2.0)), &Site::Diag) - SQRT_2).abs() < 1e-15);
        assert_eq!(ground_rho(&Site::Diag, &Site::Diag), 0.0);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert!("0.5".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
    }

    fn arb_site() -> impl Strategy<Value = Site> {
        prop_oneof![
            1 => Just(Site::Diag),
            6 => (-10.0..10.0f64, 1e-3..10.0f64).prop_map(|(b, l)| Site::Point(pt(b, b + l))),
        ]
    }

    fn arb_measure() -> impl Strategy<Value = PersistenceMeasure> {
        prop::collection::vec((-5.0..5.0f64, 1e-3..5.0f64, 0.1..3.0f64), 0..8)
            .prop_map(|v| PersistenceMeasure::from_triples(v.into_iter().map(|(b, l, m)| (b, b + l, m))).unwrap())
    }

    proptest! {
        #[test]
        fn rho_is_a_metric(x in arb_site(), y in arb_site(), z in arb_site()) {
            let xy = ground_rho(&x, &y);
            prop_assert!(xy >= 0.0);
            prop_assert_eq!(xy, ground_rho(&y, &x));
            prop_assert!(xy <= ground_rho(&x, &z) + ground_rho(&z, &y) + 1e-12);
            prop_assert_eq!(ground_rho(&x, &x), 0.0);
            if x != y {
                prop_assert!(xy > 0.0);
            }
        }

        #[test]
        fn rho_below_euclidean(x in arb_site(), y in arb_site()) {
            if let (Site::Point(a), Site::Point(b)) = (x, y) {
                prop_assert!(ground_rho(&x, &y) <= a.distance(&b));
            }
        }

        #[test]
        fn truncation_removes_exactly_the_small_atoms(mu in arb_measure(), r in 1e-3..3.0f64, p in 1.0..4.0f64) {
            let p = Exponent::Finite(p);
            let kept = truncate(&mu, r);
            let removed: f64 = mu.atoms().iter()
                .filter(|a| a.point.diag_distance() <= r)
                .map(|a| a.mass * a.point.diag_distance().powf(p.value()))
                .sum();
            prop_assert!(pers_p(&kept, p) <= pers_p(&mu, p));
            prop_assert!((pers_p(&mu, p) - pers_p(&kept, p) - removed).abs() <= 1e-12 * (1.0 + pers_p(&mu, p)));
        }

        #[test]
        fn pers_is_homogeneous_in_mass(mu in arb_measure(), c in 0.1..10.0f64, p in 1.0..4.0f64) {
            let p = Exponent::Finite(p);
            let scaled = mu.scaled(c).unwrap();
            prop_assert!((pers_p(&scaled, p) - c * pers_p(&mu, p)).abs() <= 1e-12 * (1.0 + c * pers_p(&mu, p)));
        }
    }
}
