//! Fréchet means of finite families of persistence measures under `OT_p`.
//!
//! The main solver alternates two steps on a candidate measure `c`:
//!
//! 1. *Assignment.* With `R = c(Ω) + max_i μ_i(Ω)`, every measure is completed
//!    with diagonal mass up to `R` and an optimal plan from `c` to each `μ_i`
//!    is computed. Cutting the mass of each candidate site (the diagonal
//!    included) along the `N` plans simultaneously yields pieces, each with one
//!    input site per measure: its grouping.
//! 2. *Update.* Each piece moves to the minimizer of its grouping cost
//!    ([`localized_candidate`]); pieces landing on the diagonal are dropped.
//!
//! Neither step increases the energy, and the candidate mass never exceeds
//! `Σ_i μ_i(Ω)` because only pieces holding at least one input atom survive.

mod exact;
mod localize;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint, Site};
use crate::transport::{ot_cost, solve_augmented, validate_weights, AugmentedMeasure, Endpoint};

pub use exact::{exact_barycenter_lp, ExactBarycenter, EXACT_GROUPING_LIMIT};
pub use localize::{grouping_cost, localized_candidate};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-10;
/// Exchange search is skipped above this many groupings.
pub const SWAP_SEARCH_LIMIT: usize = 64;
const SWAP_GAIN_TOL: f64 = 1e-12;
const SWAP_SUBSET_MAX_COORDS: usize = 8;

/// A weighted family of measures and an exponent `p > 1`.
#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    inputs: Vec<PersistenceMeasure>,
    weights: Vec<f64>,
    p: f64,
}

impl BarycenterProblem {
    pub fn new(inputs: Vec<PersistenceMeasure>, weights: Vec<f64>, p: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("a barycenter problem needs at least one measure"));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::BarycenterExponent(p));
        }
        validate_weights(&weights, inputs.len(), true)?;
        Ok(Self { inputs, weights, p })
    }

    /// Uniform weights `1/N`.
    pub fn uniform(inputs: Vec<PersistenceMeasure>, p: f64) -> Result<Self> {
        let n = inputs.len().max(1);
        Self::new(inputs, vec![1.0 / n as f64; n], p)
    }

    pub fn inputs(&self) -> &[PersistenceMeasure] {
        &self.inputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `Σ_i μ_i(Ω)`, an upper bound on the mass of some Fréchet mean.
    pub fn total_input_mass(&self) -> f64 {
        self.inputs.iter().map(|m| m.total_mass()).sum()
    }
}

/// `Σ_i λ_i OT_p^p(c, μ_i)`.
pub fn frechet_energy(candidate: &PersistenceMeasure, problem: &BarycenterProblem) -> Result<f64> {
    problem
        .inputs
        .iter()
        .zip(&problem.weights)
        .map(|(mu, &w)| Ok(w * ot_cost(candidate, mu, problem.p)?))
        .sum()
}

/// One piece of candidate mass together with the input site it is matched to
/// in every input measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub mass: f64,
    pub members: Vec<Endpoint>,
}

#[derive(Debug, Clone)]
pub struct BarycenterState {
    pub candidate: PersistenceMeasure,
    /// `groupings[k]` lists the pieces of candidate atom `k`.
    pub groupings: Vec<Vec<Grouping>>,
    pub energy: f64,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Starting point of the alternating solver.
#[derive(Debug, Clone)]
pub enum Init {
    Measure(PersistenceMeasure),
    /// Start from the `i`-th input.
    Input(usize),
    /// Random atoms drawn in the bounding box of the inputs.
    Random(u64),
}

struct Assignment {
    energy: f64,
    /// per candidate site (diagonal last): pieces
    pieces: Vec<Vec<Grouping>>,
}

fn assign(candidate: &PersistenceMeasure, problem: &BarycenterProblem) -> Result<Assignment> {
    let max_input = problem.inputs.iter().map(|m| m.total_mass()).fold(0.0, f64::max);
    let c_mass = candidate.total_mass();
    let c_aug = AugmentedMeasure::with_diag_mass(candidate, max_input);
    let rows = c_aug.sites.len();
    // rows x inputs: (target, mass) lists
    let mut splits: Vec<Vec<Vec<(Endpoint, f64)>>> = vec![Vec::with_capacity(problem.inputs.len()); rows];
    let mut energy = 0.0;
    for (mu, &w) in problem.inputs.iter().zip(&problem.weights) {
        let target = AugmentedMeasure::with_diag_mass(mu, c_mass + max_input - mu.total_mass());
        let flow = solve_augmented(&c_aug, &target, problem.p)?;
        energy += w * flow.cost;
        let mut per_row: Vec<Vec<(Endpoint, f64)>> = vec![Vec::new(); rows];
        for &(r, t, f) in &flow.entries {
            let endpoint = if t < mu.len() { Endpoint::Atom(t) } else { Endpoint::Diag };
            per_row[r].push((endpoint, f));
        }
        for (r, list) in per_row.into_iter().enumerate() {
            splits[r].push(list);
        }
    }
    let pieces = splits
        .into_iter()
        .zip(&c_aug.masses)
        .map(|(lists, &mass)| common_refinement(&lists, mass))
        .collect();
    Ok(Assignment { energy, pieces })
}

/// Cuts `[0, mass)` along each list of `(target, mass)` intervals and returns
/// the cells of the common refinement.
fn common_refinement(lists: &[Vec<(Endpoint, f64)>], mass: f64) -> Vec<Grouping> {
    if mass <= 0.0 || lists.iter().any(|l| l.is_empty()) {
        return Vec::new();
    }
    let eps = 1e-13 * mass.max(1.0);
    let mut pos = vec![0usize; lists.len()];
    let mut left: Vec<f64> = lists.iter().map(|l| l[0].1).collect();
    let mut out: Vec<Grouping> = Vec::new();
    loop {
        let piece = left.iter().copied().fold(f64::INFINITY, f64::min);
        if piece > eps {
            let members: Vec<Endpoint> = pos.iter().zip(lists).map(|(&k, l)| l[k].0).collect();
            match out.last_mut() {
                Some(last) if last.members == members => last.mass += piece,
                _ => out.push(Grouping { mass: piece, members }),
            }
        }
        let mut exhausted = false;
        for i in 0..lists.len() {
            left[i] -= piece;
            if left[i] <= eps {
                pos[i] += 1;
                if pos[i] == lists[i].len() {
                    exhausted = true;
                } else {
                    left[i] += lists[i][pos[i]].1;
                }
            }
        }
        if exhausted {
            return out;
        }
    }
}

fn member_sites(members: &[Endpoint], problem: &BarycenterProblem) -> Vec<Site> {
    members
        .iter()
        .zip(&problem.inputs)
        .map(|(e, mu)| match e {
            Endpoint::Atom(j) => Site::Point(mu.atoms()[*j].point),
            Endpoint::Diag => Site::Diag,
        })
        .collect()
}

fn update(pieces: &[Vec<Grouping>], problem: &BarycenterProblem) -> Result<PersistenceMeasure> {
    let mut cache: HashMap<&[Endpoint], Site> = HashMap::new();
    let mut atoms: Vec<(PlanarPoint, f64)> = Vec::new();
    for g in pieces.iter().flatten() {
        if g.members.iter().all(|e| *e == Endpoint::Diag) {
            continue;
        }
        let site = match cache.get(g.members.as_slice()) {
            Some(s) => *s,
            None => {
                let s = localized_candidate(&member_sites(&g.members, problem), &problem.weights, problem.p)?;
                cache.insert(g.members.as_slice(), s);
                s
            }
        };
        if let Site::Point(x) = site {
            atoms.push((x, g.mass));
        }
    }
    PersistenceMeasure::new(atoms)
}

/// Gain, the two grouping indices and their new member lists.
type Exchange = (f64, usize, usize, Vec<Endpoint>, Vec<Endpoint>);

/// Pairwise exchange search over groupings.
///
/// Swapping the members two groupings use in one input measure (a grouping
/// may be the implicit all-diagonal one, of unlimited mass) keeps every input
/// marginal intact. Improving swaps are applied, best first, on the mass the
/// two groupings share. The alternating steps alone cannot split or merge
/// groupings, so this is what lets the solver leave such local minima.
fn swap_search(pieces: &[Vec<Grouping>], problem: &BarycenterProblem) -> Result<Option<Vec<Vec<Grouping>>>> {
    let n = problem.inputs.len();
    let diag = vec![Endpoint::Diag; n];
    let mut groups: Vec<Grouping> = pieces
        .iter()
        .flatten()
        .filter(|g| g.members != diag && g.mass > 0.0)
        .cloned()
        .collect();
    if groups.len() > SWAP_SEARCH_LIMIT {
        return Ok(None);
    }
    let mut cache: HashMap<Vec<Endpoint>, f64> = HashMap::new();
    let mut cost = |members: &[Endpoint]| -> Result<f64> {
        if let Some(c) = cache.get(members) {
            return Ok(*c);
        }
        let sites = member_sites(members, problem);
        let z = localized_candidate(&sites, &problem.weights, problem.p)?;
        let c = grouping_cost(&sites, &problem.weights, &z, problem.p);
        cache.insert(members.to_vec(), c);
        Ok(c)
    };
    let mut improved = false;
    for _ in 0..10 * SWAP_SEARCH_LIMIT {
        let mut best: Option<Exchange> = None;
        // index == groups.len() stands for the all-diagonal grouping
        for a in 0..groups.len() {
            for b in a + 1..=groups.len() {
                let gb = groups.get(b).map_or(&diag, |g| &g.members).clone();
                let ga = groups[a].members.clone();
                let mass = groups.get(b).map_or(groups[a].mass, |g| g.mass.min(groups[a].mass));
                let before = cost(&ga)? + cost(&gb)?;
                let differ: Vec<usize> = (0..n).filter(|&i| ga[i] != gb[i]).collect();
                for subset in swap_subsets(differ.len()) {
                    let (mut na, mut nb) = (ga.clone(), gb.clone());
                    for (bit, &i) in differ.iter().enumerate() {
                        if subset & (1 << bit) != 0 {
                            std::mem::swap(&mut na[i], &mut nb[i]);
                        }
                    }
                    let gain = mass * (before - cost(&na)? - cost(&nb)?);
                    if gain > SWAP_GAIN_TOL && best.as_ref().is_none_or(|(g, ..)| gain > *g) {
                        best = Some((gain, a, b, na, nb));
                    }
                }
            }
        }
        let Some((_, a, b, na, nb)) = best else {
            break;
        };
        improved = true;
        let mass = groups.get(b).map_or(groups[a].mass, |g| g.mass.min(groups[a].mass));
        let ga = Grouping { mass, members: na };
        let gb = Grouping { mass, members: nb };
        let rest_a = groups[a].mass - mass;
        let rest_b = groups.get(b).map(|g| g.mass - mass);
        let mut next: Vec<Grouping> = Vec::with_capacity(groups.len() + 2);
        for (k, g) in groups.iter().enumerate() {
            let rest = if k == a {
                rest_a
            } else if k == b {
                rest_b.unwrap_or(0.0)
            } else {
                g.mass
            };
            if rest > 1e-13 {
                next.push(Grouping { mass: rest, members: g.members.clone() });
            }
        }
        next.extend([ga, gb].into_iter().filter(|g| g.members != diag));
        groups = next;
    }
    Ok(improved.then(|| vec![groups]))
}

/// Coordinate subsets to exchange between two groupings differing in `k`
/// coordinates, as bit masks. A subset and its complement produce the same
/// pair, and swapping everything changes nothing, so only nonempty masks
/// without the top bit are listed. Large `k` falls back to single coordinates.
fn swap_subsets(k: usize) -> Vec<u32> {
    if k <= 1 {
        return Vec::new();
    }
    if k > SWAP_SUBSET_MAX_COORDS {
        return (0..k).map(|i| 1u32 << i).collect();
    }
    (1u32..(1u32 << (k - 1))).collect()
}

fn initial_candidate(init: &Init, problem: &BarycenterProblem) -> Result<PersistenceMeasure> {
    match init {
        Init::Measure(m) => Ok(m.clone()),
        Init::Input(i) => problem
            .inputs
            .get(*i)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("no input with index {i}"))),
        Init::Random(seed) => Ok(random_candidate(problem, &mut ChaCha8Rng::seed_from_u64(*seed))),
    }
}

fn random_candidate<R: Rng>(problem: &BarycenterProblem, rng: &mut R) -> PersistenceMeasure {
    let points: Vec<PlanarPoint> = problem.inputs.iter().flat_map(|m| m.points()).collect();
    if points.is_empty() {
        return PersistenceMeasure::empty();
    }
    let b_lo = points.iter().map(|x| x.birth()).fold(f64::INFINITY, f64::min);
    let b_hi = points.iter().map(|x| x.birth()).fold(f64::NEG_INFINITY, f64::max);
    let l_hi = points.iter().map(|x| x.death() - x.birth()).fold(0.0, f64::max);
    let mean_mass = problem.total_input_mass() / problem.inputs.len() as f64;
    let max_count = problem.inputs.iter().map(|m| m.len()).max().unwrap_or(1).max(1);
    let count = rng.gen_range(1..=max_count);
    let atoms: Vec<(PlanarPoint, f64)> = (0..count)
        .filter_map(|_| {
            let b = if b_hi > b_lo { rng.gen_range(b_lo..=b_hi) } else { b_lo };
            let l = rng.gen_range(0.0..=l_hi);
            PlanarPoint::new(b, b + l).ok().map(|x| (x, mean_mass / count as f64))
        })
        .collect();
    PersistenceMeasure::new(atoms).unwrap_or_default()
}

fn groupings_for(candidate: &PersistenceMeasure, pieces: &[Vec<Grouping>]) -> Vec<Vec<Grouping>> {
    pieces.iter().take(candidate.len()).cloned().collect()
}

/// Alternating assignment/update from `init`, at most `max_iter` updates.
///
/// Stops once an update lowers the energy by less than
/// [`CONVERGENCE_TOL`]. The result is a local minimizer; `converged` is false
/// when the iteration budget ran out first.
pub fn frechet_mean(problem: &BarycenterProblem, init: &Init, max_iter: usize) -> Result<BarycenterState> {
    let mut candidate = initial_candidate(init, problem)?;
    let mut current = assign(&candidate, problem)?;
    let mut trace = vec![current.energy];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut next = update(&current.pieces, problem)?;
        let mut next_assignment = assign(&next, problem)?;
        if current.energy - next_assignment.energy < CONVERGENCE_TOL {
            // stuck: try exchanging members between groupings
            if let Some(swapped) = swap_search(&current.pieces, problem)? {
                let alt = update(&swapped, problem)?;
                let alt_assignment = assign(&alt, problem)?;
                if alt_assignment.energy < next_assignment.energy {
                    next = alt;
                    next_assignment = alt_assignment;
                }
            }
        }
        let decrease = current.energy - next_assignment.energy;
        if decrease < CONVERGENCE_TOL {
            converged = true;
            if decrease > 0.0 {
                candidate = next;
                current = next_assignment;
                trace.push(current.energy);
            }
            break;
        }
        candidate = next;
        current = next_assignment;
        trace.push(current.energy);
    }
    Ok(BarycenterState {
        groupings: groupings_for(&candidate, &current.pieces),
        candidate,
        energy: current.energy,
        energy_trace: trace,
        iterations,
        converged,
    })
}

/// Runs [`frechet_mean`] from every input and from `random_starts` random
/// candidates (seeded from `seed`), in parallel, and keeps the lowest energy.
pub fn frechet_mean_multistart(
    problem: &BarycenterProblem,
    random_starts: usize,
    seed: u64,
    max_iter: usize,
) -> Result<BarycenterState> {
    let inits: Vec<Init> = (0..problem.inputs.len())
        .map(Init::Input)
        .chain((0..random_starts).map(|k| Init::Random(seed.wrapping_add(k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))))
        .collect();
    let runs = inits
        .par_iter()
        .map(|init| frechet_mean(problem, init, max_iter))
        .collect::<Result<Vec<_>>>()?;
    // first minimum keeps the choice independent of scheduling
    let mut best: Option<BarycenterState> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.energy < b.energy) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagram(points: &[(f64, f64)]) -> PersistenceMeasure {
        PersistenceMeasure::diagram(points.iter().copied()).unwrap()
    }

    #[test]
    fn problem_validation() {
        let d = diagram(&[(0.0, 1.0)]);
        assert!(BarycenterProblem::new(vec![], vec![], 2.0).is_err());
        assert!(matches!(
            BarycenterProblem::new(vec![d.clone()], vec![1.0], 1.0),
            Err(Error::BarycenterExponent(_))
        ));
        assert!(BarycenterProblem::new(vec![d.clone(), d.clone()], vec![1.0, 0.0], 2.0).is_err());
        assert!(BarycenterProblem::new(vec![d.clone(), d], vec![0.3, 0.3], 2.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let a = diagram(&[(0.0, 2.0)]);
        let b = diagram(&[(0.0, 4.0)]);
        let problem = BarycenterProblem::uniform(vec![a.clone(), b.clone()], 2.0).unwrap();
        // empty candidate: weighted total persistence = ½·2 + ½·8
        let e0 = frechet_energy(&PersistenceMeasure::empty(), &problem).unwrap();
        assert!((e0 - 5.0).abs() < 1e-12);
        let mid = diagram(&[(0.0, 3.0)]);
        assert!((frechet_energy(&mid, &problem).unwrap() - 1.0).abs() < 1e-12);
        let single = BarycenterProblem::uniform(vec![a.clone()], 2.0).unwrap();
        assert_eq!(frechet_energy(&a, &single).unwrap(), 0.0);
    }

    #[test]
    fn refinement_cells() {
        let l1 = vec![(Endpoint::Atom(0), 1.0), (Endpoint::Diag, 2.0)];
        let l2 = vec![(Endpoint::Atom(1), 2.5), (Endpoint::Atom(0), 0.5)];
        let cells = common_refinement(&[l1, l2], 3.0);
        let masses: Vec<f64> = cells.iter().map(|g| g.mass).collect();
        assert_eq!(masses, vec![1.0, 1.5, 0.5]);
        assert_eq!(cells[1].members, vec![Endpoint::Diag, Endpoint::Atom(1)]);
        assert_eq!(cells[2].members, vec![Endpoint::Diag, Endpoint::Atom(0)]);
    }

    #[test]
    fn single_input_is_its_own_mean() {
        let a = PersistenceMeasure::from_triples([(0.0, 2.0, 1.0), (1.0, 4.0, 2.0), (3.0, 3.5, 0.5)]).unwrap();
        let problem = BarycenterProblem::uniform(vec![a.clone()], 2.0).unwrap();
        let state = frechet_mean(&problem, &Init::Input(0), DEFAULT_MAX_ITER).unwrap();
        assert_eq!(state.energy, 0.0);
        assert_eq!(state.candidate, a);
        assert!(state.converged);
    }

    #[test]
    fn identical_inputs() {
        let a = diagram(&[(0.0, 2.0), (1.0, 4.0)]);
        let problem = BarycenterProblem::uniform(vec![a.clone(); 3], 2.0).unwrap();
        let state = frechet_mean_multistart(&problem, 1, 3, DEFAULT_MAX_ITER).unwrap();
        assert!(state.energy.abs() < 1e-12);
        assert!(crate::transport::ot_distance(&state.candidate, &a, 2.0).unwrap() < 1e-6);
    }

    #[test]
    fn two_singletons_meet_in_the_middle() {
        let problem = BarycenterProblem::uniform(vec![diagram(&[(0.0, 2.0)]), diagram(&[(0.0, 4.0)])], 2.0).unwrap();
        let state = frechet_mean_multistart(&problem, 1, 0, DEFAULT_MAX_ITER).unwrap();
        assert!((state.energy - 1.0).abs() < 1e-12);
        assert_eq!(state.candidate.len(), 1);
        let x = state.candidate.atoms()[0].point;
        assert!((x.birth() - 0.0).abs() < 1e-12 && (x.death() - 3.0).abs() < 1e-12);
        assert_eq!(state.groupings.len(), 1);
        assert_eq!(state.groupings[0][0].members, vec![Endpoint::Atom(0), Endpoint::Atom(0)]);
    }

    #[test]
    fn trace_is_decreasing_and_mass_bounded() {
        let inputs = vec![
            diagram(&[(0.0, 2.0), (1.0, 1.3), (4.0, 7.0)]),
            diagram(&[(0.2, 2.5), (3.5, 6.0)]),
            diagram(&[(0.1, 1.8), (0.5, 0.9), (4.5, 6.5), (8.0, 8.2)]),
        ];
        let problem = BarycenterProblem::uniform(inputs, 2.0).unwrap();
        for init in [Init::Input(0), Init::Input(2), Init::Random(5), Init::Measure(PersistenceMeasure::empty())] {
            let state = frechet_mean(&problem, &init, DEFAULT_MAX_ITER).unwrap();
            for w in state.energy_trace.windows(2) {
                assert!(w[1] < w[0]);
            }
            assert!(state.candidate.total_mass() <= problem.total_input_mass() + 1e-9);
            let recomputed = frechet_energy(&state.candidate, &problem).unwrap();
            assert!((recomputed - state.energy).abs() < 1e-9);
        }
    }
}
