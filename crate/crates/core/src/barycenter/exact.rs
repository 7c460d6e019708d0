//! Exact Fréchet mean of a few small diagrams by linear programming.
//!
//! Every diagram is padded with diagonal copies up to `m = Σ_i μ_i(Ω)`. A
//! Fréchet mean of the padded family is supported on the localized candidates
//! of all groupings (one site per input), and each mean point is transported
//! to its own grouping. Choosing how many copies of every grouping to use is
//! then a linear program over the multiplicities `w_g ≥ 0` with one equality
//! per input site: the copies using that site must add up to its multiplicity.
//! Identical sites (repeated points, diagonal copies) are aggregated, which
//! leaves the optimum unchanged and shrinks the program.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint, Site};

use super::localize::{grouping_cost, localized_candidate};
use super::BarycenterProblem;

/// Largest admissible `m^N`.
pub const EXACT_GROUPING_LIMIT: f64 = 1e5;

#[derive(Debug, Clone)]
pub struct ExactBarycenter {
    pub measure: PersistenceMeasure,
    pub energy: f64,
    /// Whether the optimal vertex has integer multiplicities.
    pub integral: bool,
    /// Multiplicity of every grouping with nonzero weight.
    pub groupings: Vec<(Vec<Site>, f64)>,
}

pub fn exact_barycenter_lp(problem: &BarycenterProblem) -> Result<ExactBarycenter> {
    let inputs = problem.inputs();
    let n = inputs.len() as i32;
    for mu in inputs {
        if let Some(atom) = mu.atoms().iter().find(|a| a.mass.fract() != 0.0) {
            return Err(Error::NonIntegerMass(atom.mass));
        }
    }
    let m_tot = problem.total_input_mass();
    let groupings_count = m_tot.powi(n);
    if groupings_count > EXACT_GROUPING_LIMIT {
        return Err(Error::TooLarge {
            groupings: groupings_count,
            limit: EXACT_GROUPING_LIMIT,
        });
    }
    if m_tot == 0.0 {
        return Ok(ExactBarycenter {
            measure: PersistenceMeasure::empty(),
            energy: 0.0,
            integral: true,
            groupings: Vec::new(),
        });
    }

    // distinct sites per input with multiplicities
    let choices: Vec<Vec<(Site, f64)>> = inputs
        .iter()
        .map(|mu| {
            let mut c: Vec<(Site, f64)> = mu.atoms().iter().map(|a| (Site::Point(a.point), a.mass)).collect();
            let pad = m_tot - mu.total_mass();
            if pad > 0.0 {
                c.push((Site::Diag, pad));
            }
            c
        })
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::new();
    // per (input, choice): variables touching it
    let mut rows: Vec<Vec<Vec<minilp::Variable>>> = choices.iter().map(|c| vec![Vec::new(); c.len()]).collect();
    let mut index = vec![0usize; choices.len()];
    loop {
        let sites: Vec<Site> = index.iter().zip(&choices).map(|(&k, c)| c[k].0).collect();
        let z = localized_candidate(&sites, problem.weights(), problem.p())?;
        let cost = grouping_cost(&sites, problem.weights(), &z, problem.p());
        let v = lp.add_var(cost, (0.0, f64::INFINITY));
        for (i, &k) in index.iter().enumerate() {
            rows[i][k].push(v);
        }
        vars.push((v, sites, z, cost));
        // odometer
        let mut i = 0;
        loop {
            if i == index.len() {
                break;
            }
            index[i] += 1;
            if index[i] < choices[i].len() {
                break;
            }
            index[i] = 0;
            i += 1;
        }
        if i == index.len() {
            break;
        }
    }
    for (i, per_choice) in rows.iter().enumerate() {
        for (k, vs) in per_choice.iter().enumerate() {
            let expr: Vec<(minilp::Variable, f64)> = vs.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, choices[i][k].1);
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Numerical(format!("barycenter linear program failed: {e}")))?;

    let mut integral = true;
    let mut atoms: Vec<(PlanarPoint, f64)> = Vec::new();
    let mut used = Vec::new();
    let mut energy = 0.0;
    for (v, sites, z, cost) in vars {
        let raw = solution[v];
        let rounded = raw.round();
        let w = if (raw - rounded).abs() <= 1e-9 * raw.abs().max(1.0) {
            rounded
        } else {
            integral = false;
            raw
        };
        if w <= 0.0 {
            continue;
        }
        energy += w * cost;
        if let Site::Point(x) = z {
            atoms.push((x, w));
        }
        used.push((sites, w));
    }
    Ok(ExactBarycenter {
        measure: PersistenceMeasure::new(atoms)?,
        energy,
        integral,
        groupings: used,
    })
}
