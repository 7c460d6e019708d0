//! Law of large numbers for rescaled one-dimensional Rips diagrams.
//!
//! For `n` uniform points on `[0, 1]`, the `H0` Rips diagram has one point
//! `(0, g)` per gap `g` between consecutive samples. Rescaled by `n` and with
//! mass `1/n` per point, it converges in `OT_p` to the measure on `{0} × ℝ₊`
//! with density `e^{−u}`, which is approximated here by `m` quantile atoms.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint};
use crate::transport::ot_distance;

/// Sampling law of the points. Only the uniform law on `[0, 1]` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub p: f64,
    pub density: Density,
    /// Atoms in the discretized limit measure.
    pub limit_atoms: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::InvalidConfig("no sample sizes given".into()));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidConfig(format!("sample sizes must be at least 2, got {n}")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.limit_atoms == 0 {
            return Err(Error::InvalidConfig("limit atoms must be at least 1".into()));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::InvalidExponent(self.p));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Diagram of the `H0` Rips filtration of points on the line, without the
/// infinite bar. A pair of coincident points gives a zero gap, which lies on
/// the diagonal and is dropped.
pub fn rips_h0_diagram_1d(points: &[f64]) -> Result<PersistenceMeasure> {
    if points.len() < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(x) = points.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite point {x}")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let atoms = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .map(|g| Ok((PlanarPoint::new(0.0, g)?, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    PersistenceMeasure::new(atoms)
}

/// Draws `n` uniform points and returns `Dgm(n X_n) / n`.
pub fn rescaled_empirical_measure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PersistenceMeasure> {
    let sample: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    rescale(&rips_h0_diagram_1d(&sample)?, n)
}

fn rescale(dgm: &PersistenceMeasure, n: usize) -> Result<PersistenceMeasure> {
    let scale = n as f64;
    PersistenceMeasure::new(
        dgm.atoms()
            .iter()
            .map(|a| Ok((PlanarPoint::new(0.0, scale * a.point.death())?, a.mass / scale)))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// `m` atoms `(0, u_j)` of mass `1/m` at the `(j − ½)/m` quantiles of `Exp(1)`.
pub fn limit_measure_discretization(m: usize) -> Result<PersistenceMeasure> {
    if m == 0 {
        return Err(Error::InvalidConfig("limit atoms must be at least 1".into()));
    }
    let mass = 1.0 / m as f64;
    PersistenceMeasure::new(
        (1..=m)
            .map(|j| {
                let q = (j as f64 - 0.5) / m as f64;
                Ok((PlanarPoint::new(0.0, -(-q).ln_1p())?, mass))
            })
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Independent stream for one trial, whatever the scheduling.
pub fn trial_rng(seed: u64, n: usize, trial: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(n as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn convergence_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let limit = limit_measure_discretization(cfg.limit_atoms)?;
    let mut n_values = cfg.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    n_values
        .iter()
        .map(|&n| {
            let distances = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let mu = rescaled_empirical_measure(n, &mut trial_rng(cfg.seed, n, trial))?;
                    ot_distance(&mu, &limit, cfg.p)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mut sorted = distances;
            sorted.sort_by(f64::total_cmp);
            Ok(ExperimentRow {
                n,
                median: percentile(&sorted, 0.5),
                p10: percentile(&sorted, 0.1),
                p90: percentile(&sorted, 0.9),
            })
        })
        .collect()
}

/// Linear interpolation between order statistics of sorted data, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Spearman rank correlation, ties receiving their average rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// CSV with the configuration echoed as a `#` JSON comment block.
pub fn rows_to_csv(cfg: &ExperimentConfig, rows: &[ExperimentRow]) -> String {
    let mut out = String::new();
    let echo = serde_json::to_string_pretty(cfg).expect("config serializes");
    for line in echo.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("n,median,p10,p90\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, r.median, r.p10, r.p90);
    }
    out
}

/// Matplotlib script plotting an `lln` CSV.
pub fn plot_script(csv_path: &str) -> String {
    format!(
        r##"import matplotlib.pyplot as plt
import numpy as np

data = np.loadtxt({csv_path:?}, delimiter=",", comments="#", skiprows=1)
n, median, p10, p90 = data.T
plt.fill_between(n, p10, p90, alpha=0.3, label="10%-90%")
plt.plot(n, median, label="median")
plt.xlabel("n")
plt.ylabel("OT_p(mu_n, mu)")
plt.legend()
plt.savefig({png:?})
"##,
        png = format!("{}.png", csv_path.trim_end_matches(".csv"))
    )
}
