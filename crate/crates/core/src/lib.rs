//! Optimal partial transport between persistence measures.
//!
//! * [`measure`]: persistence measures, total persistence and the quotient
//!   ground metric.
//! * [`transport`]: exact `OT_p` distances and plans, bottleneck distance,
//!   linear expectations.
//! * [`barycenter`]: Fréchet means of finite families.
//! * [`representations`]: persistence surfaces, silhouettes and weighted Betti
//!   curves.
//! * [`experiments`]: the one-dimensional law-of-large-numbers experiment.

pub mod error;
pub mod io;
pub mod measure;
pub mod barycenter;
pub mod transport;
pub mod representations;
pub mod experiments;

pub use error::{Error, Result};
pub use measure::{diag_distance, ground_rho, pers_p, truncate, Atom, Exponent, PersistenceMeasure, PlanarPoint, Site};
pub use transport::{
    augment, bottleneck_distance, mean_measure, optimal_plan, ot_cost, ot_distance, total_cost, CostMatrix, Endpoint,
    PlanEdge, TransportPlan,
};
