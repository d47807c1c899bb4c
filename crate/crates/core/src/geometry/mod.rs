//! Fubini-Study geometry of the state flow `|psi(l)> = U^dagger(l)|psi>`.

mod cases;
mod family;
mod geodesic;
mod identities;
mod metric;
mod variational;

pub use cases::{
    band_condition, band_condition_at, case_classify, sandwiched_ode_residual, BandCondition,
    CaseLabel, CaseVerdict, SandwichedResidual, GAP_ZERO_REL, ZERO_REL,
};
pub use family::{CoordSample, CoordinateTrajectory, ParametrizedFamily};
pub use geodesic::{
    arc_length, christoffel, geodesic_residual, ArcLength, Christoffel, GeodesicOptions,
    GeodesicResidual,
};
pub use identities::{
    generator_consistency, generator_relation_residual, speed_consistency, xi_residual,
    GeneratorRelationResidual, XiResidual,
};
pub use metric::{
    fs_metric, generator_route, generator_vectors, overlap_route, MetricSample, ROUTE_TOL,
};
pub use variational::{variational_gradient, VariationalGradient, VariationalOptions};
