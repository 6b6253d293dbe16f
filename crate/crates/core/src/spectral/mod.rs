//! Spectral theory of -d2/dx2 + V with Kirchhoff conditions on equilateral
//! graphs, reduced to the vertex set through the fundamental pair c, s of the
//! edge equation.

mod eigen;
mod ode;
mod pair;
mod reduction;
mod resolvent;

pub use eigen::{dirichlet_points, eigenvalues_via_reduction, SpectralEigen, SpectrumReport, DIRICHLET_EXCLUSION};
pub use pair::{floquet_discriminant, fundamental_pair, EdgePotential, FundamentalPair};
pub use reduction::{
    build_p, dtn_map, gamma_field, mu_map, p_block_eigenvalues, p_spectrum, symmetrized_p, vertex_condition_operator,
    PCluster, DIRICHLET_TOL,
};
pub use resolvent::{krein_resolvent, operator_residual, ResolventSolution, SINGULAR_COND};

use crate::graph::MetricGraph;
use crate::error::Result;

/// Kirchhoff residual of gamma(lambda) z, normalized as in the eigenvalue report.
pub fn gamma_kirchhoff_residual(
    g: &MetricGraph,
    v: &EdgePotential,
    lambda: num_complex::Complex64,
    z: &[num_complex::Complex64],
) -> Result<f64> {
    let l = reduction::common_length(g)?;
    let pair = FundamentalPair::new(v, lambda, l);
    Ok(eigen::kirchhoff_residual(g, &pair, z))
}
