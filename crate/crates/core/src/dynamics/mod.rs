//! Deterministic side: RK4 flows, ensemble attractor detection, and
//! Lyapunov-type certificates checked on grid samples.

mod attractor;
mod flow;
mod lyapunov;

pub use attractor::{
    approximate_attractor, AttractorApprox, AttractorKind, EnsembleConfig, IsolatingNeighborhood,
};
pub use flow::{integrate_flow, rk4_step, Trajectory};
pub use lyapunov::{
    fit_operator_certificate, slack_constant, sublevel_set, verify_lyapunov,
    verify_operator_lyapunov, verify_uniform_lyapunov, CertificateKind, CertificateSpec,
    LyapunovCertificate, MemberVerdict, UniformVerdict, VerifiedFor,
};
