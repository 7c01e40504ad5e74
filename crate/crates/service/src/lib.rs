//! Device registry, stamping/verification pipeline and the HTTP service.

pub mod http;
pub mod pipeline;
pub mod registry;

pub use http::{router, serve, AppState, ServiceConfig};
pub use pipeline::{
    acquire_and_stamp, plan_for, verify_image, PipelineError, Tolerances, Verdict,
    VerificationReport, WatermarkStore,
};
pub use registry::{Registry, RegistryError, RegistryRecord};
