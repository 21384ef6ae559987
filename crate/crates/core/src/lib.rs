pub mod demand;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod ids;
pub mod metrics;
pub mod policy;
pub mod scenario;
