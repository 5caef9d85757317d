//! Annotation service: leases batches of posts to annotators, appends their
//! labels to the run's label log, advances bootstrap rounds and records
//! topic curation.
//!
//! Every JSON response carries `schema_version`. Requests authenticate with
//! a static `Authorization: Bearer <token>` mapped to an annotator id.

pub mod clock;
mod http;
mod leases;
mod service;

pub use clock::{Clock, ManualClock, SystemClock};
pub use http::{router, serve, serve_until};
pub use leases::Batch;
pub use service::{default_batch_size, ApiError, Service, ServiceConfig, DEFAULT_LEASE_SECS, MAX_BATCH, SCHEMA_VERSION};
