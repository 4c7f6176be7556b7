//! Delivery-time calculus for cache-aided Fog radio access networks with
//! decentralized caching at both edge nodes (ENs) and user equipment (UEs).
//!
//! * [`model`]: network parameters, demands, node sets, binomials.
//! * [`placement`]: random bit-level cache placement and its subfile cells.
//! * [`dof`]: per-user degrees of freedom of the access channel.
//! * [`scheduler`]: the coded-multicast delivery schedule and its cost.
//! * [`bounds`]: closed-form upper and lower bounds on the delivery time.
//! * [`oracle`]: bit-exact execution and decodability check of a schedule.

pub mod bounds;
pub mod dof;
pub mod model;
pub mod oracle;
pub mod placement;
pub mod scheduler;

pub use bounds::{gap, ndt_lower, ndt_upper, ndt_upper_breakdown, ndt_upper_limit_infinite_r, BoundsReport};
pub use dof::{ActiveDof, DefaultDof, DofProvider};
pub use model::{DemandVector, GroupIndex, NdtBreakdown, NetworkConfig, NodeSet};
pub use oracle::{execute_schedule, verify_decodability, DecodeReport};
pub use placement::{sample_placement, PlacementRealization};
pub use scheduler::{build_schedule, DeliverySchedule};
