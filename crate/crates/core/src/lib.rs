//! Billing-plan switching optimizer.
//!
//! Given a subscriber's call history and a catalog of candidate plans, the
//! crate estimates the expected full monthly cost of each plan (expected
//! traffic charges plus subscription, switching and SIM purchase fees), picks
//! the cheapest, and studies how that choice moves as traffic volume grows.
//!
//! - [`catalog`]: plans, fees, subgroup rules and per-minute payoff functions
//! - [`traffic`]: CDR parsing, call classification, λ and duration estimation
//! - [`cost`]: the analytic expected-cost engine and plan ranking
//! - [`simulate`]: seeded Monte-Carlo billing used as an independent check
//! - [`sensitivity`]: traffic-scaling sweeps, switch points, polynomial fits

pub mod catalog;
pub mod cost;
pub mod money;
pub mod sensitivity;
pub mod simulate;
pub mod traffic;

pub use catalog::{BillingPlan, Catalog, CatalogError, PayoffFunction, PlanId, SubscriberContext};
pub use cost::{BillingMode, CostBreakdown, CostError, CostReport, Ranking};
pub use money::Rubles;
pub use traffic::{DurationModel, TrafficProfile};
