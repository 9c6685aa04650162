//! Offline learning and off-policy evaluation of warfarin dosing policies.
//!
//! Patients are contexts, the three weekly-dose buckets are arms, and a
//! policy earns reward 1 when it picks the bucket of the physician-titrated
//! therapeutic dose. Demonstration policies ([`baselines`]) generate logs;
//! [`opl`] learns new policies from those logs alone; [`ope`] estimates
//! their value from logs and, because every patient's true arm is known,
//! against an exact oracle. [`harness`] runs the whole seeded protocol.

pub mod baselines;
pub mod data_model;
pub mod harness;
pub mod learners;
pub mod ope;
pub mod opl;
pub mod rng;
