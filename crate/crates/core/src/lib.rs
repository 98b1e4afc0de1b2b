//! Desk-scale laboratory for ransomware attack structures.
//!
//! Everything here runs against a purely virtual filesystem: scenarios
//! describe file-encryption/file-deletion attack structures, an executor
//! plays them out and logs an event trace, trace analysis extracts the
//! structure back out as a feature vector, a classifier assigns one of five
//! virulence categories, and a recovery harness empirically validates each
//! category's data-recoverability claim against the stored attack image.
//!
//! Pipeline: scenario → [`attack::execute_attack`] → [`trace`] →
//! [`extract::extract_features`] → [`classify::classify`] →
//! [`recover::attempt_recovery`].

pub mod util;

pub mod crypto;
pub mod vfs;

pub mod scenario;
pub mod trace;

pub mod c2;

pub mod attack;
pub mod extract;

pub mod features;
pub mod classify;
pub mod pattern;
pub mod corpus;

pub mod image;
pub mod recover;
