//! Load-profile clustering and admission scoring for solar energy communities.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`profiles`] ingests hourly meter CSVs and turns a consumer's readings
//!    into a fixed-length [`profiles::FeatureVector`].
//! 2. [`clustering`] fits k-means over those vectors and evaluates the fit.
//! 3. [`community`] simulates hourly production, storage dispatch and the
//!    resulting shared energy of a community.
//! 4. [`recommender`] combines the two: a candidate is assigned a cluster and
//!    scored by how much shared energy it adds.
//!
//! [`datagen`] produces deterministic synthetic consumers and producers so the
//! whole pipeline can be exercised without real meter data.
//!
//! ```
//! use solarec::community::{simulate, CommunityState, Member, ProducerSpec};
//!
//! let mut producer = ProducerSpec::new("pv", 2.0, vec![0.0; 24], 2.0).unwrap();
//! producer.avg_profile[0] = 2.0;
//! producer.storage_efficiency = 1.0;
//! producer.storage_power_limit = f64::INFINITY;
//! let state = CommunityState::new(
//!     vec![Member::new("home", vec![1.0, 1.0, 1.0])],
//!     vec![producer],
//!     3,
//! );
//! let report = simulate(&state).unwrap();
//! assert_eq!(report.shared_energy, 2.0);
//! ```

pub mod clustering;
pub mod community;
pub mod datagen;
pub mod json;
pub mod profiles;
pub mod recommender;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/community.md")]
    mod community {}
    #[doc = include_str!("../../../book/src/recommender.md")]
    mod recommender {}
    #[doc = include_str!("../../../book/src/datagen.md")]
    mod datagen {}
}
