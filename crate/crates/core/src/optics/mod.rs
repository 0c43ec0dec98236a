//! Random linear-optical networks and exact multiphoton detection statistics.

mod coincidence;
mod fields;
mod outcomes;
mod permanent;
mod tm;

pub use coincidence::{
    coincidence_probabilities, coincidence_terms, intensity_features, CoincidenceModel,
    CoincidenceTerms, CollisionPolicy, FeatureVector,
};
pub use fields::{propagate, EncodedInput, PhotonFields};
pub use outcomes::{binomial, OutcomeSpace};
pub use permanent::{permanent, PermanentScalar, MAX_PERMANENT_ORDER};
pub use tm::{TmKind, TransmissionMatrix};
