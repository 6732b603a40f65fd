//! Reference schemes: the demand-independent uncoded D2D scheme and the
//! shared-link private scheme with virtual users.

pub mod shared_link;
pub mod uncoded;

pub use shared_link::{wc_sl_deliver, wc_sl_place, SharedLinkInstance};
pub use uncoded::{uncoded_deliver, uncoded_place, UncodedPlan};
