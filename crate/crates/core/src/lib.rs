//! Joint radio and compute planning for mobile edge computing with
//! delay-bounded short packets.

// `!(x < y)` is how NaN is routed to the failing branch throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod channel_phy;
pub mod des_sim;
pub mod exec;
mod numeric;
pub mod optimizer;
pub mod queueing;
pub mod scenario;
