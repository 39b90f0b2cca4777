#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod kernel;
pub mod oracle;
pub mod quad;
pub mod sim;
pub mod spectral;
pub mod special;
pub mod verify;
