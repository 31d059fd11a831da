//! Code listings of the guide in `book/`, compiled as doctests.

#[doc = include_str!("../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../book/src/linear-model.md")]
pub mod linear_model {}

#[doc = include_str!("../../book/src/channels.md")]
pub mod channels {}

#[doc = include_str!("../../book/src/precoding.md")]
pub mod precoding {}

#[doc = include_str!("../../book/src/uplink.md")]
pub mod uplink {}

#[doc = include_str!("../../book/src/distributions.md")]
pub mod distributions {}

#[doc = include_str!("../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../README.md")]
pub mod readme {}
