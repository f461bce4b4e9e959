//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/loglinear.md")]
pub mod loglinear {}

#[doc = include_str!("../../../book/src/dga.md")]
pub mod dga {}

#[doc = include_str!("../../../book/src/lcmcr.md")]
pub mod lcmcr {}

#[doc = include_str!("../../../book/src/bias.md")]
pub mod bias {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
