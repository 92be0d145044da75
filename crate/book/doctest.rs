// The guide's listings are compiled and run by `cargo test --doc`: each
// chapter is pulled in as the docs of an empty module.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/norm.md")]
pub mod norm {}
#[doc = include_str!("src/grid.md")]
pub mod grid {}
#[doc = include_str!("src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("src/flow.md")]
pub mod flow {}
#[doc = include_str!("src/inequality.md")]
pub mod inequality {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
