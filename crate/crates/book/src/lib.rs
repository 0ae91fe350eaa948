// mdbook cannot link the listings against workspace crates, so every
// chapter is pulled in here as module documentation and `cargo test --doc`
// runs its code blocks. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/architectures.md")]
pub mod architectures {}
#[doc = include_str!("../../../book/src/priors.md")]
pub mod priors {}
#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}
#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}
#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
