//! Right-angled Coxeter groups, their multi-parameter Hecke algebras, and the
//! boundary principal-series operators of right-angled hyperbolic polygon
//! groups.
//!
//! The guide in `book/` walks through each module with runnable examples;
//! its code blocks are compiled and run as doc-tests of this crate.

pub mod averaging;
pub mod boundary_rep;
pub mod coxeter;
pub mod error;
pub mod estimates;
pub mod hecke;
pub mod hyperbolic;
pub mod quadrature;
pub mod scalar;
pub mod walls;

pub use coxeter::{CoxeterSystem, Generator, GroupElement, MultiIndex};
pub use error::{Error, Result};
pub use hecke::{HeckeElement, HeckeParams};
pub use scalar::Scalar;
pub use walls::{AntiChain, Side, Wall, WallPoset};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/coxeter.md")]
    mod coxeter {}
    #[doc = include_str!("../../../book/src/walls.md")]
    mod walls {}
    #[doc = include_str!("../../../book/src/hecke.md")]
    mod hecke {}
    #[doc = include_str!("../../../book/src/hyperbolic.md")]
    mod hyperbolic {}
    #[doc = include_str!("../../../book/src/boundary_rep.md")]
    mod boundary_rep {}
    #[doc = include_str!("../../../book/src/estimates.md")]
    mod estimates {}
    #[doc = include_str!("../../../book/src/averaging.md")]
    mod averaging {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
