pub mod error;
pub mod gluing;
pub mod dataset;
pub mod hdmde;
pub mod interior;
pub mod io;
pub mod isomap;
mod linalg;
pub mod pme;
pub mod points;
pub mod projection;
pub mod spline;

pub use error::{Error, Result};
pub use linalg::SymmetricIndefinite;
pub use points::Points;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/point-clouds.md")]
    mod point_clouds {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/splines.md")]
    mod splines {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/closed.md")]
    mod closed {}
    #[doc = include_str!("../../../book/src/interior.md")]
    mod interior {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
