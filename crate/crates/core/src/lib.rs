pub mod error;
pub mod dividing;
pub mod extraction;
pub mod fields;
pub mod geom;
pub mod invariants;
pub mod models;
pub mod verify;

pub use dividing::{AttachingArc, DividingSet, NormalForm};
pub use error::{Error, Result};
pub use extraction::{extract, FramedCurve, PontryaginSet};
pub use fields::{BoxDomain, RegularValue, SampledField};
pub use geom::Vec3;
pub use invariants::{hopf_invariant, linking_gauss, obstruction_o3, self_linking};
