//! Modified Wilson field on `[1,3] x S^1 x [-2,2]`.

pub mod integrate;
pub mod ode;
pub mod profile;
pub mod regions;
pub mod validate;

pub use integrate::{flow_for, integrate_wilson, WilsonOutcome, WilsonSegment};
pub use ode::Tolerances;
pub use profile::{VanishOrder, WilsonProfile};
pub use regions::Region;
pub use validate::validate_wilson;
