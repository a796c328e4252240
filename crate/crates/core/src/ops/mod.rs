//! Operator algebra on finite chains: local observables, the sparse global
//! representation, lattice symmetries and the Jordan-Wigner map.

pub mod basis;
pub mod jw;
pub mod local;
pub mod sparse;
pub mod string_op;
pub mod symmetry;

pub use basis::{Basis, BasisTag};
pub use jw::{jordan_wigner, mode_string_operator, monomial, number_operator, FermionMode, ModeKind};
pub use local::{sigma, LocalOperator, Pauli, SiteIndex};
pub use sparse::{anticommutator, commutator, embed, embed_in, operator_norm, GlobalOperator};
pub use string_op::StringOperator;
pub use symmetry::{
    charge_of_state, gauge_rotate, parity_transform, partial_parity, translate, Boundary, GaugeAngle,
    ModelKind,
};
