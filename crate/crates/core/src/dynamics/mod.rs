//! Bloch-vector propagation in the lab, single and doubly rotating frames.
//!
//! Fields follow `H = ½ h·σ`, so `σ̇ = h × σ` and the spin precesses at `‖h‖`.

mod field;
mod frames;
mod propagate;
mod resonance;

pub use field::{
    double_rot_field, lab_field, DoubleRotatingField, FieldFn, FieldSource, FieldVector, LabField,
    ResonanceBranch, SingleRotatingField,
};
pub use frames::{
    lab_step, lab_to_double, lab_to_single, lab_vs_rotating_check, rotate_x_inv, rotate_z_inv,
    rotating_step, single_to_double,
};
pub use propagate::{
    magnus4_axis, propagate_magnus4, propagate_rotation, propagate_unitary_oracle, rotate,
    BlochTrajectory, TimeGrid, MAX_STEP_ANGLE,
};
pub use resonance::{resonance_map, ResonanceMap};
