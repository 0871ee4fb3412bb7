//! Procedural stand-in corpora: keyword dialogues and cartoon faces.

mod dialogues;
mod faces;

pub use dialogues::synthetic_dialogues;
pub use faces::{
    expression_au, full_faces, identities, overfit_faces, render_face, synthetic_faces, write_faces, Identity,
    SyntheticFace,
};
