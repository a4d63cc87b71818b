pub mod cli;
pub mod context;
pub mod error;
pub mod identities;
pub mod qcore;
pub mod qdiff;
pub mod qhyper;
pub mod qoper;
pub mod scalar;
mod sum;
