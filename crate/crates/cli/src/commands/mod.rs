pub mod bound;
pub mod complexity;
pub mod discrete;
pub mod experiment;
pub mod verify;
