pub mod cli;
pub mod estimation;
pub mod linalg;
pub mod measurement;
pub mod random;
pub mod simulator;
pub mod state;
pub mod verify;
