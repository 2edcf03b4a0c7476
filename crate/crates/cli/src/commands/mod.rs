pub mod simulate;
pub mod sweep;
pub mod urn;
pub mod verify;
