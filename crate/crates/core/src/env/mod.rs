//! Simulated environments: interference-channel power control, dynamic
//! spectrum access and vehicular spectrum sharing.

pub mod dsa;
pub mod power;
pub mod v2x;
