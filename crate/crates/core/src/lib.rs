pub mod circuit;
pub mod cli;
pub mod gf2;
pub mod multipoint;
pub mod sat;
pub mod search;
pub mod sim;
pub mod stats;
pub mod uncompute;
