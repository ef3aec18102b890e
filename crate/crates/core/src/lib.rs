pub mod app;
pub mod codec;
pub mod fusion;
pub mod geometry;
pub mod model;
pub mod net;
pub mod sim;
