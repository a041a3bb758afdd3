pub mod bounds;
pub mod channels;
pub mod formats;
pub mod ldic_capacity;
pub mod probability;
pub mod regions;
pub mod simulator;
