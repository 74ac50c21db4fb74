pub mod capacity_credit;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod ges;
pub mod lp;
pub mod model;
pub mod network;
pub mod reliability;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod simulate;
pub mod sweep;
