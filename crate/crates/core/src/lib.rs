pub mod accessibility;
pub mod geometry;
pub mod geostat;
pub mod gtfs;
pub mod observations;
pub mod pipeline;
pub mod router;
pub mod schedule;
