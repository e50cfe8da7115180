//! Time-expanded transit graph and earliest-arrival queries.

pub mod graph;
pub mod matrix;
pub mod query;

pub use graph::{
    build_graph, Connection, Footpath, GraphOptions, RejectedTrip, StopNode, Stoptime, TimeExpandedGraph,
    TransferArc, TripInfo, WalkModel, WalkOverrides,
};
pub use matrix::{travel_time_matrix, TravelTimeMatrix};
pub use query::{earliest_arrival, scan, ScanResult, Targets};

#[derive(Debug, thiserror::Error)]
pub enum RouterError {
    #[error("trip {trip_id:?} references unknown stop {stop_id:?}")]
    UnknownStop { trip_id: String, stop_id: String },
    #[error("stop {0:?} appears twice")]
    DuplicateStop(String),
    #[error("stop {0:?} has non-finite coordinates")]
    BadStop(String),
    #[error("invalid walk model {0:?}: need speed > 0, detour ≥ 1, max walk > 0")]
    InvalidWalkModel(WalkModel),
    #[error("walk overrides: {0}")]
    Overrides(String),
    #[error("travel-time matrix: {0}")]
    Matrix(String),
}
