//! Ordinary kriging of wait and in-vehicle times.

mod linalg;
pub mod kriging;
pub mod surface;
pub mod variogram;

pub use kriging::{inverse_distance, krige, KrigingSystem, SolveMethod};
pub use surface::{
    estimate_surface, write_surface_csv, write_variogram_csv, CellEstimate, EstimateFlags,
    EstimateSurface, EstimationParams, FieldDiagnostics, FieldFallback,
};
pub use variogram::{
    experimental_variogram, fit_bounded_linear, ExperimentalVariogram, SillSource, VariogramBin,
    VariogramFit, VariogramModel,
};

#[derive(Debug, thiserror::Error)]
pub enum GeostatError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("experimental variogram has no bins")]
    NoBins,
    #[error("variogram has zero sill")]
    DegenerateVariogram,
    #[error("no samples within range of the query point")]
    Unestimable,
    #[error("empty timeslot dataset")]
    EmptyDataset,
    #[error("writing diagnostics: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing diagnostics: {0}")]
    Csv(#[from] csv::Error),
}
