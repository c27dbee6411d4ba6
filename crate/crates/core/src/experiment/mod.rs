//! Sweeps over noise strength and scale factor, output series, error
//! surfaces and the peak-splitting diagnostic.

mod backend;
pub mod config;
pub mod dqpt;
pub mod series;
pub mod surface;
pub mod sweep;

pub use backend::{simulate_job, Job, ALPHA_COLUMN};
pub use config::{BackendConfig, ExperimentConfig, ExtrapolationTarget, Observable, Preset};
pub use dqpt::{dqpt_window_report, DqptOptions, DqptReport};
pub use series::TimeSeries;
pub use surface::{error_surface, ErrorSurface, DEFAULT_THRESHOLD};
pub use sweep::{compute_sweep, mitigate, run_sweep, write_sweep, Manifest, SweepResults};
