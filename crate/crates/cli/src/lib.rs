//! Pipeline behind the `clusterlens` command: configuration, stage
//! orchestration, output bookkeeping and SVG rendering.

pub mod config;
pub mod gradcheck;
pub mod output;
pub mod pipeline;
pub mod svg;

pub use config::{ConfigError, PipelineConfig};
pub use output::RunManifest;
pub use pipeline::{prepare_data, run_explain, run_pipeline, run_synth, run_train, PreparedData};

use clusterlens_core::{Error as CoreError, ErrorKind};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidConfig(_) => EXIT_CONFIG,
                e => match e.kind() {
                    ErrorKind::Numeric => EXIT_NUMERIC,
                    ErrorKind::Data | ErrorKind::Io => EXIT_DATA,
                },
            };
        }
        if cause.downcast_ref::<gradcheck::GradientMismatch>().is_some() {
            return EXIT_NUMERIC;
        }
        if cause.downcast_ref::<svg::RenderError>().is_some() {
            return EXIT_DATA;
        }
    }
    1
}
