//! Command-line front end for the disorient-core attack, sweep, and
//! defense pipelines.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod trajectory;
pub mod voids;

use disorient_core::Error;

/// Process exit code for an error: 2 for bad data or parameters the
/// caller can fix, 3 for internal failures.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::TruncatedScan { .. }
        | Error::NonFinitePoint { .. }
        | Error::MalformedPoseLine { .. }
        | Error::ImproperRotation { .. }
        | Error::EmptyCloud
        | Error::EmptyInput
        | Error::InvalidParam(_)
        | Error::TooFewCorrespondences { .. }
        | Error::EmptyGrid
        | Error::MalformedPlan(_) => 2,
        Error::DegenerateGeometry(_) => 3,
    }
}
