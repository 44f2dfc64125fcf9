//! Command-line front end for the `projconvex` library.

pub mod commands;
pub mod error;
pub mod render;
pub mod report;
pub mod spec;

pub use error::CliError;

/// Parses a comma-separated list of numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::InvalidArgument(format!("not a number: {x:?}")))
        })
        .collect()
}
