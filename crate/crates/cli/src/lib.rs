//! Library side of the `nlwr` command-line tool.

pub mod commands;
pub mod config;
pub mod synthetic;

use nonlocal_lwr::Error;

/// 2 for configuration, 4 for input data, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        "ConfigError" => 2,
        "ShapeError" | "CoverageError" | "FormatError" | "EmptyWindowError" | "IoError" => 4,
        _ => 3,
    }
}

/// `error: class=<Class> message="<text>"` on one line.
pub fn error_line(e: &Error) -> String {
    format!("error: class={} message={:?}", e.class(), e.to_string())
}
