//! Library side of the `levy-tc` command line tool.

pub mod config;
pub mod run;

use levy_tc_core::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const NUMERIC: u8 = 4;
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => exit::PARSE,
        Error::Domain(_) | Error::InvalidParameter(_) | Error::Range(_) => exit::VALIDATION,
        Error::Numeric { .. } | Error::Simulation(_) | Error::Statistics(_) | Error::Io(_) => exit::NUMERIC,
    }
}
