//! Diagnostic logging to standard error, gated by the `LEGION_LOG`
//! environment variable: `off` (default), `info`, or `debug`.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Off,
    Info,
    Debug,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn level() -> Level {
    *LEVEL.get_or_init(|| match std::env::var("LEGION_LOG").as_deref() {
        Ok("info") => Level::Info,
        Ok("debug") => Level::Debug,
        _ => Level::Off,
    })
}

pub fn info(args: std::fmt::Arguments<'_>) {
    if level() >= Level::Info {
        eprintln!("[info] {args}");
    }
}

pub fn debug(args: std::fmt::Arguments<'_>) {
    if level() >= Level::Debug {
        eprintln!("[debug] {args}");
    }
}

#[macro_export]
macro_rules! log_info {
    ($($t:tt)*) => { $crate::logging::info(format_args!($($t)*)) };
}

#[macro_export]
macro_rules! log_debug {
    ($($t:tt)*) => { $crate::logging::debug(format_args!($($t)*)) };
}
