//! Trace CSV and atomic file output.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use safelane_core::simulator::TraceRecord;

pub const TRACE_HEADER: &str = "t,x,v,a_n,a_s,x_c,v_c,intervened";

/// Shortest decimal that reads back to the same value (at most 17
/// significant digits, never exponent notation).
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(64 * (trace.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(r.t),
            num(r.state.x),
            num(r.state.v),
            num(r.a_n),
            num(r.a_s),
            num(r.constraint.x_c),
            num(r.constraint.v_c),
            u8::from(r.intervened)
        );
    }
    s
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
