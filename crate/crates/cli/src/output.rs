//! Number formatting, headers and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};

use crate::config::Effective;

pub const TOOL: &str = "bcspec";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seventeen significant digits: exact round trip for every `f64`.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..17).contains(&e) {
        format!("{:.*}", (16 - e) as usize, x)
    } else {
        format!("{:.16e}", x)
    }
}

/// JSON number, or a string for non-finite values.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt17(x))
    }
}

fn seed_value(seed: Option<u64>) -> Value {
    seed.map_or(Value::Null, |s| json!(s))
}

/// CSV text with `#` header lines: tool, version, effective config and seed.
pub fn csv(command: &str, eff: &Effective, seed: Option<u64>, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {TOOL} {VERSION} {command}\n"));
    s.push_str(&format!("# config: {}\n", eff.to_json()));
    s.push_str(&format!("# seed: {}\n", seed_value(seed)));
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// JSON document with a leading `meta` block.
pub fn json_doc(command: &str, eff: &Effective, seed: Option<u64>, body: Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert(
        "meta".into(),
        json!({ "tool": TOOL, "version": VERSION, "command": command, "config": eff.to_json(), "seed": seed_value(seed) }),
    );
    if let Value::Object(m) = body {
        doc.extend(m);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Where artifacts go: files under `--out`, or stdout for the primary one.
pub struct Sink {
    pub dir: Option<PathBuf>,
}

impl Sink {
    /// Writes `name` atomically under the output directory; without one,
    /// primary artifacts are printed and secondary ones dropped.
    pub fn emit(&self, name: &str, text: &str, primary: bool) -> anyhow::Result<()> {
        match &self.dir {
            Some(dir) => {
                let path = write_atomic(dir, name, text)?;
                println!("{}", path.display());
                Ok(())
            }
            None if primary => {
                std::io::stdout().write_all(text.as_bytes()).context("writing to stdout")?;
                Ok(())
            }
            None => Ok(()),
        }
    }
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI * std::f64::consts::PI, 1e-7 / 3.0, -2.0 / 3.0, 6.02e23, 1.0, 123456.789] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(digits.trim_start_matches('0').len(), 17, "{s}");
        }
        assert_eq!(fmt17(std::f64::consts::PI * std::f64::consts::PI), "9.8696044010893580");
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }
}
