use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use advhdh::report::to_sorted_json;
use advhdh::DesignMatrix;
use serde_json::Value;

use crate::error::CliError;

/// Settings every command shares once flags and config are merged.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub timestamp: bool,
}

impl Ctx {
    /// Writes `value` as sorted-key JSON to `<out>/<name>`, adding the
    /// generation time unless timestamps are off.
    pub fn write_json(&self, name: &str, mut value: Value) -> Result<PathBuf, CliError> {
        if self.timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            if let Value::Object(m) = &mut value {
                m.insert("generated_unix".into(), secs.into());
            }
        }
        self.write_text(name, &to_sorted_json(&value)?)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        let wrap = |source| CliError::Write { path: path.clone(), source };
        std::fs::create_dir_all(&self.out).map_err(wrap)?;
        std::fs::write(&path, text).map_err(wrap)?;
        Ok(path)
    }
}

pub fn load_csv(path: &Path) -> Result<DesignMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    Ok(DesignMatrix::from_csv_reader(file)?)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })
}
