use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::CliError;

/// Version stamped on every artifact; bump when a column or field changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Output directory with helpers that stamp the schema header.
pub struct OutputDir {
    root: PathBuf,
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema: &'a str,
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes the fully resolved config next to the results.
    pub fn echo_config(&self, config: &LoadedConfig) -> Result<(), CliError> {
        let mut f = fs::File::create(self.path("config.resolved.toml"))?;
        writeln!(f, "# schema: config v{SCHEMA_VERSION}")?;
        f.write_all(config.to_toml().as_bytes())?;
        Ok(())
    }

    pub fn csv<I>(&self, name: &str, schema: &str, header: &str, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut f = std::io::BufWriter::new(fs::File::create(self.path(name))?);
        writeln!(f, "# schema: {schema} v{SCHEMA_VERSION}")?;
        writeln!(f, "{header}")?;
        for row in rows {
            writeln!(f, "{row}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, schema: &str, body: &T) -> Result<(), CliError> {
        let doc = Versioned {
            schema,
            schema_version: SCHEMA_VERSION,
            body,
        };
        let text = serde_json::to_string_pretty(&doc).expect("output is serializable");
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }
}
