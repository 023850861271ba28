//! Process protocol for external estimators and white balancers.
//!
//! One process per image: the tool writes the input crop as an 8-bit PNG
//! into a fresh temporary directory, runs
//! `CMD --input <in.png> --output <out.ext>` and reads the output file back.
//! A template may place the paths itself with `{input}` and `{output}`
//! placeholders (both or neither).

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::write_ldr;
use crate::raster::RasterImage;

const INPUT: &str = "{input}";
const OUTPUT: &str = "{output}";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandTemplate {
    raw: String,
    argv: Vec<String>,
}

impl CommandTemplate {
    pub fn as_str(&self) -> &str {
        &self.raw
    }

    fn argv_for(&self, input: &Path, output: &Path) -> Vec<String> {
        let sub = |a: &String| {
            a.replace(INPUT, &input.to_string_lossy())
                .replace(OUTPUT, &output.to_string_lossy())
        };
        self.argv.iter().map(sub).collect()
    }

    /// Runs the command on `input` and returns the temporary directory holding
    /// the output together with the output path.
    pub fn run(&self, input: &RasterImage, output_ext: &str) -> Result<(tempfile::TempDir, PathBuf)> {
        let dir = tempfile::Builder::new().prefix("chromalight-ext-").tempdir()?;
        let in_path = dir.path().join("input.png");
        let out_path = dir.path().join(format!("output.{output_ext}"));
        write_ldr(&in_path, input)?;
        let argv = self.argv_for(&in_path, &out_path);
        let out = Command::new(&argv[0]).args(&argv[1..]).output().map_err(|e| Error::External {
            message: format!("could not start `{}`: {e}", argv[0]),
            stderr: String::new(),
        })?;
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if !out.status.success() {
            return Err(Error::External {
                message: format!("`{}` exited with {}", self.raw, out.status),
                stderr,
            });
        }
        if !out_path.exists() {
            return Err(Error::External {
                message: format!("`{}` did not write {}", self.raw, out_path.display()),
                stderr,
            });
        }
        Ok((dir, out_path))
    }

    /// Like [`run`](Self::run), then parses the output; parse failures carry
    /// the process's stderr.
    pub fn run_and_read<T>(
        &self,
        input: &RasterImage,
        output_ext: &str,
        read: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<T> {
        let (_dir, path) = self.run(input, output_ext)?;
        read(&path).map_err(|e| Error::External {
            message: format!("`{}` produced malformed output: {e}", self.raw),
            stderr: String::new(),
        })
    }
}

impl FromStr for CommandTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut argv = shlex::split(s)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::InvalidInput(format!("cannot parse command template {s:?}")))?;
        let has_in = argv.iter().any(|a| a.contains(INPUT));
        let has_out = argv.iter().any(|a| a.contains(OUTPUT));
        match (has_in, has_out) {
            (true, true) => {}
            (false, false) => {
                argv.extend(["--input", INPUT, "--output", OUTPUT].map(String::from));
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "command template {s:?} must use both {INPUT} and {OUTPUT} or neither"
                )))
            }
        }
        Ok(Self { raw: s.to_string(), argv })
    }
}

impl fmt::Display for CommandTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}
