//! Artifacts are rendered in memory and written only after the whole study
//! has succeeded. Each file goes to a temporary name first and is renamed
//! into place.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Render with a writer closure, e.g. one of the core CSV exporters.
    pub fn add_with(&mut self, path: impl Into<PathBuf>, render: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) {
        let mut buf = Vec::new();
        render(&mut buf).expect("writing to memory cannot fail");
        self.files.push((path.into(), buf));
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) {
        let mut buf = serde_json::to_vec_pretty(value).expect("artifact serializes");
        buf.push(b'\n');
        self.files.push((path.into(), buf));
    }

    pub fn paths(&self) -> Vec<&Path> {
        self.files.iter().map(|(p, _)| p.as_path()).collect()
    }

    /// Write every artifact below `root`.
    pub fn write_all(&self, root: &Path) -> io::Result<()> {
        for (rel, bytes) in &self.files {
            let path = root.join(rel);
            let dir = path.parent().unwrap_or(root);
            fs::create_dir_all(dir)?;
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
            let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
            let result = (|| {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(bytes)?;
                f.sync_all()?;
                fs::rename(&tmp, &path)
            })();
            if result.is_err() {
                let _ = fs::remove_file(&tmp);
            }
            result?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_nested_files_without_leftovers() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new();
        a.add_with("x/data.csv", |w| writeln!(w, "a,b"));
        a.add_json("summary.json", &serde_json::json!({"k": 1}));
        a.write_all(dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x/data.csv")).unwrap(), "a,b\n");
        let names: Vec<_> = fs::read_dir(dir.path().join("x")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
