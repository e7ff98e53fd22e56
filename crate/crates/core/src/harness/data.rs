use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{parse_csv, parse_keel, Dataset};
use crate::{surrogate, Error, Result};

/// Environment variable naming a directory of `<name>.dat` KEEL files.
pub const KEEL_DIR_ENV: &str = "SEMRES_KEEL_DIR";

/// Where a dataset's rows came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataOrigin {
    File { path: PathBuf },
    Surrogate,
}

impl fmt::Display for DataOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataOrigin::File { path } => write!(f, "file {}", path.display()),
            DataOrigin::Surrogate => f.write_str("surrogate"),
        }
    }
}

pub fn keel_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(KEEL_DIR_ENV).map(PathBuf::from).filter(|p| p.is_dir())
}

/// Parses a `.csv` file (last column = class) or anything else as KEEL.
pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(&text, None, None)?
    } else {
        parse_keel(&text)?
    };
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        ds.name = stem.to_string();
    }
    Ok(ds)
}

/// Resolves `spec` as an existing file path, then as `<keel_dir>/<spec>.dat`,
/// then as a surrogate from the built-in catalog.
pub fn load_dataset(spec: &str, keel_dir: Option<&Path>) -> Result<(Dataset, DataOrigin)> {
    let direct = Path::new(spec);
    if direct.is_file() {
        return Ok((read_dataset_file(direct)?, DataOrigin::File { path: direct.to_path_buf() }));
    }
    if let Some(dir) = keel_dir {
        let path = dir.join(format!("{spec}.dat"));
        if path.is_file() {
            return Ok((read_dataset_file(&path)?, DataOrigin::File { path }));
        }
    }
    if surrogate::lookup(spec).is_some() {
        return Ok((surrogate::dataset(spec)?, DataOrigin::Surrogate));
    }
    Err(Error::Config(format!("dataset `{spec}` is neither a file nor a known benchmark name")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_order() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, origin) = load_dataset("haberman", Some(dir.path())).unwrap();
        assert_eq!(origin, DataOrigin::Surrogate);
        assert_eq!(ds.name, "haberman");

        let path = dir.path().join("haberman.dat");
        fs::write(&path, "@relation h\n@attribute a real\n@attribute c {p, n}\n@data\n1, p\n2, n\n3, n\n").unwrap();
        let (ds, origin) = load_dataset("haberman", Some(dir.path())).unwrap();
        assert_eq!(origin, DataOrigin::File { path: path.clone() });
        assert_eq!(ds.len(), 3);

        let csv = dir.path().join("tiny.csv");
        fs::write(&csv, "a,class\n1,x\n2,y\n3,y\n").unwrap();
        let (ds, _) = load_dataset(csv.to_str().unwrap(), None).unwrap();
        assert_eq!(ds.name, "tiny");
        assert!(load_dataset("no-such-data", None).is_err());
    }
}
