//! Dataset specifications accepted by `--data`.
//!
//! * `blobs[:n=2000,spread=0.08,seed=1,centers=0.3/0.3;0.7/0.3;...]`
//! * `idx:<images>,<labels>[,limit=N][,classes=C]`
//! * `csv:<path>,classes=C`

use std::path::{Path, PathBuf};
use std::str::FromStr;

use zonescan_core::{load_csv, load_idx, make_blobs, LabeledDataset};

use crate::error::CliError;

pub const DEFAULT_CENTERS: [[f64; 2]; 4] = [[0.3, 0.3], [0.7, 0.3], [0.3, 0.7], [0.7, 0.7]];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Blobs {
        n: usize,
        spread: f64,
        seed: u64,
        centers: Vec<[f64; 2]>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        limit: Option<usize>,
        classes: Option<usize>,
    },
    Csv {
        path: PathBuf,
        classes: usize,
    },
}

fn bad(spec: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("data spec '{spec}': {msg}"))
}

fn parse_num<T: FromStr>(spec: &str, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| bad(spec, format!("bad value '{v}' for {key}")))
}

fn parse_centers(spec: &str, v: &str) -> Result<Vec<[f64; 2]>, CliError> {
    v.split(';')
        .map(|c| {
            let (x, y) = c
                .split_once('/')
                .ok_or_else(|| bad(spec, format!("center '{c}' must be x/y")))?;
            Ok([parse_num(spec, "centers", x.trim())?, parse_num(spec, "centers", y.trim())?])
        })
        .collect()
}

impl FromStr for DataSource {
    type Err = CliError;

    fn from_str(spec: &str) -> Result<Self, CliError> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let parts: Vec<&str> = rest.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        match kind.trim() {
            "blobs" => {
                let mut out = DataSource::Blobs {
                    n: 2000,
                    spread: 0.08,
                    seed: 1,
                    centers: DEFAULT_CENTERS.to_vec(),
                };
                let DataSource::Blobs { n, spread, seed, centers } = &mut out else { unreachable!() };
                for p in parts {
                    let (k, v) = p.split_once('=').ok_or_else(|| bad(spec, format!("'{p}' is not key=value")))?;
                    match k.trim() {
                        "n" => *n = parse_num(spec, k, v.trim())?,
                        "spread" => *spread = parse_num(spec, k, v.trim())?,
                        "seed" => *seed = parse_num(spec, k, v.trim())?,
                        "centers" => *centers = parse_centers(spec, v.trim())?,
                        other => return Err(bad(spec, format!("unknown blobs key '{other}'"))),
                    }
                }
                Ok(out)
            }
            "idx" => {
                if parts.len() < 2 {
                    return Err(bad(spec, "expected idx:<images>,<labels>"));
                }
                let (mut limit, mut classes) = (None, None);
                for p in &parts[2..] {
                    match p.split_once('=') {
                        Some(("limit", v)) => limit = Some(parse_num(spec, "limit", v)?),
                        Some(("classes", v)) => classes = Some(parse_num(spec, "classes", v)?),
                        _ => return Err(bad(spec, format!("unknown idx option '{p}'"))),
                    }
                }
                Ok(DataSource::Idx {
                    images: parts[0].into(),
                    labels: parts[1].into(),
                    limit,
                    classes,
                })
            }
            "csv" => {
                let path = parts.first().ok_or_else(|| bad(spec, "expected csv:<path>,classes=C"))?;
                let classes = parts[1..]
                    .iter()
                    .find_map(|p| p.strip_prefix("classes="))
                    .ok_or_else(|| bad(spec, "csv needs classes=C"))?;
                Ok(DataSource::Csv {
                    path: path.into(),
                    classes: parse_num(spec, "classes", classes)?,
                })
            }
            other => Err(bad(spec, format!("unknown source kind '{other}'"))),
        }
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("dataset file {} does not exist", path.display())))
    }
}

impl DataSource {
    /// Fails fast on missing files, before any computation starts.
    pub fn check(&self) -> Result<(), CliError> {
        match self {
            DataSource::Blobs { .. } => Ok(()),
            DataSource::Idx { images, labels, .. } => {
                require_file(images)?;
                require_file(labels)
            }
            DataSource::Csv { path, .. } => require_file(path),
        }
    }

    pub fn load(&self) -> Result<LabeledDataset, CliError> {
        self.check()?;
        Ok(match self {
            DataSource::Blobs { n, spread, seed, centers } => make_blobs(*n, centers, *spread, *seed)?,
            DataSource::Idx { images, labels, limit, classes } => {
                let ds = load_idx(images, labels, *limit)?;
                match classes {
                    Some(c) => ds.with_num_classes(*c)?,
                    None => ds,
                }
            }
            DataSource::Csv { path, classes } => load_csv(path, *classes)?,
        })
    }
}
