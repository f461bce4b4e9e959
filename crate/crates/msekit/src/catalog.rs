//! Embedded datasets from published modern-slavery multiple systems studies.
//!
//! Every embedded table is checked against its published summary
//! (observations, overlap, list count) when loaded. Setting `MSEKIT_DATA_DIR`
//! makes [`load`] read `<dir>/<name>.csv` instead of the embedded copy; the
//! checksums still apply to the five catalog names.

use std::path::PathBuf;

use crate::data::{parse_dataset, DataError, Dataset};

/// Environment variable that points at a directory of replacement CSVs.
pub const DATA_DIR_ENV: &str = "MSEKIT_DATA_DIR";

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub provenance: &'static str,
    pub timeframe: &'static str,
    pub n_obs: u64,
    pub overlap: u64,
    pub lists: usize,
    csv: &'static str,
}

pub const ENTRIES: [CatalogEntry; 5] = [
    CatalogEntry {
        name: "uk",
        title: "United Kingdom",
        provenance: "Silverman (2014); National Crime Agency strategic assessment, PF and NCA lists merged",
        timeframe: "2013",
        n_obs: 2744,
        overlap: 221,
        lists: 5,
        csv: include_str!("../data/uk.csv"),
    },
    CatalogEntry {
        name: "new-orleans",
        title: "New Orleans",
        provenance: "Bales et al. (2019), five-list version; cells reconstructed from published totals",
        timeframe: "2016",
        n_obs: 185,
        overlap: 12,
        lists: 5,
        csv: include_str!("../data/new-orleans.csv"),
    },
    CatalogEntry {
        name: "netherlands",
        title: "Netherlands",
        provenance: "Van Dijk et al. (2017), lists I and O merged; pair cells reconstructed from published totals",
        timeframe: "2010-2015",
        n_obs: 8234,
        overlap: 431,
        lists: 5,
        csv: include_str!("../data/netherlands.csv"),
    },
    CatalogEntry {
        name: "western-us",
        title: "Western U.S.",
        provenance: "Farrell et al. (2019), Western site; cells reconstructed from published totals",
        timeframe: "2016",
        n_obs: 345,
        overlap: 23,
        lists: 5,
        csv: include_str!("../data/western-us.csv"),
    },
    CatalogEntry {
        name: "australia",
        title: "Australia",
        provenance: "Lyneham et al. (2019); cells reconstructed from published totals",
        timeframe: "2015-16 to 2016-17",
        n_obs: 414,
        overlap: 69,
        lists: 4,
        csv: include_str!("../data/australia.csv"),
    },
];

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

pub fn entry(name: &str) -> Option<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Load a dataset by catalog name, honoring `MSEKIT_DATA_DIR`.
pub fn load(name: &str) -> Result<Dataset, DataError> {
    let override_path = std::env::var_os(DATA_DIR_ENV)
        .map(|dir| PathBuf::from(dir).join(format!("{name}.csv")))
        .filter(|p| p.is_file());
    let entry = entry(name);
    let mut dataset = match (&override_path, entry) {
        (Some(path), _) => {
            let file = std::fs::File::open(path).map_err(|e| DataError::Io(e.to_string()))?;
            parse_dataset(std::io::BufReader::new(file), name)?
        }
        (None, Some(e)) => parse_dataset(e.csv.as_bytes(), name)?,
        (None, None) => {
            return Err(DataError::UnknownDataset {
                name: name.into(),
                available: names().join(", "),
            })
        }
    };
    if let Some(e) = entry {
        verify(&dataset, e)?;
        dataset.provenance = e.provenance.into();
        dataset.timeframe = e.timeframe.into();
    }
    Ok(dataset)
}

/// All five catalog datasets in catalog order.
pub fn load_all() -> Result<Vec<Dataset>, DataError> {
    ENTRIES.iter().map(|e| load(e.name)).collect()
}

fn verify(d: &Dataset, e: &CatalogEntry) -> Result<(), DataError> {
    let got = (d.table.n_obs(), d.table.overlap(), d.table.lists());
    let want = (e.n_obs, e.overlap, e.lists);
    if got != want {
        return Err(DataError::Checksum {
            name: e.name.into(),
            detail: format!("(n_obs, overlap, lists) = {got:?}, expected {want:?}"),
        });
    }
    Ok(())
}
