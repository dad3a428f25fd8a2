use super::label::LabelMap;
use crate::config::parse_pairs;
use crate::error::{Error, Result};

/// Surjective many-to-one relabeling of a fine taxonomy onto a coarse one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyMap {
    table: Vec<u8>,
    targets: usize,
}

/// Shipped 20→8 merge of fine human-part labels into coarse parts.
pub const DEFAULT_MERGE: &str = include_str!("../../config/lip_to_ppss.cfg");
/// Shipped left/right pairs of the 20-class taxonomy.
pub const DEFAULT_FLIP: &str = include_str!("../../config/lip_flip.cfg");

impl TaxonomyMap {
    /// `table[source] = target`; every target id below the maximum must be hit.
    pub fn new(table: Vec<u8>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::config("taxonomy", "empty table"));
        }
        let targets = *table.iter().max().expect("nonempty") as usize + 1;
        let mut hit = vec![false; targets];
        for &t in &table {
            hit[t as usize] = true;
        }
        if let Some(gap) = hit.iter().position(|h| !h) {
            return Err(Error::config(
                "taxonomy",
                format!("target class {gap} has no source"),
            ));
        }
        Ok(Self { table, targets })
    }

    /// `source = target` lines covering sources `0..n` exactly once each.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs: Vec<(usize, u8)> = parse_pairs("taxonomy", text)?;
        let n = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let mut table: Vec<Option<u8>> = vec![None; n];
        for (s, t) in pairs {
            if table[s].replace(t).is_some() {
                return Err(Error::config(
                    "taxonomy",
                    format!("source class {s} mapped twice"),
                ));
            }
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(s, t)| {
                t.ok_or_else(|| Error::config("taxonomy", format!("source class {s} is unmapped")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(table)
    }

    pub fn default_merge() -> Self {
        Self::parse(DEFAULT_MERGE).expect("shipped table is valid")
    }

    pub fn identity(classes: usize) -> Self {
        Self::new((0..classes).map(|c| c as u8).collect()).expect("identity is surjective")
    }

    pub fn sources(&self) -> usize {
        self.table.len()
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn map(&self, source: u8) -> u8 {
        self.table[source as usize]
    }
}

pub fn merge_taxonomy(map: &LabelMap, t: &TaxonomyMap) -> Result<LabelMap> {
    if map.classes() > t.sources() {
        return Err(Error::InvalidArgument(format!(
            "label map has {} classes, taxonomy covers {}",
            map.classes(),
            t.sources()
        )));
    }
    let data = map.data().iter().map(|&c| t.map(c)).collect();
    LabelMap::new(map.height(), map.width(), t.targets(), data)
}
