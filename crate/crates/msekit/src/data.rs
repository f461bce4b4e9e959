//! List-inclusion count tables: the data model every estimator consumes.
//!
//! A [`CountTable`] holds the number of observed individuals `n_x` for every
//! non-zero inclusion pattern `x` over `L` lists. The all-zero pattern is the
//! unobserved cell and is never stored.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::stats::stream_rng;

/// Largest supported list count.
pub const MAX_LISTS: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: zero pattern not allowed")]
    ZeroPattern { line: usize },
    #[error("line {line}: negative count")]
    NegativeCount { line: usize },
    #[error("line {line}: duplicate pattern {pattern}")]
    DuplicatePattern { line: usize, pattern: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("at least 2 lists are required, found {0}")]
    TooFewLists(usize),
    #[error("at most {MAX_LISTS} lists are supported, found {0}")]
    TooManyLists(usize),
    #[error("duplicate list name `{0}`")]
    DuplicateListName(String),
    #[error("unknown list `{0}`")]
    UnknownList(String),
    #[error("invalid cell probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("no observable mass: p0 = 1")]
    NoObservableMass,
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("dataset `{name}` failed its checksum: {detail}")]
    Checksum { name: String, detail: String },
    #[error("unknown dataset `{name}`; available: {available}")]
    UnknownDataset { name: String, available: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A binary list-inclusion pattern. Bit `j` is set when list `j` records the
/// individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    bits: u16,
    lists: u8,
}

impl Pattern {
    pub fn new(bits: u16, lists: usize) -> Self {
        assert!(lists <= MAX_LISTS, "too many lists");
        assert!(u32::from(bits) < (1u32 << lists), "bits outside list range");
        Pattern { bits, lists: lists as u8 }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let bits = flags
            .iter()
            .enumerate()
            .fold(0u16, |acc, (j, &f)| if f { acc | (1 << j) } else { acc });
        Pattern::new(bits, flags.len())
    }

    pub fn bits(self) -> u16 {
        self.bits
    }

    pub fn lists(self) -> usize {
        self.lists as usize
    }

    /// Number of lists the pattern appears on, `|x|`.
    pub fn weight(self) -> u32 {
        self.bits.count_ones()
    }

    pub fn contains(self, list: usize) -> bool {
        self.bits & (1 << list) != 0
    }

    pub fn is_zero(self) -> bool {
        self.bits == 0
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.lists() {
            f.write_str(if self.contains(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All non-zero bitmasks over `lists` lists in canonical order: by number of
/// lists, then lexicographically with earlier lists first (`10..` before `01..`).
pub fn canonical_masks(lists: usize) -> Vec<u16> {
    let mut masks: Vec<u16> = (1..(1u32 << lists)).map(|m| m as u16).collect();
    masks.sort_by_key(|&m| (m.count_ones(), (0..lists).map(|j| (m >> j) & 1 == 0).collect::<Vec<_>>()));
    masks
}

/// Observed counts over the non-zero inclusion patterns of `L` lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    list_names: Vec<String>,
    /// Dense counts indexed by bitmask; entry 0 is always zero.
    counts: Vec<u64>,
}

impl CountTable {
    /// Build a table from dense counts indexed by bitmask. `counts[0]` must be 0.
    pub fn from_dense(list_names: Vec<String>, counts: Vec<u64>) -> Result<Self, DataError> {
        let lists = list_names.len();
        if lists == 0 {
            return Err(DataError::TooFewLists(0));
        }
        if lists > MAX_LISTS {
            return Err(DataError::TooManyLists(lists));
        }
        let mut seen = HashSet::new();
        for name in &list_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateListName(name.clone()));
            }
        }
        if counts.len() != 1 << lists {
            return Err(DataError::Malformed {
                line: 0,
                reason: format!("expected {} cells, got {}", 1 << lists, counts.len()),
            });
        }
        if counts[0] != 0 {
            return Err(DataError::ZeroPattern { line: 0 });
        }
        Ok(CountTable { list_names, counts })
    }

    /// Build a table from `(pattern, count)` pairs; absent patterns are zero.
    pub fn from_cells(
        list_names: Vec<String>,
        cells: impl IntoIterator<Item = (u16, u64)>,
    ) -> Result<Self, DataError> {
        let mut counts = vec![0u64; 1 << list_names.len().min(MAX_LISTS + 1)];
        for (mask, n) in cells {
            if mask == 0 {
                return Err(DataError::ZeroPattern { line: 0 });
            }
            let slot = counts.get_mut(mask as usize).ok_or_else(|| DataError::Malformed {
                line: 0,
                reason: format!("pattern {mask:#b} outside list range"),
            })?;
            *slot += n;
        }
        CountTable::from_dense(list_names, counts)
    }

    /// Table over lists named `L1..LL`.
    pub fn with_default_names(counts: Vec<u64>) -> Result<Self, DataError> {
        let lists = counts.len().trailing_zeros() as usize;
        CountTable::from_dense(default_list_names(lists), counts)
    }

    pub fn lists(&self) -> usize {
        self.list_names.len()
    }

    pub fn list_names(&self) -> &[String] {
        &self.list_names
    }

    pub fn list_index(&self, name: &str) -> Option<usize> {
        self.list_names.iter().position(|n| n == name)
    }

    pub fn count(&self, mask: u16) -> u64 {
        self.counts[mask as usize]
    }

    /// Dense counts indexed by bitmask (entry 0 is zero).
    pub fn dense(&self) -> &[u64] {
        &self.counts
    }

    /// Non-zero patterns and their counts in canonical order, zero counts included.
    pub fn cells(&self) -> impl Iterator<Item = (Pattern, u64)> + '_ {
        let lists = self.lists();
        canonical_masks(lists)
            .into_iter()
            .map(move |m| (Pattern::new(m, lists), self.counts[m as usize]))
    }

    pub fn n_obs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Individuals observed on two or more lists.
    pub fn overlap(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(m, _)| m.count_ones() >= 2)
            .map(|(_, n)| n)
            .sum()
    }

    /// Number of individuals recorded by each list.
    pub fn list_totals(&self) -> Vec<u64> {
        (0..self.lists())
            .map(|j| {
                self.counts
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| m & (1 << j) != 0)
                    .map(|(_, n)| n)
                    .sum()
            })
            .collect()
    }

    /// Reorder lists so that new list `k` is old list `perm[k]`.
    pub fn permute_lists(&self, perm: &[usize]) -> CountTable {
        assert_eq!(perm.len(), self.lists());
        let mut counts = vec![0u64; self.counts.len()];
        for (old, &n) in self.counts.iter().enumerate() {
            let new = permute_mask(old as u16, perm);
            counts[new as usize] = n;
        }
        CountTable {
            list_names: perm.iter().map(|&p| self.list_names[p].clone()).collect(),
            counts,
        }
    }

    /// One bitmask per observed individual, in canonical pattern order.
    pub fn individuals(&self) -> Vec<u16> {
        let mut out = Vec::with_capacity(self.n_obs() as usize);
        for m in canonical_masks(self.lists()) {
            out.extend(std::iter::repeat_n(m, self.counts[m as usize] as usize));
        }
        out
    }

    /// Table of the given individuals over this table's lists.
    pub fn from_individuals(&self, individuals: &[u16]) -> CountTable {
        let mut counts = vec![0u64; self.counts.len()];
        for &m in individuals {
            counts[m as usize] += 1;
        }
        CountTable { list_names: self.list_names.clone(), counts }
    }

    /// Copy with one individual removed from `mask` (saturating at zero).
    pub fn without_one(&self, mask: u16) -> CountTable {
        let mut t = self.clone();
        t.counts[mask as usize] = t.counts[mask as usize].saturating_sub(1);
        t
    }

    /// Serialize in the pattern-count CSV format, one row per non-zero
    /// pattern in canonical order.
    pub fn to_csv(&self) -> String {
        let mut out = self.list_names.join(",");
        out.push_str(",count\n");
        for (p, n) in self.cells() {
            for j in 0..self.lists() {
                out.push_str(if p.contains(j) { "1," } else { "0," });
            }
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }
}

pub(crate) fn permute_mask(mask: u16, perm: &[usize]) -> u16 {
    perm.iter()
        .enumerate()
        .fold(0u16, |acc, (new, &old)| if mask & (1 << old) != 0 { acc | (1 << new) } else { acc })
}

pub fn default_list_names(lists: usize) -> Vec<String> {
    (1..=lists).map(|j| format!("L{j}")).collect()
}

/// A named count table with its citation and collection period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub table: CountTable,
    pub provenance: String,
    pub timeframe: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub n_obs: u64,
    pub overlap: u64,
    pub list_totals: Vec<u64>,
}

impl DatasetSummary {
    pub fn overlap_fraction(&self) -> f64 {
        self.overlap as f64 / self.n_obs as f64
    }
}

/// Parse the pattern-count CSV format: a header `list1,...,listL,count`
/// followed by one row per non-zero pattern.
pub fn parse_dataset<R: BufRead>(source: R, name: &str) -> Result<Dataset, DataError> {
    let mut lines = source.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(DataError::Io(e.to_string()))),
    });

    let (header_line, header) = lines
        .next()
        .transpose()?
        .ok_or(DataError::Malformed { line: 1, reason: "missing header".into() })?;
    let columns: Vec<String> =
        header.trim_start_matches('\u{feff}').split(',').map(|s| s.trim().to_string()).collect();
    match columns.last() {
        Some(c) if c == "count" => {}
        _ => {
            return Err(DataError::Malformed {
                line: header_line,
                reason: "last header column must be `count`".into(),
            })
        }
    }
    let list_names = columns[..columns.len() - 1].to_vec();
    let lists = list_names.len();
    if lists < 2 {
        return Err(DataError::TooFewLists(lists));
    }
    if lists > MAX_LISTS {
        return Err(DataError::TooManyLists(lists));
    }
    if let Some(empty) = list_names.iter().find(|n| n.is_empty()) {
        return Err(DataError::DuplicateListName(empty.clone()));
    }

    let mut counts = vec![0u64; 1 << lists];
    let mut seen = vec![false; 1 << lists];
    for row in lines {
        let (line, text) = row?;
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != lists + 1 {
            return Err(DataError::Malformed {
                line,
                reason: format!("expected {} fields, got {}", lists + 1, fields.len()),
            });
        }
        let mut mask = 0u16;
        for (j, f) in fields[..lists].iter().enumerate() {
            match *f {
                "0" => {}
                "1" => mask |= 1 << j,
                other => {
                    return Err(DataError::Malformed {
                        line,
                        reason: format!("inclusion flag must be 0 or 1, got `{other}`"),
                    })
                }
            }
        }
        let raw = fields[lists];
        let count: i64 = raw.parse().map_err(|_| DataError::Malformed {
            line,
            reason: format!("count `{raw}` is not an integer"),
        })?;
        if count < 0 {
            return Err(DataError::NegativeCount { line });
        }
        if mask == 0 {
            return Err(DataError::ZeroPattern { line });
        }
        if std::mem::replace(&mut seen[mask as usize], true) {
            return Err(DataError::DuplicatePattern {
                line,
                pattern: Pattern::new(mask, lists).to_string(),
            });
        }
        counts[mask as usize] = count as u64;
    }

    Ok(Dataset {
        name: name.to_string(),
        table: CountTable::from_dense(list_names, counts)?,
        provenance: String::new(),
        timeframe: String::new(),
    })
}

pub fn summarize_dataset(d: &Dataset) -> DatasetSummary {
    DatasetSummary {
        n_obs: d.table.n_obs(),
        overlap: d.table.overlap(),
        list_totals: d.table.list_totals(),
    }
}

/// The cases recorded by a reference list, over the remaining lists, with
/// the reference list's size as known ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionedDataset {
    pub base: String,
    pub reference_list: String,
    pub table: CountTable,
    pub ground_truth: u64,
}

impl ConditionedDataset {
    /// Cases recorded only by the reference list; unobserved after conditioning.
    pub fn reference_only(&self) -> u64 {
        self.ground_truth - self.table.n_obs()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Conditioning {
    Kept(ConditionedDataset),
    Excluded { base: String, reference_list: String, n_obs: u64, min_obs: u64 },
}

impl Conditioning {
    pub fn kept(self) -> Option<ConditionedDataset> {
        match self {
            Conditioning::Kept(c) => Some(c),
            Conditioning::Excluded { .. } => None,
        }
    }
}

/// Condition on individuals recorded by `reference` and drop that list.
pub fn condition_on_reference(
    d: &Dataset,
    reference: &str,
    min_obs: u64,
) -> Result<Conditioning, DataError> {
    let table = &d.table;
    let r = table.list_index(reference).ok_or_else(|| DataError::UnknownList(reference.into()))?;
    let lists = table.lists();
    if lists < 3 {
        return Err(DataError::TooFewLists(lists - 1));
    }
    let names: Vec<String> =
        table.list_names().iter().enumerate().filter(|&(j, _)| j != r).map(|(_, n)| n.clone()).collect();
    let mut counts = vec![0u64; 1 << (lists - 1)];
    let mut ground_truth = 0;
    for (mask, &n) in table.dense().iter().enumerate() {
        if mask & (1 << r) == 0 {
            continue;
        }
        ground_truth += n;
        let low = mask & ((1 << r) - 1);
        let high = (mask >> (r + 1)) << r;
        counts[low | high] += n;
    }
    counts[0] = 0;
    let conditioned = CountTable::from_dense(names, counts)?;
    let n_obs = conditioned.n_obs();
    if n_obs < min_obs {
        return Ok(Conditioning::Excluded {
            base: d.name.clone(),
            reference_list: reference.into(),
            n_obs,
            min_obs,
        });
    }
    Ok(Conditioning::Kept(ConditionedDataset {
        base: d.name.clone(),
        reference_list: reference.into(),
        table: conditioned,
        ground_truth,
    }))
}

/// Probabilities `p_x` for every pattern in `{0,1}^L`, the all-zero cell included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellProbabilities {
    lists: usize,
    probs: Vec<f64>,
}

impl CellProbabilities {
    /// `probs` is indexed by bitmask. With `require_positive`, every cell
    /// must be strictly positive.
    pub fn new(lists: usize, probs: Vec<f64>, require_positive: bool) -> Result<Self, DataError> {
        if lists == 0 || lists > MAX_LISTS {
            return Err(DataError::InvalidProbabilities(format!("unsupported list count {lists}")));
        }
        if probs.len() != 1 << lists {
            return Err(DataError::InvalidProbabilities(format!(
                "expected {} cells, got {}",
                1 << lists,
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(DataError::InvalidProbabilities(format!("cell probability {p}")));
        }
        if require_positive && probs.iter().any(|&p| p <= 0.0) {
            return Err(DataError::InvalidProbabilities("zero cell probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DataError::InvalidProbabilities(format!("probabilities sum to {total}")));
        }
        Ok(CellProbabilities { lists, probs })
    }

    /// Independent lists with the given inclusion probabilities.
    pub fn independent(inclusion: &[f64]) -> Result<Self, DataError> {
        let lists = inclusion.len();
        if lists == 0 || lists > MAX_LISTS {
            return Err(DataError::InvalidProbabilities(format!("unsupported list count {lists}")));
        }
        if inclusion.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(DataError::InvalidProbabilities("inclusion outside [0, 1]".into()));
        }
        let probs = (0..1usize << lists)
            .map(|m| {
                inclusion
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| if m & (1 << j) != 0 { l } else { 1.0 - l })
                    .product()
            })
            .collect::<Vec<f64>>();
        let total: f64 = probs.iter().sum();
        CellProbabilities::new(lists, probs.iter().map(|p| p / total).collect(), false)
    }

    pub fn lists(&self) -> usize {
        self.lists
    }

    pub fn p(&self, mask: u16) -> f64 {
        self.probs[mask as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p0(&self) -> f64 {
        self.probs[0]
    }

    /// Probability of pattern `x` given the individual is observed.
    pub fn q(&self, mask: u16) -> f64 {
        assert!(mask != 0, "q is defined for observed patterns only");
        self.probs[mask as usize] / (1.0 - self.p0())
    }

    /// Observed counts for a population of size `n`: `n_obs` is binomial with
    /// success probability `1 - p0`, and cells are multinomial with `q_x`.
    pub fn simulate_counts(&self, n: u64, seed: u64) -> Result<CountTable, DataError> {
        if n == 0 {
            return Err(DataError::EmptyPopulation);
        }
        let observable: f64 = self.probs[1..].iter().sum();
        if observable <= 0.0 {
            return Err(DataError::NoObservableMass);
        }
        let mut rng = stream_rng(seed, 0);
        let n_obs = sample_binomial(&mut rng, n, observable.min(1.0));
        let mut counts = vec![0u64; self.probs.len()];
        let mut remaining_n = n_obs;
        let mut remaining_p = observable;
        let masks = canonical_masks(self.lists);
        for (i, &m) in masks.iter().enumerate() {
            if remaining_n == 0 {
                break;
            }
            let p = self.probs[m as usize];
            if i + 1 == masks.len() {
                counts[m as usize] = remaining_n;
                break;
            }
            let share = if remaining_p > 0.0 { (p / remaining_p).clamp(0.0, 1.0) } else { 0.0 };
            let k = sample_binomial(&mut rng, remaining_n, share);
            counts[m as usize] = k;
            remaining_n -= k;
            remaining_p -= p;
        }
        CountTable::with_default_names(counts)
    }
}

pub(crate) fn sample_binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}
