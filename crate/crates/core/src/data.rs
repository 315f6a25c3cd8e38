//! Dataset ingestion, per-individual normalization, padding with validity
//! masks, temporal train/test splits and cluster-label files.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// One individual's observed series, features as rows and time as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualSeries {
    pub id: String,
    pub values: Matrix,
}

impl IndividualSeries {
    pub fn new(id: impl Into<String>, values: Matrix) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if !values.is_finite() {
            return Err(Error::ShapeMismatch("series contains non-finite values".into()));
        }
        Ok(Self {
            id: id.into(),
            values,
        })
    }

    /// Number of observed time-points `T_i`.
    pub fn t_len(&self) -> usize {
        self.values.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtsDataset {
    pub individuals: Vec<IndividualSeries>,
    pub feature_names: Vec<String>,
}

impl MtsDataset {
    pub fn new(individuals: Vec<IndividualSeries>, feature_names: Vec<String>) -> Result<Self> {
        if individuals.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for ind in &individuals {
            if !seen.insert(ind.id.as_str()) {
                return Err(Error::DuplicateId(ind.id.clone()));
            }
            if ind.values.rows() != feature_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "`{}` has {} features, dataset declares {}",
                    ind.id,
                    ind.values.rows(),
                    feature_names.len()
                )));
            }
        }
        Ok(Self {
            individuals,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.individuals.iter().map(|i| i.id.clone()).collect()
    }

    /// Writes the long-format CSV accepted by [`load_dataset`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["individual_id".to_string(), "time_index".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for ind in &self.individuals {
            for t in 0..ind.t_len() {
                let mut rec = vec![ind.id.clone(), t.to_string()];
                rec.extend((0..self.n_features()).map(|f| format!("{}", ind.values[(f, t)])));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Column names of the long-format input table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub id_column: String,
    pub time_column: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            id_column: "individual_id".into(),
            time_column: "time_index".into(),
        }
    }
}

pub fn load_dataset(path: &Path, schema: &IngestConfig) -> Result<MtsDataset> {
    read_dataset(std::fs::File::open(path)?, schema)
}

/// Parses a long-format table. Rows are grouped by id (ids sorted
/// lexicographically) and by time index; gaps inside an individual's observed
/// span and empty cells are filled by linear interpolation per feature.
pub fn read_dataset<R: Read>(input: R, schema: &IngestConfig) -> Result<MtsDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::MalformedRow {
            line: 1,
            reason: format!("missing column `{name}`"),
        })
    };
    let id_col = find(&schema.id_column)?;
    let time_col = find(&schema.time_column)?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != id_col && c != time_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "no feature columns".into(),
        });
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut rows: BTreeMap<String, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::InconsistentFeatureCount {
                line,
                expected: feature_cols.len(),
                found: rec.len().saturating_sub(2),
            });
        }
        let id = rec[id_col].to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty individual id".into(),
            });
        }
        let t: i64 = rec[time_col].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("time index `{}` is not an integer", &rec[time_col]),
        })?;
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &rec[c];
            if cell.is_empty() {
                values.push(f64::NAN);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::MalformedRow {
                        line,
                        reason: format!("`{cell}` in column `{}` is not a finite number", &header[c]),
                    })
                }
            }
        }
        if rows.entry(id.clone()).or_default().insert(t, values).is_some() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate time index {t} for `{id}`"),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let v = feature_names.len();
    let mut individuals = Vec::with_capacity(rows.len());
    for (id, by_time) in rows {
        let first = *by_time.keys().next().expect("non-empty group");
        let last = *by_time.keys().next_back().expect("non-empty group");
        let t_len = (last - first + 1) as usize;
        let mut values = Matrix::new(v, t_len, vec![f64::NAN; v * t_len])?;
        for (t, row) in &by_time {
            let col = (t - first) as usize;
            for (f, &x) in row.iter().enumerate() {
                values[(f, col)] = x;
            }
        }
        for f in 0..v {
            if !fill_gaps(values.row_mut(f)) {
                return Err(Error::MalformedRow {
                    line: 0,
                    reason: format!("feature `{}` never observed for `{id}`", feature_names[f]),
                });
            }
        }
        individuals.push(IndividualSeries::new(id, values)?);
    }
    MtsDataset::new(individuals, feature_names)
}

/// Linear interpolation over interior NaN runs; leading and trailing runs
/// take the nearest observed value. Returns false if nothing is observed.
fn fill_gaps(row: &mut [f64]) -> bool {
    let observed: Vec<usize> = (0..row.len()).filter(|&t| !row[t].is_nan()).collect();
    let (Some(&lo), Some(&hi)) = (observed.first(), observed.last()) else {
        return false;
    };
    for t in 0..lo {
        row[t] = row[lo];
    }
    for t in hi + 1..row.len() {
        row[t] = row[hi];
    }
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (row[a], row[b]);
        for t in a + 1..b {
            let w = (t - a) as f64 / (b - a) as f64;
            row[t] = ya + w * (yb - ya);
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    MinMax,
    ZScore,
    /// Leave values untouched (data already on a common scale).
    None,
}

/// Rescales every feature of every individual using that individual's own
/// statistics. Features without two distinct values map to 0.5 (min-max) or
/// 0.0 (z-score).
pub fn normalize_per_individual(ds: &MtsDataset, mode: Normalization) -> MtsDataset {
    let mut out = ds.clone();
    if mode == Normalization::None {
        return out;
    }
    for ind in &mut out.individuals {
        for f in 0..ind.values.rows() {
            let row = ind.values.row_mut(f);
            let (min, max) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            let constant = max - min <= 0.0;
            match mode {
                Normalization::MinMax => {
                    let range = max - min;
                    for x in row.iter_mut() {
                        *x = if constant { 0.5 } else { (*x - min) / range };
                    }
                }
                Normalization::ZScore => {
                    let n = row.len() as f64;
                    let mean = row.iter().sum::<f64>() / n;
                    let sd = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    for x in row.iter_mut() {
                        *x = if constant || sd == 0.0 { 0.0 } else { (*x - mean) / sd };
                    }
                }
                Normalization::None => unreachable!(),
            }
        }
    }
    out
}

/// Rectangular `N x V x T` view of a dataset with a per-individual validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedDataset {
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// One `V x t_pad` matrix per individual, zero beyond the observed prefix.
    pub tensor: Vec<Matrix>,
    /// `mask[i][t]` is true on the observed prefix of individual `i`.
    pub mask: Vec<Vec<bool>>,
    pub t_pad: usize,
}

impl PaddedDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn t_valid(&self, i: usize) -> usize {
        self.mask[i].iter().take_while(|&&m| m).count()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Drops the padding again, recovering the observed series.
    pub fn strip(&self) -> MtsDataset {
        let individuals = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| IndividualSeries {
                id: id.clone(),
                values: self.tensor[i].top_left(self.n_features(), self.t_valid(i)),
            })
            .collect();
        MtsDataset {
            individuals,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> PaddedDataset {
        PaddedDataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            tensor: rows.iter().map(|&i| self.tensor[i].clone()).collect(),
            mask: rows.iter().map(|&i| self.mask[i].clone()).collect(),
            t_pad: self.t_pad,
        }
    }
}

/// Zero-pads every series to `t_cap` (or the longest series) on the right.
pub fn pad_and_mask(ds: &MtsDataset, t_cap: Option<usize>) -> Result<PaddedDataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let longest = ds.individuals.iter().map(IndividualSeries::t_len).max().unwrap_or(0);
    let t_pad = match t_cap {
        Some(cap) if cap < longest => {
            return Err(Error::CapTooSmall {
                cap,
                needed: longest,
            })
        }
        Some(cap) => cap,
        None => longest,
    };
    let v = ds.n_features();
    let mut tensor = Vec::with_capacity(ds.len());
    let mut mask = Vec::with_capacity(ds.len());
    for ind in &ds.individuals {
        let t_i = ind.t_len();
        let mut m = Matrix::zeros(v, t_pad);
        for f in 0..v {
            m.row_mut(f)[..t_i].copy_from_slice(ind.values.row(f));
        }
        tensor.push(m);
        mask.push((0..t_pad).map(|t| t < t_i).collect());
    }
    Ok(PaddedDataset {
        ids: ds.ids(),
        feature_names: ds.feature_names.clone(),
        tensor,
        mask,
        t_pad,
    })
}

/// Per individual, the first `floor(frac * T_i)` observed points go to the
/// train split and the rest to the test split; each split is re-padded.
pub fn temporal_split(pd: &PaddedDataset, frac: f64) -> Result<(PaddedDataset, PaddedDataset)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {frac} outside (0, 1)")));
    }
    let v = pd.n_features();
    let mut train = Vec::with_capacity(pd.len());
    let mut test = Vec::with_capacity(pd.len());
    for (i, id) in pd.ids.iter().enumerate() {
        let t_i = pd.t_valid(i);
        // small slack so that e.g. 0.7 * 30 does not floor to 20
        let n_train = (frac * t_i as f64 + 1e-9).floor() as usize;
        if n_train < 1 || n_train >= t_i {
            return Err(Error::DegenerateSplit {
                id: id.clone(),
                t_len: t_i,
                frac,
            });
        }
        let series = &pd.tensor[i];
        let slice = |from: usize, to: usize| {
            let mut m = Matrix::zeros(v, to - from);
            for f in 0..v {
                m.row_mut(f).copy_from_slice(&series.row(f)[from..to]);
            }
            IndividualSeries {
                id: id.clone(),
                values: m,
            }
        };
        train.push(slice(0, n_train));
        test.push(slice(n_train, t_i));
    }
    let wrap = |individuals| MtsDataset {
        individuals,
        feature_names: pd.feature_names.clone(),
    };
    Ok((pad_and_mask(&wrap(train), None)?, pad_and_mask(&wrap(test), None)?))
}

/// Validated assignment of individuals to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    assignment: BTreeMap<String, usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(assignment: BTreeMap<String, usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidK(k));
        }
        let mut sizes = vec![0usize; k];
        for (id, &c) in &assignment {
            if c >= k {
                return Err(Error::UnknownCluster {
                    id: id.clone(),
                    label: c as i64,
                    k,
                });
            }
            sizes[c] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(empty));
        }
        Ok(Self { assignment, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.assignment.iter().map(|(id, &c)| (id.as_str(), c))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Cluster of each id in `order`.
    pub fn aligned(&self, order: &[String]) -> Result<Vec<usize>> {
        order
            .iter()
            .map(|id| self.get(id).ok_or_else(|| Error::MissingId(id.clone())))
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["individual_id", "cluster"])?;
        for (id, c) in self.iter() {
            w.write_record([id, &c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_cluster_labels(path: &Path, k: usize) -> Result<ClusterLabels> {
    read_cluster_labels(std::fs::File::open(path)?, k)
}

pub fn read_cluster_labels<R: Read>(input: R, k: usize) -> Result<ClusterLabels> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut assignment = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: "expected `individual_id,cluster`".into(),
            });
        }
        let id = rec[0].to_string();
        let label: i64 = rec[1].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("cluster `{}` is not an integer", &rec[1]),
        })?;
        if label < 0 || label >= k as i64 {
            return Err(Error::UnknownCluster { id, label, k });
        }
        if assignment.insert(id.clone(), label as usize).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    ClusterLabels::new(assignment, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MtsDataset> {
        read_dataset(text.as_bytes(), &IngestConfig::default())
    }

    fn series(id: &str, rows: &[Vec<f64>]) -> IndividualSeries {
        IndividualSeries::new(id, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn loads_two_individuals_sorted() {
        let ds = parse(
            "individual_id,time_index,pa,na\n\
             b,0,1,2\nb,1,1,2\nb,2,1,2\n\
             a,2,3,4\na,0,1,2\na,1,2,3\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.ids(), vec!["a", "b"]);
        assert_eq!(ds.individuals[0].values.row(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn interpolates_missing_time_point() {
        let ds = parse("individual_id,time_index,x\na,0,1.0\na,2,4.0\n").unwrap();
        assert_eq!(ds.individuals[0].t_len(), 3);
        assert_eq!(ds.individuals[0].values.row(0), &[1.0, 2.5, 4.0]);
    }

    #[test]
    fn interpolates_empty_cells_and_holds_edges() {
        let ds = parse("individual_id,time_index,x\na,0,\na,1,2\na,2,\na,3,8\na,4,\n").unwrap();
        assert_eq!(ds.individuals[0].values.row(0), &[2.0, 2.0, 5.0, 8.0, 8.0]);
    }

    #[test]
    fn non_numeric_cell() {
        let r = parse("individual_id,time_index,x\na,0,abc\n");
        assert!(matches!(r, Err(Error::MalformedRow { .. })));
    }

    #[test]
    fn ragged_row() {
        let r = parse("individual_id,time_index,x,y\na,0,1\n");
        assert!(matches!(r, Err(Error::InconsistentFeatureCount { .. })));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(
            parse("individual_id,time_index,x\n"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn min_max_examples() {
        let ds = MtsDataset::new(
            vec![series("a", &[vec![1.0, 4.0, 7.0], vec![3.0, 3.0, 3.0]])],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let n = normalize_per_individual(&ds, Normalization::MinMax);
        assert_eq!(n.individuals[0].values.row(0), &[0.0, 0.5, 1.0]);
        assert_eq!(n.individuals[0].values.row(1), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn z_score_uses_population_sd() {
        let ds = MtsDataset::new(
            vec![series("a", &[vec![2.0, 4.0], vec![5.0, 5.0]])],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let n = normalize_per_individual(&ds, Normalization::ZScore);
        let row = n.individuals[0].values.row(0);
        // mean 3, population sd 1
        assert_eq!(row, &[-1.0, 1.0]);
        assert_eq!(row.iter().sum::<f64>(), 0.0);
        assert_eq!(n.individuals[0].values.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn padding_examples() {
        let ds = MtsDataset::new(
            vec![
                series("a", &[vec![1.0, 2.0, 3.0]]),
                series("b", &[vec![1.0, 2.0, 3.0, 4.0, 5.0]]),
            ],
            vec!["x".into()],
        )
        .unwrap();
        let pd = pad_and_mask(&ds, None).unwrap();
        assert_eq!(pd.t_pad, 5);
        assert_eq!(pd.mask[0], vec![true, true, true, false, false]);
        assert_eq!(pd.tensor[0].row(0), &[1.0, 2.0, 3.0, 0.0, 0.0]);
        assert!(matches!(
            pad_and_mask(&ds, Some(4)),
            Err(Error::CapTooSmall { cap: 4, needed: 5 })
        ));
    }

    #[test]
    fn padding_identity_case() {
        let ds = MtsDataset::new(vec![series("a", &[vec![0.1, 0.2, 0.3, 0.4]])], vec!["x".into()])
            .unwrap();
        let pd = pad_and_mask(&ds, Some(4)).unwrap();
        assert_eq!(pd.tensor[0], ds.individuals[0].values);
        assert!(pd.mask[0].iter().all(|&m| m));
    }

    #[test]
    fn padding_to_ema_length_range() {
        let ds = MtsDataset::new(
            vec![series("a", &[vec![0.5; 224]]), series("b", &[vec![0.5; 112]])],
            vec!["x".into()],
        )
        .unwrap();
        assert_eq!(pad_and_mask(&ds, None).unwrap().t_pad, 224);
    }

    fn split_one(t: usize, frac: f64) -> Result<(usize, usize)> {
        let ds = MtsDataset::new(vec![series("a", &[vec![0.5; t]])], vec!["x".into()]).unwrap();
        let (tr, te) = temporal_split(&pad_and_mask(&ds, None).unwrap(), frac)?;
        Ok((tr.t_valid(0), te.t_valid(0)))
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_one(10, 0.7).unwrap(), (7, 3));
        assert_eq!(split_one(224, 0.7).unwrap(), (156, 68));
        assert_eq!(split_one(219, 0.7).unwrap(), (153, 66));
        assert_eq!(split_one(2, 0.99).unwrap(), (1, 1));
        assert!(matches!(split_one(1, 0.5), Err(Error::DegenerateSplit { .. })));
        assert!(split_one(10, 1.0).is_err());
    }

    #[test]
    fn split_keeps_order_of_points() {
        let ds = MtsDataset::new(
            vec![series("a", &[vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]])],
            vec!["x".into()],
        )
        .unwrap();
        let (tr, te) = temporal_split(&pad_and_mask(&ds, None).unwrap(), 0.7).unwrap();
        assert_eq!(tr.tensor[0].row(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(te.tensor[0].row(0), &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn label_files() {
        let ok = read_cluster_labels("individual_id,cluster\na,0\nb,1\nc,2\n".as_bytes(), 3).unwrap();
        assert_eq!(ok.k(), 3);
        assert_eq!(ok.cluster_sizes(), vec![1, 1, 1]);
        assert!(matches!(
            read_cluster_labels("individual_id,cluster\na,5\n".as_bytes(), 3),
            Err(Error::UnknownCluster { label: 5, .. })
        ));
        assert!(matches!(
            read_cluster_labels("individual_id,cluster\na,0\na,1\n".as_bytes(), 2),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            read_cluster_labels("individual_id,cluster\na,0\nb,0\n".as_bytes(), 2),
            Err(Error::EmptyCluster(1))
        ));
        assert!(matches!(ok.aligned(&["zz".into()]), Err(Error::MissingId(_))));
    }
}
