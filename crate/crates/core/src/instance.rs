//! Barycenter instances: discrete measures, barycentric weights and index
//! combinations, plus file ingestion and the two preprocessing transforms.
//!
//! Support points are addressed by a flat index in measure-major order: all
//! points of measure 0 first, then measure 1, and so on. Dual vectors and the
//! selection variables of the pricing model use the same order.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on mass and weight sums for a valid instance.
pub const SUM_TOL: f64 = 1e-12;
/// Largest deviation from 1 that `--renormalize` will repair.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Self {
        Self { points, masses }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Merges bitwise-identical points, summing their masses. The first
    /// occurrence keeps its position.
    fn dedup(&mut self) {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut points = Vec::with_capacity(self.points.len());
        let mut masses: Vec<f64> = Vec::with_capacity(self.masses.len());
        for (p, &m) in self.points.iter().zip(&self.masses) {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            match seen.get(&key) {
                Some(&idx) => masses[idx] += m,
                None => {
                    seen.insert(key, points.len());
                    points.push(p.clone());
                    masses.push(m);
                }
            }
        }
        self.points = points;
        self.masses = masses;
    }
}

/// An index tuple selecting one support point per measure (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Combination(pub Vec<usize>);

impl Combination {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// 1-based indices, as written to solution files.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|k| k + 1).collect()
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", k + 1)?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    measures: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
    dimension: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Rescale mass and weight sums that are within 1e-6 of one.
    pub renormalize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceFormat {
    Json,
    Csv,
}

impl InstanceFormat {
    /// Guesses the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    measures: Vec<DiscreteMeasure>,
}

fn check_sum(values: &mut [f64], renormalize: bool) -> std::result::Result<(), f64> {
    let sum: f64 = values.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev <= SUM_TOL {
        return Ok(());
    }
    if renormalize && dev <= RENORMALIZE_TOL {
        for v in values.iter_mut() {
            *v /= sum;
        }
        return Ok(());
    }
    Err(sum)
}

impl Instance {
    /// Validates and builds an instance. Duplicate points inside a measure
    /// are merged before the mass check.
    pub fn new(
        measures: Vec<DiscreteMeasure>,
        weights: Option<Vec<f64>>,
        opts: LoadOptions,
    ) -> Result<Self> {
        if measures.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 measures, got {}",
                measures.len()
            )));
        }
        let dimension = measures
            .iter()
            .find_map(|m| m.points.first().map(|p| p.len()))
            .unwrap_or(0);
        if dimension == 0 {
            return Err(Error::InvalidInstance("dimension must be positive".into()));
        }
        let mut measures = measures;
        for (i, m) in measures.iter_mut().enumerate() {
            if m.points.is_empty() {
                return Err(Error::InvalidInstance(format!("measure {} is empty", i + 1)));
            }
            if m.points.len() != m.masses.len() {
                return Err(Error::InvalidInstance(format!(
                    "measure {} has {} points but {} masses",
                    i + 1,
                    m.points.len(),
                    m.masses.len()
                )));
            }
            for (k, p) in m.points.iter().enumerate() {
                if p.len() != dimension {
                    return Err(Error::InvalidInstance(format!(
                        "dimension mismatch: measure {}, point {} has {} coordinates, expected {}",
                        i + 1,
                        k + 1,
                        p.len(),
                        dimension
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInstance(format!(
                        "non-finite coordinate in measure {}, point {}",
                        i + 1,
                        k + 1
                    )));
                }
            }
            if let Some(k) = m.masses.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "nonpositive mass {} in measure {}, point {}",
                    m.masses[k],
                    i + 1,
                    k + 1
                )));
            }
            m.dedup();
            check_sum(&mut m.masses, opts.renormalize)
                .map_err(|sum| Error::MassSum { measure: i + 1, sum })?;
        }
        let n = measures.len();
        let mut weights = weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        if weights.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} weights for {} measures",
                weights.len(),
                n
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInstance("weights must be positive".into()));
        }
        check_sum(&mut weights, opts.renormalize).map_err(|sum| Error::WeightSum { sum })?;
        Ok(Self {
            measures,
            weights,
            dimension,
        })
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn measure(&self, i: usize) -> &DiscreteMeasure {
        &self.measures[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n(&self) -> usize {
        self.measures.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.measures.iter().map(|m| m.len()).collect()
    }

    pub fn total_support(&self) -> usize {
        self.measures.iter().map(|m| m.len()).sum()
    }

    /// Number of combinations, saturating at `u128::MAX`.
    pub fn num_combinations(&self) -> u128 {
        self.measures
            .iter()
            .fold(1u128, |acc, m| acc.saturating_mul(m.len() as u128))
    }

    /// Start of each measure's block in the flat (measure, point) order.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.n() + 1);
        let mut acc = 0;
        for m in &self.measures {
            off.push(acc);
            acc += m.len();
        }
        off.push(acc);
        off
    }

    pub fn point(&self, i: usize, k: usize) -> &[f64] {
        &self.measures[i].points[k]
    }

    pub fn is_valid_combination(&self, s: &Combination) -> bool {
        s.0.len() == self.n() && s.0.iter().zip(&self.measures).all(|(&k, m)| k < m.len())
    }

    pub fn load(
        path: &Path,
        format: InstanceFormat,
        weights_path: Option<&Path>,
        opts: LoadOptions,
    ) -> Result<Self> {
        let text = read(path)?;
        let weights = match weights_path {
            Some(wp) => Some(parse_weights_csv(&read(wp)?)?),
            None => None,
        };
        match format {
            InstanceFormat::Json => Self::from_json_str(&text, weights, opts),
            InstanceFormat::Csv => Self::from_csv_str(&text, weights, opts),
        }
    }

    /// Parses the JSON instance format. Weights given explicitly override
    /// any `"weights"` array in the file.
    pub fn from_json_str(text: &str, weights: Option<Vec<f64>>, opts: LoadOptions) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.measures, weights.or(file.weights), opts)
    }

    /// Parses the CSV instance format: header `measure,mass,x1,…,xd`, one row
    /// per support point, measures numbered from 1.
    pub fn from_csv_str(text: &str, weights: Option<Vec<f64>>, opts: LoadOptions) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        if headers.len() < 3
            || !headers[0].eq_ignore_ascii_case("measure")
            || !headers[1].eq_ignore_ascii_case("mass")
        {
            return Err(Error::Parse(
                "CSV header must be `measure,mass,x1,...,xd`".into(),
            ));
        }
        let d = headers.len() - 2;
        let mut measures: Vec<DiscreteMeasure> = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            if rec.len() != d + 2 {
                return Err(Error::Parse(format!(
                    "row {}: expected {} fields, got {}",
                    line + 2,
                    d + 2,
                    rec.len()
                )));
            }
            let idx: usize = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad measure index", line + 2)))?;
            if idx == 0 {
                return Err(Error::Parse(format!(
                    "row {}: measures are numbered from 1",
                    line + 2
                )));
            }
            let mass = parse_f64(&rec[1], line + 2)?;
            let point = (0..d)
                .map(|c| parse_f64(&rec[c + 2], line + 2))
                .collect::<Result<Vec<_>>>()?;
            if measures.len() < idx {
                measures.resize_with(idx, || DiscreteMeasure::new(vec![], vec![]));
            }
            measures[idx - 1].points.push(point);
            measures[idx - 1].masses.push(mass);
        }
        Self::new(measures, weights, opts)
    }

    pub fn to_json_string(&self) -> String {
        let file = InstanceFile {
            weights: Some(self.weights.clone()),
            measures: self.measures.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    /// CSV body of the instance; weights go to a separate file, see
    /// [`Instance::weights_csv_string`].
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("measure,mass");
        for c in 0..self.dimension {
            out.push_str(&format!(",x{}", c + 1));
        }
        out.push('\n');
        for (i, m) in self.measures.iter().enumerate() {
            for (p, w) in m.points.iter().zip(&m.masses) {
                out.push_str(&format!("{},{}", i + 1, w));
                for v in p {
                    out.push_str(&format!(",{}", v));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn weights_csv_string(&self) -> String {
        let mut out = String::from("weight\n");
        for w in &self.weights {
            out.push_str(&format!("{}\n", w));
        }
        out
    }

    /// Translates every point so that the smallest coordinate along each axis
    /// is at least 1. Pairwise differences are unchanged.
    pub fn shift_to_positive_orthant(&self) -> (Instance, Vec<f64>) {
        let d = self.dimension;
        let mut mins = vec![f64::INFINITY; d];
        for m in &self.measures {
            for p in &m.points {
                for (lo, &v) in mins.iter_mut().zip(p) {
                    *lo = lo.min(v);
                }
            }
        }
        let shift: Vec<f64> = mins
            .iter()
            .map(|&lo| {
                if lo >= 1.0 {
                    return 0.0;
                }
                let mut s = 1.0 - lo;
                while lo + s < 1.0 {
                    s = s.next_up();
                }
                s
            })
            .collect();
        let mut out = self.clone();
        for m in &mut out.measures {
            for p in &mut m.points {
                for (v, s) in p.iter_mut().zip(&shift) {
                    *v += s;
                }
            }
        }
        (out, shift)
    }

    /// Reorders measures by ascending support size (stable). The returned
    /// permutation maps each new index to the original one.
    pub fn sort_measures_by_size(&self) -> (Instance, Vec<usize>) {
        let mut perm: Vec<usize> = (0..self.n()).collect();
        perm.sort_by_key(|&i| self.measures[i].len());
        (self.permuted(&perm), perm)
    }

    /// Instance whose measure `t` is this instance's measure `perm[t]`.
    pub fn permuted(&self, perm: &[usize]) -> Instance {
        Instance {
            measures: perm.iter().map(|&i| self.measures[i].clone()).collect(),
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            dimension: self.dimension,
        }
    }

    /// Permutes a flat (measure, point) vector consistently with
    /// [`Instance::permuted`].
    pub fn permute_flat(&self, values: &[f64], perm: &[usize]) -> Vec<f64> {
        let off = self.offsets();
        let mut out = Vec::with_capacity(values.len());
        for &i in perm {
            out.extend_from_slice(&values[off[i]..off[i + 1]]);
        }
        out
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("row {}: `{}` is not a number", line, s)))
}

/// One-column weights CSV; a non-numeric first line is taken as a header.
pub fn parse_weights_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("weights row {}: `{}`", i + 1, line))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_json() -> &'static str {
        r#"{"measures": [
            {"points": [[0.0, 0.0]], "masses": [1.0]},
            {"points": [[2.0, 0.0]], "masses": [1.0]}
        ]}"#
    }

    #[test]
    fn uniform_weights_by_default() {
        let inst = Instance::from_json_str(two_point_json(), None, LoadOptions::default()).unwrap();
        assert_eq!(inst.weights(), &[0.5, 0.5]);
        assert_eq!(inst.dimension(), 2);
    }

    #[test]
    fn csv_duplicates_are_merged() {
        let text = "measure,mass,x1,x2\n1,0.2,1,1\n1,0.3,1,1\n1,0.5,2,2\n2,1.0,0,0\n";
        let inst = Instance::from_csv_str(text, None, LoadOptions::default()).unwrap();
        assert_eq!(inst.measure(0).len(), 2);
        assert_eq!(inst.measure(0).masses[0], 0.5);
        assert_eq!(inst.measure(0).points[0], vec![1.0, 1.0]);
    }

    #[test]
    fn bad_mass_sum_rejected() {
        let text = r#"{"measures": [
            {"points": [[0.0], [1.0]], "masses": [0.6, 0.5]},
            {"points": [[2.0]], "masses": [1.0]}
        ]}"#;
        let err = Instance::from_json_str(text, None, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("mass sum ≠ 1"), "{err}");
    }

    #[test]
    fn renormalize_only_small_deviations() {
        let near = r#"{"measures": [
            {"points": [[0.0], [1.0]], "masses": [0.5, 0.5000001]},
            {"points": [[2.0]], "masses": [1.0]}
        ]}"#;
        assert!(Instance::from_json_str(near, None, LoadOptions::default()).is_err());
        let inst =
            Instance::from_json_str(near, None, LoadOptions { renormalize: true }).unwrap();
        let s: f64 = inst.measure(0).masses.iter().sum();
        assert!((s - 1.0).abs() <= SUM_TOL);
    }

    #[test]
    fn nonpositive_mass_and_dimension_mismatch() {
        let neg = r#"{"measures": [
            {"points": [[0.0], [1.0]], "masses": [1.5, -0.5]},
            {"points": [[2.0]], "masses": [1.0]}
        ]}"#;
        assert!(matches!(
            Instance::from_json_str(neg, None, LoadOptions::default()),
            Err(Error::InvalidInstance(_))
        ));
        let dims = r#"{"measures": [
            {"points": [[0.0, 1.0]], "masses": [1.0]},
            {"points": [[2.0]], "masses": [1.0]}
        ]}"#;
        let err = Instance::from_json_str(dims, None, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn weights_file_and_parse_errors() {
        assert_eq!(parse_weights_csv("weight\n0.25\n0.75\n").unwrap(), vec![0.25, 0.75]);
        assert!(parse_weights_csv("0.25\nabc\n").is_err());
        assert!(matches!(
            Instance::from_json_str("{", None, LoadOptions::default()),
            Err(Error::Parse(_))
        ));
        let inst = Instance::from_json_str(
            two_point_json(),
            Some(vec![0.25, 0.75]),
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(inst.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn shift_min_coordinate_rule() {
        let inst = Instance::new(
            vec![
                DiscreteMeasure::new(vec![vec![-2.0, 0.0]], vec![1.0]),
                DiscreteMeasure::new(vec![vec![3.0, 1.0]], vec![1.0]),
            ],
            None,
            LoadOptions::default(),
        )
        .unwrap();
        let (shifted, shift) = inst.shift_to_positive_orthant();
        assert_eq!(shift, vec![3.0, 1.0]);
        assert_eq!(shifted.point(0, 0), &[1.0, 1.0]);
        assert_eq!(shifted.point(1, 0), &[6.0, 2.0]);

        let (again, zero) = shifted.shift_to_positive_orthant();
        assert_eq!(zero, vec![0.0, 0.0]);
        assert_eq!(again, shifted);
    }

    #[test]
    fn sort_is_stable_and_permutes_weights() {
        let mk = |k: usize| {
            DiscreteMeasure::new(
                (0..k).map(|j| vec![j as f64]).collect(),
                vec![1.0 / k as f64; k],
            )
        };
        let inst = Instance::new(
            vec![mk(4), mk(2), mk(3)],
            Some(vec![0.5, 0.25, 0.25]),
            LoadOptions::default(),
        )
        .unwrap();
        let (sorted, perm) = inst.sort_measures_by_size();
        assert_eq!(sorted.sizes(), vec![2, 3, 4]);
        assert_eq!(perm, vec![1, 2, 0]);
        assert_eq!(sorted.weights(), &[0.25, 0.25, 0.5]);

        let tie = Instance::new(vec![mk(2), mk(2)], None, LoadOptions::default()).unwrap();
        assert_eq!(tie.sort_measures_by_size().1, vec![0, 1]);
    }

    #[test]
    fn combination_display_is_one_based() {
        assert_eq!(Combination::new(vec![0, 2]).to_string(), "(1,3)");
    }
}
