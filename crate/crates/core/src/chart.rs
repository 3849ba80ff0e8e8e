//! Quadrature charts and the per-point fields defined on them.
//!
//! A [`QuadChart`] is the discrete stand-in for the closed base manifold: a
//! list of sample points with positive weights approximating the coordinate
//! measure `dx`. Integrals over the manifold become weighted sums over points.
//! Fields share their chart through an `Arc`; two fields are compatible when
//! their charts are identical (same fiber dimension, ids and weights).

use std::collections::HashMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{SpdMatrix, SymMatrix, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub id: String,
    pub weight: f64,
    pub coords: Option<Vec<f64>>,
}

impl ChartPoint {
    pub fn new(id: impl Into<String>, weight: f64) -> Self {
        ChartPoint {
            id: id.into(),
            weight,
            coords: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadChart {
    n: usize,
    points: Vec<ChartPoint>,
    index: HashMap<String, usize>,
}

impl PartialEq for QuadChart {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.points == other.points
    }
}

impl QuadChart {
    pub fn new(n: usize, points: Vec<ChartPoint>) -> Result<Arc<Self>> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::Validation {
                point: None,
                message: format!("fiber dimension {n} outside 1..={MAX_DIM}"),
            });
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(Error::Validation {
                    point: Some(p.id.clone()),
                    message: format!("weight must be positive and finite, got {}", p.weight),
                });
            }
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::Validation {
                    point: Some(p.id.clone()),
                    message: "duplicate point id".into(),
                });
            }
        }
        Ok(Arc::new(QuadChart { n, points, index }))
    }

    /// `count` points `p0, p1, …` with equal weights summing to `total`.
    pub fn uniform(n: usize, count: usize, total: f64) -> Result<Arc<Self>> {
        let w = total / count as f64;
        Self::new(
            n,
            (0..count)
                .map(|i| ChartPoint::new(format!("p{i}"), w))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    pub fn id(&self, i: usize) -> &str {
        &self.points[i].id
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.points[i].weight
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    /// Short hex digest of the dimension, ids and exact weight bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for p in &self.points {
            h.update((p.id.len() as u64).to_le_bytes());
            h.update(p.id.as_bytes());
            h.update(p.weight.to_bits().to_le_bytes());
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub(crate) fn same_chart(a: &Arc<QuadChart>, b: &Arc<QuadChart>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::ChartMismatch {
            left: a.fingerprint(),
            right: b.fingerprint(),
        })
    }
}

fn check_len(chart: &QuadChart, found: usize) -> Result<()> {
    if found == chart.len() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: chart.len(),
            found,
        })
    }
}

/// One SPD tensor per chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    chart: Arc<QuadChart>,
    values: Vec<SpdMatrix>,
}

impl MetricField {
    pub fn new(chart: Arc<QuadChart>, values: Vec<SpdMatrix>) -> Result<Self> {
        check_len(&chart, values.len())?;
        for (i, v) in values.iter().enumerate() {
            if v.dim() != chart.dim() {
                return Err(Error::Dimension {
                    expected: chart.dim(),
                    found: v.dim(),
                }
                .at_point(chart.id(i)));
            }
        }
        Ok(MetricField { chart, values })
    }

    /// Validates each symmetric value against the SPD floor, naming the first offending point.
    pub fn from_sym(chart: Arc<QuadChart>, values: Vec<SymMatrix>) -> Result<Self> {
        check_len(&chart, values.len())?;
        let spd = values
            .into_iter()
            .enumerate()
            .map(|(i, s)| SpdMatrix::new(s).map_err(|e| e.at_point(chart.id(i))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(chart, spd)
    }

    pub fn constant(chart: Arc<QuadChart>, value: SpdMatrix) -> Result<Self> {
        let values = vec![value; chart.len()];
        Self::new(chart, values)
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    pub fn values(&self) -> &[SpdMatrix] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &SpdMatrix {
        &self.values[i]
    }
}

/// One symmetric tensor per chart point; tangent vectors to the space of metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    chart: Arc<QuadChart>,
    values: Vec<SymMatrix>,
}

impl TangentField {
    pub fn new(chart: Arc<QuadChart>, values: Vec<SymMatrix>) -> Result<Self> {
        check_len(&chart, values.len())?;
        for (i, v) in values.iter().enumerate() {
            if v.dim() != chart.dim() {
                return Err(Error::Dimension {
                    expected: chart.dim(),
                    found: v.dim(),
                }
                .at_point(chart.id(i)));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("tangent entry".into()).at_point(chart.id(i)));
            }
        }
        Ok(TangentField { chart, values })
    }

    pub fn zeros(chart: Arc<QuadChart>) -> Self {
        let values = vec![SymMatrix::zeros(chart.dim()); chart.len()];
        TangentField { chart, values }
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    pub fn values(&self) -> &[SymMatrix] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &SymMatrix {
        &self.values[i]
    }

    pub fn scaled(&self, s: f64) -> TangentField {
        TangentField {
            chart: self.chart.clone(),
            values: self.values.iter().map(|v| *v * s).collect(),
        }
    }
}

/// Positive coordinate density `ν_i` per point: the volume form `ν_i dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDensity {
    chart: Arc<QuadChart>,
    values: Vec<f64>,
}

impl VolumeDensity {
    pub fn new(chart: Arc<QuadChart>, values: Vec<f64>) -> Result<Self> {
        check_len(&chart, values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation {
                    point: Some(chart.id(i).to_string()),
                    message: format!("density must be positive and finite, got {v}"),
                });
            }
        }
        Ok(VolumeDensity { chart, values })
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Per-point coefficient `α_i` of an n-form `α_i dx`; tangent vectors to the densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTangent {
    chart: Arc<QuadChart>,
    values: Vec<f64>,
}

impl DensityTangent {
    pub fn new(chart: Arc<QuadChart>, values: Vec<f64>) -> Result<Self> {
        check_len(&chart, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density tangent".into()).at_point(chart.id(i)));
        }
        Ok(DensityTangent { chart, values })
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// A set of chart points standing in for a measurable subset of the base manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    chart: Arc<QuadChart>,
    members: Vec<usize>,
}

impl Region {
    pub fn all(chart: &Arc<QuadChart>) -> Self {
        Region {
            chart: chart.clone(),
            members: (0..chart.len()).collect(),
        }
    }

    pub fn empty(chart: &Arc<QuadChart>) -> Self {
        Region {
            chart: chart.clone(),
            members: Vec::new(),
        }
    }

    pub fn from_ids<S: AsRef<str>>(chart: &Arc<QuadChart>, ids: &[S]) -> Result<Self> {
        let mut members = ids
            .iter()
            .map(|id| chart.index_of(id.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        members.sort_unstable();
        members.dedup();
        Ok(Region {
            chart: chart.clone(),
            members,
        })
    }

    pub fn from_indices(
        chart: &Arc<QuadChart>,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut members: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&i| i >= chart.len()) {
            return Err(Error::UnknownPoint(format!("#{bad}")));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Region {
            chart: chart.clone(),
            members,
        })
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn ids(&self) -> Vec<&str> {
        self.members.iter().map(|&i| self.chart.id(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        same_chart(&self.chart, &other.chart)?;
        Region::from_indices(
            &self.chart,
            self.members.iter().chain(&other.members).copied(),
        )
    }

    pub fn intersection(&self, other: &Region) -> Result<Region> {
        same_chart(&self.chart, &other.chart)?;
        Region::from_indices(
            &self.chart,
            self.members.iter().copied().filter(|&i| other.contains(i)),
        )
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }
}

/// Metric fields sampled on the uniform time grid `t_k = k / K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    chart: Arc<QuadChart>,
    frames: Vec<MetricField>,
}

impl DiscretePath {
    pub fn new(frames: Vec<MetricField>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(
                "a path needs at least two frames (K >= 1)".into(),
            ));
        }
        let chart = frames[0].chart().clone();
        for f in &frames[1..] {
            same_chart(&chart, f.chart())?;
        }
        Ok(DiscretePath { chart, frames })
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    /// Segment count `K`.
    pub fn segments(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn frames(&self) -> &[MetricField] {
        &self.frames
    }

    pub fn start(&self) -> &MetricField {
        &self.frames[0]
    }

    pub fn end(&self) -> &MetricField {
        &self.frames[self.frames.len() - 1]
    }

    pub fn reversed(&self) -> DiscretePath {
        let mut frames = self.frames.clone();
        frames.reverse();
        DiscretePath {
            chart: self.chart.clone(),
            frames,
        }
    }

    /// `self` followed by `other`; the shared frame appears once.
    pub fn concat(&self, other: &DiscretePath) -> Result<DiscretePath> {
        same_chart(&self.chart, &other.chart)?;
        if self.end() != other.start() {
            return Err(Error::InvalidArgument(
                "paths do not share an endpoint".into(),
            ));
        }
        let mut frames = self.frames.clone();
        frames.extend_from_slice(&other.frames[1..]);
        Ok(DiscretePath {
            chart: self.chart.clone(),
            frames,
        })
    }
}
