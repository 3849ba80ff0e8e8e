//! JSON file formats for fields, densities and paths.
//!
//! ```text
//! { "n": 2, "points": [ { "id": "p0", "weight": 1.0, "g": [g00, g01, g11] } ] }
//! ```
//!
//! Tensors are stored as their upper triangle, row-major. Tangent fields use
//! the key `"h"` instead of `"g"`, density files a positive scalar `"nu"`.
//! Path files are `{ "K": int, "frames": [field body, ...] }` with `K + 1`
//! frames on one chart. Floats are written in shortest round-trip form, so
//! writing and reading back is bit-exact.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{
    same_chart, ChartPoint, DiscretePath, MetricField, QuadChart, TangentField, VolumeDensity,
};
use crate::error::{Error, Result};
use crate::tensor::{packed_len, SpdMatrix, SymMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    id: String,
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldBody {
    n: usize,
    points: Vec<PointRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathBody {
    #[serde(rename = "K")]
    k: usize,
    frames: Vec<FieldBody>,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Metric,
    Tangent,
    Density,
}

impl Kind {
    fn key(self) -> &'static str {
        match self {
            Kind::Metric => "g",
            Kind::Tangent => "h",
            Kind::Density => "nu",
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn invalid(point: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        point: Some(point.to_string()),
        message: message.into(),
    }
}

fn chart_of(body: &FieldBody) -> Result<Arc<QuadChart>> {
    QuadChart::new(
        body.n,
        body.points
            .iter()
            .map(|p| ChartPoint {
                id: p.id.clone(),
                weight: p.weight,
                coords: p.coords.clone(),
            })
            .collect(),
    )
}

// checks that each record carries exactly the key of `kind`
fn check_keys(body: &FieldBody, kind: Kind) -> Result<()> {
    for p in &body.points {
        let present = [
            ("g", p.g.is_some()),
            ("h", p.h.is_some()),
            ("nu", p.nu.is_some()),
        ];
        for (key, is) in present {
            if is && key != kind.key() {
                return Err(invalid(
                    &p.id,
                    format!("unexpected key `{key}` (expected `{}`)", kind.key()),
                ));
            }
        }
        let has = match kind {
            Kind::Metric => p.g.is_some(),
            Kind::Tangent => p.h.is_some(),
            Kind::Density => p.nu.is_some(),
        };
        if !has {
            return Err(invalid(&p.id, format!("missing key `{}`", kind.key())));
        }
    }
    Ok(())
}

fn tensor(n: usize, id: &str, values: &[f64]) -> Result<SymMatrix> {
    if values.len() != packed_len(n) {
        return Err(invalid(
            id,
            format!(
                "expected {} upper-triangle entries for n = {n}, found {}",
                packed_len(n),
                values.len()
            ),
        ));
    }
    SymMatrix::from_packed(n, values).map_err(|e| e.at_point(id))
}

fn metric_from_body(body: &FieldBody, chart: Arc<QuadChart>) -> Result<MetricField> {
    check_keys(body, Kind::Metric)?;
    let values = body
        .points
        .iter()
        .map(|p| {
            let s = tensor(body.n, &p.id, p.g.as_deref().unwrap_or_default())?;
            SpdMatrix::new(s).map_err(|e| e.at_point(&p.id))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(chart, values)
}

fn tangent_from_body(body: &FieldBody, chart: Arc<QuadChart>) -> Result<TangentField> {
    check_keys(body, Kind::Tangent)?;
    let values = body
        .points
        .iter()
        .map(|p| tensor(body.n, &p.id, p.h.as_deref().unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    TangentField::new(chart, values)
}

fn records(chart: &QuadChart, mut value: impl FnMut(usize, &mut PointRecord)) -> FieldBody {
    FieldBody {
        n: chart.dim(),
        points: chart
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut r = PointRecord {
                    id: p.id.clone(),
                    weight: p.weight,
                    coords: p.coords.clone(),
                    g: None,
                    h: None,
                    nu: None,
                };
                value(i, &mut r);
                r
            })
            .collect(),
    }
}

fn metric_body(g: &MetricField) -> FieldBody {
    records(g.chart(), |i, r| {
        r.g = Some(g.get(i).as_sym().packed().to_vec())
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("finite values serialize");
    s.push('\n');
    s
}

pub fn read_metric_field(text: &str) -> Result<MetricField> {
    let body: FieldBody = parse(text)?;
    let chart = chart_of(&body)?;
    metric_from_body(&body, chart)
}

pub fn write_metric_field(g: &MetricField) -> String {
    to_json(&metric_body(g))
}

pub fn read_tangent_field(text: &str) -> Result<TangentField> {
    let body: FieldBody = parse(text)?;
    let chart = chart_of(&body)?;
    tangent_from_body(&body, chart)
}

pub fn write_tangent_field(h: &TangentField) -> String {
    to_json(&records(h.chart(), |i, r| {
        r.h = Some(h.get(i).packed().to_vec())
    }))
}

pub fn read_density(text: &str) -> Result<VolumeDensity> {
    let body: FieldBody = parse(text)?;
    let chart = chart_of(&body)?;
    check_keys(&body, Kind::Density)?;
    VolumeDensity::new(
        chart,
        body.points
            .iter()
            .map(|p| p.nu.unwrap_or_default())
            .collect(),
    )
}

pub fn write_density(nu: &VolumeDensity) -> String {
    to_json(&records(nu.chart(), |i, r| r.nu = Some(nu.get(i))))
}

pub fn read_path(text: &str) -> Result<DiscretePath> {
    let body: PathBody = parse(text)?;
    if body.frames.len() != body.k + 1 {
        return Err(Error::Validation {
            point: None,
            message: format!(
                "K = {} requires {} frames, found {}",
                body.k,
                body.k + 1,
                body.frames.len()
            ),
        });
    }
    let first = body.frames.first().ok_or_else(|| Error::Validation {
        point: None,
        message: "path has no frames".into(),
    })?;
    let chart = chart_of(first)?;
    let frames = body
        .frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let c = chart_of(f)?;
            same_chart(&chart, &c)?;
            metric_from_body(f, chart.clone()).map_err(|e| match e {
                Error::Validation { point, message } => Error::Validation {
                    point,
                    message: format!("frame {k}: {message}"),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscretePath::new(frames)
}

pub fn write_path(path: &DiscretePath) -> String {
    to_json(&PathBody {
        k: path.segments(),
        frames: path.frames().iter().map(metric_body).collect(),
    })
}
