//! Upper bounds on the L² distance between metric fields.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chart::{same_chart, DiscretePath, MetricField};
use crate::error::{Error, Result};
use crate::field::{frames_to_path, path_to_frames, FieldSetting};
use crate::optimizer::{self, Candidate, Diagnostics, GeodesicSetting, OptimizerOptions};
use crate::pointwise::PointPath;
use crate::product::{induced_density, product_path, FixedVolumeSetting};

/// Which initial paths the optimizer may start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Linear,
    Fiber,
    Product,
    /// All of the above; the lowest energy starts the descent.
    Best,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Init::Linear),
            "fiber" => Ok(Init::Fiber),
            "product" => Ok(Init::Product),
            "best" => Ok(Init::Best),
            other => Err(Error::InvalidArgument(format!(
                "unknown initializer `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Linear => "linear",
            Init::Fiber => "fiber",
            Init::Product => "product",
            Init::Best => "best",
        })
    }
}

/// Where the path is allowed to go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// All metric fields.
    Free,
    /// Metric fields inducing the same volume form as the endpoints.
    FixedVolume,
}

#[derive(Debug, Clone)]
pub struct FieldGeodesic {
    /// Discrete length of `path`, an upper bound on the distance.
    pub length: f64,
    pub energy: f64,
    pub path: DiscretePath,
    pub diagnostics: Diagnostics,
}

/// Linear, pointwise fiber and product initializers on `segments` segments.
pub fn field_candidates(
    g0: &MetricField,
    g1: &MetricField,
    init: Init,
    segments: usize,
) -> Result<Vec<(String, DiscretePath)>> {
    same_chart(g0.chart(), g1.chart())?;
    let chart = g0.chart();
    let mut out = Vec::new();
    if matches!(init, Init::Linear | Init::Best) {
        let frames = optimizer::linear_frames(
            &crate::field::field_to_frame(g0),
            &crate::field::field_to_frame(g1),
            segments,
        );
        if let Ok(p) = frames_to_path(chart, &frames) {
            out.push(("linear".to_string(), p));
        }
    }
    if matches!(init, Init::Fiber | Init::Best) {
        let per_point = (0..chart.len())
            .map(|i| {
                PointPath::fiber(g0.get(i), g1.get(i), segments)
                    .map_err(|e| e.at_point(chart.id(i)))
            })
            .collect::<Result<Vec<_>>>()?;
        let frames = (0..=segments)
            .map(|k| {
                MetricField::new(
                    chart.clone(),
                    per_point.iter().map(|p| p.samples()[k]).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(("fiber".to_string(), DiscretePath::new(frames)?));
    }
    if matches!(init, Init::Product | Init::Best) {
        let mut p = product_path(g0, g1, &induced_density(g0), segments)?;
        // pin the endpoints to the inputs bit for bit
        let mut frames = p.frames().to_vec();
        frames[0] = g0.clone();
        frames[segments] = g1.clone();
        p = DiscretePath::new(frames)?;
        out.push(("product".to_string(), p));
    }
    Ok(out)
}

fn run<S: GeodesicSetting>(
    setting: &S,
    g0: &MetricField,
    candidates: Vec<(String, DiscretePath)>,
    opts: &OptimizerOptions,
) -> Result<FieldGeodesic> {
    let candidates: Vec<Candidate> = candidates
        .into_iter()
        .map(|(label, p)| Candidate {
            label,
            frames: path_to_frames(&p),
        })
        .collect();
    let out = optimizer::minimize(setting, opts, &candidates)?;
    Ok(FieldGeodesic {
        length: out.length,
        energy: out.energy,
        path: frames_to_path(g0.chart(), &out.frames)?,
        diagnostics: out.diagnostics,
    })
}

/// Minimizes the L² path energy between two metric fields.
///
/// Running out of iterations is not an error here; check
/// `diagnostics.converged`.
pub fn field_distance(
    g0: &MetricField,
    g1: &MetricField,
    init: Init,
    constraint: Constraint,
    opts: &OptimizerOptions,
) -> Result<FieldGeodesic> {
    opts.validate()?;
    let candidates = field_candidates(g0, g1, init, opts.segments)?;
    match constraint {
        Constraint::Free => run(&FieldSetting::new(g0, g1)?, g0, candidates, opts),
        Constraint::FixedVolume => {
            let setting = FixedVolumeSetting::new(g0, g1)?;
            run(&setting, g0, candidates, opts)
        }
    }
}
