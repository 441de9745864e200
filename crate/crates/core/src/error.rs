use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of chart: {what} has norm {norm} but the chart admits < {limit}")]
    OutOfChart { what: &'static str, norm: f64, limit: f64 },

    #[error("out of grid hull: coordinate {value} on axis {axis} outside [{lo}, {hi}]")]
    OutOfHull { axis: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("cover failure at sample {sample}: chart radius {delta} fell below the floor {floor}")]
    CoverFailure { sample: usize, delta: f64, floor: f64 },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error(
        "extension error: node {node} has value {value} but node {via} gives {extended} \
         (inner field is not {k_prime}-Lipschitz)"
    )]
    Extension { node: usize, via: usize, value: f64, extended: f64, k_prime: f64 },

    #[error("mollifier margin error: kernel needs {required} nodes of padding on axis {axis}, {available} available")]
    Margin { axis: usize, required: usize, available: usize },

    #[error("radius error: available margin {margin} is below the grid spacing {spacing}")]
    Radius { margin: f64, spacing: f64 },

    #[error("partition error: point {point:?} lies in no chart core ball")]
    Partition { point: Vec<f64> },

    #[error("bumpability parameter error: {0}")]
    Bumpability(String),

    #[error("perturbation search did not reach a strong minimum in {iterations} steps (best margin {best_margin})")]
    Search { iterations: usize, best_margin: f64 },

    #[error("pipeline error in chart {chart}, stage {stage}: {reason}")]
    Pipeline { chart: usize, stage: &'static str, reason: String },
}
