use nalgebra::{Matrix3, Vector3};

/// One world-frame point and its noise covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub point: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl Measurement {
    pub fn new(point: Vector3<f64>, cov: Matrix3<f64>) -> Self {
        Self { point, cov }
    }

    /// Isotropic noise with standard deviation `std` per axis.
    pub fn isotropic(point: Vector3<f64>, std: f64) -> Self {
        Self::new(point, Matrix3::identity() * (std * std))
    }
}

pub type MeasurementSet = Vec<Measurement>;
