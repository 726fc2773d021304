//! Per-edge input representations and channel normalization.
//!
//! Every extractor maps a mesh and its [`EdgeTopology`](crate::mesh::EdgeTopology) to a
//! [`FeatureTensor`] with one row per edge, in topology edge order.

mod container;
mod extract;

pub use container::{decode_features, encode_features};
pub use extract::{
    coordinate_features, dihedral_angle, dihedral_angle_with, extract, face_normal, fundamental_forms, meshcnn5,
    DihedralConvention,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("face {face} has zero area")]
    DegenerateFace { face: usize },
    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),
    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("feature value at row {row}, channel {channel} is not finite")]
    NonFinite { row: usize, channel: usize },
    #[error("feature data has {got} values, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("no feature rows to fit statistics on")]
    NoRows,
    #[error("unknown feature kind {0:?}")]
    UnknownKind(String),
    #[error("feature container: {0}")]
    Container(String),
}

/// The representation families compared in the feature study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Edge length and dihedral angle.
    Ff,
    /// Dihedral angle, sorted opposite angles, sorted length/height ratios.
    Meshcnn5,
    /// Edge midpoint.
    Xyz,
    /// Endpoint dot product and mean endpoint norm.
    XyzInv,
    /// Midpoint of the endpoints' uniform Laplacian vectors.
    Laplacian,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [Self::Ff, Self::Meshcnn5, Self::Xyz, Self::XyzInv, Self::Laplacian];

    pub fn channels(self) -> usize {
        match self {
            Self::Ff => 2,
            Self::Meshcnn5 => 5,
            Self::Xyz => 3,
            Self::XyzInv => 2,
            Self::Laplacian => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ff => "ff",
            Self::Meshcnn5 => "meshcnn5",
            Self::Xyz => "xyz",
            Self::XyzInv => "xyz-inv",
            Self::Laplacian => "laplacian",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Self::Ff => 1,
            Self::Meshcnn5 => 2,
            Self::Xyz => 3,
            Self::XyzInv => 4,
            Self::Laplacian => 5,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Whether the channels are unchanged by rotations and translations.
    pub fn is_rigid_invariant(self) -> bool {
        matches!(self, Self::Ff | Self::Meshcnn5)
    }

    /// Whether the channels are unchanged by rotations about the origin. `XyzInv` is, but
    /// only because meshes are centered before extraction; a translation changes it.
    pub fn is_rotation_invariant(self) -> bool {
        self.is_rigid_invariant() || self == Self::XyzInv
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == lower || (lower == "xyz_inv" && *k == Self::XyzInv))
            .ok_or_else(|| FeatureError::UnknownKind(s.to_string()))
    }
}

/// Row-major per-edge features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    kind: FeatureKind,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(kind: FeatureKind, rows: usize, data: Vec<f64>) -> Result<Self, FeatureError> {
        let channels = kind.channels();
        if data.len() != rows * channels {
            return Err(FeatureError::Shape {
                expected: rows * channels,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: i / channels,
                channel: i % channels,
            });
        }
        Ok(Self { kind, rows, data })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.channels();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Per-edge L2 norm; the pooling score and the heat-map value.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel population mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Pools every edge of every tensor; the standard deviation is floored at [`STD_FLOOR`].
    pub fn fit<'a, I>(tensors: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a FeatureTensor>,
    {
        Self::fit_rows(tensors.into_iter().map(|t| (t.channels(), t.as_slice())))
    }

    /// Same as [`ChannelStats::fit`] over raw row-major blocks of `channels` columns.
    pub fn fit_rows<'a, I>(blocks: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (usize, &'a [f64])>,
    {
        let mut channels = None;
        let mut count = 0usize;
        let mut sum = Vec::new();
        let mut blocks_seen = Vec::new();
        for (c, data) in blocks {
            match channels {
                None => {
                    channels = Some(c);
                    sum = vec![0.0; c];
                }
                Some(expected) if expected != c => {
                    return Err(FeatureError::ChannelMismatch { expected, got: c });
                }
                _ => {}
            }
            for row in data.chunks_exact(c) {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                count += 1;
            }
            blocks_seen.push((c, data));
        }
        let channels = channels.ok_or(FeatureError::NoRows)?;
        if count == 0 {
            return Err(FeatureError::NoRows);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; channels];
        for (c, data) in blocks_seen {
            for row in data.chunks_exact(c) {
                for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std` on a row-major block.
    pub fn normalize_slice(&self, data: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let c = self.channels();
        if data.len() % c != 0 {
            return Err(FeatureError::ChannelMismatch { expected: c, got: data.len() % c });
        }
        Ok(data
            .chunks_exact(c)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s))
            .collect())
    }

    pub fn normalize(&self, features: &FeatureTensor) -> Result<FeatureTensor, FeatureError> {
        self.check(features)?;
        FeatureTensor::new(features.kind, features.rows, self.normalize_slice(&features.data)?)
    }

    pub fn denormalize(&self, features: &FeatureTensor) -> Result<FeatureTensor, FeatureError> {
        self.check(features)?;
        let c = self.channels();
        let data = features
            .data
            .chunks_exact(c)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| x * s + m))
            .collect();
        FeatureTensor::new(features.kind, features.rows, data)
    }

    fn check(&self, features: &FeatureTensor) -> Result<(), FeatureError> {
        if features.channels() != self.channels() {
            return Err(FeatureError::ChannelMismatch {
                expected: self.channels(),
                got: features.channels(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ff(values: &[f64]) -> FeatureTensor {
        // Channel 1 mirrors channel 0 so both columns carry data.
        let data = values.iter().flat_map(|&v| [v, 2.0 * v]).collect();
        FeatureTensor::new(FeatureKind::Ff, values.len(), data).unwrap()
    }

    #[test]
    fn constant_channel_gets_floor() {
        let s = ChannelStats::fit([&ff(&[3.0, 3.0, 3.0])]).unwrap();
        assert_eq!(s.mean, vec![3.0, 6.0]);
        assert_eq!(s.std, vec![STD_FLOOR, STD_FLOOR]);
    }

    #[test]
    fn two_point_population_std() {
        let s = ChannelStats::fit([&ff(&[0.0, 2.0])]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
    }

    #[test]
    fn pools_across_meshes() {
        let s = ChannelStats::fit([&ff(&[1.0]), &ff(&[3.0])]).unwrap();
        assert_eq!(s.mean[0], 2.0);
    }

    #[test]
    fn normalize_round_trip() {
        let t = ff(&[0.5, 1.5, 4.0, -2.0]);
        let s = ChannelStats::fit([&t]).unwrap();
        let n = s.normalize(&t).unwrap();
        let mean_row = ff(&[s.mean[0]]);
        assert_eq!(s.normalize(&mean_row).unwrap().row(0), &[0.0, 0.0]);
        let one_std = FeatureTensor::new(FeatureKind::Ff, 1, vec![s.mean[0] + s.std[0], s.mean[1] + s.std[1]]).unwrap();
        let z = s.normalize(&one_std).unwrap();
        assert!((z.row(0)[0] - 1.0).abs() < 1e-15 && (z.row(0)[1] - 1.0).abs() < 1e-15);
        assert!(s.denormalize(&n).unwrap().max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn shape_and_finiteness_checked() {
        assert!(FeatureTensor::new(FeatureKind::Xyz, 2, vec![0.0; 5]).is_err());
        assert!(matches!(
            FeatureTensor::new(FeatureKind::Ff, 1, vec![0.0, f64::NAN]),
            Err(FeatureError::NonFinite { row: 0, channel: 1 })
        ));
        assert!(ChannelStats::fit(std::iter::empty()).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
            assert_eq!(FeatureKind::from_tag(k.tag()), Some(k));
        }
    }
}
