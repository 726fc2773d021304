use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Mesh, MeshError, Point};

/// `v -> scale * R * v + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
    uniform_scale: f64,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
            uniform_scale: 1.0,
        }
    }

    /// Validates orthonormality (1e-12), determinant +1 and a positive scale.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, uniform_scale: f64) -> Result<Self, MeshError> {
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).amax() > 1e-12 || (rotation.determinant() - 1.0).abs() > 1e-12 {
            return Err(MeshError::Degenerate("rotation is not orthonormal with det +1".into()));
        }
        if !(uniform_scale > 0.0 && uniform_scale.is_finite()) {
            return Err(MeshError::Degenerate(format!("scale must be positive, got {uniform_scale}")));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
            uniform_scale,
        })
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self {
            rotation: Rotation3::from_axis_angle(&axis, angle),
            ..Self::identity()
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    /// Haar-uniform rotation: a normalized Gaussian quaternion.
    pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q = loop {
            let q = Quaternion::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            if q.norm() > 1e-9 {
                break q;
            }
        };
        Self {
            rotation: UnitQuaternion::from_quaternion(q).to_rotation_matrix(),
            ..Self::identity()
        }
    }

    pub fn with_translation(mut self, t: Vector3<f64>) -> Self {
        self.translation = t;
        self
    }

    pub fn with_scale(mut self, s: f64) -> Self {
        assert!(s > 0.0, "scale must be positive");
        self.uniform_scale = s;
        self
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords * self.uniform_scale + self.translation)
    }
}

pub fn apply_motion(mesh: &Mesh, motion: &RigidMotion) -> Mesh {
    mesh.map_vertices(|p| motion.apply(p))
}

/// Centers the bounding box at the origin and scales its longest side to 1.
pub fn normalize_unit_box(mesh: &Mesh) -> Result<Mesh, MeshError> {
    let first = mesh.vertices().first().ok_or(MeshError::Empty("vertices"))?;
    let (mut lo, mut hi) = (first.coords, first.coords);
    for v in mesh.vertices() {
        lo = lo.inf(&v.coords);
        hi = hi.sup(&v.coords);
    }
    let extent = (hi - lo).max();
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(MeshError::Degenerate("all vertices coincide".into()));
    }
    let center = (lo + hi) * 0.5;
    Ok(mesh.map_vertices(|p| Point::from((p.coords - center) / extent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(side: f64) -> Mesh {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(Point::new(
                side * (i & 1) as f64,
                side * ((i >> 1) & 1) as f64,
                side * ((i >> 2) & 1) as f64,
            ));
        }
        Mesh::new(v, vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn identity_and_translation() {
        let m = fixtures::tetrahedron();
        assert_eq!(apply_motion(&m, &RigidMotion::identity()), m);
        let origin = Mesh::new(
            vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let moved = apply_motion(&origin, &RigidMotion::translation(Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(moved.vertices()[0], Point::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let m = RigidMotion::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2);
        let p = m.apply(&Point::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Point::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn random_rotation_is_orthonormal_and_reproducible() {
        let a = RigidMotion::random_rotation(&mut ChaCha8Rng::seed_from_u64(3));
        let b = RigidMotion::random_rotation(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let r = a.rotation();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        assert!(RigidMotion::new(*r, Vector3::zeros(), 1.0).is_ok());
        assert!(RigidMotion::new(Matrix3::identity() * 2.0, Vector3::zeros(), 1.0).is_err());
    }

    #[test]
    fn unit_box_normalization() {
        let unit = normalize_unit_box(&cube(1.0)).unwrap();
        assert_relative_eq!(unit.vertices()[7], Point::new(0.5, 0.5, 0.5));
        let big = normalize_unit_box(&cube(10.0)).unwrap();
        assert_relative_eq!(big.vertices()[7], Point::new(0.5, 0.5, 0.5));
        assert_relative_eq!(big.vertices()[0], Point::new(-0.5, -0.5, -0.5));

        let sliver = Mesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(4.0, 0.0, 0.0), Point::new(2.0, 0.1, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let n = normalize_unit_box(&sliver).unwrap();
        assert_relative_eq!(n.vertices()[1].x - n.vertices()[0].x, 1.0);

        let point = Mesh::new(vec![Point::new(1.0, 1.0, 1.0); 3], vec![]).unwrap();
        assert!(normalize_unit_box(&point).is_err());
    }
}
