//! Head-pose rotations.
//!
//! Axes: x to the right of the image, y up, z towards the camera. The pose
//! is applied as intrinsic rotations yaw (about y), then pitch (about x),
//! then roll (about z), all in degrees.

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn about_x(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn from_pose(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::about_y(yaw).then(&Self::about_x(pitch)).then(&Self::about_z(roll))
    }

    /// `self * other`: with intrinsic composition `other` is applied in the
    /// frame already rotated by `self`.
    pub fn then(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Rotation(out)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

pub fn normalize(v: Vec3) -> Option<Vec3> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 0.0 && n.is_finite()).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn yaw_turns_frontal_normal_sideways() {
        let n = Rotation::from_pose(0.0, 0.0, 90.0).apply([0.0, 0.0, 1.0]);
        assert!(close(n, [1.0, 0.0, 0.0], 1e-12));
        let n = Rotation::from_pose(90.0, 0.0, 0.0).apply([1.0, 0.0, 0.0]);
        assert!(close(n, [0.0, 1.0, 0.0], 1e-12));
    }

    proptest! {
        #[test]
        fn reverse_pose_undoes_rotation(
            r in -30.0..30.0f64, p in -30.0..30.0f64, y in -30.0..30.0f64,
            v in proptest::array::uniform3(-2.0..2.0f64),
        ) {
            let fwd = Rotation::from_pose(r, p, y);
            let back = Rotation::about_z(-r).then(&Rotation::about_x(-p)).then(&Rotation::about_y(-y));
            prop_assert!(close(back.apply(fwd.apply(v)), v, 1e-9));
        }
    }
}
