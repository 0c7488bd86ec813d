//! Small quaternion helpers (scalar-first `[w, x, y, z]`).

pub type Quat = [f64; 4];

pub const IDENTITY: Quat = [1.0, 0.0, 0.0, 0.0];

pub fn mul(p: Quat, q: Quat) -> Quat {
    let [a1, b1, c1, d1] = p;
    let [a2, b2, c2, d2] = q;
    [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]
}

pub fn conj([a, b, c, d]: Quat) -> Quat {
    [a, -b, -c, -d]
}

pub fn normalize(q: Quat) -> Quat {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

pub fn dot(p: Quat, q: Quat) -> f64 {
    p.iter().zip(q.iter()).map(|(a, b)| a * b).sum()
}

/// Rotation of `angle` radians about the unit `axis`.
pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Quat {
    let (s, c) = (angle / 2.0).sin_cos();
    [c, axis[0] * s, axis[1] * s, axis[2] * s]
}

/// Rotation by the vector `v` (axis times angle).
pub fn from_rotation_vector(v: [f64; 3]) -> Quat {
    let angle = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if angle < 1e-12 {
        return normalize([1.0, v[0] / 2.0, v[1] / 2.0, v[2] / 2.0]);
    }
    from_axis_angle(v.map(|x| x / angle), angle)
}

/// Rotation vector of `q`, taking the short way round.
pub fn to_rotation_vector(q: Quat) -> [f64; 3] {
    let q = if q[0] < 0.0 { q.map(|v| -v) } else { q };
    let s = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if s < 1e-12 {
        return [2.0 * q[1], 2.0 * q[2], 2.0 * q[3]];
    }
    let angle = 2.0 * s.atan2(q[0]);
    [q[1] / s * angle, q[2] / s * angle, q[3] / s * angle]
}

/// Smallest rotation angle taking `p` to `q`, in `[0, π]`.
pub fn geodesic_angle(p: Quat, q: Quat) -> f64 {
    2.0 * dot(p, q).abs().min(1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rotation_vector_round_trip() {
        let v = [0.3, -0.2, 0.9];
        let back = to_rotation_vector(from_rotation_vector(v));
        for i in 0..3 {
            assert_abs_diff_eq!(back[i], v[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn geodesic_of_axis_rotation() {
        let q = from_axis_angle([0.0, 0.0, 1.0], 0.05);
        assert_abs_diff_eq!(geodesic_angle(IDENTITY, q), 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(geodesic_angle(q, q.map(|v| -v)), 0.0, epsilon = 1e-7);
        let composed = mul(q, from_axis_angle([0.0, 0.0, 1.0], 0.1));
        assert_abs_diff_eq!(geodesic_angle(IDENTITY, composed), 0.15, epsilon = 1e-9);
        assert_abs_diff_eq!(geodesic_angle(q, mul(q, conj(q))), 0.05, epsilon = 1e-9);
    }
}
