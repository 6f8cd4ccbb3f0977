use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{Pose, TrajError, Trajectory};

const MIN_QUATERNION_NORM: f64 = 1e-9;

/// Parses TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per line,
/// `#` starts a comment line.
pub fn parse_trajectory(text: &str) -> Result<Trajectory, TrajError> {
    let mut poses: Vec<Pose> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = [0.0f64; 8];
        let mut count = 0;
        for token in line.split_whitespace() {
            if count == 8 {
                count += 1;
                break;
            }
            fields[count] = token.parse::<f64>().map_err(|_| TrajError::MalformedLine {
                line: line_no,
                reason: format!("non-numeric field {token:?}"),
            })?;
            count += 1;
        }
        if count != 8 {
            return Err(TrajError::MalformedLine {
                line: line_no,
                reason: format!(
                    "expected 8 fields (timestamp tx ty tz qx qy qz qw), got {}",
                    line.split_whitespace().count()
                ),
            });
        }
        if let Some(bad) = fields.iter().position(|v| !v.is_finite()) {
            return Err(TrajError::MalformedLine {
                line: line_no,
                reason: format!("field {} is not finite", bad + 1),
            });
        }
        let [t, x, y, z, qx, qy, qz, qw] = fields;
        if t < 0.0 {
            return Err(TrajError::MalformedLine {
                line: line_no,
                reason: "negative timestamp".into(),
            });
        }
        let q = Quaternion::new(qw, qx, qy, qz);
        if q.norm() < MIN_QUATERNION_NORM {
            return Err(TrajError::DegenerateQuaternion { line: line_no });
        }
        if let Some(prev) = poses.last() {
            if !(t > prev.t) {
                return Err(TrajError::NonMonotonicTimestamps { line: line_no });
            }
        }
        poses.push(Pose::new(
            t,
            Vector3::new(x, y, z),
            UnitQuaternion::from_quaternion(q),
        ));
    }
    if poses.is_empty() {
        return Err(TrajError::EmptyTrajectory);
    }
    Ok(Trajectory { poses })
}

/// Serializes a trajectory in TUM format. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 96 + 40);
    out.push_str("# timestamp tx ty tz qx qy qz qw\n");
    for p in traj.poses() {
        let q = p.orientation.quaternion();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.t, p.position.x, p.position.y, p.position.z, q.i, q.j, q.k, q.w
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_line() {
        let traj = parse_trajectory("0.0 0 0 0 0 0 0 1").unwrap();
        assert_eq!(traj.len(), 1);
        let p = traj.poses()[0];
        assert_eq!(p.t, 0.0);
        assert_eq!(p.position, Vector3::zeros());
        assert_eq!(p.orientation, UnitQuaternion::identity());
    }

    #[test]
    fn seven_fields_is_malformed() {
        let err = parse_trajectory("1.0 0 0 0 0 0 0").unwrap_err();
        assert!(matches!(err, TrajError::MalformedLine { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn nine_fields_is_malformed() {
        let err = parse_trajectory("1.0 0 0 0 0 0 0 1 5").unwrap_err();
        assert!(matches!(err, TrajError::MalformedLine { .. }));
    }

    #[test]
    fn non_numeric_is_malformed() {
        let err = parse_trajectory("1.0 0 0 x 0 0 0 1").unwrap_err();
        assert!(matches!(err, TrajError::MalformedLine { .. }));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "# header\n\n0 1 2 3 0 0 0 1\n  # indented comment\n1 1 2 3 0 0 0 1\n";
        assert_eq!(parse_trajectory(text).unwrap().len(), 2);
    }

    #[test]
    fn repeated_timestamp_rejected() {
        let err = parse_trajectory("0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n").unwrap_err();
        assert_eq!(err, TrajError::NonMonotonicTimestamps { line: 2 });
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_trajectory("# only\n").unwrap_err(), TrajError::EmptyTrajectory);
    }

    #[test]
    fn degenerate_quaternion_is_error() {
        let err = parse_trajectory("0 0 0 0 0 0 0 0").unwrap_err();
        assert_eq!(err, TrajError::DegenerateQuaternion { line: 1 });
    }

    #[test]
    fn quaternion_renormalized() {
        let traj = parse_trajectory("0 0 0 0 0 0 0 2").unwrap();
        let q = traj.poses()[0].orientation;
        assert!((q.quaternion().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_timestamp_rejected() {
        assert!(matches!(
            parse_trajectory("-1 0 0 0 0 0 0 1"),
            Err(TrajError::MalformedLine { .. })
        ));
    }
}
