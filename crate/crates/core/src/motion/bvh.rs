//! BVH 1.0 parser (HIERARCHY + MOTION). Offsets are scaled into meters by
//! the caller-supplied unit scale; Euler channels are composed in the order
//! the file declares them, each about the local axis, degrees.

use nalgebra::{UnitQuaternion, Vector3};

use super::{HumanFrame, HumanMotion, HumanSegment, MotionError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Channel {
    Xpos,
    Ypos,
    Zpos,
    Xrot,
    Yrot,
    Zrot,
}

struct JointNode {
    name: String,
    parent: Option<usize>,
    offset: Vector3<f64>,
    channels: Vec<Channel>,
    channel_start: usize,
}

struct Lexer<'a> {
    tokens: Vec<(&'a str, usize)>,
    pos: usize,
    lines: Vec<&'a str>,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<&str> = text.lines().collect();
        let mut tokens = Vec::new();
        for (ln, line) in lines.iter().enumerate() {
            for tok in line.split_whitespace() {
                tokens.push((tok, ln + 1));
            }
        }
        Self { tokens, pos: 0, lines }
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(&'a str, usize)> {
        let t = self.tokens.get(self.pos).copied();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|t| t.1)
            .unwrap_or(self.lines.len())
    }

    fn expect(&mut self, what: &str) -> Result<usize, MotionError> {
        match self.next() {
            Some((t, ln)) if t.eq_ignore_ascii_case(what) => Ok(ln),
            Some((t, ln)) => {
                Err(MotionError::BvhSyntax { line: ln, msg: format!("expected {what}, got {t}") })
            }
            None => Err(MotionError::BvhSyntax {
                line: self.line(),
                msg: format!("expected {what}, got end of file"),
            }),
        }
    }

    fn f64(&mut self) -> Result<f64, MotionError> {
        match self.next() {
            Some((t, ln)) => {
                let v: f64 = t.parse().map_err(|_| MotionError::BvhSyntax {
                    line: ln,
                    msg: format!("expected number, got {t}"),
                })?;
                if !v.is_finite() {
                    return Err(MotionError::NonFinite { line: ln });
                }
                Ok(v)
            }
            None => Err(MotionError::BvhSyntax { line: self.line(), msg: "expected number".into() }),
        }
    }

    fn usize(&mut self) -> Result<usize, MotionError> {
        match self.next() {
            Some((t, ln)) => t.parse().map_err(|_| MotionError::BvhSyntax {
                line: ln,
                msg: format!("expected integer, got {t}"),
            }),
            None => {
                Err(MotionError::BvhSyntax { line: self.line(), msg: "expected integer".into() })
            }
        }
    }
}

fn parse_channel(tok: &str, line: usize) -> Result<Channel, MotionError> {
    match tok {
        "Xposition" => Ok(Channel::Xpos),
        "Yposition" => Ok(Channel::Ypos),
        "Zposition" => Ok(Channel::Zpos),
        "Xrotation" => Ok(Channel::Xrot),
        "Yrotation" => Ok(Channel::Yrot),
        "Zrotation" => Ok(Channel::Zrot),
        other => {
            Err(MotionError::BvhSyntax { line, msg: format!("unknown channel {other}") })
        }
    }
}

/// Parse BVH text into world-frame segment poses. `unit_scale` converts the
/// file's length unit into meters (1.0 for files already in meters).
pub fn parse_bvh(text: &str, unit_scale: f64) -> Result<HumanMotion, MotionError> {
    let mut lx = Lexer::new(text);
    lx.expect("HIERARCHY")?;
    let mut joints: Vec<JointNode> = Vec::new();
    let mut channel_total = 0usize;
    lx.expect("ROOT")?;
    parse_joint(&mut lx, None, &mut joints, &mut channel_total)?;

    lx.expect("MOTION")?;
    // Accept both "Frames:" and "Frames :".
    let declared = {
        let (t, ln) = lx
            .next()
            .ok_or_else(|| MotionError::BvhSyntax { line: lx.line(), msg: "expected Frames:".into() })?;
        if t.eq_ignore_ascii_case("Frames:") {
            lx.usize()?
        } else if t.eq_ignore_ascii_case("Frames") {
            lx.expect(":")?;
            lx.usize()?
        } else {
            return Err(MotionError::BvhSyntax { line: ln, msg: format!("expected Frames:, got {t}") });
        }
    };
    lx.expect("Frame")?;
    let frame_time = {
        let (t, ln) = lx
            .next()
            .ok_or_else(|| MotionError::BvhSyntax { line: lx.line(), msg: "expected Time:".into() })?;
        if t.eq_ignore_ascii_case("Time:") {
            lx.f64()?
        } else if t.eq_ignore_ascii_case("Time") {
            lx.expect(":")?;
            lx.f64()?
        } else {
            return Err(MotionError::BvhSyntax { line: ln, msg: format!("expected Time:, got {t}") });
        }
    };
    if frame_time <= 0.0 {
        return Err(MotionError::BvhSyntax { line: lx.line(), msg: "frame time must be > 0".into() });
    }

    // Data rows are line-oriented, starting after the Frame Time line.
    let data_first_line = lx.tokens[lx.pos - 1].1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln0, line) in lx.lines.iter().enumerate().skip(data_first_line) {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(channel_total);
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| MotionError::BvhSyntax {
                line: ln0 + 1,
                msg: format!("expected number in data row, got {tok}"),
            })?;
            if !v.is_finite() {
                return Err(MotionError::NonFinite { line: ln0 + 1 });
            }
            row.push(v);
        }
        if row.len() != channel_total {
            return Err(MotionError::ChannelMismatch {
                row: rows.len(),
                expected: channel_total,
                got: row.len(),
            });
        }
        rows.push(row);
    }
    if rows.len() != declared {
        return Err(MotionError::FrameCountMismatch { declared, got: rows.len() });
    }

    let segments: Vec<HumanSegment> = joints
        .iter()
        .map(|j| HumanSegment {
            name: j.name.clone(),
            parent: j.parent,
            rest_offset: j.offset * unit_scale,
        })
        .collect();

    let mut frames = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut pos = vec![Vector3::zeros(); joints.len()];
        let mut quat = vec![UnitQuaternion::identity(); joints.len()];
        for (i, j) in joints.iter().enumerate() {
            let mut local_t = j.offset * unit_scale;
            let mut local_r = UnitQuaternion::identity();
            for (k, ch) in j.channels.iter().enumerate() {
                let v = row[j.channel_start + k];
                match ch {
                    Channel::Xpos => local_t.x += v * unit_scale,
                    Channel::Ypos => local_t.y += v * unit_scale,
                    Channel::Zpos => local_t.z += v * unit_scale,
                    Channel::Xrot => {
                        local_r *= UnitQuaternion::from_axis_angle(
                            &Vector3::x_axis(),
                            v.to_radians(),
                        )
                    }
                    Channel::Yrot => {
                        local_r *= UnitQuaternion::from_axis_angle(
                            &Vector3::y_axis(),
                            v.to_radians(),
                        )
                    }
                    Channel::Zrot => {
                        local_r *= UnitQuaternion::from_axis_angle(
                            &Vector3::z_axis(),
                            v.to_radians(),
                        )
                    }
                }
            }
            match j.parent {
                Some(p) => {
                    quat[i] = quat[p] * local_r;
                    pos[i] = pos[p] + quat[p] * local_t;
                }
                None => {
                    quat[i] = local_r;
                    pos[i] = local_t;
                }
            }
        }
        frames.push(HumanFrame { pos, quat });
    }

    let motion = HumanMotion {
        name: joints.first().map(|j| j.name.clone()).unwrap_or_default(),
        fps: 1.0 / frame_time,
        segments,
        frames,
    };
    motion.validate()?;
    Ok(motion)
}

fn parse_joint(
    lx: &mut Lexer,
    parent: Option<usize>,
    joints: &mut Vec<JointNode>,
    channel_total: &mut usize,
) -> Result<(), MotionError> {
    let (name, _) = lx
        .next()
        .ok_or_else(|| MotionError::BvhSyntax { line: lx.line(), msg: "expected joint name".into() })?;
    lx.expect("{")?;
    lx.expect("OFFSET")?;
    let offset = Vector3::new(lx.f64()?, lx.f64()?, lx.f64()?);

    let mut channels = Vec::new();
    if let Some((t, _)) = lx.peek() {
        if t.eq_ignore_ascii_case("CHANNELS") {
            lx.next();
            let n = lx.usize()?;
            for _ in 0..n {
                let (tok, ln) = lx.next().ok_or_else(|| MotionError::BvhSyntax {
                    line: lx.line(),
                    msg: "expected channel name".into(),
                })?;
                channels.push(parse_channel(tok, ln)?);
            }
        }
    }
    let idx = joints.len();
    joints.push(JointNode {
        name: name.to_string(),
        parent,
        offset,
        channels,
        channel_start: *channel_total,
    });
    *channel_total += joints[idx].channels.len();

    loop {
        match lx.peek() {
            Some((t, _)) if t.eq_ignore_ascii_case("JOINT") => {
                lx.next();
                parse_joint(lx, Some(idx), joints, channel_total)?;
            }
            Some((t, _)) if t.eq_ignore_ascii_case("End") => {
                lx.next();
                lx.expect("Site")?;
                lx.expect("{")?;
                lx.expect("OFFSET")?;
                let off = Vector3::new(lx.f64()?, lx.f64()?, lx.f64()?);
                lx.expect("}")?;
                joints.push(JointNode {
                    name: format!("{name}_end"),
                    parent: Some(idx),
                    offset: off,
                    channels: Vec::new(),
                    channel_start: *channel_total,
                });
            }
            Some((t, _)) if t == "}" => {
                lx.next();
                return Ok(());
            }
            Some((t, ln)) => {
                return Err(MotionError::BvhSyntax {
                    line: ln,
                    msg: format!("unexpected token {t} in joint body"),
                })
            }
            None => {
                return Err(MotionError::BvhSyntax {
                    line: lx.line(),
                    msg: "unexpected end of file in joint body".into(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_JOINT: &str = "HIERARCHY\n\
ROOT hips\n{\n  OFFSET 0 0 1\n  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n  JOINT chest\n  {\n    OFFSET 0 0 0.5\n    CHANNELS 3 Zrotation Xrotation Yrotation\n    End Site\n    {\n      OFFSET 0 0 0.25\n    }\n  }\n}\nMOTION\nFrames: 2\nFrame Time: 0.05\n0 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0 0\n";

    #[test]
    fn zero_motion_gives_rest_pose() {
        let m = parse_bvh(TWO_JOINT, 1.0).unwrap();
        assert_eq!(m.fps, 20.0);
        assert_eq!(m.segments.len(), 3); // hips, chest, chest_end
        assert_eq!(m.frames.len(), 2);
        let f = &m.frames[0];
        assert!((f.pos[0] - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((f.pos[1] - Vector3::new(0.0, 0.0, 1.5)).norm() < 1e-12);
        assert!((f.pos[2] - Vector3::new(0.0, 0.0, 1.75)).norm() < 1e-12);
        for q in &f.quat {
            assert!(q.angle() < 1e-12);
        }
    }

    #[test]
    fn frame_count_mismatch_detected() {
        let text = TWO_JOINT.replace("Frames: 2", "Frames: 10");
        match parse_bvh(&text, 1.0) {
            Err(MotionError::FrameCountMismatch { declared: 10, got: 2 }) => {}
            other => panic!("expected frame count mismatch, got {other:?}"),
        }
    }

    #[test]
    fn channel_count_mismatch_detected() {
        let mut text = TWO_JOINT.to_string();
        text = text.replace("0 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0 0\n", "0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0 0\n");
        match parse_bvh(&text, 1.0) {
            Err(MotionError::ChannelMismatch { row: 0, expected: 9, got: 8 }) => {}
            other => panic!("expected channel mismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let text = TWO_JOINT.replace("0 0 0 0 0 0 0 0 0\n0", "0 0 0 nan 0 0 0 0 0\n0");
        assert!(matches!(parse_bvh(&text, 1.0), Err(MotionError::NonFinite { .. })));
    }

    #[test]
    fn root_z_rotation_swings_child() {
        // 90° Zrotation on the root: the chest offset (0,0,0.5) is along z so
        // it stays put, but a third joint offset along x must rotate to y.
        let text = "HIERARCHY\n\
ROOT hips\n{\n  OFFSET 0 0 0\n  CHANNELS 3 Zrotation Xrotation Yrotation\n  JOINT arm\n  {\n    OFFSET 1 0 0\n    CHANNELS 3 Zrotation Xrotation Yrotation\n    JOINT hand\n    {\n      OFFSET 1 0 0\n      CHANNELS 3 Zrotation Xrotation Yrotation\n      End Site\n      {\n        OFFSET 0.1 0 0\n      }\n    }\n  }\n}\nMOTION\nFrames: 1\nFrame Time: 0.05\n90 0 0 0 0 0 0 0 0\n";
        let m = parse_bvh(text, 1.0).unwrap();
        let f = &m.frames[0];
        // Manual matrix computation: Rz(90°)·(1,0,0) = (0,1,0); hand at (0,2,0).
        assert!((f.pos[1] - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        assert!((f.pos[2] - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn unit_scale_converts_offsets() {
        let m = parse_bvh(TWO_JOINT, 0.01).unwrap();
        assert!((m.frames[0].pos[0] - Vector3::new(0.0, 0.0, 0.01)).norm() < 1e-12);
        assert!((m.segments[1].rest_offset - Vector3::new(0.0, 0.0, 0.005)).norm() < 1e-12);
    }

    #[test]
    fn declared_rotation_order_respected() {
        // ZXY vs XYZ on the same angles must differ; check Z-then-X on a lever.
        let text = "HIERARCHY\n\
ROOT a\n{\n  OFFSET 0 0 0\n  CHANNELS 2 Zrotation Xrotation\n  JOINT b\n  {\n    OFFSET 0 1 0\n    CHANNELS 0\n    End Site\n    {\n      OFFSET 0 0.1 0\n    }\n  }\n}\nMOTION\nFrames: 1\nFrame Time: 0.1\n90 90\n";
        let m = parse_bvh(text, 1.0).unwrap();
        // Rz(90)*Rx(90) applied to (0,1,0): Rx first? No — composition order is
        // as declared: R = Rz·Rx, so v' = Rz·(Rx·v) = Rz·(0,0,1) = (0,0,1).
        assert!((m.frames[0].pos[1] - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
    }
}
