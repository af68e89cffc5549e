//! Piecewise minimum-jerk position references.

use nalgebra::Vector3;

use crate::controller::ControllerRefs;

/// Quintic rest-to-rest move from `from` to `to` over [t0, t1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub from: Vector3<f64>,
    pub to: Vector3<f64>,
}

impl Segment {
    fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let d = self.to - self.from;
        let h = self.t1 - self.t0;
        if h <= 0.0 || t >= self.t1 {
            return (self.to, Vector3::zeros(), Vector3::zeros());
        }
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let pos = 10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2;
        let vel = (30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2) / h;
        let acc = (60.0 * s - 180.0 * s2 + 120.0 * s3) / (h * h);
        (self.from + pos * d, vel * d, acc * d)
    }
}

/// Sequence of moves separated by holds. Before the first segment the
/// reference sits at its start; after the last it holds the end point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: Vector3<f64>,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn hold(at: Vector3<f64>) -> Self {
        Self {
            start: at,
            segments: Vec::new(),
        }
    }

    /// Takeoff from `start` to `target` over `duration`; a zero duration
    /// gives a step reference at the target.
    pub fn takeoff(start: Vector3<f64>, target: Vector3<f64>, duration: f64) -> Self {
        if duration <= 0.0 {
            return Self::hold(target);
        }
        Self {
            start,
            segments: vec![Segment {
                t0: 0.0,
                t1: duration,
                from: start,
                to: target,
            }],
        }
    }

    pub fn new(start: Vector3<f64>) -> Self {
        Self::hold(start)
    }

    pub fn end_point(&self) -> Vector3<f64> {
        self.segments.last().map_or(self.start, |s| s.to)
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t1)
    }

    /// Appends a move to `to` starting after `pause` seconds of holding.
    pub fn then(&mut self, pause: f64, duration: f64, to: Vector3<f64>) -> &mut Self {
        let t0 = self.end_time() + pause;
        self.then_at(t0, duration, to)
    }

    /// Appends a move starting at absolute time `t0`, which is clamped to
    /// the end of the current script.
    pub fn then_at(&mut self, t0: f64, duration: f64, to: Vector3<f64>) -> &mut Self {
        let t0 = t0.max(self.end_time());
        let from = self.end_point();
        self.segments.push(Segment {
            t0,
            t1: t0 + duration,
            from,
            to,
        });
        self
    }

    pub fn eval(&self, t: f64) -> ControllerRefs {
        let mut refs = ControllerRefs::hover_at(self.start);
        if let Some(seg) = self.segments.iter().rev().find(|s| t >= s.t0) {
            let (p, v, a) = seg.eval(t);
            refs.position = p;
            refs.velocity = v;
            refs.acceleration = a;
        }
        refs
    }
}
