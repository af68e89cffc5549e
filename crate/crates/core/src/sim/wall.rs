//! Scripted wall-inspection task: takeoff, approach, and a sequence of
//! contacts held for a fixed time once the force sensor confirms them.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::contact::WallContact;
use super::reference::Trajectory;
use crate::controller::ControllerRefs;
use crate::error::{Error, Result};

/// Positions are CoM references; the tool tip sits `wall.tool_offset`
/// ahead along body x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallTask {
    pub wall: WallContact,
    /// Contact points on the wall [m].
    pub contacts: Vec<Vector3<f64>>,
    /// Hold time once contact is confirmed [s].
    pub contact_duration: f64,
    /// Reference depth beyond the wall surface [m].
    pub overshoot: f64,
    /// Tip clearance before pressing in [m].
    pub standoff: f64,
    pub hover_height: f64,
    pub takeoff_time: f64,
    pub approach_time: f64,
    pub reposition_time: f64,
    pub press_time: f64,
    pub pause: f64,
    /// Measured body-x force at or below −threshold counts as touching [N].
    pub contact_threshold: f64,
    /// Touching time needed to confirm a contact [s].
    pub contact_debounce: f64,
    /// Give up waiting for confirmation this long after the press move [s].
    pub contact_timeout: f64,
}

impl Default for WallTask {
    fn default() -> Self {
        Self {
            wall: WallContact::default(),
            contacts: vec![
                Vector3::new(6.0, 0.0, 1.0),
                Vector3::new(6.0, 0.0, 2.0),
                Vector3::new(6.0, 0.0, 3.0),
            ],
            contact_duration: 5.0,
            overshoot: 0.02,
            standoff: 0.3,
            hover_height: 1.0,
            takeoff_time: 4.0,
            approach_time: 8.0,
            reposition_time: 3.0,
            press_time: 2.0,
            pause: 2.0,
            contact_threshold: 1.0,
            contact_debounce: 0.2,
            contact_timeout: 10.0,
        }
    }
}

impl WallTask {
    pub fn validate(&self) -> Result<()> {
        let w = &self.wall;
        if !(w.stiffness >= 0.0 && w.damping >= 0.0 && w.x_w.is_finite() && w.tool_offset >= 0.0) {
            return Err(Error::Config(
                "wall: stiffness, damping and tool offset must be nonnegative".into(),
            ));
        }
        if self.contacts.is_empty() {
            return Err(Error::Config("wall task: no contact points".into()));
        }
        let times = [
            self.contact_duration,
            self.takeoff_time,
            self.approach_time,
            self.reposition_time,
            self.press_time,
            self.pause,
            self.contact_debounce,
            self.contact_timeout,
        ];
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "wall task: durations must be nonnegative".into(),
            ));
        }
        if !(self.standoff > 0.0 && self.overshoot >= 0.0 && self.contact_threshold > 0.0) {
            return Err(Error::Config(
                "wall task: standoff and contact threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    fn x_clear(&self) -> f64 {
        self.wall.x_w - self.wall.tool_offset - self.standoff
    }

    fn x_press(&self) -> f64 {
        self.wall.x_w - self.wall.tool_offset + self.overshoot
    }

    /// Upper bound on the task length, reached when every contact times out.
    pub fn max_duration(&self) -> f64 {
        let per_contact = 3.0 * self.pause
            + self.reposition_time
            + 2.0 * self.press_time
            + self.contact_timeout
            + self.contact_duration;
        self.takeoff_time
            + 2.0 * self.pause
            + self.approach_time
            + per_contact * self.contacts.len() as f64
    }
}

/// Interval during which a contact was held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactWindow {
    pub start: f64,
    pub end: f64,
    pub point: Vector3<f64>,
    /// False when the window was opened by the timeout.
    pub confirmed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    /// Pressing towards contact `k`; touches count from `press_start` and the
    /// press move ends at `press_end`.
    Seeking {
        k: usize,
        press_start: f64,
        press_end: f64,
        touching_since: Option<f64>,
    },
    /// Holding contact `k` until `until`.
    Holding { k: usize, until: f64 },
    /// Retracting after the last contact; finished at `end`.
    Leaving { end: f64 },
}

/// Reference generator driven by the force-sensor reading.
#[derive(Debug, Clone)]
pub struct WallScript {
    task: WallTask,
    trajectory: Trajectory,
    phase: Phase,
    windows: Vec<ContactWindow>,
}

impl WallScript {
    pub fn new(task: &WallTask, start: Vector3<f64>) -> Self {
        let mut trajectory = Trajectory::takeoff(
            start,
            Vector3::new(start.x, start.y, task.hover_height),
            task.takeoff_time,
        );
        let first = task.contacts[0];
        trajectory.then(
            task.pause,
            task.approach_time,
            Vector3::new(task.x_clear(), first.y, task.hover_height),
        );
        let mut script = Self {
            task: task.clone(),
            trajectory,
            phase: Phase::Leaving { end: 0.0 },
            windows: Vec::new(),
        };
        script.seek(0);
        script
    }

    /// Appends reposition and press moves for contact `k`.
    fn seek(&mut self, k: usize) {
        let c = self.task.contacts[k];
        let p = self.task.pause;
        self.trajectory
            .then(
                p,
                self.task.reposition_time,
                Vector3::new(self.task.x_clear(), c.y, c.z),
            )
            .then(
                p,
                self.task.press_time,
                Vector3::new(self.task.x_press(), c.y, c.z),
            );
        let press_end = self.trajectory.end_time();
        self.phase = Phase::Seeking {
            k,
            press_start: press_end - self.task.press_time,
            press_end,
            touching_since: None,
        };
    }

    fn retract(&mut self, t: f64, k: usize) {
        let c = self.task.contacts[k];
        self.trajectory.then_at(
            t,
            self.task.press_time,
            Vector3::new(self.task.x_clear(), c.y, c.z),
        );
    }

    pub fn eval(&self, t: f64) -> ControllerRefs {
        self.trajectory.eval(t)
    }

    /// Advances the script with the body-x force reading at time `t`.
    pub fn observe(&mut self, t: f64, measured_x: f64) {
        match self.phase {
            Phase::Seeking {
                k,
                press_start,
                press_end,
                touching_since,
            } => {
                let touching = t >= press_start && measured_x <= -self.task.contact_threshold;
                let since = if touching {
                    touching_since.or(Some(t))
                } else {
                    None
                };
                let confirmed = since.is_some_and(|s| t - s >= self.task.contact_debounce);
                let timed_out = t >= press_end + self.task.contact_timeout;
                if confirmed || timed_out {
                    let until = t + self.task.contact_duration;
                    self.windows.push(ContactWindow {
                        start: t,
                        end: until,
                        point: self.task.contacts[k],
                        confirmed,
                    });
                    self.phase = Phase::Holding { k, until };
                } else {
                    self.phase = Phase::Seeking {
                        k,
                        press_start,
                        press_end,
                        touching_since: since,
                    };
                }
            }
            Phase::Holding { k, until } if t >= until => {
                self.retract(t, k);
                if k + 1 < self.task.contacts.len() {
                    self.seek(k + 1);
                } else {
                    self.phase = Phase::Leaving {
                        end: self.trajectory.end_time() + self.task.pause,
                    };
                }
            }
            _ => {}
        }
    }

    pub fn finished(&self, t: f64) -> bool {
        matches!(self.phase, Phase::Leaving { end } if t >= end)
    }

    pub fn windows(&self) -> &[ContactWindow] {
        &self.windows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(task: &WallTask, force: impl Fn(f64, &ControllerRefs) -> f64) -> (WallScript, f64) {
        let mut s = WallScript::new(task, Vector3::zeros());
        let mut t = 0.0;
        while !s.finished(t) && t < task.max_duration() {
            let refs = s.eval(t);
            s.observe(t, force(t, &refs));
            t += 0.01;
        }
        (s, t)
    }

    /// Force seen when the reference tip is past the wall.
    fn ideal_contact(task: &WallTask) -> impl Fn(f64, &ControllerRefs) -> f64 + '_ {
        move |_, refs| {
            let tip = refs.position.x + task.wall.tool_offset;
            if tip > task.wall.x_w {
                -20.0
            } else {
                0.0
            }
        }
    }

    #[test]
    fn confirmed_contacts_open_windows_in_order() {
        let task = WallTask::default();
        let (s, t_end) = run(&task, ideal_contact(&task));
        assert!(s.finished(t_end));
        let w = s.windows();
        assert_eq!(w.len(), 3);
        for (win, c) in w.iter().zip(&task.contacts) {
            assert!(win.confirmed);
            assert_eq!(win.point, *c);
            assert!((win.end - win.start - 5.0).abs() < 1e-9);
            let tip = s.eval(0.5 * (win.start + win.end)).position.x + task.wall.tool_offset;
            assert!((tip - 6.02).abs() < 1e-12);
        }
        assert!(w.windows(2).all(|p| p[1].start > p[0].end));
        assert!(t_end < task.max_duration());
    }

    #[test]
    fn missing_contact_times_out() {
        let task = WallTask::default();
        let (s, t_end) = run(&task, |_, _| 0.0);
        assert!(s.finished(t_end));
        assert_eq!(s.windows().len(), 3);
        assert!(s.windows().iter().all(|w| !w.confirmed));
    }

    #[test]
    fn brief_touches_do_not_confirm() {
        let task = WallTask::default();
        let mut s = WallScript::new(&task, Vector3::zeros());
        for k in 0..1000 {
            let t = k as f64 * 0.01;
            // 0.1 s touches every second
            s.observe(t, if k % 100 < 10 { -5.0 } else { 0.0 });
        }
        assert!(s.windows().is_empty());
    }

    #[test]
    fn touches_before_the_press_move_are_ignored() {
        let task = WallTask::default();
        let (s, _) = run(&task, |_, _| -20.0);
        let first_press =
            task.takeoff_time + 3.0 * task.pause + task.approach_time + task.reposition_time;
        assert!(s.windows()[0].start >= first_press);
        for p in s.windows().windows(2) {
            assert!(
                p[1].start
                    >= p[0].end + task.press_time + 2.0 * task.pause + task.reposition_time - 1e-9
            );
        }
    }

    #[test]
    fn validation() {
        assert!(WallTask::default().validate().is_ok());
        assert!(WallTask {
            contacts: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(WallTask {
            contact_threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let mut t = WallTask::default();
        t.wall.stiffness = -1.0;
        assert!(t.validate().is_err());
    }
}
