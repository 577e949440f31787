use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::soil::{SoilGrid, SoilModel};
use crate::error::{Error, Result};
use crate::hydraulics::{chamber_pressures, Direction, HydraulicCircuit};
use crate::kinematics::{CylinderState, Joint, JointConfiguration, MachineModel, PerJoint, PlanarChain};
use crate::units::Pressure;

pub const GRAVITY: f64 = 9.81;

/// Blade speed [m/s] over which the soil reaction builds up to full
/// magnitude, smoothing the direction reversal at rest.
const SOIL_SPEED_SCALE: f64 = 0.005;

/// How far ahead of the blade edge [m] the cut depth is sampled.
const SOIL_LOOKAHEAD: f64 = 0.02;

/// Ground-truth hydraulic parameters of one machine, as stored in a plant
/// file. The machine geometry is referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub schema_version: u32,
    pub machine: String,
    /// Plant integration step [s].
    pub dt: f64,
    pub tank_pressure: Pressure,
    /// Actuation dead time per joint [s].
    pub dead_time: PerJoint<f64>,
    /// First-order spool time constant per joint [s].
    pub spool_lag: PerJoint<f64>,
    pub circuits: PerJoint<HydraulicCircuit>,
}

/// Additional cylinder force on one joint over a time window, positive
/// resisting extension: `force + rate·(t − start)` for `start ≤ t < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub joint: Joint,
    pub start: f64,
    #[serde(default = "forever")]
    pub end: f64,
    #[serde(default)]
    pub force: f64,
    /// Growth rate [N/s].
    #[serde(default)]
    pub rate: f64,
}

impl LoadEvent {
    pub fn force_at(&self, time: f64) -> f64 {
        if time >= self.start && time < self.end {
            self.force + self.rate * (time - self.start)
        } else {
            0.0
        }
    }
}

fn forever() -> f64 {
    f64::INFINITY
}

/// Bounded piecewise-constant flow offsets standing in for flow sharing,
/// pump boost and recuperation. They only act on open spools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDisturbance {
    /// Maximum offset [m³/s].
    pub amplitude: f64,
    /// Hold time of each random level [s].
    pub hold: f64,
    pub seed: u64,
}

impl FlowDisturbance {
    pub fn offset(&self, joint: Joint, time: f64) -> f64 {
        let segment = (time / self.hold).floor().max(0.0) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (joint.index() as u64 + 1) << 56);
        rng.set_stream(segment);
        rng.random_range(-self.amplitude..=self.amplitude)
    }
}

/// What the hydraulics did to one joint during the last step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointDiagnostics {
    /// Command leaving the dead-time buffer.
    pub applied_command: f64,
    /// Spool position after the lag.
    pub spool: f64,
    /// Flow magnitude into the active chamber [m³/s].
    pub flow: f64,
    /// Quasi-static cylinder force (gravity, friction, payload, soil,
    /// external), without inertia [N].
    pub quasi_static_force: f64,
    /// Pressure available to the function in the commanded direction [Pa].
    pub supply_pressure: f64,
    /// Reported force over the active area of the commanded direction [Pa].
    pub function_pressure: f64,
    /// Spool open but no motion because the load pressure reached supply,
    /// or the joint is pushing against an end stop.
    pub stalled: bool,
}

/// Complete simulator state. Cheap enough to clone per step; for long runs
/// prefer [`Plant::step_in_place`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub cabin_pitch: f64,
    pub joints: JointConfiguration,
    pub cylinders: PerJoint<CylinderState>,
    pub delayed_commands: PerJoint<VecDeque<f64>>,
    pub spool: [f64; 3],
    pub soil: Option<SoilGrid>,
    /// Blade-tip soil reaction (x, z) [N].
    pub soil_force: [f64; 2],
    pub diagnostics: PerJoint<JointDiagnostics>,
    pub steps: u64,
    pub clock: f64,
}

impl PlantState {
    pub fn blade_position(&self, plant: &Plant) -> [f64; 2] {
        plant.chain().position(self.cabin_pitch, &self.joints.theta)
    }
}

/// Deterministic plant simulator: machine geometry, ground-truth
/// hydraulics, soil and loads. Stepping never mutates the plant itself.
#[derive(Debug, Clone)]
pub struct Plant {
    pub machine: MachineModel,
    pub params: PlantParams,
    pub cabin_pitch: f64,
    pub soil: Option<SoilModel>,
    /// Point mass at the blade tip [kg].
    pub payload: f64,
    pub load_events: Vec<LoadEvent>,
    pub disturbance: Option<FlowDisturbance>,
    chain: PlanarChain,
}

struct Motion {
    velocity: f64,
    flow: f64,
    supply: f64,
    /// Pressure the function settles at when it cannot move.
    stall_pressure: Option<f64>,
}

impl Plant {
    pub fn new(machine: MachineModel, params: PlantParams) -> Result<Self> {
        machine.validate()?;
        let bad = |m: String| Err(Error::InvalidModel(m));
        if !(params.dt > 0.0) {
            return bad(format!("plant step must be positive, got {}", params.dt));
        }
        for j in Joint::ALL {
            if !(params.dead_time[j] >= 0.0) || !(params.spool_lag[j] >= 0.0) {
                return bad(format!("{j}: dead time and spool lag must be non-negative"));
            }
            let circuit = &params.circuits[j];
            circuit.validate()?;
            if let HydraulicCircuit::Nfc(c) = circuit {
                let areas = machine.joints[j].areas;
                let tol = 1e-9;
                if (c.extend.area - areas.a_a).abs() > tol || (c.retract.area - areas.a_b).abs() > tol {
                    return bad(format!("{j}: NFC circuit areas disagree with the machine"));
                }
            }
        }
        let chain = PlanarChain::from_model(&machine);
        Ok(Plant {
            cabin_pitch: machine.cabin_pitch,
            machine,
            params,
            soil: None,
            payload: 0.0,
            load_events: Vec::new(),
            disturbance: None,
            chain,
        })
    }

    pub fn with_soil(mut self, soil: SoilModel) -> Result<Self> {
        soil.validate()?;
        self.soil = Some(soil);
        Ok(self)
    }

    pub fn with_payload(mut self, mass: f64) -> Self {
        self.payload = mass;
        self
    }

    pub fn chain(&self) -> PlanarChain {
        self.chain
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn tank(&self) -> f64 {
        self.params.tank_pressure.pa()
    }

    pub fn dead_time_steps(&self, j: Joint) -> usize {
        (self.params.dead_time[j] / self.params.dt).round() as usize
    }

    /// A state at rest at `theta`, with empty (zero) command buffers and
    /// holding pressures.
    pub fn initial_state(&self, theta: [f64; 3]) -> Result<PlantState> {
        for j in Joint::ALL {
            let lim = self.machine.joints[j].limits;
            let t = theta[j.index()];
            if !t.is_finite() || !lim.contains(t) {
                return Err(Error::InvalidModel(format!(
                    "{j}: initial angle {t} outside [{}, {}]",
                    lim.min, lim.max
                )));
            }
        }
        let mut state = PlantState {
            cabin_pitch: self.cabin_pitch,
            joints: JointConfiguration::at_rest(theta),
            cylinders: PerJoint::splat(CylinderState::default()),
            delayed_commands: PerJoint::from_fn(|j| VecDeque::from(vec![0.0; self.dead_time_steps(j)])),
            spool: [0.0; 3],
            soil: self.soil.as_ref().map(SoilModel::grid),
            soil_force: [0.0; 2],
            diagnostics: PerJoint::splat(JointDiagnostics::default()),
            steps: 0,
            clock: 0.0,
        };
        let gamma = self.machine.sensitivity(&theta)?;
        let f = self.base_forces(&state.joints, &gamma, 0.0);
        for j in Joint::ALL {
            let m = self.motion(j, 0.0, f[j], Some(f[j]), 0.0);
            let d = self.report(j, &state.joints, gamma[j], f[j], 0.0, &m);
            state.cylinders[j] = d.0;
            state.diagnostics[j] = d.1;
        }
        Ok(state)
    }

    pub fn step(&self, state: &PlantState, commands: [f64; 3]) -> Result<PlantState> {
        let mut next = state.clone();
        self.step_in_place(&mut next, commands)?;
        Ok(next)
    }

    /// Advances the plant by one step of `dt`. Commands outside [−1, 1] are
    /// clipped; non-finite commands are rejected and leave the state as is.
    pub fn step_in_place(&self, s: &mut PlantState, commands: [f64; 3]) -> Result<()> {
        for j in Joint::ALL {
            let u = commands[j.index()];
            if !u.is_finite() {
                return Err(Error::NonFiniteCommand { joint: j, value: u });
            }
        }
        let dt = self.params.dt;
        let time = s.clock;

        let mut applied = [0.0; 3];
        for j in Joint::ALL {
            let i = j.index();
            let u = commands[i].clamp(-1.0, 1.0);
            let buf = &mut s.delayed_commands[j];
            applied[i] = if buf.is_empty() {
                u
            } else {
                buf.push_back(u);
                buf.pop_front().unwrap_or(0.0)
            };
            let tau = self.params.spool_lag[j];
            let alpha = if tau > 0.0 { 1.0 - (-dt / tau).exp() } else { 1.0 };
            s.spool[i] += (applied[i] - s.spool[i]) * alpha;
        }

        let theta = s.joints.theta;
        let gamma = self.machine.sensitivity(&theta)?;
        let jac = self.chain.jacobian(s.cabin_pitch, &theta);
        let tip = self.chain.position(s.cabin_pitch, &theta);

        // Pass without soil gives the direction the blade is trying to move.
        let free = self.base_forces(&s.joints, &gamma, time);
        let free_motion = Joint::ALL.map(|j| self.motion(j, s.spool[j.index()], free[j], None, time));
        let rate_free = Joint::ALL.map(|j| gamma[j] * free_motion[j.index()].velocity);
        let v_free = mat_vec(&jac, &rate_free);

        let soil_force = match (&self.soil, &s.soil) {
            (Some(model), Some(grid)) => self.soil_reaction(model, grid, tip, v_free),
            _ => [0.0; 2],
        };
        let mut total = free;
        for j in Joint::ALL {
            let i = j.index();
            let tau_soil = -(jac[0][i] * soil_force[0] + jac[1][i] * soil_force[1]);
            total[j] += gamma[j] * tau_soil;
        }

        let mut next = s.joints;
        let mut motions = Vec::with_capacity(3);
        for j in Joint::ALL {
            let i = j.index();
            let mut m = self.motion(j, s.spool[i], total[j], Some(free[j]), time);
            let lim = self.machine.joints[j].limits;
            let rate = gamma[j] * m.velocity;
            let pushing_out = (theta[i] >= lim.max && rate > 0.0) || (theta[i] <= lim.min && rate < 0.0);
            if pushing_out {
                m.stall_pressure = Some(self.held_pressure(j, s.spool[i], free[j], m.supply));
                m.velocity = 0.0;
                m.flow = 0.0;
            }
            let target = (theta[i] + gamma[j] * m.velocity * dt).clamp(lim.min, lim.max);
            next.theta_dot[i] = (target - theta[i]) / dt;
            next.theta[i] = target;
            if next.theta_dot[i] != gamma[j] * m.velocity {
                m.velocity = next.theta_dot[i] / gamma[j];
            }
            next.theta_ddot[i] = (next.theta_dot[i] - s.joints.theta_dot[i]) / dt;
            motions.push(m);
        }

        let gamma_next = self.machine.sensitivity(&next.theta)?;
        for j in Joint::ALL {
            let i = j.index();
            let (cyl, mut diag) = self.report(j, &next, gamma_next[j], total[j], s.spool[i], &motions[i]);
            diag.applied_command = applied[i];
            s.cylinders[j] = cyl;
            s.diagnostics[j] = diag;
        }

        if let Some(grid) = s.soil.as_mut() {
            let tip_next = self.chain.position(s.cabin_pitch, &next.theta);
            grid.cut(tip, tip_next);
        }
        s.joints = next;
        s.soil_force = soil_force;
        s.steps += 1;
        s.clock = s.steps as f64 * dt;
        Ok(())
    }

    /// Quasi-static cylinder forces from gravity, payload, friction and
    /// scheduled load events.
    pub fn base_forces(&self, q: &JointConfiguration, gamma: &PerJoint<f64>, time: f64) -> PerJoint<f64> {
        let torque = self.gravity_torque(&q.theta);
        PerJoint::from_fn(|j| {
            let i = j.index();
            let friction = self.machine.joints[j].friction * q.theta_dot[i];
            let external: f64 = self
                .load_events
                .iter()
                .filter(|e| e.joint == j)
                .map(|e| e.force_at(time))
                .sum();
            gamma[j] * (torque[i] + friction) + external
        })
    }

    /// Joint torque needed to hold the links and payload against gravity.
    pub fn gravity_torque(&self, theta: &[f64; 3]) -> [f64; 3] {
        const SIGNS: [f64; 3] = [1.0, -1.0, -1.0];
        let phi = self.chain.link_angles(self.cabin_pitch, theta);
        let len = self.chain.lengths;
        let mass = self.machine.mass.link_mass.to_array();
        let frac = self.machine.mass.com_fraction.to_array();
        let mut tau = [0.0; 3];
        for j in 0..3 {
            // ∂z/∂θ_j of each link's centre of mass and of the tip payload.
            let mut acc = 0.0;
            for k in j..3 {
                let mut dz = frac[k] * len[k] * phi[k].cos();
                for i in j..k {
                    dz += len[i] * phi[i].cos();
                }
                acc += mass[k] * dz;
            }
            let tip_dz: f64 = (j..3).map(|i| len[i] * phi[i].cos()).sum();
            acc += self.payload * tip_dz;
            tau[j] = GRAVITY * SIGNS[j] * acc;
        }
        tau
    }

    fn soil_reaction(&self, model: &SoilModel, grid: &SoilGrid, tip: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        let speed = v[0].hypot(v[1]);
        if speed == 0.0 {
            return [0.0; 2];
        }
        let ahead = tip[0] + SOIL_LOOKAHEAD * v[0] / speed;
        let depth = grid.height(ahead) - tip[1];
        let f = model.reaction(tip[0], depth, self.machine.bucket_width);
        if f == 0.0 {
            return [0.0; 2];
        }
        let scale = (speed / SOIL_SPEED_SCALE).tanh();
        let lift = model.vertical_ratio * f * (v[0] / SOIL_SPEED_SCALE).tanh().abs();
        [-f * scale * v[0] / speed, -f * scale * v[1] / speed + lift]
    }

    /// Flow-law response of one function to spool `x` against quasi-static
    /// force `f`. `free_force` is the same load without soil; when given,
    /// a blocked function reports the pressure it stalls at.
    fn motion(&self, j: Joint, x: f64, f: f64, free_force: Option<f64>, time: f64) -> Motion {
        let areas = self.machine.joints[j].areas;
        let d = Direction::of(x);
        let p_f = d.load_pressure(f, &areas);
        let area = d.area(&areas);
        let circuit = &self.params.circuits[j];
        let (mut flow, supply, open) = match circuit {
            HydraulicCircuit::Nfc(c) => {
                let dir = c.direction(d);
                let open = dir.orifice.resistance(x.abs()).is_finite();
                (dir.flow(x.abs(), p_f), dir.pump_pressure(x.abs()), open)
            }
            HydraulicCircuit::Ls(c) => {
                let v = c.velocity(x, p_f);
                (v.abs() * area, c.relief_pressure.pa(), x.abs() > c.deadband)
            }
        };
        if flow > 0.0 {
            if let Some(dist) = &self.disturbance {
                flow = (flow + dist.offset(j, time)).max(0.0);
            }
        }
        let stall_pressure = match free_force {
            Some(ff) if open && flow == 0.0 => Some(self.held_pressure(j, x, ff, supply)),
            _ => None,
        };
        Motion {
            velocity: d.sign() * flow / area,
            flow,
            supply,
            stall_pressure,
        }
    }

    /// Pressure of a blocked function: the supply, unless the load without
    /// soil alone already exceeds it, in which case the load is held.
    fn held_pressure(&self, j: Joint, x: f64, free_force: f64, supply: f64) -> f64 {
        let d = Direction::of(x);
        let p_free = d.load_pressure(free_force, &self.machine.joints[j].areas);
        if p_free >= supply {
            p_free.min(self.params.circuits[j].relief_pressure())
        } else {
            supply
        }
    }

    /// Cylinder measurement after the step. Inertia only enters here, on
    /// top of the quasi-static load, and the active chamber never exceeds
    /// the supply pressure.
    fn report(
        &self,
        j: Joint,
        q: &JointConfiguration,
        gamma: f64,
        quasi_static: f64,
        x: f64,
        m: &Motion,
    ) -> (CylinderState, JointDiagnostics) {
        let i = j.index();
        let spec = &self.machine.joints[j];
        let areas = spec.areas;
        let relief = self.params.circuits[j].relief_pressure();
        let d = Direction::of(x);
        let area = d.area(&areas);
        let force = match m.stall_pressure {
            Some(p) => d.sign() * p * area,
            None => {
                let f = quasi_static + gamma * spec.inertia * q.theta_ddot[i];
                let mut p = d.load_pressure(f, &areas);
                if m.flow > 0.0 {
                    p = p.min(m.supply);
                }
                d.sign() * p * area
            }
        };
        let force = force.clamp(-relief * areas.a_b, relief * areas.a_a);
        let (p_a, p_b) = chamber_pressures(force, self.tank(), &areas);
        let cyl = CylinderState {
            stroke: spec.linkage.stroke(q.theta[i]),
            velocity: m.velocity,
            p_a,
            p_b,
        };
        let diag = JointDiagnostics {
            applied_command: 0.0,
            spool: x,
            flow: m.flow,
            quasi_static_force: quasi_static,
            supply_pressure: m.supply,
            function_pressure: d.load_pressure(force, &areas),
            stalled: m.stall_pressure.is_some(),
        };
        (cyl, diag)
    }
}

fn mat_vec(m: &[[f64; 3]; 2], v: &[f64; 3]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    ]
}
