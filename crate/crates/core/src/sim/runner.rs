use std::time::Instant;

use nalgebra::DMatrix;

use crate::allocator::{solve, AllocationProblem, AllocationSolution, SolveOptions};
use crate::degradation::{
    capability_indicator, instantaneous_degradation, task_submatrices, update_degradation,
    DegradationState,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Trajectory};
use crate::tasks::{
    coverage_targets, evaluate, predict_from, smooth_discrepancy, step_dynamics, task_discrepancy,
    Evaluation, RobotState, TaskFrame, TaskKind,
};
use crate::team::{CapabilityMatrix, SpeciesMapping};

use super::config::ScenarioConfig;
use super::trace::{
    DegradationRow, Event, EventKind, MarginRow, RobotRow, SimTrace, Summary, TriggerReason,
};

/// Knobs that do not belong in the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub solver: SolveOptions,
    /// Record solve wall times (makes traces nondeterministic).
    pub record_wall_times: bool,
    /// Skip per-tick robot and degradation rows. Margins are always kept.
    pub events_only: bool,
    pub overrides: serde_json::Map<String, serde_json::Value>,
}

/// Allocation currently in force.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub assignment: Vec<Option<usize>>,
    pub configs: Vec<usize>,
    pub relaxed: Vec<bool>,
}

impl Allocation {
    pub fn idle(num_robots: usize, num_tasks: usize) -> Self {
        Allocation {
            assignment: vec![None; num_robots],
            configs: vec![0; num_tasks],
            relaxed: vec![false; num_tasks],
        }
    }
}

/// Applies a solved allocation to the robots and returns the resulting
/// events: one per reassigned robot, switched configuration or changed
/// relaxation flag. Robots with an all-zero column become idle.
pub fn apply_allocation(
    solution: &AllocationSolution,
    robots: &mut [RobotState],
    current: &mut Allocation,
    transition_costs: &[f64],
) -> Vec<EventKind> {
    let mut events = Vec::new();
    let cost = |t: Option<usize>| t.map_or(0.0, |m| transition_costs[m]);
    for (i, robot) in robots.iter_mut().enumerate() {
        let to = solution.assignment[i];
        if robot.task != to {
            events.push(EventKind::Reassigned {
                robot: i,
                from: robot.task,
                to,
                transition_cost: (cost(to) - cost(robot.task)).abs(),
            });
            robot.task = to;
        }
    }
    for (m, (&from, &to)) in current.configs.iter().zip(&solution.configs).enumerate() {
        if from != to {
            events.push(EventKind::ConfigurationSwitched { task: m, from, to });
        }
    }
    for (m, (&from, &to)) in current.relaxed.iter().zip(&solution.relaxed).enumerate() {
        if from != to {
            events.push(EventKind::TaskRelaxed { task: m, relaxed: to });
        }
    }
    *current = Allocation {
        assignment: solution.assignment.clone(),
        configs: solution.configs.clone(),
        relaxed: solution.relaxed.clone(),
    };
    events
}

fn saturate(u: Point, max_speed: Option<f64>) -> Point {
    match max_speed {
        Some(v) if u.norm() > v => u * (v / u.norm()),
        _ => u,
    }
}

/// Mutable state of a running scenario.
struct World<'a> {
    config: &'a ScenarioConfig,
    options: &'a RunOptions,
    q: CapabilityMatrix,
    mapping: SpeciesMapping,
    requirements: Vec<DMatrix<f64>>,
    transition_costs: Vec<f64>,
    homes: Vec<Trajectory>,
    robots: Vec<RobotState>,
    dv: Vec<f64>,
    dv_smoothed: Vec<f64>,
    degradation: DegradationState,
    allocation: Allocation,
    trace: SimTrace,
    wall_ms: Vec<f64>,
}

/// Runs the resilient allocation loop on `config`.
///
/// Each tick: evaluate task values and controllers, step the dynamics,
/// measure discrepancies, update the per-task degradation and, when the
/// trigger fires, re-solve the allocation. A new allocation takes effect on
/// the following tick. A failed re-solve is logged and the previous
/// allocation is kept; failure of the initial solve is an error.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<SimTrace> {
    config.validate()?;
    let mut world = World::new(config, options)?;
    world.initial_solve()?;
    for tick in 0..config.num_ticks() {
        world.step(tick)?;
    }
    Ok(world.finish())
}

impl<'a> World<'a> {
    fn new(config: &'a ScenarioConfig, options: &'a RunOptions) -> Result<Self> {
        let q = config.capability_matrix()?;
        let mapping = config.species_mapping()?;
        let (n, m, u) = (config.num_robots(), config.num_tasks(), q.num_capabilities());
        let positions = config.positions();
        let robots: Vec<RobotState> = positions
            .iter()
            .zip(config.species_of())
            .map(|(&p, s)| RobotState::new(p, s))
            .collect();
        Ok(World {
            config,
            options,
            requirements: config.requirement_matrices(),
            transition_costs: config.tasks.iter().map(|t| t.transition_cost).collect(),
            homes: positions.iter().map(|&p| Trajectory::stationary(p)).collect(),
            robots,
            dv: vec![0.0; n],
            dv_smoothed: vec![0.0; n],
            degradation: DegradationState::new(m, u),
            allocation: Allocation::idle(n, m),
            trace: SimTrace {
                dt: config.sim.dt,
                num_robots: n,
                num_tasks: m,
                num_capabilities: u,
                robots: Vec::new(),
                degradation: Vec::new(),
                margins: Vec::new(),
                events: Vec::new(),
                summary: Summary {
                    scenario: config.name.clone(),
                    seed: config.seed,
                    ticks: config.num_ticks(),
                    solves: 0,
                    failed_solves: 0,
                    min_margins: vec![f64::INFINITY; m],
                    final_assignment: Vec::new(),
                    final_configs: Vec::new(),
                    final_relaxed: Vec::new(),
                    wall_ms: None,
                    overrides: options.overrides.clone(),
                },
            },
            wall_ms: Vec::new(),
            q,
            mapping,
        })
    }

    fn problem(&self) -> AllocationProblem {
        let sim = &self.config.sim;
        AllocationProblem {
            capabilities: self.q.clone(),
            species: self.mapping.clone(),
            requirements: self.requirements.clone(),
            degradation: self.degradation.d.clone(),
            task_weights: self.config.tasks.iter().map(|t| t.weight).collect(),
            species_costs: self.config.team.deployment_costs.clone(),
            transition_costs: self.transition_costs.clone(),
            previous: self.robots.iter().map(|r| r.task).collect(),
            discrepancy: self.dv_smoothed.clone(),
            relaxation_penalty: sim.balance_weight,
            delta_max: sim.delta_max,
            dv_thresh: sim.dv_thresh,
        }
    }

    fn event(&mut self, tick: u64, kind: EventKind) {
        self.trace.events.push(Event {
            tick,
            t: tick as f64 * self.config.sim.dt,
            kind,
        });
    }

    fn initial_solve(&mut self) -> Result<()> {
        let solution = self.timed_solve()?;
        self.accept(0, &solution);
        self.degradation.take_snapshot(0);
        Ok(())
    }

    fn timed_solve(&mut self) -> Result<AllocationSolution> {
        let start = Instant::now();
        let result = solve(&self.problem(), &self.options.solver);
        self.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        result
    }

    fn accept(&mut self, tick: u64, solution: &AllocationSolution) {
        let wall_ms = self
            .options
            .record_wall_times
            .then(|| *self.wall_ms.last().expect("timed"));
        self.event(
            tick,
            EventKind::MiqpSolved {
                objective: solution.objective,
                nodes: solution.stats.nodes,
                gap: solution.stats.gap,
                margins: solution
                    .margins
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                wall_ms,
            },
        );
        self.trace.summary.solves += 1;
        let changes = apply_allocation(
            solution,
            &mut self.robots,
            &mut self.allocation,
            &self.transition_costs,
        );
        self.event(
            tick,
            EventKind::AllocationApplied {
                assignment: solution.assignment.clone(),
                configs: solution.configs.clone(),
                relaxed: solution.relaxed.clone(),
            },
        );
        for kind in changes {
            self.event(tick, kind);
        }
    }

    /// Reference position and velocity of every task at `t`.
    fn references(&self, t: f64) -> Vec<(Point, Point)> {
        self.config
            .tasks
            .iter()
            .map(|task| task.kind.reference(t, self.config.sim.dt).unwrap_or_default())
            .collect()
    }

    fn members(&self, task: usize) -> Vec<usize> {
        (0..self.robots.len())
            .filter(|&i| self.robots[i].task == Some(task))
            .collect()
    }

    /// Coverage centroids for the members of every coverage task, held
    /// fixed for the tick.
    fn centroids(&self, positions: &[Point]) -> Vec<Option<Point>> {
        let mut out = vec![None; positions.len()];
        for (m, task) in self.config.tasks.iter().enumerate() {
            if let TaskKind::Coverage { domain, density } = &task.kind {
                let members = self.members(m);
                let pts: Vec<Point> = members.iter().map(|&i| positions[i]).collect();
                let targets =
                    coverage_targets(&pts, density, domain, self.config.sim.coverage_resolution);
                for (&i, c) in members.iter().zip(targets) {
                    out[i] = Some(c);
                }
            }
        }
        out
    }

    /// Task value and gradients of every robot. Idle robots are scored on
    /// returning home.
    fn evaluate_all(
        &self,
        positions: &[Point],
        sensing: &[f64],
        refs: &[(Point, Point)],
        centroids: &[Option<Point>],
        members: &[Vec<usize>],
    ) -> Result<Vec<Evaluation>> {
        (0..self.robots.len())
            .map(|i| match self.robots[i].task {
                Some(m) => {
                    let frame = TaskFrame {
                        members: &members[m],
                        positions,
                        sensing,
                        reference: refs[m].0,
                        centroids,
                    };
                    evaluate(&self.config.tasks[m].kind, i, &frame)
                }
                None => {
                    let home = TaskKind::GoalTracking {
                        goal: self.homes[i].clone(),
                    };
                    let frame = TaskFrame {
                        members: std::slice::from_ref(&i),
                        positions,
                        sensing,
                        reference: self.homes[i].position(0.0),
                        centroids,
                    };
                    evaluate(&home, i, &frame)
                }
            })
            .collect()
    }

    fn gain(&self, robot: usize) -> f64 {
        match self.robots[robot].task {
            Some(m) => self.config.task_gain(m),
            None => self.config.sim.gain,
        }
    }

    fn step(&mut self, tick: u64) -> Result<()> {
        let config = self.config;
        let sim = &config.sim;
        let (dt, t) = (sim.dt, tick as f64 * sim.dt);
        let n = self.robots.len();
        let m = self.config.num_tasks();
        let members: Vec<Vec<usize>> = (0..m).map(|k| self.members(k)).collect();

        let positions: Vec<Point> = self.robots.iter().map(|r| r.position).collect();
        let sensing: Vec<f64> = self.robots.iter().map(|r| r.sensing).collect();
        let refs_now = self.references(t);
        let centroids = self.centroids(&positions);
        let before = self.evaluate_all(&positions, &sensing, &refs_now, &centroids, &members)?;
        let velocities: Vec<Point> = (0..n)
            .map(|i| saturate(-before[i].grad_self * self.gain(i), sim.max_speed))
            .collect();
        for (i, robot) in self.robots.iter_mut().enumerate() {
            step_dynamics(i, robot, velocities[i], &self.config.disturbances, t, dt);
        }

        // Each robot predicts with its own command but with what its
        // neighbors actually did over the tick.
        let ref_vel = |i: usize| self.robots[i].task.map_or(Point::zeros(), |k| refs_now[k].1);
        let mut realized: Vec<Point> = (0..n)
            .map(|r| (self.robots[r].position - positions[r]) / dt)
            .collect();
        let mut predicted = Vec::with_capacity(n);
        for i in 0..n {
            let own = std::mem::replace(&mut realized[i], velocities[i]);
            predicted.push(predict_from(&before[i], i, &realized, ref_vel(i), dt)?);
            realized[i] = own;
        }

        let positions: Vec<Point> = self.robots.iter().map(|r| r.position).collect();
        let sensing: Vec<f64> = self.robots.iter().map(|r| r.sensing).collect();
        let refs_next = self.references(t + dt);
        let after = self.evaluate_all(&positions, &sensing, &refs_next, &centroids, &members)?;

        let thresh = sim.dv_thresh;
        let mut impaired = Vec::new();
        for i in 0..n {
            self.dv[i] = task_discrepancy(before[i].value, after[i].value, predicted[i]);
            let smoothed = smooth_discrepancy(self.dv_smoothed[i], self.dv[i], dt);
            let was_eligible = self.dv_smoothed[i] <= thresh;
            self.dv_smoothed[i] = match self.robots[i].task {
                Some(_) => smoothed,
                // Idle robots may only accumulate discrepancy, so an excluded
                // robot stays excluded.
                None => smoothed.max(self.dv_smoothed[i]),
            };
            if let Some(task) = self.robots[i].task {
                if was_eligible && self.dv_smoothed[i] > thresh {
                    impaired.push((i, task));
                }
            }
        }
        let crossed = !impaired.is_empty();
        for (robot, task) in impaired {
            self.event(tick, EventKind::RobotImpaired { robot, task });
        }

        for (k, team) in members.iter().enumerate() {
            if team.is_empty() {
                continue;
            }
            let (p_sub, qbar_sub) = task_submatrices(team, &self.mapping, &self.q);
            let dv: Vec<f64> = team.iter().map(|&i| self.dv[i]).collect();
            let d_star = instantaneous_degradation(&dv, &p_sub, &qbar_sub)?;
            let theta = capability_indicator(&qbar_sub);
            let next = update_degradation(&self.degradation.task(k), &d_star, &theta, dt);
            self.degradation.set_task(k, &next);
        }

        if !self.options.events_only {
            self.record_rows(tick, t + dt, &after);
        }
        self.record_margins(tick, t + dt);

        if sim.trigger {
            let reason = if self.degradation.triggered(sim.chi) {
                Some(TriggerReason::Degradation)
            } else if crossed {
                Some(TriggerReason::Exclusion)
            } else {
                None
            };
            if let Some(reason) = reason {
                self.event(tick, EventKind::TriggerFired { reason });
                match self.timed_solve() {
                    Ok(solution) => self.accept(tick, &solution),
                    Err(Error::Infeasible(message)) => {
                        self.trace.summary.failed_solves += 1;
                        self.event(tick, EventKind::SolveFailed { message });
                    }
                    Err(e) => return Err(e),
                }
                // Re-arm from the current degradation even after a failure so
                // a persistent fault does not re-solve every tick.
                self.degradation.take_snapshot(tick);
            }
        }
        Ok(())
    }

    fn record_rows(&mut self, tick: u64, t: f64, after: &[Evaluation]) {
        for (i, r) in self.robots.iter().enumerate() {
            self.trace.robots.push(RobotRow {
                tick,
                t,
                robot: i,
                species: r.species,
                task: r.task,
                x: r.position.x,
                y: r.position.y,
                sensing: r.sensing,
                value: after[i].value,
                dv: self.dv[i],
                dv_smoothed: self.dv_smoothed[i],
            });
        }
        let d = &self.degradation.d;
        for task in 0..d.nrows() {
            for capability in 0..d.ncols() {
                self.trace.degradation.push(DegradationRow {
                    tick,
                    t,
                    task,
                    capability,
                    d: d[(task, capability)],
                });
            }
        }
    }

    fn record_margins(&mut self, tick: u64, t: f64) {
        let problem = self.problem();
        let assignment: Vec<Option<usize>> = self.robots.iter().map(|r| r.task).collect();
        let margins = problem.margins(&assignment, &self.allocation.configs);
        for task in 0..margins.nrows() {
            let worst = margins.row(task).min();
            let slot = &mut self.trace.summary.min_margins[task];
            *slot = slot.min(worst);
            for capability in 0..margins.ncols() {
                self.trace.margins.push(MarginRow {
                    tick,
                    t,
                    task,
                    capability,
                    delta: margins[(task, capability)],
                });
            }
        }
    }

    fn finish(mut self) -> SimTrace {
        let summary = &mut self.trace.summary;
        summary.final_assignment = self.allocation.assignment.clone();
        summary.final_configs = self.allocation.configs.clone();
        summary.final_relaxed = self.allocation.relaxed.clone();
        if self.options.record_wall_times {
            summary.wall_ms = Some(self.wall_ms.clone());
        }
        self.trace
    }
}
