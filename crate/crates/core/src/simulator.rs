//! Slotted closed-loop simulation of one cell.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{Controller, LearnerState, SlotFeedback};
use crate::mdp::{CellModel, StateIndex};
use crate::radio::{FadingProcess, RateTable};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: u64,
    pub seed: u64,
    /// Fraction of the horizon, counted from the end, used for trailing
    /// averages.
    pub metrics_window: f64,
    /// Snapshot every this many slots; 0 disables snapshots.
    pub snapshot_stride: u64,
    pub record_series: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 0,
            seed: 0,
            metrics_window: 0.2,
            snapshot_stride: 0,
            record_series: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.metrics_window) {
            return Err(Error::invalid("metrics_window", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Index of the first slot inside the trailing window.
    fn window_start(&self) -> u64 {
        let len = (self.metrics_window * self.horizon as f64).floor() as u64;
        self.horizon - len.min(self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub state: StateIndex,
    pub eta: f64,
    pub mobile_download: f64,
    pub static_download: f64,
}

/// Running averages at a slot boundary, plus the controller's iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub slot: u64,
    pub mobile_tput: f64,
    pub static_tput: f64,
    pub xi: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub slots: u64,
    pub series: Vec<SlotRecord>,
    pub mobile_tput: f64,
    pub static_tput: f64,
    pub trailing_mobile_tput: f64,
    pub trailing_static_tput: f64,
    pub trailing_xi: Option<f64>,
    pub trailing_p: Option<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Slots spent in each state.
    pub state_visits: Vec<u64>,
}

/// Arrival counts for one slot: `Binomial(max_arrivals, theta)` per road.
pub fn draw_arrivals<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<u32> {
    scenario
        .roads
        .iter()
        .map(|road| {
            (0..road.max_arrivals)
                .map(|_| u32::from(rng.gen::<f64>() < road.arrival_prob))
                .sum()
        })
        .collect()
}

/// Per-unit-bandwidth class samples of one slot: the equal within-class
/// average of every user's rate times its fading gain; 0 for a class
/// without users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSamples {
    pub mobile: f64,
    pub static_: f64,
}

/// Class downloads `(eta * mobile sample, (1 - eta) * static sample)`.
pub fn realize_downloads(eta: f64, samples: ClassSamples) -> (f64, f64) {
    (eta * samples.mobile, (1.0 - eta) * samples.static_)
}

/// Fading-chain states of every user in the cell, laid out like the
/// occupancy counts: `mobile[road][t - 1]` holds one chain per user with
/// residual time `t`.
struct UserChains {
    mobile: Vec<Vec<Vec<usize>>>,
    static_: Vec<usize>,
    gains_mobile: Vec<Vec<Vec<f64>>>,
    gains_static: Vec<f64>,
}

impl UserChains {
    fn new<R: Rng + ?Sized>(
        scenario: &Scenario,
        fading: &FadingProcess,
        stationary: &[f64],
        rng: &mut R,
    ) -> Self {
        let mobile: Vec<Vec<Vec<usize>>> = scenario
            .roads
            .iter()
            .map(|r| vec![Vec::new(); r.segment_count])
            .collect();
        let gains_mobile = scenario
            .roads
            .iter()
            .map(|r| vec![Vec::new(); r.segment_count])
            .collect();
        let static_: Vec<usize> = (0..scenario.static_users.len())
            .map(|_| fading.sample_stationary(stationary, rng))
            .collect();
        UserChains {
            mobile,
            gains_static: vec![1.0; static_.len()],
            static_,
            gains_mobile,
        }
    }

    fn advance<R: Rng + ?Sized>(&mut self, fading: &FadingProcess, rng: &mut R) {
        for (chain, gain) in self.static_.iter_mut().zip(&mut self.gains_static) {
            let (next, g) = fading.step(*chain, rng);
            *chain = next;
            *gain = g;
        }
        for (road, road_gains) in self.mobile.iter_mut().zip(&mut self.gains_mobile) {
            for (cohort, cohort_gains) in road.iter_mut().zip(road_gains.iter_mut()) {
                cohort_gains.clear();
                for chain in cohort.iter_mut() {
                    let (next, g) = fading.step(*chain, rng);
                    *chain = next;
                    cohort_gains.push(g);
                }
            }
        }
    }

    fn samples(&self, table: &RateTable) -> ClassSamples {
        let mut total = 0.0;
        let mut users = 0u32;
        for (road_gains, rates) in self.gains_mobile.iter().zip(&table.mu_rate) {
            let l = road_gains.len();
            for (t0, cohort) in road_gains.iter().enumerate() {
                for g in cohort {
                    total += rates[l - 1 - t0] * g;
                    users += 1;
                }
            }
        }
        let mobile = if users == 0 {
            0.0
        } else {
            total / f64::from(users)
        };
        let static_ = table
            .su_rate
            .iter()
            .zip(&self.gains_static)
            .map(|(r, g)| r * g)
            .sum::<f64>()
            / table.su_rate.len() as f64;
        ClassSamples { mobile, static_ }
    }

    /// Drops users with residual time 1, shifts the rest and admits new users
    /// with chains drawn from the stationary law.
    fn shift<R: Rng + ?Sized>(
        &mut self,
        arrivals: &[u32],
        fading: &FadingProcess,
        stationary: &[f64],
        rng: &mut R,
    ) {
        for (road, &new) in self.mobile.iter_mut().zip(arrivals) {
            let mut leaving = road.remove(0);
            leaving.clear();
            leaving.extend((0..new).map(|_| fading.sample_stationary(stationary, rng)));
            road.push(leaving);
        }
    }
}

/// Runs `config.horizon` slots from the empty state.
///
/// Per slot: observe the state, let the controller decide, advance every
/// user's fading chain, realise the class downloads, hand the feedback to the
/// controller, then admit fresh arrivals.
pub fn run_episode(
    model: &CellModel,
    controller: &mut dyn Controller,
    config: &SimConfig,
) -> Result<Metrics> {
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_episode_with_rng(model, controller, config, rng)
}

fn run_episode_with_rng(
    model: &CellModel,
    controller: &mut dyn Controller,
    config: &SimConfig,
    mut rng: ChaCha8Rng,
) -> Result<Metrics> {
    config.validate()?;
    let scenario = &model.scenario;
    let fading = scenario.fading_process();
    let fading_law = fading.stationary();
    let mut chains = UserChains::new(scenario, &fading, &fading_law, &mut rng);

    let horizon = config.horizon;
    let window_start = config.window_start();
    let mut metrics = Metrics {
        slots: horizon,
        state_visits: vec![0; model.len()],
        ..Default::default()
    };
    if config.record_series {
        metrics.series.reserve(horizon as usize);
    }
    let (mut sum_m, mut sum_s) = (0.0, 0.0);
    let (mut tail_m, mut tail_s) = (0.0, 0.0);
    let (mut tail_xi, mut tail_p) = (0.0, 0.0);
    let (mut has_xi, mut has_p) = (false, false);

    let mut state = model.space.empty_index();
    for slot in 0..horizon {
        metrics.state_visits[state] += 1;
        let eta = controller.decide(state, &mut rng).clamp(0.0, 1.0);
        chains.advance(&fading, &mut rng);
        let samples = chains.samples(&model.table);
        let (mobile_download, static_download) = realize_downloads(eta, samples);
        controller.observe(&SlotFeedback {
            state,
            action: eta,
            mobile_sample: (eta > 0.0).then_some(samples.mobile),
            static_sample: (eta < 1.0).then_some(samples.static_),
            mobile_download,
            static_download,
        });

        sum_m += mobile_download;
        sum_s += static_download;
        if config.record_series {
            metrics.series.push(SlotRecord {
                state,
                eta,
                mobile_download,
                static_download,
            });
        }
        if slot >= window_start {
            tail_m += mobile_download;
            tail_s += static_download;
            if let Some(xi) = controller.multiplier() {
                tail_xi += xi;
                has_xi = true;
            }
            if let Some(p) = controller.randomization() {
                tail_p += p;
                has_p = true;
            }
        }
        let done = slot + 1;
        if config.snapshot_stride > 0 && done % config.snapshot_stride == 0 {
            metrics.snapshots.push(Snapshot {
                slot: done,
                mobile_tput: sum_m / done as f64,
                static_tput: sum_s / done as f64,
                xi: controller.multiplier(),
                p: controller.randomization(),
            });
        }

        let arrivals = draw_arrivals(scenario, &mut rng);
        chains.shift(&arrivals, &fading, &fading_law, &mut rng);
        state = model.space.successor(state, &arrivals);
    }

    if horizon > 0 {
        metrics.mobile_tput = sum_m / horizon as f64;
        metrics.static_tput = sum_s / horizon as f64;
    }
    let tail = (horizon - window_start) as f64;
    if tail > 0.0 {
        metrics.trailing_mobile_tput = tail_m / tail;
        metrics.trailing_static_tput = tail_s / tail;
        metrics.trailing_xi = has_xi.then_some(tail_xi / tail);
        metrics.trailing_p = has_p.then_some(tail_p / tail);
    }
    Ok(metrics)
}

/// Outcome of one replication: its metrics and, for learners, the final
/// learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub metrics: Metrics,
    pub learner: Option<LearnerState>,
}

/// Runs `reps` independent replications in parallel. Replication `k` uses
/// stream `k` of the generator seeded with `config.seed`, so replication 0
/// reproduces `run_episode`. Results are ordered by replication index.
pub fn run_replications<F>(
    model: &CellModel,
    build: F,
    config: &SimConfig,
    reps: usize,
) -> Result<Vec<Replication>>
where
    F: Fn(usize) -> Result<Box<dyn Controller>> + Sync,
{
    let build = &build;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..reps)
            .map(|rep| {
                scope.spawn(move || {
                    let mut controller = build(rep)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(rep as u64);
                    let metrics = run_episode_with_rng(model, controller.as_mut(), config, rng)?;
                    Ok(Replication {
                        metrics,
                        learner: controller.learner().cloned(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replication thread panicked"))
            .collect()
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Snapshot table with header `slot,mobile_tput,static_tput,xi,p`; absent
/// iterates are left empty.
pub fn write_snapshots_csv<W: Write>(metrics: &Metrics, mut out: W) -> Result<()> {
    writeln!(out, "slot,mobile_tput,static_tput,xi,p")?;
    for s in &metrics.snapshots {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.slot,
            s.mobile_tput,
            s.static_tput,
            opt(s.xi),
            opt(s.p)
        )?;
    }
    Ok(())
}

/// Per-state learner estimates and visit counts.
pub fn write_estimates_csv<W: Write>(learner: &LearnerState, mut out: W) -> Result<()> {
    writeln!(
        out,
        "state,visits,visits_mobile,visits_static,est_mobile,est_static"
    )?;
    for s in 0..learner.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s,
            learner.visits[s],
            learner.visits_mobile[s],
            learner.visits_static[s],
            learner.rate_est_mobile[s],
            learner.rate_est_static[s]
        )?;
    }
    Ok(())
}
