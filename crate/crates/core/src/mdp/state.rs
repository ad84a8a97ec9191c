//! Occupancy states of the arrival-driven chain.
//!
//! A state records, for every road, how many mobile users have each residual
//! sojourn time `1..=l`. Users of one class are interchangeable, so counts
//! carry the same information as labelled `(residual, road)` pairs.

use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// `occupancy[road][t - 1]` = number of users on `road` with residual time `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MdpState {
    pub occupancy: Vec<Vec<u32>>,
}

impl MdpState {
    pub fn empty(road_lengths: &[usize]) -> Self {
        MdpState {
            occupancy: road_lengths.iter().map(|&l| vec![0; l]).collect(),
        }
    }

    pub fn user_count(&self) -> u32 {
        self.occupancy.iter().flatten().sum()
    }

    /// Shift every user one slot closer to leaving, then admit `arrivals[i]`
    /// new users on road `i` at full residual time.
    pub fn next(&self, arrivals: &[u32]) -> MdpState {
        let occupancy = self
            .occupancy
            .iter()
            .zip(arrivals)
            .map(|(road, &new)| {
                let mut shifted = Vec::with_capacity(road.len());
                shifted.extend_from_slice(&road[1..]);
                shifted.push(new);
                shifted
            })
            .collect();
        MdpState { occupancy }
    }
}

/// Index of a state in the canonical ordering: lexicographic over the
/// flattened counts (road 0 residual 1 first).
pub type StateIndex = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    road_lengths: Vec<usize>,
    max_arrivals: Vec<u32>,
    /// Place value of every flattened digit.
    place: Vec<usize>,
    /// Radix of every flattened digit.
    radix: Vec<u32>,
    size: usize,
}

impl StateSpace {
    pub fn new(road_lengths: Vec<usize>, max_arrivals: Vec<u32>, cap: usize) -> Result<Self> {
        if road_lengths.len() != max_arrivals.len() {
            return Err(Error::invalid(
                "max_arrivals",
                "one entry per road required",
            ));
        }
        let radix: Vec<u32> = road_lengths
            .iter()
            .zip(&max_arrivals)
            .flat_map(|(&l, &a)| std::iter::repeat_n(a + 1, l))
            .collect();
        let size: u128 = radix
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(u128::from(r)))
            .unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::StateSpaceTooLarge { size, cap });
        }
        let mut place = vec![1usize; radix.len()];
        for k in (0..radix.len().saturating_sub(1)).rev() {
            place[k] = place[k + 1] * radix[k + 1] as usize;
        }
        Ok(StateSpace {
            road_lengths,
            max_arrivals,
            place,
            radix,
            size: size as usize,
        })
    }

    pub fn for_scenario(scenario: &Scenario, cap: usize) -> Result<Self> {
        StateSpace::new(
            scenario.roads.iter().map(|r| r.segment_count).collect(),
            scenario.roads.iter().map(|r| r.max_arrivals).collect(),
            cap,
        )
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn road_lengths(&self) -> &[usize] {
        &self.road_lengths
    }

    pub fn max_arrivals(&self) -> &[u32] {
        &self.max_arrivals
    }

    pub fn empty_index(&self) -> StateIndex {
        0
    }

    pub fn encode(&self, state: &MdpState) -> StateIndex {
        state
            .occupancy
            .iter()
            .flatten()
            .zip(&self.place)
            .map(|(&d, &w)| d as usize * w)
            .sum()
    }

    pub fn decode(&self, index: StateIndex) -> MdpState {
        debug_assert!(index < self.size);
        let mut digits = self
            .place
            .iter()
            .zip(&self.radix)
            .map(|(&w, &r)| ((index / w) % r as usize) as u32);
        MdpState {
            occupancy: self
                .road_lengths
                .iter()
                .map(|&l| digits.by_ref().take(l).collect())
                .collect(),
        }
    }

    /// All states in canonical order.
    pub fn states(&self) -> impl Iterator<Item = MdpState> + '_ {
        (0..self.size).map(|i| self.decode(i))
    }

    /// Successor index without materialising the state.
    pub fn successor(&self, index: StateIndex, arrivals: &[u32]) -> StateIndex {
        let mut next = 0;
        let mut offset = 0;
        for (road, &l) in self.road_lengths.iter().enumerate() {
            for t in 0..l {
                let digit = if t + 1 < l {
                    let k = offset + t + 1;
                    (index / self.place[k]) % self.radix[k] as usize
                } else {
                    arrivals[road] as usize
                };
                next += digit * self.place[offset + t];
            }
            offset += l;
        }
        next
    }

    /// Stationary law of the occupancy chain. Every residual-time slot holds
    /// exactly the arrivals of one past slot, so the law is the product of the
    /// per-slot arrival-count probabilities.
    pub fn stationary(&self, arrival_pmfs: &[Vec<f64>]) -> Vec<f64> {
        let digit_pmf: Vec<&[f64]> = self
            .road_lengths
            .iter()
            .zip(arrival_pmfs)
            .flat_map(|(&l, pmf)| std::iter::repeat_n(pmf.as_slice(), l))
            .collect();
        (0..self.size)
            .map(|index| {
                digit_pmf
                    .iter()
                    .zip(self.place.iter().zip(&self.radix))
                    .map(|(pmf, (&w, &r))| pmf[(index / w) % r as usize])
                    .product()
            })
            .collect()
    }
}
