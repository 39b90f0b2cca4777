//! Occupancy state on the torus and single-event updates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::kernel::{Disp, JumpKernel};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("no move is possible: lattice empty or full")]
    EmptyOrFull,
    #[error("bad parameter: {0}")]
    BadParameter(String),
}

/// One attempted move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// time at which the attempt fires
    pub time: f64,
    pub mover: usize,
    pub disp: Disp,
    pub accepted: bool,
}

/// What an event did to the occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    None,
    /// ordinary particle moved between two sites
    Hop { from: usize, to: usize },
    /// second-class particle moved to an empty site
    SecondClass { from: usize, to: usize },
    /// ordinary particle at `from` jumped onto the second-class site `to`; the discrepancy is now at `from`
    Swap { from: usize, to: usize },
}

/// Occupancy η on a periodic box of side L in d dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub side: usize,
    pub dim: usize,
    occ: Vec<bool>,
    particles: Vec<u32>,
    slot: Vec<u32>,
    /// discrepancy site of the basic coupling; empty in η
    pub second_class: Option<usize>,
    pub time: f64,
}

/// Bernoulli(ρ) product configuration from a seed.
pub fn init_bernoulli(side: usize, dim: usize, rho: f64, seed: u64) -> Result<LatticeConfig, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatticeConfig::bernoulli(side, dim, rho, &mut rng)
}

impl LatticeConfig {
    pub fn empty(side: usize, dim: usize) -> Result<Self, SimError> {
        if side < 4 || !side.is_multiple_of(2) {
            return Err(SimError::BadParameter("L must be even and at least 4".into()));
        }
        if dim != 1 && dim != 2 {
            return Err(SimError::BadParameter("dim must be 1 or 2".into()));
        }
        let n = side.pow(dim as u32);
        Ok(Self {
            side,
            dim,
            occ: vec![false; n],
            particles: Vec::new(),
            slot: vec![NONE; n],
            second_class: None,
            time: 0.0,
        })
    }

    pub fn bernoulli<R: Rng + ?Sized>(side: usize, dim: usize, rho: f64, rng: &mut R) -> Result<Self, SimError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(SimError::BadParameter("rho must lie in (0,1)".into()));
        }
        let mut c = Self::empty(side, dim)?;
        for x in 0..c.n_sites() {
            if rng.random::<f64>() < rho {
                c.insert(x);
            }
        }
        Ok(c)
    }

    /// ν_ρ away from `origin`, the discrepancy sitting at `origin` (η(origin) = 0, ξ(origin) = 1).
    pub fn coupled<R: Rng + ?Sized>(side: usize, dim: usize, rho: f64, origin: usize, rng: &mut R) -> Result<Self, SimError> {
        let mut c = Self::bernoulli(side, dim, rho, rng)?;
        c.remove(origin);
        c.second_class = Some(origin);
        Ok(c)
    }

    pub fn n_sites(&self) -> usize {
        self.occ.len()
    }

    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn occupied(&self, x: usize) -> bool {
        self.occ[x]
    }

    /// Occupancy of the upper coupled configuration ξ = η + δ_R.
    pub fn occupied_upper(&self, x: usize) -> bool {
        self.occ[x] || self.second_class == Some(x)
    }

    pub fn particles(&self) -> &[u32] {
        &self.particles
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occ
    }

    pub fn insert(&mut self, x: usize) {
        if !self.occ[x] {
            self.occ[x] = true;
            self.slot[x] = self.particles.len() as u32;
            self.particles.push(x as u32);
        }
    }

    pub fn remove(&mut self, x: usize) {
        if self.occ[x] {
            let k = self.slot[x] as usize;
            let last = *self.particles.last().unwrap();
            self.particles[k] = last;
            self.slot[last as usize] = k as u32;
            self.particles.pop();
            self.slot[x] = NONE;
            self.occ[x] = false;
        }
    }

    fn relocate(&mut self, from: usize, to: usize) {
        let k = self.slot[from];
        self.particles[k as usize] = to as u32;
        self.slot[to] = k;
        self.slot[from] = NONE;
        self.occ[from] = false;
        self.occ[to] = true;
    }

    /// Site x + y with wraparound.
    pub fn shift(&self, x: usize, y: Disp) -> usize {
        let l = self.side as i64;
        if self.dim == 1 {
            (x as i64 + y[0]).rem_euclid(l) as usize
        } else {
            let (x0, x1) = ((x % self.side) as i64, (x / self.side) as i64);
            ((x0 + y[0]).rem_euclid(l) + l * (x1 + y[1]).rem_euclid(l)) as usize
        }
    }

    /// Displacement from `a` to `b` reduced to the box centred at zero.
    pub fn offset(&self, a: usize, b: usize) -> Disp {
        let l = self.side as i64;
        let red = |d: i64| {
            let r = d.rem_euclid(l);
            if r > l / 2 {
                r - l
            } else {
                r
            }
        };
        if self.dim == 1 {
            [red(b as i64 - a as i64), 0]
        } else {
            let (a0, a1) = ((a % self.side) as i64, (a / self.side) as i64);
            let (b0, b1) = ((b % self.side) as i64, (b / self.side) as i64);
            [red(b0 - a0), red(b1 - a1)]
        }
    }

    /// Particle/hole invariants: list and occupancy agree.
    pub fn consistent(&self) -> bool {
        let count = self.occ.iter().filter(|o| **o).count();
        count == self.particles.len()
            && self.particles.iter().enumerate().all(|(k, &x)| self.occ[x as usize] && self.slot[x as usize] == k as u32)
            && self.second_class.is_none_or(|r| !self.occ[r])
    }

    fn check_movable(&self) -> Result<usize, SimError> {
        let movers = self.particles.len() + usize::from(self.second_class.is_some());
        if movers == 0 || movers == self.n_sites() {
            return Err(SimError::EmptyOrFull);
        }
        Ok(movers)
    }

    /// Draw the next attempt without applying it: (firing time, mover site, displacement).
    /// With a second-class particle present it carries one extra clock.
    pub fn propose<R: Rng + ?Sized>(&self, kernel: &JumpKernel, rng: &mut R) -> Result<(f64, usize, Disp), SimError> {
        let n = self.check_movable()?;
        let dwell: f64 = rng.sample::<f64, _>(Exp1) / n as f64;
        let k = rng.random_range(0..n);
        let y = kernel.sample(rng);
        let x = match self.second_class {
            Some(r) if k == self.particles.len() => r,
            _ => self.particles[k] as usize,
        };
        Ok((self.time + dwell, x, y))
    }

    /// One exclusion event: a uniformly chosen particle attempts y ~ p after an Exp(N) dwell.
    pub fn step<R: Rng + ?Sized>(&mut self, kernel: &JumpKernel, rng: &mut R) -> Result<(Event, Change), SimError> {
        let (t, x, y) = self.propose(kernel, rng)?;
        Ok(self.apply(x, y, t))
    }

    /// One event of the basic coupling.
    pub fn step_coupled<R: Rng + ?Sized>(&mut self, kernel: &JumpKernel, rng: &mut R) -> Result<(Event, Change), SimError> {
        if self.second_class.is_none() {
            return Err(SimError::BadParameter("no second-class particle".into()));
        }
        self.step(kernel, rng)
    }

    /// Apply an attempt by the particle at `x` (ordinary or second-class) with displacement y.
    pub fn apply(&mut self, x: usize, y: Disp, time: f64) -> (Event, Change) {
        self.time = time;
        let z = self.shift(x, y);
        let mut ev = Event { time, mover: x, disp: y, accepted: false };
        let change = if self.second_class == Some(x) {
            if !self.occ[z] && z != x {
                self.second_class = Some(z);
                Change::SecondClass { from: x, to: z }
            } else {
                Change::None
            }
        } else if self.occ[x] && !self.occ[z] && z != x {
            self.relocate(x, z);
            if self.second_class == Some(z) {
                self.second_class = Some(x);
                Change::Swap { from: x, to: z }
            } else {
                Change::Hop { from: x, to: z }
            }
        } else {
            Change::None
        };
        ev.accepted = change != Change::None;
        (ev, change)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Variant};

    #[test]
    fn same_seed_same_config() {
        let a = init_bernoulli(64, 1, 0.5, 7).unwrap();
        let b = init_bernoulli(64, 1, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.consistent());
    }

    #[test]
    fn shift_and_offset_wrap() {
        let c = LatticeConfig::empty(8, 2).unwrap();
        let x = c.shift(0, [-1, -1]);
        assert_eq!(x, 7 + 8 * 7);
        assert_eq!(c.offset(0, x), [-1, -1]);
    }

    #[test]
    fn swap_moves_discrepancy_back() {
        let k = JumpKernel::new(KernelSpec::new(1, 1.5, &[1.0], &[1.0], Variant::Sym, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = LatticeConfig::empty(8, 1).unwrap();
        c.insert(3);
        c.second_class = Some(4);
        let (_, ch) = c.apply(3, [1, 0], 0.1);
        assert_eq!(ch, Change::Swap { from: 3, to: 4 });
        assert_eq!(c.second_class, Some(3));
        assert!(c.occupied(4) && !c.occupied(3));
        for _ in 0..1000 {
            c.step_coupled(&k, &mut rng).unwrap();
            assert!(c.consistent());
            assert_eq!(c.n_particles(), 1);
        }
    }

    #[test]
    fn empty_lattice_cannot_move() {
        let k = JumpKernel::new(KernelSpec::symmetric(1, 1.5, 2)).unwrap();
        let mut c = LatticeConfig::empty(8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(c.step(&k, &mut rng).unwrap_err(), SimError::EmptyOrFull);
    }
}
