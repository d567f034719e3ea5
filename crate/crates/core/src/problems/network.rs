use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::CsrMatrix;
use crate::model::{
    polar_injection, BalancePart, BlockSpec, Builtin, BusInjection, ConstraintSet, PowerBalance, Problem,
    QuadraticFunction, SmoothFunction,
};
use crate::{Error, Result};

pub const ACOPF_MAX_BUSES: usize = 5;
pub const ACOPF_MAX_PERIODS: usize = 24;

/// Transmission line in per-unit: series impedance `r + jx` and total line
/// charging susceptance split evenly between both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b_shunt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetGenerator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Ramp rate per unit time.
    pub ramp: f64,
    pub cost_quad: f64,
    pub cost_lin: f64,
}

/// Network data of a small polar AC power-flow instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    pub buses: usize,
    /// `(i, j, Y_ij^re, Y_ij^im)` including the diagonal.
    pub admittance: Vec<(usize, usize, f64, f64)>,
    pub neighbors: Vec<Vec<usize>>,
    pub generators: Vec<NetGenerator>,
    /// Active load per period and bus.
    pub p_load: Vec<Vec<f64>>,
    /// Reactive load per period and bus.
    pub q_load: Vec<Vec<f64>>,
    pub delta_t: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl NetworkData {
    /// Builds the admittance matrix from lines: `Y_ij = −y_ij` and
    /// `Y_ii = Σ_j (y_ij + j·b_ij/2)`.
    pub fn from_lines(
        buses: usize,
        lines: &[Line],
        generators: Vec<NetGenerator>,
        p_load: Vec<Vec<f64>>,
        q_load: Vec<Vec<f64>>,
        delta_t: f64,
    ) -> Result<Self> {
        let mut y = vec![vec![(0.0, 0.0); buses]; buses];
        for l in lines {
            if l.from >= buses || l.to >= buses || l.from == l.to {
                return Err(Error::InvalidParameter(format!("line {}-{} is invalid", l.from, l.to)));
            }
            let d = l.r * l.r + l.x * l.x;
            if d == 0.0 {
                return Err(Error::InvalidParameter(format!("line {}-{} has zero impedance", l.from, l.to)));
            }
            let (g, b) = (l.r / d, -l.x / d);
            for (i, j) in [(l.from, l.to), (l.to, l.from)] {
                y[i][j].0 -= g;
                y[i][j].1 -= b;
                y[i][i].0 += g;
                y[i][i].1 += b + 0.5 * l.b_shunt;
            }
        }
        let mut admittance = Vec::new();
        let mut neighbors = vec![Vec::new(); buses];
        for i in 0..buses {
            for j in 0..buses {
                let (re, im) = y[i][j];
                if re != 0.0 || im != 0.0 {
                    admittance.push((i, j, re, im));
                    if i != j {
                        neighbors[i].push(j);
                    }
                }
            }
        }
        let net = Self {
            buses,
            admittance,
            neighbors,
            generators,
            p_load,
            q_load,
            delta_t,
            v_min: 0.9,
            v_max: 1.1,
        };
        net.validate()?;
        Ok(net)
    }

    /// Deterministic chain network with a generator at the first and last
    /// bus and sinusoidal loads with small seeded noise on the other buses.
    pub fn toy(buses: usize, periods: usize) -> Result<Self> {
        if buses == 0 || buses > ACOPF_MAX_BUSES || periods == 0 || periods > ACOPF_MAX_PERIODS {
            return Err(Error::SizeCapExceeded {
                size: buses.max(periods),
                cap: ACOPF_MAX_BUSES.min(ACOPF_MAX_PERIODS),
            });
        }
        let lines: Vec<Line> = (0..buses.saturating_sub(1))
            .map(|i| Line {
                from: i,
                to: i + 1,
                r: 0.02,
                x: 0.2,
                b_shunt: 0.04,
            })
            .collect();
        let generators = vec![
            NetGenerator {
                bus: 0,
                p_min: 0.0,
                p_max: 2.0,
                q_min: -1.5,
                q_max: 1.5,
                ramp: 0.2,
                cost_quad: 1.0,
                cost_lin: 1.0,
            },
            NetGenerator {
                bus: buses - 1,
                p_min: 0.0,
                p_max: 1.0,
                q_min: -1.0,
                q_max: 1.0,
                ramp: 0.1,
                cost_quad: 2.0,
                cost_lin: 0.5,
            },
        ];
        let load_buses: Vec<usize> = if buses == 1 { vec![0] } else { (1..buses).collect() };
        let share = 1.0 / load_buses.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut p_load = Vec::with_capacity(periods);
        let mut q_load = Vec::with_capacity(periods);
        for t in 0..periods {
            let phase = 2.0 * core::f64::consts::PI * t as f64 / 24.0;
            let base = 0.9 * (1.0 + 0.25 * libm::sin(phase - 0.5 * core::f64::consts::PI));
            let mut pl = vec![0.0; buses];
            let mut ql = vec![0.0; buses];
            for &i in &load_buses {
                let noise: f64 = rng.gen_range(-1.0..1.0);
                pl[i] = share * base * (1.0 + 0.02 * noise);
                ql[i] = 0.25 * pl[i];
            }
            p_load.push(pl);
            q_load.push(ql);
        }
        Self::from_lines(buses, &lines, generators, p_load, q_load, 1.0)
    }

    pub fn periods(&self) -> usize {
        self.p_load.len()
    }

    /// `Y_ij` as `(re, im)`.
    pub fn y(&self, i: usize, j: usize) -> (f64, f64) {
        self.admittance
            .iter()
            .find(|e| e.0 == i && e.1 == j)
            .map(|e| (e.2, e.3))
            .unwrap_or((0.0, 0.0))
    }

    pub fn generators_at(&self, bus: usize) -> Vec<usize> {
        (0..self.generators.len()).filter(|&g| self.generators[g].bus == bus).collect()
    }

    /// Symmetric admittance pattern, neighbor lists matching the
    /// off-diagonal pattern, generators on existing buses, one load vector
    /// per bus and period.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("network: {why}")));
        for &(i, j, _, _) in &self.admittance {
            if i >= self.buses || j >= self.buses {
                return bad("admittance entry outside the bus range");
            }
            if !self.admittance.iter().any(|e| e.0 == j && e.1 == i) {
                return bad("admittance pattern is not symmetric");
            }
            if i != j && !self.neighbors[i].contains(&j) {
                return bad("neighbor list misses an off-diagonal entry");
            }
        }
        if self.neighbors.len() != self.buses {
            return bad("one neighbor list per bus required");
        }
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                if j >= self.buses || j == i || !self.admittance.iter().any(|e| e.0 == i && e.1 == j) {
                    return bad("neighbor without an admittance entry");
                }
            }
        }
        if self.generators.iter().any(|g| g.bus >= self.buses) {
            return bad("generator on a missing bus");
        }
        if self.q_load.len() != self.p_load.len()
            || self.p_load.iter().chain(&self.q_load).any(|l| l.len() != self.buses)
        {
            return bad("loads must have one entry per bus and period");
        }
        Ok(())
    }
}

/// Polar injection `(c_i^re, c_i^im)` at bus `i` with its gradients.
pub fn acopf_balance(i: usize, v: &[f64], theta: &[f64], net: &NetworkData) -> BusInjection {
    let nbrs: Vec<(usize, f64, f64)> = net.neighbors[i]
        .iter()
        .map(|&j| {
            let (g, b) = net.y(i, j);
            (j, g, b)
        })
        .collect();
    polar_injection(i, net.y(i, i), &nbrs, &|j| v[j], &|j| theta[j])
}

/// Multi-period polar AC power flow.
///
/// Block `t` holds `(p, q, V, ϑ, s)`: generator outputs, bus voltages and
/// angles, and ramp slacks. The reference angle `ϑ_0` and the first-period
/// slacks are fixed by equal bounds. Each bus contributes a real and an
/// imaginary power-balance equality; coupling rows are the ramp equalities
/// `p_{g,t+1} − p_{g,t} + s_{g,t+1} = r_gΔ`.
pub fn gen_acopf_toy(net: &NetworkData, periods: usize) -> Result<Problem> {
    net.validate()?;
    if net.buses > ACOPF_MAX_BUSES {
        return Err(Error::SizeCapExceeded {
            size: net.buses,
            cap: ACOPF_MAX_BUSES,
        });
    }
    if periods > ACOPF_MAX_PERIODS {
        return Err(Error::SizeCapExceeded {
            size: periods,
            cap: ACOPF_MAX_PERIODS,
        });
    }
    if periods == 0 || periods > net.periods() {
        return Err(Error::InvalidParameter(format!(
            "{periods} periods requested, network has loads for {}",
            net.periods()
        )));
    }
    let g = net.generators.len();
    let nb = net.buses;
    let n = 3 * g + 2 * nb;
    let (v_off, th_off, s_off) = (2 * g, 2 * g + nb, 2 * g + 2 * nb);
    let m = g * (periods - 1);
    let ramps: Vec<f64> = net.generators.iter().map(|gen| gen.ramp * net.delta_t).collect();
    let mut blocks = Vec::with_capacity(periods);
    for t in 0..periods {
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for (k, gen) in net.generators.iter().enumerate() {
            (lower[k], upper[k]) = (gen.p_min, gen.p_max);
            (lower[g + k], upper[g + k]) = (gen.q_min, gen.q_max);
            (lower[s_off + k], upper[s_off + k]) = if t == 0 { (ramps[k], ramps[k]) } else { (0.0, 2.0 * ramps[k]) };
        }
        for i in 0..nb {
            (lower[v_off + i], upper[v_off + i]) = (net.v_min, net.v_max);
            (lower[th_off + i], upper[th_off + i]) = if i == 0 {
                (0.0, 0.0)
            } else {
                (-core::f64::consts::PI, core::f64::consts::PI)
            };
        }
        let mut equalities = Vec::with_capacity(2 * nb);
        for i in 0..nb {
            let gens = net.generators_at(i);
            let row: Vec<(usize, f64, f64)> = net
                .admittance
                .iter()
                .filter(|e| e.0 == i)
                .map(|e| (e.1, e.2, e.3))
                .collect();
            for (part, inj, load) in [
                (BalancePart::Real, gens.to_vec(), net.p_load[t][i]),
                (BalancePart::Imag, gens.iter().map(|&k| g + k).collect::<Vec<_>>(), net.q_load[t][i]),
            ] {
                equalities.push(SmoothFunction::Builtin(Builtin::PowerBalance(PowerBalance {
                    part,
                    bus: i,
                    v_offset: v_off,
                    theta_offset: th_off,
                    injections: inj,
                    load,
                    admittance: row.clone(),
                    neighbors: net.neighbors[i].clone(),
                })));
            }
        }
        let q: Vec<_> = net
            .generators
            .iter()
            .enumerate()
            .map(|(k, gen)| (k, k, 2.0 * gen.cost_quad))
            .collect();
        let mut c = vec![0.0; n];
        for (k, gen) in net.generators.iter().enumerate() {
            c[k] = gen.cost_lin;
        }
        let objective = QuadraticFunction::new(CsrMatrix::from_triplets(n, n, &q)?, c, 0.0)?;
        let mut trip = Vec::new();
        for k in 0..g {
            if t > 0 {
                let row = (t - 1) * g + k;
                trip.push((row, k, 1.0));
                trip.push((row, s_off + k, 1.0));
            }
            if t + 1 < periods {
                trip.push((t * g + k, k, -1.0));
            }
        }
        blocks.push(BlockSpec {
            n,
            objective: SmoothFunction::Quadratic(objective),
            set: ConstraintSet {
                lower,
                upper,
                equalities,
            },
            coupling: CsrMatrix::from_triplets(m, n, &trip)?,
        });
    }
    let b: Vec<f64> = (0..periods.saturating_sub(1)).flat_map(|_| ramps.iter().copied()).collect();
    let mut p = Problem::new(m, b, blocks);
    p.meta.insert("generator".into(), "acopf-toy".into());
    p.meta.insert("buses".into(), format!("{nb}"));
    Ok(p)
}
