//! Turns a device plus a gate schedule into a runnable model.

use crate::device::{
    lab_frame_model, restrict_channels, rotating_frame_model, CouplingGauge, DeviceSpec, Expansion, NoiseSpec,
};
use crate::hilbert::{
    dressed_basis, propagate_lindblad, propagate_state, propagate_unitary_with, uniform_grid, CMatrix, Channel, ControlHamiltonian,
    DensityMatrix, FinalState, HilbertSpace, Operator, Sector, SectorKind, SparseOp, StateVector, Trajectory, DEFAULT_DT_NS,
};
use crate::holonomic::{Frame, GateSchedule};
use crate::{Error, Result};

/// Basis in which lab-frame runs prepare and read out states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabBasis {
    /// Uncoupled qubit and mode states.
    Bare,
    /// Eigenstates of the undriven Hamiltonian, labelled by their bare parent.
    #[default]
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub expansion: Expansion,
    pub dt_ns: f64,
    pub gauge: CouplingGauge,
    pub lab_basis: LabBasis,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            expansion: Expansion::default(),
            dt_ns: DEFAULT_DT_NS,
            gauge: CouplingGauge::Standard,
            lab_basis: LabBasis::default(),
        }
    }
}

/// A gate schedule compiled on the excitation sector it needs: one
/// excitation for closed runs, at most one when relaxation can empty it.
#[derive(Debug, Clone)]
pub struct GateModel {
    space: HilbertSpace,
    sector: Sector,
    hamiltonian: ControlHamiltonian,
    channels: Vec<Channel>,
    labels: Vec<String>,
    computational: [usize; 2],
    duration_ns: f64,
    dt_ns: f64,
}

fn state_label(space: &HilbertSpace, index: usize) -> String {
    let levels = space.multi_index(index);
    let parts: Vec<String> = levels
        .iter()
        .zip(space.labels())
        .filter(|(&l, _)| l > 0)
        .map(|(&l, name)| if l == 1 { name.clone() } else { format!("{name}:{l}") })
        .collect();
    if parts.is_empty() {
        "vac".to_string()
    } else {
        parts.join("+")
    }
}

impl GateModel {
    pub fn new(
        device: &DeviceSpec,
        schedule: &GateSchedule,
        options: &ModelOptions,
        noise: Option<&NoiseSpec>,
    ) -> Result<Self> {
        let (space, full) = match schedule.frame {
            Frame::Rotating => rotating_frame_model(device, &schedule.drives, options.expansion, options.gauge)?,
            Frame::Lab => lab_frame_model(device, &schedule.drives, schedule.drives[0].reference_ghz, options.gauge)?,
        };
        let noisy = noise.filter(|n| !n.is_lossless());
        let kind = if noisy.is_some() { SectorKind::AtMost(1) } else { SectorKind::Exactly(1) };
        let sector = Sector::new(&space, kind)?;
        let mut hamiltonian = full.restrict(&space, &sector)?;
        let mut channels = match noisy {
            Some(n) => restrict_channels(&n.channels(&space)?, &sector)?,
            None => Vec::new(),
        };
        if schedule.frame == Frame::Lab && options.lab_basis == LabBasis::Dressed {
            let w = dressed_basis(hamiltonian.drift())?;
            hamiltonian = hamiltonian.change_basis(&w)?;
            let wd = w.adjoint();
            for ch in &mut channels {
                ch.op = SparseOp::from_dense(&(&wd * ch.op.to_dense() * &w), 1e-14);
            }
        }
        let labels: Vec<String> = sector.indices().iter().map(|&k| state_label(&space, k)).collect();
        let position = |q: usize| -> Result<usize> {
            let full_index = space.excited(q, 1)?;
            sector.position(full_index).ok_or_else(|| Error::invalid("computational state missing from sector"))
        };
        let computational = [position(0)?, position(1)?];
        Ok(Self {
            space,
            sector,
            hamiltonian,
            channels,
            labels,
            computational,
            duration_ns: schedule.duration_ns,
            dt_ns: options.dt_ns,
        })
    }

    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn hamiltonian(&self) -> &ControlHamiltonian {
        &self.hamiltonian
    }

    pub fn is_open(&self) -> bool {
        !self.channels.is_empty()
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    pub fn dt_ns(&self) -> f64 {
        self.dt_ns
    }

    /// Label of each sector basis state (`Q1`, `M2`, `vac`, `Q1:2`, ...).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Positions of `|10>` and `|01>`.
    pub fn computational(&self) -> [usize; 2] {
        self.computational
    }

    /// Excited states outside the computational pair.
    pub fn leakage_positions(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&k| self.sector.excitations()[k] > 0 && !self.computational.contains(&k))
            .collect()
    }

    /// `|10>` (qubit 0) or `|01>` (qubit 1).
    pub fn qubit_state(&self, qubit: usize) -> Result<StateVector> {
        StateVector::basis(self.dim(), self.computational[qubit])
    }

    /// State `a|10> + b|01>`.
    pub fn computational_state(&self, a: num_complex::Complex64, b: num_complex::Complex64) -> Result<StateVector> {
        let mut v = crate::hilbert::CVector::zeros(self.dim());
        v[self.computational[0]] = a;
        v[self.computational[1]] = b;
        StateVector::new(v)
    }

    fn require_closed(&self) -> Result<()> {
        if self.is_open() {
            return Err(Error::invalid("model carries decoherence; use the density-matrix methods"));
        }
        Ok(())
    }

    /// Closed evolution over the full gate.
    pub fn evolve(&self, psi0: &StateVector) -> Result<StateVector> {
        self.require_closed()?;
        let traj = propagate_state(&self.hamiltonian, psi0, &[0.0, self.duration_ns], self.dt_ns)?;
        match traj.final_state {
            FinalState::Pure(s) => Ok(s),
            FinalState::Mixed(_) => unreachable!("closed propagation returns a pure state"),
        }
    }

    /// Closed evolution sampled on `intervals + 1` evenly spaced times.
    pub fn trajectory(&self, psi0: &StateVector, intervals: usize) -> Result<Trajectory> {
        self.require_closed()?;
        propagate_state(&self.hamiltonian, psi0, &uniform_grid(self.duration_ns, intervals), self.dt_ns)
    }

    /// Sector propagator of the whole gate.
    pub fn propagator(&self) -> Result<Operator> {
        self.require_closed()?;
        propagate_unitary_with(&self.hamiltonian, self.duration_ns, self.dt_ns)
    }

    /// Propagator block on `{|10>, |01>}`; only those two columns are evolved.
    pub fn subspace_propagator(&self) -> Result<CMatrix> {
        self.require_closed()?;
        let mut cols = CMatrix::zeros(self.dim(), 2);
        for (c, &k) in self.computational.iter().enumerate() {
            cols[(k, c)] = num_complex::Complex64::new(1.0, 0.0);
        }
        let out = crate::hilbert::evolve_columns(&self.hamiltonian, cols, self.duration_ns, self.dt_ns)?;
        Ok(CMatrix::from_fn(2, 2, |r, c| out[(self.computational[r], c)]))
    }

    /// Open (or closed, if lossless) evolution of a density matrix.
    pub fn evolve_density(&self, rho0: &DensityMatrix, intervals: usize) -> Result<Trajectory> {
        propagate_lindblad(
            &self.hamiltonian,
            &self.channels,
            rho0,
            &uniform_grid(self.duration_ns, intervals),
            self.dt_ns,
        )
    }

    /// Decoherence alone (no Hamiltonian) over the gate duration.
    pub fn idle_density(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        let zero = ControlHamiltonian::new(CMatrix::zeros(self.dim(), self.dim()), Vec::new())?;
        let dt = self.duration_ns.max(self.dt_ns);
        let traj = propagate_lindblad(&zero, &self.channels, rho0, &[0.0, self.duration_ns], dt.min(1.0))?;
        match traj.final_state {
            FinalState::Mixed(r) => Ok(r),
            FinalState::Pure(_) => unreachable!("lindblad propagation returns a density matrix"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_device, DeviceParams};
    use crate::holonomic::{synthesize_drives, GateTarget, SynthesisOptions};
    use crate::hilbert::{propagate_state, restrict_to_sector, Hamiltonian};
    use crate::pulse::EnvelopeKind;

    fn swap_schedule(device: &DeviceSpec) -> GateSchedule {
        let opts = SynthesisOptions::new(EnvelopeKind::Cosine, 10.10 * 2f64.sqrt());
        synthesize_drives(device, &GateTarget::swap(), &opts).unwrap()
    }

    #[test]
    fn swap_transfers_population() {
        let d = DeviceSpec::reference();
        let model = GateModel::new(&d, &swap_schedule(&d), &ModelOptions::default(), None).unwrap();
        assert_eq!(model.labels(), ["Q1", "Q2", "M1", "M2", "M3"]);
        let traj = model.trajectory(&model.qubit_state(0).unwrap(), 70).unwrap();
        let last = traj.final_populations();
        assert!(last[1] > 0.99, "final |01> population {}", last[1]);
        let m2 = model.position("M2").unwrap();
        let peak = traj.populations.iter().map(|p| p[m2]).fold(0.0, f64::max);
        assert!(peak > 0.2 && last[m2] < 0.01);
        for row in &traj.populations {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sector_matches_full_space() {
        let d = build_device(&DeviceParams::reference_ladder(403.0)).unwrap();
        let s = swap_schedule(&d);
        let (space, full) = rotating_frame_model(&d, &s.drives, Expansion::SecondOrder, CouplingGauge::Standard).unwrap();
        let model = GateModel::new(&d, &s, &ModelOptions::default(), None).unwrap();
        let psi_sector = model.evolve(&model.qubit_state(0).unwrap()).unwrap();
        let start = StateVector::basis(space.dim(), space.excited(0, 1).unwrap()).unwrap();
        let grid = [0.0, s.duration_ns];
        let full_traj = propagate_state(&full, &start, &grid, 0.005).unwrap();
        let fp = full_traj.final_populations();
        for (k, &idx) in model.sector().indices().iter().enumerate() {
            assert!((fp[idx] - psi_sector.populations()[k]).abs() < 1e-8);
        }
        let (_, block) = restrict_to_sector(&space, &full.sample(3.0), SectorKind::Exactly(1)).unwrap();
        assert!((block - model.hamiltonian().sample(3.0)).norm() < 1e-14);
    }
}
