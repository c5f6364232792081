use super::propagate::{check_grid, check_step, ensure_finite, steps_for};
use super::{CMatrix, DensityMatrix, FinalState, Hamiltonian, SparseOp, Trajectory, I};
use crate::{Error, Result};
use num_complex::Complex64;

/// Collapse operator `op` with rate `rate` (1/ns).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub op: SparseOp,
    pub rate: f64,
}

impl Channel {
    pub fn new(op: &CMatrix, rate: f64) -> Self {
        Self { op: SparseOp::from_dense(op, 0.0), rate }
    }
}

struct Generator<'a> {
    h: &'a dyn Hamiltonian,
    channels: &'a [Channel],
    diag: Vec<f64>,
    /// Sum of rate * L^dagger L.
    decay: CMatrix,
}

impl<'a> Generator<'a> {
    fn new(h: &'a dyn Hamiltonian, channels: &'a [Channel]) -> Self {
        let n = h.dim();
        let diag = h.static_diagonal().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let mut decay = CMatrix::zeros(n, n);
        for ch in channels {
            let l = ch.op.to_dense();
            decay += l.adjoint() * &l * Complex64::new(ch.rate, 0.0);
        }
        Self { h, channels, diag, decay }
    }

    fn remainder(&self, t: f64, out: &mut CMatrix) -> Result<()> {
        self.h.write(t, out);
        ensure_finite(out, t)?;
        for (k, &d) in self.diag.iter().enumerate() {
            out[(k, k)] -= Complex64::new(d, 0.0);
        }
        Ok(())
    }

    /// Schrodinger-picture generator with the static diagonal removed.
    fn apply(&self, v: &CMatrix, rho: &CMatrix) -> CMatrix {
        let vr = v * rho;
        let mut out = (&vr - vr.adjoint()) * (-I);
        let dr = &self.decay * rho;
        out -= (&dr + dr.adjoint()) * Complex64::new(0.5, 0.0);
        for ch in self.channels {
            if ch.rate == 0.0 {
                continue;
            }
            let g = Complex64::new(ch.rate, 0.0);
            for &(a, k, v1) in ch.op.entries() {
                for &(b, l, v2) in ch.op.entries() {
                    out[(a, b)] += g * v1 * rho[(k, l)] * v2.conj();
                }
            }
        }
        out
    }

    /// Generator in the frame that removes `e^{-iD tau}`; `p = e^{-iD tau}`.
    fn apply_rotated(&self, v: &CMatrix, p: &[Complex64], rho: &CMatrix) -> CMatrix {
        let n = rho.nrows();
        let to_lab = CMatrix::from_fn(n, n, |r, c| p[r] * rho[(r, c)] * p[c].conj());
        let d = self.apply(v, &to_lab);
        CMatrix::from_fn(n, n, |r, c| p[r].conj() * d[(r, c)] * p[c])
    }
}

/// Lindblad evolution of `rho0`, recorded on `grid` (ns, starting at 0).
pub fn propagate_lindblad(
    h: &dyn Hamiltonian,
    channels: &[Channel],
    rho0: &DensityMatrix,
    grid: &[f64],
    dt: f64,
) -> Result<Trajectory> {
    check_step(dt)?;
    check_grid(grid)?;
    let n = h.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: rho0.dim() });
    }
    for ch in channels {
        if ch.op.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: ch.op.dim() });
        }
        if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
            return Err(Error::invalid(format!("channel rate must be non-negative, got {}", ch.rate)));
        }
    }
    let gen = Generator::new(h, channels);
    let mut rho = rho0.matrix().clone();
    let pops = |m: &CMatrix| (0..n).map(|k| m[(k, k)].re).collect::<Vec<f64>>();
    let mut populations = vec![pops(&rho)];
    let mut v0 = CMatrix::zeros(n, n);
    let mut vm = CMatrix::zeros(n, n);
    let mut v1 = CMatrix::zeros(n, n);
    for w in grid.windows(2) {
        let (steps, step) = steps_for(w[1] - w[0], dt);
        let phase = |tau: f64| gen.diag.iter().map(|&d| Complex64::from_polar(1.0, -d * tau)).collect::<Vec<_>>();
        let (ph, pf) = (phase(step / 2.0), phase(step));
        gen.remainder(w[0], &mut v1)?;
        for k in 0..steps {
            let t = w[0] + k as f64 * step;
            std::mem::swap(&mut v0, &mut v1);
            gen.remainder(t + step / 2.0, &mut vm)?;
            gen.remainder(t + step, &mut v1)?;
            let hs = Complex64::new(step, 0.0);
            let k1 = gen.apply(&v0, &rho);
            let k2 = gen.apply_rotated(&vm, &ph, &(&rho + &k1 * (hs / 2.0)));
            let k3 = gen.apply_rotated(&vm, &ph, &(&rho + &k2 * (hs / 2.0)));
            let k4 = gen.apply_rotated(&v1, &pf, &(&rho + &k3 * hs));
            rho += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * (hs / 6.0);
            rho = CMatrix::from_fn(n, n, |r, c| pf[r] * rho[(r, c)] * pf[c].conj());
        }
        populations.push(pops(&rho));
    }
    // Remove accumulated round-off asymmetry.
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(Trajectory {
        times: grid.to_vec(),
        populations,
        final_state: FinalState::Mixed(DensityMatrix::from_raw(rho)),
        final_unitary: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{propagate_state, uniform_grid, ControlHamiltonian, StateVector, ONE, ZERO};

    #[test]
    fn amplitude_damping_is_exponential() {
        let a = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let t1_ns = 20_000.0;
        let h = ControlHamiltonian::new(CMatrix::zeros(2, 2), vec![]).unwrap();
        let rho0 = StateVector::basis(2, 1).unwrap().to_density();
        let grid = uniform_grid(40_000.0, 8);
        let traj = propagate_lindblad(&h, &[Channel::new(&a, 1.0 / t1_ns)], &rho0, &grid, 50.0).unwrap();
        for (t, row) in traj.times.iter().zip(&traj.populations) {
            assert!((row[1] - (-t / t1_ns).exp()).abs() < 1e-6);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dephasing_decays_coherence_at_half_rate() {
        let n_op = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        let h = ControlHamiltonian::new(CMatrix::zeros(2, 2), vec![]).unwrap();
        let plus = StateVector::new(nalgebra::DVector::from_vec(vec![ONE, ONE])).unwrap();
        let gamma = 1e-3;
        let traj = propagate_lindblad(&h, &[Channel::new(&n_op, gamma)], &plus.to_density(), &[0.0, 500.0], 1.0).unwrap();
        let FinalState::Mixed(rho) = traj.final_state else { panic!() };
        assert!((rho.matrix()[(0, 1)].re - 0.5 * (-gamma * 250.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_rates_reproduce_closed_dynamics() {
        let drift = CMatrix::from_row_slice(2, 2, &[ZERO, ONE * 0.2, ONE * 0.2, ONE * 1.5]);
        let h = ControlHamiltonian::new(drift, vec![]).unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        let grid = uniform_grid(30.0, 6);
        let closed = propagate_state(&h, &psi, &grid, 0.005).unwrap();
        let open = propagate_lindblad(&h, &[], &psi.to_density(), &grid, 0.005).unwrap();
        for (a, b) in closed.populations.iter().zip(&open.populations) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rejects_negative_rate() {
        let h = ControlHamiltonian::new(CMatrix::zeros(2, 2), vec![]).unwrap();
        let rho0 = StateVector::basis(2, 0).unwrap().to_density();
        let ch = Channel::new(&CMatrix::identity(2, 2), -1.0);
        assert!(propagate_lindblad(&h, &[ch], &rho0, &[0.0, 1.0], 0.1).is_err());
    }
}
