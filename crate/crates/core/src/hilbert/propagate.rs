use super::{CMatrix, DensityMatrix, Hamiltonian, Operator, StateVector, I, ONE, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;

/// Default integration step in ns.
pub const DEFAULT_DT_NS: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Sampled populations of a propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `populations[k][i]`: population of basis state `i` at `times[k]`.
    pub populations: Vec<Vec<f64>>,
    pub final_state: FinalState,
    pub final_unitary: Option<Operator>,
}

impl Trajectory {
    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub(crate) fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {dt}")));
    }
    Ok(())
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        None => return Err(Error::invalid("time grid is empty")),
        Some(&t0) if t0 != 0.0 => return Err(Error::invalid("time grid must start at 0")),
        _ => {}
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

pub(crate) fn steps_for(span: f64, dt: f64) -> (usize, f64) {
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

pub(crate) fn ensure_finite(m: &CMatrix, t: f64) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("hamiltonian sample at t = {t} ns")))
    }
}

/// Fixed-step fourth-order integrator for `i dpsi/dt = H(t) psi`.
///
/// The constant diagonal reported by the Hamiltonian is integrated exactly
/// in a frame that is reset at the start of every step; only the remainder
/// goes through the Runge-Kutta stages.
pub(crate) struct Stepper<'a> {
    h: &'a dyn Hamiltonian,
    diag: Vec<f64>,
    step: f64,
    half_phase: Vec<Complex64>,
    full_phase: Vec<Complex64>,
    v_start: CMatrix,
    v_mid: CMatrix,
    v_end: CMatrix,
    cached_end: Option<f64>,
    /// Stage slopes, stage input and a phase-rotated copy, shaped like the state.
    k: [CMatrix; 4],
    stage: CMatrix,
    rotated: CMatrix,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(h: &'a dyn Hamiltonian, step: f64) -> Self {
        let n = h.dim();
        let diag = h.static_diagonal().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let phase = |tau: f64| diag.iter().map(|&d| Complex64::from_polar(1.0, -d * tau)).collect();
        Self {
            half_phase: phase(step / 2.0),
            full_phase: phase(step),
            diag,
            h,
            step,
            v_start: CMatrix::zeros(n, n),
            v_mid: CMatrix::zeros(n, n),
            v_end: CMatrix::zeros(n, n),
            cached_end: None,
            k: std::array::from_fn(|_| CMatrix::zeros(0, 0)),
            stage: CMatrix::zeros(0, 0),
            rotated: CMatrix::zeros(0, 0),
        }
    }

    fn remainder(&self, t: f64, out: &mut CMatrix) -> Result<()> {
        self.h.write(t, out);
        ensure_finite(out, t)?;
        for (k, &d) in self.diag.iter().enumerate() {
            out[(k, k)] -= Complex64::new(d, 0.0);
        }
        Ok(())
    }

    /// `out = -i W(tau) x` where `W(tau) = e^{iD tau} V e^{-iD tau}` and `phase = e^{-iD tau}`.
    fn rhs(v: &CMatrix, phase: Option<&[Complex64]>, x: &CMatrix, rotated: &mut CMatrix, out: &mut CMatrix) {
        match phase {
            None => out.gemm(-I, v, x, ZERO),
            Some(p) => {
                rotated.copy_from(x);
                for (r, &ph) in p.iter().enumerate() {
                    rotated.row_mut(r).scale_mut_c(ph);
                }
                out.gemm(ONE, v, rotated, ZERO);
                for (r, &ph) in p.iter().enumerate() {
                    out.row_mut(r).scale_mut_c(-I * ph.conj());
                }
            }
        }
    }

    /// Advances `psi` from `t` to `t + step`.
    pub(crate) fn advance(&mut self, t: f64, psi: &mut CMatrix) -> Result<()> {
        let h = self.step;
        match self.cached_end {
            Some(te) if te == t => std::mem::swap(&mut self.v_start, &mut self.v_end),
            _ => {
                let mut m = std::mem::take(&mut self.v_start);
                self.remainder(t, &mut m)?;
                self.v_start = m;
            }
        }
        let mut m = std::mem::take(&mut self.v_mid);
        self.remainder(t + h / 2.0, &mut m)?;
        self.v_mid = m;
        let mut m = std::mem::take(&mut self.v_end);
        self.remainder(t + h, &mut m)?;
        self.v_end = m;
        self.cached_end = Some(t + h);

        let shape = psi.shape();
        if self.stage.shape() != shape {
            for k in &mut self.k {
                *k = CMatrix::zeros(shape.0, shape.1);
            }
            self.stage = CMatrix::zeros(shape.0, shape.1);
            self.rotated = CMatrix::zeros(shape.0, shape.1);
        }
        let [k1, k2, k3, k4] = &mut self.k;
        let half = Complex64::new(h / 2.0, 0.0);
        Self::rhs(&self.v_start, None, psi, &mut self.rotated, k1);
        self.stage.copy_from(psi);
        add_scaled(&mut self.stage, half, k1);
        Self::rhs(&self.v_mid, Some(&self.half_phase), &self.stage, &mut self.rotated, k2);
        self.stage.copy_from(psi);
        add_scaled(&mut self.stage, half, k2);
        Self::rhs(&self.v_mid, Some(&self.half_phase), &self.stage, &mut self.rotated, k3);
        self.stage.copy_from(psi);
        add_scaled(&mut self.stage, Complex64::new(h, 0.0), k3);
        Self::rhs(&self.v_end, Some(&self.full_phase), &self.stage, &mut self.rotated, k4);
        let sixth = Complex64::new(h / 6.0, 0.0);
        add_scaled(psi, sixth, k1);
        add_scaled(psi, sixth * 2.0, k2);
        add_scaled(psi, sixth * 2.0, k3);
        add_scaled(psi, sixth, k4);
        for (r, &ph) in self.full_phase.iter().enumerate() {
            psi.row_mut(r).scale_mut_c(ph);
        }
        Ok(())
    }
}

fn add_scaled(dst: &mut CMatrix, a: Complex64, x: &CMatrix) {
    for (d, &v) in dst.iter_mut().zip(x.iter()) {
        *d += a * v;
    }
}

trait ScaleRow {
    fn scale_mut_c(&mut self, s: Complex64);
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::StorageMut<Complex64, R, C>> ScaleRow
    for nalgebra::Matrix<Complex64, R, C, S>
{
    #[inline]
    fn scale_mut_c(&mut self, s: Complex64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// Evolves the columns of `state` from `t0` to `t1`.
pub(crate) fn evolve(h: &dyn Hamiltonian, mut state: CMatrix, t0: f64, t1: f64, dt: f64) -> Result<CMatrix> {
    check_step(dt)?;
    if state.nrows() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: state.nrows() });
    }
    if t1 < t0 {
        return Err(Error::invalid("final time precedes start time"));
    }
    if t1 == t0 {
        return Ok(state);
    }
    let (n, step) = steps_for(t1 - t0, dt);
    let mut stepper = Stepper::new(h, step);
    for k in 0..n {
        stepper.advance(t0 + k as f64 * step, &mut state)?;
    }
    Ok(state)
}

/// Time-ordered propagator `U(T)` at the default step.
pub fn propagate_unitary(h: &dyn Hamiltonian, t_final: f64) -> Result<Operator> {
    propagate_unitary_with(h, t_final, DEFAULT_DT_NS)
}

pub fn propagate_unitary_with(h: &dyn Hamiltonian, t_final: f64, dt: f64) -> Result<Operator> {
    if !(t_final >= 0.0) {
        return Err(Error::invalid(format!("duration must be non-negative, got {t_final}")));
    }
    let n = h.dim();
    Operator::new(evolve(h, CMatrix::identity(n, n), 0.0, t_final, dt)?)
}

/// Evolves the columns of `initial` over `[0, t_final]`.
pub fn evolve_columns(h: &dyn Hamiltonian, initial: CMatrix, t_final: f64, dt: f64) -> Result<CMatrix> {
    evolve(h, initial, 0.0, t_final, dt)
}

/// Evolves `psi0` and records populations on `grid` (ns, starting at 0).
pub fn propagate_state(h: &dyn Hamiltonian, psi0: &StateVector, grid: &[f64], dt: f64) -> Result<Trajectory> {
    check_step(dt)?;
    check_grid(grid)?;
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: psi0.dim() });
    }
    let mut psi = CMatrix::from_column_slice(psi0.dim(), 1, psi0.amplitudes().as_slice());
    let pops = |m: &CMatrix| m.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>();
    let mut populations = vec![pops(&psi)];
    for w in grid.windows(2) {
        psi = evolve(h, psi, w[0], w[1], dt)?;
        populations.push(pops(&psi));
    }
    let final_state = StateVector::from_raw(psi.column(0).into_owned());
    Ok(Trajectory {
        times: grid.to_vec(),
        populations,
        final_state: FinalState::Pure(final_state),
        final_unitary: None,
    })
}

/// Evenly spaced grid `0, T/n, ..., T`.
pub fn uniform_grid(t_final: f64, intervals: usize) -> Vec<f64> {
    let n = intervals.max(1);
    (0..=n).map(|k| t_final * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ControlHamiltonian, ControlTerm, FnHamiltonian, ONE, ZERO};
    use std::sync::Arc;

    fn rabi(g: f64) -> FnHamiltonian<impl Fn(f64, &mut CMatrix) + Send + Sync> {
        FnHamiltonian::new(2, move |_, m: &mut CMatrix| {
            m.fill(ZERO);
            m[(0, 1)] = ONE * g;
            m[(1, 0)] = ONE * g;
        })
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let h = FnHamiltonian::new(3, |_, m: &mut CMatrix| m.fill(ZERO));
        let u = propagate_unitary(&h, 12.3).unwrap();
        assert!((u.matrix() - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn rabi_transfer_matches_analytic_solution() {
        let g = 0.2;
        let t = std::f64::consts::PI / (2.0 * g);
        let u = propagate_unitary(&rabi(g), t).unwrap();
        assert!((u.matrix()[(1, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-8);
        assert!(u.matrix()[(0, 0)].norm() < 1e-8);
        assert!(u.unitarity_deviation() < 1e-9);
    }

    #[test]
    fn static_diagonal_is_exact() {
        // Detuned Rabi problem: compare against the closed form.
        let (g, d) = (0.05, 3.0);
        let drift = CMatrix::from_row_slice(2, 2, &[ZERO, ONE * g, ONE * g, ONE * d]);
        let h = ControlHamiltonian::new(drift, vec![]).unwrap();
        let t = 7.0;
        let u = propagate_unitary(&h, t).unwrap();
        let omega = (g * g + d * d / 4.0).sqrt();
        let p_exact = (g / omega).powi(2) * (omega * t).sin().powi(2);
        assert!((u.matrix()[(1, 0)].norm_sqr() - p_exact).abs() < 1e-10);
        assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn time_dependent_drive_matches_finer_step() {
        let drift = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE * 2.0]);
        let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let term = ControlTerm::new(&x, true, Arc::new(|t: f64| Complex64::from_polar(0.1 * (0.3 * t).sin(), 2.0 * t)));
        let h = ControlHamiltonian::new(drift, vec![term]).unwrap();
        let coarse = propagate_unitary_with(&h, 20.0, 0.01).unwrap();
        let fine = propagate_unitary_with(&h, 20.0, 0.005).unwrap();
        assert!((coarse.matrix() - fine.matrix()).norm() < 1e-8);
    }

    #[test]
    fn state_trajectory_preserves_norm() {
        let psi = StateVector::basis(2, 0).unwrap();
        let traj = propagate_state(&rabi(0.3), &psi, &uniform_grid(10.0, 20), DEFAULT_DT_NS).unwrap();
        for row in &traj.populations {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        let expected = (0.3f64 * 10.0).cos().powi(2);
        assert!((traj.final_populations()[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(propagate_state(&rabi(0.1), &psi, &[0.0, 1.0], 0.0).is_err());
        assert!(propagate_state(&rabi(0.1), &psi, &[0.0, 1.0, 1.0], 0.01).is_err());
        assert!(propagate_state(&rabi(0.1), &psi, &[0.5, 1.0], 0.01).is_err());
        let nan = FnHamiltonian::new(2, |_, m: &mut CMatrix| m.fill(Complex64::new(f64::NAN, 0.0)));
        assert!(matches!(propagate_unitary(&nan, 1.0), Err(Error::NonFinite(_))));
    }
}
