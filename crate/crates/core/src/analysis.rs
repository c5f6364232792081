//! Fidelities, losses, leakage and the repeated-gate and robustness procedures.

use crate::device::{DeviceSpec, NoiseSpec};
use crate::dynamics::{GateModel, ModelOptions};
use crate::hilbert::{hermitian_sqrt, CMatrix, CVector, DensityMatrix, FinalState, StateVector};
use crate::holonomic::{target_unitary, GateSchedule};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

fn check_density(rho: &CMatrix) -> Result<()> {
    DensityMatrix::with_tolerances(rho.clone(), 1e-8, 1e-6, 1e-10).map(|_| ())
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`, clipped to `[0, 1]`.
///
/// Evaluated as the trace norm of `sqrt(rho) sqrt(sigma)`, which has the same
/// value and avoids square roots of round-off eigenvalues.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: sigma.dim() });
    }
    check_density(rho.matrix())?;
    check_density(sigma.matrix())?;
    let product = hermitian_sqrt(rho.matrix()) * hermitian_sqrt(sigma.matrix());
    Ok(product.singular_values().sum().clamp(0.0, 1.0))
}

/// `1 - (|Tr(V^dagger U)| / d)^2`.
pub fn gate_loss(ideal: &CMatrix, actual: &CMatrix) -> Result<f64> {
    if ideal.shape() != actual.shape() || ideal.nrows() != ideal.ncols() {
        return Err(Error::DimensionMismatch { expected: ideal.nrows(), actual: actual.nrows() });
    }
    let d = ideal.nrows() as f64;
    let overlap = (ideal.adjoint() * actual).trace().norm() / d;
    Ok((1.0 - overlap * overlap).clamp(0.0, 1.0))
}

/// Population outside `{|10>, |01>}` that still carries an excitation.
pub fn leakage(model: &GateModel, populations: &[f64]) -> f64 {
    model.leakage_positions().iter().map(|&k| populations[k]).sum()
}

/// Leakage of a gate averaged over the basis inputs of its subspace block:
/// `1 - ||U_sub||_F^2 / d`.
pub fn subspace_leakage(block: &CMatrix) -> f64 {
    let d = block.nrows().max(1) as f64;
    (1.0 - block.norm_squared() / d).max(0.0)
}

/// Phase-blind distance of a 2x2 subspace block from a reflection of angle
/// `theta`: half the summed absolute mismatch of the transition probabilities.
/// Pure leakage `L` per input gives `L`.
pub fn transition_error(block: &CMatrix, theta: f64) -> Result<f64> {
    if block.shape() != (2, 2) {
        return Err(Error::DimensionMismatch { expected: 2, actual: block.nrows().max(block.ncols()) });
    }
    let (s, c) = theta.sin_cos();
    let (stay, cross) = (c * c, s * s);
    let mut total = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { stay } else { cross };
            total += (block[(i, j)].norm_sqr() - want).abs();
        }
    }
    Ok(0.5 * total)
}

/// Population of every mode and qubit level, keyed by label.
pub fn population_distribution(model: &GateModel, populations: &[f64]) -> Vec<(String, f64)> {
    model.labels().iter().cloned().zip(populations.iter().copied()).collect()
}

/// Normalized 2x2 state on `{|10>, |01>}` and the weight that was discarded.
pub fn subspace_state(model: &GateModel, state: &FinalState) -> Result<(DensityMatrix, f64)> {
    let rho = match state {
        FinalState::Pure(s) => s.to_density(),
        FinalState::Mixed(r) => r.clone(),
    };
    let [a, b] = model.computational();
    let block = CMatrix::from_fn(2, 2, |r, c| rho.matrix()[([a, b][r], [a, b][c])]);
    let weight = block.trace().re;
    if weight < 1e-12 {
        return Err(Error::InvalidState("no population in the computational subspace".into()));
    }
    let normalized = block / Complex64::new(weight, 0.0);
    let normalized = (&normalized + normalized.adjoint()) * Complex64::new(0.5, 0.0);
    Ok((DensityMatrix::with_tolerances(normalized, 1e-10, 1e-10, 1e-8)?, 1.0 - weight))
}

/// Least-squares fit `population = intercept - epsilon * n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFit {
    /// Error per gate, clipped to `[0, 1]`.
    pub epsilon: f64,
    /// Unclipped negative slope.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub counts: Vec<usize>,
    pub populations: Vec<f64>,
}

/// Smallest population that still enters the linear fit.
pub const FIT_FLOOR: f64 = 0.1;

pub fn fit_linear_error(counts: &[usize], populations: &[f64]) -> Result<ErrorFit> {
    if counts.len() != populations.len() {
        return Err(Error::DimensionMismatch { expected: counts.len(), actual: populations.len() });
    }
    let keep = populations.iter().take_while(|&&p| p >= FIT_FLOOR).count();
    if keep < 3 {
        return Err(Error::UnreliableFit(format!("only {keep} points above population {FIT_FLOOR}")));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = counts[..keep].iter().map(|&n| n as f64).zip(populations[..keep].iter().copied()).unzip();
    let m = keep as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::UnreliableFit("gate counts are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / m).sqrt();
    Ok(ErrorFit {
        epsilon: (-slope).clamp(0.0, 1.0),
        slope: -slope,
        intercept,
        residual,
        counts: counts[..keep].to_vec(),
        populations: populations[..keep].to_vec(),
    })
}

/// Ideal image of `|10>` after `n` applications of the schedule's target.
fn ideal_state(schedule: &GateSchedule, n: usize) -> Result<CVector> {
    let u = target_unitary(schedule.target.theta, schedule.target.phi)?;
    let mut v = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    for _ in 0..n {
        v = u.matrix() * v;
    }
    Ok(v)
}

fn overlap_population(model: &GateModel, rho: &CMatrix, ideal: &CVector) -> f64 {
    let [a, b] = model.computational();
    let idx = [a, b];
    let mut p = Complex64::new(0.0, 0.0);
    for r in 0..2 {
        for c in 0..2 {
            p += ideal[r].conj() * rho[(idx[r], idx[c])] * ideal[c];
        }
    }
    p.re
}

fn initial_density(model: &GateModel) -> Result<DensityMatrix> {
    Ok(model.qubit_state(0)?.to_density())
}

/// Population of the ideal output after `n = 1..=n_max` gate applications
/// starting from `|10>`.
pub fn repeated_gate_populations(
    device: &DeviceSpec,
    schedule: &GateSchedule,
    n_max: usize,
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<Vec<f64>> {
    let model = GateModel::new(device, schedule, options, noise)?;
    let mut out = Vec::with_capacity(n_max);
    if model.is_open() {
        let mut rho = initial_density(&model)?;
        for n in 1..=n_max {
            let traj = model.evolve_density(&rho, 1)?;
            rho = match traj.final_state {
                FinalState::Mixed(r) => r,
                FinalState::Pure(s) => s.to_density(),
            };
            out.push(overlap_population(&model, rho.matrix(), &ideal_state(schedule, n)?));
        }
    } else {
        let u = model.propagator()?;
        let mut psi = model.qubit_state(0)?.amplitudes().clone();
        for n in 1..=n_max {
            psi = u.matrix() * psi;
            let rho = &psi * psi.adjoint();
            out.push(overlap_population(&model, &rho, &ideal_state(schedule, n)?));
        }
    }
    Ok(out)
}

/// Error per gate from a linear fit of the ideal-output population over
/// `n = 1..=n_max` repetitions.
pub fn repeated_gate_error(
    device: &DeviceSpec,
    schedule: &GateSchedule,
    n_max: usize,
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<ErrorFit> {
    if n_max < 3 {
        return Err(Error::invalid("at least three repetitions are needed"));
    }
    let pops = repeated_gate_populations(device, schedule, n_max, noise, options)?;
    let counts: Vec<usize> = (1..=n_max).collect();
    fit_linear_error(&counts, &pops)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedError {
    pub total: ErrorFit,
    pub dissipation: ErrorFit,
    /// `total.slope - dissipation.slope`.
    pub coherent: f64,
}

/// Splits the repeated-gate error into a dissipative part and the rest. The
/// dissipative part comes from a reference run with no Hamiltonian, the same
/// decoherence rates and the same total durations, tracking `|10>`.
pub fn decoherence_compensated_error(
    device: &DeviceSpec,
    schedule: &GateSchedule,
    n_max: usize,
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<CompensatedError> {
    let total = repeated_gate_error(device, schedule, n_max, noise, options)?;
    let counts: Vec<usize> = (1..=n_max).collect();
    let model = GateModel::new(device, schedule, options, noise)?;
    let start = model.computational()[0];
    let mut pops = Vec::with_capacity(n_max);
    if model.is_open() {
        let mut rho = initial_density(&model)?;
        for _ in 0..n_max {
            rho = model.idle_density(&rho)?;
            pops.push(rho.matrix()[(start, start)].re);
        }
    } else {
        pops = vec![1.0; n_max];
    }
    let dissipation = fit_linear_error(&counts, &pops)?;
    Ok(CompensatedError { coherent: total.slope - dissipation.slope, total, dissipation })
}

/// Runs `schedules` back to back from `|10>` and returns the final density
/// matrix on the sector of the first model.
pub fn run_sequence(
    device: &DeviceSpec,
    schedules: &[GateSchedule],
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<(GateModel, DensityMatrix)> {
    let first = schedules.first().ok_or_else(|| Error::invalid("empty schedule sequence"))?;
    let first_model = GateModel::new(device, first, options, noise)?;
    let mut rho = initial_density(&first_model)?;
    for s in schedules {
        let model = GateModel::new(device, s, options, noise)?;
        if model.is_open() {
            rho = match model.evolve_density(&rho, 1)?.final_state {
                FinalState::Mixed(r) => r,
                FinalState::Pure(p) => p.to_density(),
            };
        } else {
            let col = CVector::from_iterator(rho.dim(), (0..rho.dim()).map(|k| rho.matrix()[(k, 0)]));
            // Pure input: recover the state from its density matrix.
            let psi = pure_from_density(&rho).unwrap_or(StateVector::new(col)?);
            rho = model.evolve(&psi)?.to_density();
        }
    }
    Ok((first_model, rho))
}

fn pure_from_density(rho: &DensityMatrix) -> Option<StateVector> {
    let m = rho.matrix();
    let (k, p) = (0..rho.dim()).map(|k| (k, m[(k, k)].re)).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if p <= 0.0 {
        return None;
    }
    let col = CVector::from_iterator(rho.dim(), (0..rho.dim()).map(|r| m[(r, k)] / Complex64::new(p.sqrt(), 0.0)));
    StateVector::new(col).ok()
}

/// Holonomic and dynamic population losses against a shift of the mediating mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub detunings_mhz: Vec<f64>,
    pub holonomic_loss: Vec<f64>,
    pub dynamic_loss: Vec<f64>,
    pub reference_detuning_mhz: f64,
    pub reference_holonomic_loss: f64,
    pub reference_dynamic_loss: f64,
    /// `(R_d - R_h) / R_d` at the reference detuning.
    pub relative_improvement: f64,
}

pub const ROBUSTNESS_REFERENCE_MHZ: f64 = 3.0;

/// Evenly spaced grid `-max, ..., max`.
pub fn symmetric_grid(max_mhz: f64, points_per_side: usize) -> Vec<f64> {
    let n = points_per_side as i64;
    (-n..=n).map(|k| max_mhz * k as f64 / n.max(1) as f64).collect()
}

/// Population lost from the ideal output of `schedules` (run from `|10>`)
/// when the mediating mode sits `shift_mhz` away from where the drives expect it.
pub fn shifted_loss(
    device: &DeviceSpec,
    schedules: &[GateSchedule],
    shift_mhz: f64,
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<f64> {
    let shifted = device.with_center_shift(shift_mhz);
    let (model, rho) = run_sequence(&shifted, schedules, noise, options)?;
    let target = model.computational()[1];
    Ok((1.0 - rho.matrix()[(target, target)].re).clamp(0.0, 1.0))
}

pub fn robustness_sweep(
    device: &DeviceSpec,
    holonomic: &GateSchedule,
    dynamic: &[GateSchedule],
    detunings_mhz: &[f64],
    noise: Option<&NoiseSpec>,
    options: &ModelOptions,
) -> Result<RobustnessCurve> {
    if let Some(d) = detunings_mhz.iter().find(|d| !(d.abs() <= 10.0)) {
        return Err(Error::invalid(format!("detuning {d} MHz lies outside +-10 MHz")));
    }
    let holo = std::slice::from_ref(holonomic);
    let evaluate = |d: f64| -> Result<(f64, f64)> {
        Ok((shifted_loss(device, holo, d, noise, options)?, shifted_loss(device, dynamic, d, noise, options)?))
    };
    let mut points: Vec<f64> = detunings_mhz.to_vec();
    points.push(ROBUSTNESS_REFERENCE_MHZ);
    let results = points.par_iter().map(|&d| evaluate(d)).collect::<Result<Vec<_>>>()?;
    let (reference_holonomic_loss, reference_dynamic_loss) = *results.last().expect("reference point present");
    let n = detunings_mhz.len();
    Ok(RobustnessCurve {
        detunings_mhz: detunings_mhz.to_vec(),
        holonomic_loss: results[..n].iter().map(|r| r.0).collect(),
        dynamic_loss: results[..n].iter().map(|r| r.1).collect(),
        reference_detuning_mhz: ROBUSTNESS_REFERENCE_MHZ,
        reference_holonomic_loss,
        reference_dynamic_loss,
        relative_improvement: (reference_dynamic_loss - reference_holonomic_loss) / reference_dynamic_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::ONE;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pure(a: Complex64, b: Complex64) -> DensityMatrix {
        StateVector::new(CVector::from_vec(vec![a, b])).unwrap().to_density()
    }

    #[test]
    fn fidelity_examples() {
        let zero = pure(ONE, Complex64::new(0.0, 0.0));
        let plus = pure(ONE, ONE);
        assert_abs_diff_eq!(state_fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(state_fidelity(&zero, &plus).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
        let mixed = DensityMatrix::new(CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(state_fidelity(&mixed, &zero).unwrap(), 0.5f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn loss_examples() {
        let i2 = CMatrix::identity(2, 2);
        let x = CMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), ONE, ONE, Complex64::new(0.0, 0.0)]);
        assert_eq!(gate_loss(&x, &x).unwrap(), 0.0);
        assert_abs_diff_eq!(gate_loss(&x, &i2).unwrap(), 1.0, epsilon = 1e-15);
        let s = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, Complex64::new(0.0, 1.0)]));
        assert_abs_diff_eq!(gate_loss(&i2, &s).unwrap(), 0.5, epsilon = 1e-15);
        assert!(gate_loss(&i2, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn linear_fit_recovers_slope() {
        let counts: Vec<usize> = (1..=20).collect();
        let pops: Vec<f64> = counts.iter().map(|&n| 1.0 - 0.0184 * n as f64).collect();
        let fit = fit_linear_error(&counts, &pops).unwrap();
        assert_abs_diff_eq!(fit.epsilon, 0.0184, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_needs_three_points_above_floor() {
        assert!(matches!(fit_linear_error(&[1, 2], &[0.9, 0.8]), Err(Error::UnreliableFit(_))));
        assert!(matches!(fit_linear_error(&[1, 2, 3, 4], &[0.5, 0.05, 0.04, 0.03]), Err(Error::UnreliableFit(_))));
    }

    proptest! {
        #[test]
        fn fidelity_is_symmetric_and_bounded(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0, p in 0.0f64..1.0) {
            prop_assume!(a.hypot(b) > 1e-3 && c.hypot(d) > 1e-3);
            let rho = pure(Complex64::new(a, b), ONE);
            let sig = pure(Complex64::new(c, 0.0), Complex64::new(d, 0.0));
            let mix = DensityMatrix::new(rho.matrix() * Complex64::new(p, 0.0) + sig.matrix() * Complex64::new(1.0 - p, 0.0)).unwrap();
            let f1 = state_fidelity(&mix, &sig).unwrap();
            let f2 = state_fidelity(&sig, &mix).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-8);
            prop_assert!((0.0..=1.0).contains(&f1));
            let ov = CVector::from_vec(vec![Complex64::new(a, b), ONE]).normalize().dotc(&CVector::from_vec(vec![Complex64::new(c, 0.0), Complex64::new(d, 0.0)]).normalize()).norm();
            prop_assert!((state_fidelity(&rho, &sig).unwrap() - ov).abs() < 1e-6);
        }

        #[test]
        fn loss_ignores_global_phase(theta in 0.0f64..3.1, phi in 0.0f64..6.2, gamma in 0.0f64..6.2) {
            let u = target_unitary(theta, phi).unwrap();
            let v = u.matrix() * Complex64::from_polar(1.0, gamma);
            prop_assert!(gate_loss(u.matrix(), &v).unwrap() < 1e-10);
        }
    }
}
