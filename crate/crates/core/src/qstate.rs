//! Dense pure states and unitaries of a single qudit, Born-rule
//! probabilities, and the gates the adaptation protocol is built from.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on `sum |a_j|^2 = 1` for a [`StateVector`].
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on `max |U^dag U - I|` for a [`UnitaryMatrix`].
pub const UNITARY_TOL: f64 = 1e-10;
/// Probability sums drifting further than this are renormalized.
pub const PROB_RENORM_TOL: f64 = 1e-12;
/// Probability sums drifting further than this are rejected.
pub const PROB_ABORT_TOL: f64 = 1e-9;

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(())
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A unit-norm vector of `d >= 2` complex amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps `amps`, which must already be normalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        if let Some(i) = amps.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps` by its Euclidean norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        if let Some(i) = amps.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::NotNormalized(n2));
        }
        let inv = 1.0 / n2.sqrt();
        for a in &mut amps {
            *a *= inv;
        }
        Self::new(amps)
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// A dense row-major `d x d` unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        Ok(Self { dim, entries })
    }

    /// Builds a unitary from row-major entries, checking `U^dag U = I`.
    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Result<Self> {
        check_dim(dim)?;
        check_same_dim(dim * dim, entries.len())?;
        if let Some(i) = entries.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let u = Self { dim, entries };
        let err = u.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(u)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    /// `U|col>` as a state.
    pub fn column_state(&self, col: usize) -> Result<StateVector> {
        if col >= self.dim {
            return Err(Error::IndexOutOfRange { index: col, dim: self.dim });
        }
        Ok(StateVector { amps: self.column(col) })
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Self { dim: d, entries }
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        check_same_dim(self.dim, rhs.dim)?;
        let d = self.dim;
        let mut entries = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    entries[r * d + c] += a * rhs.entries[k * d + c];
                }
            }
        }
        Ok(Self { dim: d, entries })
    }

    /// `max_{rc} |(U^dag U - I)_{rc}|`.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += self.entries[k * d + r].conj() * self.entries[k * d + c];
                }
                if r == c {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// `self * R` for a two-level rotation `R`; only columns `i` and `j` change.
    pub fn compose_two_level(&self, rot: &TwoLevelRotation) -> Result<Self> {
        check_same_dim(self.dim, rot.dim)?;
        let [[u_ii, u_ij], [u_ji, u_jj]] = rot.span_matrix();
        let (i, j, d) = (rot.i, rot.j, self.dim);
        let mut out = self.clone();
        for r in 0..d {
            let f_ri = self.entries[r * d + i];
            let f_rj = self.entries[r * d + j];
            out.entries[r * d + i] = f_ri * u_ii + f_rj * u_ji;
            out.entries[r * d + j] = f_ri * u_ij + f_rj * u_jj;
        }
        Ok(out)
    }

    /// `R * self` for a two-level rotation `R`; only rows `i` and `j` change.
    pub fn precompose_two_level(&self, rot: &TwoLevelRotation) -> Result<Self> {
        check_same_dim(self.dim, rot.dim)?;
        let [[u_ii, u_ij], [u_ji, u_jj]] = rot.span_matrix();
        let (i, j, d) = (rot.i, rot.j, self.dim);
        let mut out = self.clone();
        for c in 0..d {
            let f_ic = self.entries[i * d + c];
            let f_jc = self.entries[j * d + c];
            out.entries[i * d + c] = u_ii * f_ic + u_ij * f_jc;
            out.entries[j * d + c] = u_ji * f_ic + u_jj * f_jc;
        }
        Ok(out)
    }
}

/// `u |s>`.
pub fn apply_unitary(u: &UnitaryMatrix, s: &StateVector) -> Result<StateVector> {
    check_same_dim(u.dim(), s.dim())?;
    let d = u.dim();
    let amps = (0..d)
        .map(|r| (0..d).map(|c| u.get(r, c) * s.amps[c]).sum())
        .collect();
    Ok(StateVector { amps })
}

/// `u^dag |s>`, the state expressed in the frame whose basis is `u`'s columns.
pub fn apply_adjoint(u: &UnitaryMatrix, s: &StateVector) -> Result<StateVector> {
    check_same_dim(u.dim(), s.dim())?;
    let d = u.dim();
    let amps = (0..d)
        .map(|c| (0..d).map(|r| u.get(r, c).conj() * s.amps[r]).sum())
        .collect();
    Ok(StateVector { amps })
}

/// A probability distribution over `d` measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    /// Validates `probs`. Sums within [`PROB_ABORT_TOL`] of one are accepted;
    /// past [`PROB_RENORM_TOL`] the vector is rescaled to sum to one.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        check_dim(probs.len())?;
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if *p < 0.0 {
                if *p < -PROB_ABORT_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "negative probability {p} at index {i}"
                    )));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift > PROB_ABORT_TOL {
            return Err(Error::ProbabilityDrift(sum));
        }
        if drift > PROB_RENORM_TOL {
            for p in &mut probs {
                *p /= sum;
            }
        }
        for p in &mut probs {
            *p = p.min(1.0);
        }
        Ok(Self { probs })
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }
}

/// Outcome distribution of the register after the XOR interaction, with the
/// environment copy seen in the agent's frame: `p_j = |(frame^dag env)_j|^2`.
pub fn born_probabilities(frame: &UnitaryMatrix, env: &StateVector) -> Result<ProbVector> {
    let rotated = apply_adjoint(frame, env)?;
    ProbVector::new(rotated.amps.iter().map(|a| a.norm_sqr()).collect())
}

/// Inverse-CDF sampling with a left-to-right scan over one uniform draw.
pub fn sample_outcome(p: &ProbVector, rng: &mut RngStream) -> usize {
    let u = rng.next_f64();
    let mut cumulative = 0.0;
    for (i, &pi) in p.probs.iter().enumerate() {
        cumulative += pi;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left the total just below `u`: fall back to the last
    // outcome that can occur.
    p.probs.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

/// `exp(-i S^z alpha) exp(-i S^x beta)` acting on levels `i` and `j` of a
/// `d`-level system, where `S^z = (|i><i| - |j><j|)/2` and
/// `S^x = (|i><j| + |j><i|)/2`. Every other level is left fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelRotation {
    dim: usize,
    i: usize,
    j: usize,
    alpha: f64,
    beta: f64,
}

impl TwoLevelRotation {
    pub fn new(dim: usize, i: usize, j: usize, alpha: f64, beta: f64) -> Result<Self> {
        check_dim(dim)?;
        for index in [i, j] {
            if index >= dim {
                return Err(Error::IndexOutOfRange { index, dim });
            }
        }
        if i == j {
            return Err(Error::SameLevel(i));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("non-finite rotation angle".into()));
        }
        Ok(Self { dim, i, j, alpha, beta })
    }

    pub fn levels(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// The 2x2 block on `span{|i>, |j>}`, rows and columns ordered `(i, j)`.
    pub fn span_matrix(&self) -> [[C64; 2]; 2] {
        let (sb, cb) = (0.5 * self.beta).sin_cos();
        let phase_minus = C64::from_polar(1.0, -0.5 * self.alpha);
        let phase_plus = C64::from_polar(1.0, 0.5 * self.alpha);
        let minus_i = C64::new(0.0, -1.0);
        [
            [phase_minus * cb, minus_i * phase_minus * sb],
            [minus_i * phase_plus * sb, phase_plus * cb],
        ]
    }

    pub fn to_matrix(&self) -> UnitaryMatrix {
        let d = self.dim;
        let mut u = UnitaryMatrix::identity(d).expect("dimension validated at construction");
        let block = self.span_matrix();
        let idx = [self.i, self.j];
        for (a, &r) in idx.iter().enumerate() {
            for (b, &c) in idx.iter().enumerate() {
                u.entries[r * d + c] = block[a][b];
            }
        }
        u
    }
}

pub fn two_level_unitary(d: usize, i: usize, j: usize, alpha: f64, beta: f64) -> Result<UnitaryMatrix> {
    Ok(TwoLevelRotation::new(d, i, j, alpha, beta)?.to_matrix())
}

/// Basis action of the d-level XOR gate: `|j>|k> -> |j>|(j - k) mod d>`,
/// with `control` holding `j` and `target` holding `k`.
pub fn xor_gate_apply(control: usize, target: usize, d: usize) -> Result<(usize, usize)> {
    check_dim(d)?;
    for index in [control, target] {
        if index >= d {
            return Err(Error::IndexOutOfRange { index, dim: d });
        }
    }
    Ok((control, (control + d - target) % d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::CMatrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(theta: f64, phi: f64) -> StateVector {
        StateVector::new(vec![
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ])
        .unwrap()
    }

    fn random_state(d: usize, rng: &mut RngStream) -> StateVector {
        let amps = (0..d)
            .map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(2, 0).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        let half = qubit(PI / 2.0, 0.83);
        assert!((fidelity(&zero, &half).unwrap() - 0.5).abs() < 1e-15);
        assert!((fidelity(&half, &zero).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = StateVector::basis(2, 0).unwrap();
        let b = StateVector::basis(3, 0).unwrap();
        assert!(matches!(
            fidelity(&a, &b),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn state_validation() {
        assert!(matches!(StateVector::new(vec![c(1.0, 0.0)]), Err(Error::InvalidDimension(1))));
        assert!(matches!(
            StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::new(vec![c(f64::NAN, 0.0), c(1.0, 0.0)]),
            Err(Error::NonFinite(0))
        ));
        assert!(StateVector::normalized(vec![c(0.0, 0.0); 3]).is_err());
        assert!(StateVector::basis(3, 3).is_err());
    }

    #[test]
    fn born_examples() {
        let id2 = UnitaryMatrix::identity(2).unwrap();
        let p = born_probabilities(&id2, &StateVector::basis(2, 0).unwrap()).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);

        let theta = 1.1;
        let p = born_probabilities(&id2, &qubit(theta, 0.4)).unwrap();
        assert!((p.get(0) - (theta / 2.0).cos().powi(2)).abs() < 1e-15);

        let uniform = StateVector::normalized(vec![c(1.0, 0.0); 11]).unwrap();
        let p = born_probabilities(&UnitaryMatrix::identity(11).unwrap(), &uniform).unwrap();
        for &pj in p.probs() {
            assert!((pj - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn born_dimension_mismatch() {
        let id3 = UnitaryMatrix::identity(3).unwrap();
        assert!(born_probabilities(&id3, &StateVector::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn prob_vector_guards() {
        let p = ProbVector::new(vec![0.5, 0.5 + 5e-11]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(ProbVector::new(vec![0.5, 0.6]), Err(Error::ProbabilityDrift(_))));
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn sampling_deterministic_distributions() {
        let mut rng = RngStream::new(3);
        let p0 = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let p1 = ProbVector::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_outcome(&p0, &mut rng), 0);
            assert_eq!(sample_outcome(&p1, &mut rng), 1);
        }
        // One uniform per measurement.
        assert_eq!(rng.position(), 2000);
    }

    #[test]
    fn sampling_fair_coin() {
        let mut rng = RngStream::new(11);
        let p = ProbVector::new(vec![0.5, 0.5]).unwrap();
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample_outcome(&p, &mut rng) == 0).count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn sampling_chi_square() {
        // Critical value of chi^2 with 4 degrees of freedom at significance 0.001.
        const CRIT_DF4: f64 = 18.4668;
        let p = ProbVector::new(vec![0.05, 0.1, 0.2, 0.3, 0.35]).unwrap();
        let mut rng = RngStream::new(2024);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[sample_outcome(&p, &mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(p.probs())
            .map(|(&o, &pi)| {
                let e = pi * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CRIT_DF4, "chi2 = {chi2}");
    }

    #[test]
    fn two_level_examples() {
        let id = two_level_unitary(2, 0, 1, 0.0, 0.0).unwrap();
        assert_eq!(id, UnitaryMatrix::identity(2).unwrap());

        let zero = StateVector::basis(2, 0).unwrap();
        let u = two_level_unitary(2, 0, 1, PI, 0.0).unwrap();
        let out = apply_unitary(&u, &zero).unwrap();
        assert!((out.amps()[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((fidelity(&out, &zero).unwrap() - 1.0).abs() < 1e-15);

        let flip = two_level_unitary(2, 0, 1, 0.0, PI).unwrap();
        let out = apply_unitary(&flip, &zero).unwrap();
        assert!(out.amps()[0].norm() < 1e-15);
        assert!((out.amps()[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn two_level_matches_matrix_exponential() {
        let (d, i, j, alpha, beta) = (3, 0, 2, 0.7, 1.3);
        let mut sz = CMatrix::zeros(d);
        sz.set(i, i, c(0.5, 0.0));
        sz.set(j, j, c(-0.5, 0.0));
        let mut sx = CMatrix::zeros(d);
        sx.set(i, j, c(0.5, 0.0));
        sx.set(j, i, c(0.5, 0.0));
        let ez = sz.scale(c(0.0, -alpha)).expm();
        let ex = sx.scale(c(0.0, -beta)).expm();
        let reference = ez.matmul(&ex);
        let u = two_level_unitary(d, i, j, alpha, beta).unwrap();
        for r in 0..d {
            for col in 0..d {
                assert!((u.get(r, col) - reference.get(r, col)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn two_level_errors() {
        assert!(matches!(two_level_unitary(3, 1, 1, 0.1, 0.1), Err(Error::SameLevel(1))));
        assert!(matches!(
            two_level_unitary(3, 0, 3, 0.1, 0.1),
            Err(Error::IndexOutOfRange { index: 3, dim: 3 })
        ));
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor_gate_apply(1, 1, 2).unwrap(), (1, 0));
        assert_eq!(xor_gate_apply(1, 0, 3).unwrap(), (1, 1));
        assert_eq!(xor_gate_apply(2, 4, 5).unwrap(), (2, 3));
        assert!(xor_gate_apply(5, 0, 5).is_err());
    }

    #[test]
    fn xor_exhaustive_table() {
        for d in 2..=7usize {
            for j in 0..d {
                for k in 0..d {
                    let expected = (j as i64 - k as i64).rem_euclid(d as i64) as usize;
                    let (jj, t) = xor_gate_apply(j, k, d).unwrap();
                    assert_eq!((jj, t), (j, expected));
                    // Involutory, and the target is cleared exactly when j == k.
                    assert_eq!(xor_gate_apply(jj, t, d).unwrap(), (j, k));
                    assert_eq!(t == 0, j == k);
                }
            }
        }
    }

    #[test]
    fn apply_examples() {
        let mut rng = RngStream::new(5);
        let s = random_state(4, &mut rng);
        let out = apply_unitary(&UnitaryMatrix::identity(4).unwrap(), &s).unwrap();
        assert_eq!(out, s);
        assert!(apply_unitary(&UnitaryMatrix::identity(3).unwrap(), &s).is_err());
    }

    #[test]
    fn compose_two_level_matches_dense_product() {
        let mut rng = RngStream::new(17);
        let mut frame = UnitaryMatrix::identity(5).unwrap();
        for step in 0..20 {
            let m = 1 + step % 4;
            let rot = TwoLevelRotation::new(5, 0, m, rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0))
                .unwrap();
            let fast = frame.compose_two_level(&rot).unwrap();
            let dense = frame.matmul(&rot.to_matrix()).unwrap();
            let pre_fast = frame.precompose_two_level(&rot).unwrap();
            let pre_dense = rot.to_matrix().matmul(&frame).unwrap();
            for (a, b) in fast.entries().iter().zip(dense.entries()) {
                assert!((a - b).norm() < 1e-13);
            }
            for (a, b) in pre_fast.entries().iter().zip(pre_dense.entries()) {
                assert!((a - b).norm() < 1e-13);
            }
            frame = fast;
        }
        assert!(frame.unitarity_error() < 1e-12);
    }

    #[test]
    fn unitary_validation() {
        let bad = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(UnitaryMatrix::from_row_major(2, bad), Err(Error::NotUnitary(_))));
        assert!(UnitaryMatrix::from_row_major(2, vec![c(1.0, 0.0); 3]).is_err());
    }

    proptest! {
        #[test]
        fn two_level_is_unitary_and_confined(
            d in 2usize..12,
            i_raw in 0usize..12,
            j_raw in 0usize..12,
            alpha in -13.0f64..13.0,
            beta in -13.0f64..13.0,
        ) {
            let i = i_raw % d;
            let j = (i + 1 + j_raw % (d - 1)) % d;
            let u = two_level_unitary(d, i, j, alpha, beta).unwrap();
            prop_assert!(u.unitarity_error() < 1e-12);
            for l in (0..d).filter(|&l| l != i && l != j) {
                let col = u.column(l);
                for (r, a) in col.iter().enumerate() {
                    let expected = if r == l { 1.0 } else { 0.0 };
                    prop_assert_eq!(*a, C64::new(expected, 0.0));
                }
                for col_idx in 0..d {
                    if col_idx != l {
                        prop_assert_eq!(u.get(l, col_idx), C64::new(0.0, 0.0));
                    }
                }
            }
        }

        #[test]
        fn phase_only_rotation_keeps_fidelity(
            d in 2usize..12,
            j_raw in 1usize..12,
            alpha in -13.0f64..13.0,
        ) {
            let j = 1 + (j_raw - 1) % (d - 1);
            let basis = StateVector::basis(d, 0).unwrap();
            let u = two_level_unitary(d, 0, j, alpha, 0.0).unwrap();
            let out = apply_unitary(&u, &basis).unwrap();
            prop_assert!((fidelity(&out, &basis).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn apply_preserves_norm(seed in any::<u64>(), d in 2usize..12, steps in 1usize..30) {
            let mut rng = RngStream::new(seed);
            let mut u = UnitaryMatrix::identity(d).unwrap();
            for _ in 0..steps {
                let m = 1 + (rng.next_u64() as usize) % (d - 1);
                let rot = TwoLevelRotation::new(d, 0, m, rng.uniform(-7.0, 7.0), rng.uniform(-7.0, 7.0)).unwrap();
                u = u.compose_two_level(&rot).unwrap();
            }
            prop_assert!(u.unitarity_error() < UNITARY_TOL);
            let s = random_state(d, &mut rng);
            let out = apply_unitary(&u, &s).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn p0_is_agent_environment_fidelity(seed in any::<u64>(), d in 2usize..12) {
            let mut rng = RngStream::new(seed);
            let mut frame = UnitaryMatrix::identity(d).unwrap();
            for _ in 0..10 {
                let m = 1 + (rng.next_u64() as usize) % (d - 1);
                let rot = TwoLevelRotation::new(d, 0, m, rng.uniform(-7.0, 7.0), rng.uniform(-7.0, 7.0)).unwrap();
                frame = frame.compose_two_level(&rot).unwrap();
            }
            let env = random_state(d, &mut rng);
            let p = born_probabilities(&frame, &env).unwrap();
            let agent = frame.column_state(0).unwrap();
            prop_assert!((p.get(0) - fidelity(&agent, &env).unwrap()).abs() < 1e-12);
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
