//! Simultaneous OMP over a gridded angular dictionary.
//!
//! An atom pairs a BS/user angle pair with an RIS composite angle pair. Its
//! measurement at `(q, j)` is `irs_q * joint_j`, so the dictionary is kept
//! as two small response matrices and correlations factor as
//! `D_irs^H R_p conj(D_joint)`. The delay is absorbed into per-subcarrier
//! coefficients sharing one support.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{steering_irs, steering_joint, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{pinv, CMat, C64};
use crate::tensor::ComplexTensor3;
use crate::training::TrainingConfig;

/// Grid sizes for BS angle, user angle and the two RIS composite angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bs: usize,
    pub ue: usize,
    pub irs_y: usize,
    pub irs_z: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { bs: 32, ue: 32, irs_y: 16, irs_z: 16 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if [self.bs, self.ue, self.irs_y, self.irs_z].iter().any(|&g| g < 2) {
            return Err(Error::InvalidParameter(format!("every grid size must be >= 2, got {self:?}")));
        }
        Ok(())
    }

    pub fn atoms(&self) -> usize {
        self.bs * self.ue * self.irs_y * self.irs_z
    }
}

/// Uniform grid on `[-pi, pi)`.
pub fn grid_angles(g: usize) -> Vec<f64> {
    (0..g).map(|i| -PI + 2.0 * PI * i as f64 / g as f64).collect()
}

/// Atom `k = irs * n_joint + joint`, where `irs = gy * G_z + gz` and
/// `joint = gb * G_ue + gu`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub grid: GridSpec,
    geom: ArrayGeometry,
    /// `V^T a_IRS` per RIS grid point, `Q x (G_y G_z)`.
    irs: CMat,
    irs_angles: Vec<(f64, f64)>,
    /// `F^T (conj(a_BS) ⊗ a_UE)` per BS/user grid point, `T Ns x (G_bs G_ue)`.
    joint: CMat,
    joint_angles: Vec<(f64, f64)>,
    irs_norms: Vec<f64>,
    joint_norms: Vec<f64>,
}

/// Angles of a single atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomAngles {
    pub irs_az: f64,
    pub irs_el: f64,
    pub aod: f64,
    pub aoa: f64,
}

pub fn build_dictionary(tc: &TrainingConfig, grid: GridSpec) -> Result<Dictionary> {
    grid.validate()?;
    let irs_angles: Vec<(f64, f64)> =
        grid_angles(grid.irs_y).into_iter().flat_map(|y| grid_angles(grid.irs_z).into_iter().map(move |z| (y, z))).collect();
    let joint_angles: Vec<(f64, f64)> =
        grid_angles(grid.bs).into_iter().flat_map(|b| grid_angles(grid.ue).into_iter().map(move |u| (b, u))).collect();
    let mut irs = CMat::zeros(tc.q, irs_angles.len());
    for (k, &(y, z)) in irs_angles.iter().enumerate() {
        irs.set_column(k, &tc.irs_response(y, z));
    }
    let mut joint = CMat::zeros(tc.tns(), joint_angles.len());
    for (k, &(b, u)) in joint_angles.iter().enumerate() {
        joint.set_column(k, &tc.joint_response(b, u));
    }
    let irs_norms = irs.column_iter().map(|c| c.norm()).collect();
    let joint_norms = joint.column_iter().map(|c| c.norm()).collect();
    Ok(Dictionary { grid, geom: tc.geom.clone(), irs, irs_angles, joint, joint_angles, irs_norms, joint_norms })
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.irs_angles.len() * self.joint_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows of one measurement slice (`Q`) and columns (`T Ns`).
    pub fn slice_shape(&self) -> (usize, usize) {
        (self.irs.nrows(), self.joint.nrows())
    }

    fn split(&self, k: usize) -> (usize, usize) {
        (k / self.joint_angles.len(), k % self.joint_angles.len())
    }

    pub fn angles(&self, k: usize) -> AtomAngles {
        let (i, s) = self.split(k);
        let (irs_az, irs_el) = self.irs_angles[i];
        let (aod, aoa) = self.joint_angles[s];
        AtomAngles { irs_az, irs_el, aod, aoa }
    }

    pub fn atom_norm(&self, k: usize) -> f64 {
        let (i, s) = self.split(k);
        self.irs_norms[i] * self.joint_norms[s]
    }

    /// Measurement slice of atom `k`, `Q x T Ns`.
    pub fn atom_slice(&self, k: usize) -> CMat {
        let (i, s) = self.split(k);
        self.irs.column(i) * self.joint.column(s).transpose()
    }

    /// Atom `k` vectorized column-major (`q + j Q`).
    pub fn atom(&self, k: usize) -> CMat {
        let (q, j) = self.slice_shape();
        CMat::from_column_slice(q * j, 1, self.atom_slice(k).as_slice())
    }

    /// Full `Q T Ns x atoms` matrix; refuses to allocate more than `cap_bytes`.
    pub fn materialize(&self, cap_bytes: usize) -> Result<CMat> {
        let (q, j) = self.slice_shape();
        let bytes = q.saturating_mul(j).saturating_mul(self.len()).saturating_mul(std::mem::size_of::<C64>());
        if bytes > cap_bytes {
            return Err(Error::MemoryCap(format!("dictionary needs {bytes} bytes, cap is {cap_bytes}")));
        }
        let mut out = CMat::zeros(q * j, self.len());
        for k in 0..self.len() {
            out.set_column(k, &self.atom(k).column(0));
        }
        Ok(out)
    }

    /// Cascade-channel term of atom `k` at unit coefficient: `a_S a_IRS^T`.
    pub fn channel_atom(&self, k: usize) -> CMat {
        let a = self.angles(k);
        steering_joint(a.aod, a.aoa, &self.geom) * steering_irs(a.irs_az, a.irs_el, &self.geom).transpose()
    }

    /// Summed normalized correlation magnitude of every atom with the
    /// residual slices, indexed like the atoms.
    fn correlations(&self, residuals: &[CMat]) -> Vec<f64> {
        let (gi, gs) = (self.irs_angles.len(), self.joint_angles.len());
        let mut acc = vec![0.0; gi * gs];
        let joint_conj = self.joint.conjugate();
        let irs_adj = self.irs.adjoint();
        for r in residuals {
            let c = &irs_adj * r * &joint_conj;
            for i in 0..gi {
                for s in 0..gs {
                    acc[i * gs + s] += c[(i, s)].norm();
                }
            }
        }
        for i in 0..gi {
            for s in 0..gs {
                let n = self.irs_norms[i] * self.joint_norms[s];
                acc[i * gs + s] = if n > 0.0 { acc[i * gs + s] / n } else { 0.0 };
            }
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct SompResult {
    pub selected: Vec<usize>,
    pub angles: Vec<AtomAngles>,
    /// `K x P` coefficients, one column per subcarrier.
    pub coefficients: CMat,
    /// Frobenius norm of the stacked residual after each atom; entry 0 is
    /// the measurement norm.
    pub residual_trace: Vec<f64>,
    /// Reconstructed cascade channels for subcarriers `1..=P`.
    pub channels: Vec<CMat>,
}

/// Runs `k` SOMP iterations on the frontal slices of `y`.
pub fn somp_estimate(y: &ComplexTensor3, dict: &Dictionary, k: usize) -> Result<SompResult> {
    let [q, j, p] = y.dims();
    if (q, j) != dict.slice_shape() {
        return Err(Error::Dimension(format!("measurement slices are {q}x{j}, dictionary expects {:?}", dict.slice_shape())));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("sparsity must be >= 1".into()));
    }
    if k > q * j {
        return Err(Error::InvalidParameter(format!("sparsity {k} exceeds the {} measurements per subcarrier", q * j)));
    }
    if k > dict.len() {
        return Err(Error::InvalidParameter(format!("sparsity {k} exceeds the {} dictionary atoms", dict.len())));
    }
    let slices: Vec<CMat> = (0..p).map(|s| y.frontal_slice(s)).collect();
    // stacked measurements, one column per subcarrier
    let ymat = CMat::from_fn(q * j, p, |r, s| slices[s][(r % q, r / q)]);
    let mut residuals = slices.clone();
    let mut trace = vec![ymat.norm()];
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut basis = CMat::zeros(q * j, 0);
    let mut coef = CMat::zeros(0, p);
    for _ in 0..k {
        let corr = dict.correlations(&residuals);
        let best = (0..corr.len())
            .filter(|i| !selected.contains(i))
            .max_by(|&a, &b| corr[a].total_cmp(&corr[b]).then(b.cmp(&a)))
            .expect("k <= number of atoms");
        selected.push(best);
        let n = basis.ncols();
        basis = basis.insert_column(n, C64::from(0.0));
        basis.set_column(n, &dict.atom(best).column(0));
        coef = pinv(&basis, 1e-12) * &ymat;
        let res = &ymat - &basis * &coef;
        for (s, r) in residuals.iter_mut().enumerate() {
            *r = CMat::from_fn(q, j, |a, b| res[(a + b * q, s)]);
        }
        // a least-squares refit on a growing support cannot increase the residual
        let prev = trace[trace.len() - 1];
        trace.push(res.norm().min(prev));
    }
    let atoms: Vec<CMat> = selected.iter().map(|&a| dict.channel_atom(a)).collect();
    let channels = (0..p)
        .map(|s| {
            let mut h = CMat::zeros(atoms[0].nrows(), atoms[0].ncols());
            for (i, a) in atoms.iter().enumerate() {
                h += a * coef[(i, s)];
            }
            h
        })
        .collect();
    Ok(SompResult { angles: selected.iter().map(|&a| dict.angles(a)).collect(), selected, coefficients: coef, residual_trace: trace, channels })
}
