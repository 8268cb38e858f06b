//! RIS phase design on the unit-modulus manifold.

use super::manifold::{ascend, AscentResult, ManifoldOptions};
use crate::channel::{irs_pair_scale, steering_irs, ArrayGeometry, CompositePath};
use crate::error::{Error, Result};
use crate::linalg::{unit_modulus, CMat, CVec, C64};

/// RIS array gain `v^H a_IRS(az, el) / sqrt(M)` on a composite path.
pub fn passive_gain(v: &CVec, az: f64, el: f64, geom: &ArrayGeometry) -> C64 {
    v.dotc(&steering_irs(az, el, geom)) * irs_pair_scale(geom)
}

/// Maximizes `sum_i log2(1 + rho |rho_i|^2 |v^H a_i|^2 / (Ns sigma2 M))` over
/// unit-modulus `v`, with `Ns` the number of selected paths. Starts from the
/// phases of the gain-weighted sum of the selected steering vectors.
pub fn optimize_passive(
    selected: &[CompositePath],
    geom: &ArrayGeometry,
    rho: f64,
    sigma2: f64,
    opts: &ManifoldOptions,
) -> Result<(CVec, AscentResult)> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter("no paths selected".into()));
    }
    let m = geom.m();
    let ns = selected.len() as f64;
    let atoms: Vec<CVec> = selected.iter().map(|p| steering_irs(p.irs_az, p.irs_el, geom)).collect();
    let weights: Vec<f64> = selected.iter().map(|p| rho * p.gain.norm_sqr() / (ns * sigma2 * m as f64)).collect();

    let mut init = CVec::zeros(m);
    for (a, w) in atoms.iter().zip(&weights) {
        init += a * C64::from(w.sqrt());
    }
    let v0 = CMat::from_fn(m, 1, |i, _| unit_modulus(init[i]));

    let f = |v: &CMat| -> f64 {
        let v = v.column(0);
        atoms.iter().zip(&weights).map(|(a, w)| (1.0 + w * v.dotc(a).norm_sqr()).log2()).sum()
    };
    let grad = |v: &CMat| -> CMat {
        let vc = v.column(0);
        let mut g = CMat::zeros(m, 1);
        for (a, w) in atoms.iter().zip(&weights) {
            let s = a.dotc(&vc); // a^H v
            let k = 2.0 * w / ((1.0 + w * s.norm_sqr()) * std::f64::consts::LN_2);
            for i in 0..m {
                g[(i, 0)] += a[i] * s * k;
            }
        }
        g
    };
    let res = ascend(&v0, f, grad, opts);
    let v = res.x.column(0).into_owned();
    Ok((v, res))
}
