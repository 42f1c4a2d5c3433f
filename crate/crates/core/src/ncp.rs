//! Smoothed NCP functions `φ(s, z; μ)` whose zero set is `{s, z ≥ 0, s∘z = μ}`.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NcpError {
    #[error("smoothing parameter must be nonnegative, got {0:e}")]
    NegativeMu(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NcpKind {
    /// `s + z − sqrt((s − z)² + 4μ)`
    #[default]
    SmoothedMin,
    /// `s + z − sqrt(s² + z² + 2μ)`
    FischerBurmeister,
}

/// Value and diagonal Jacobian blocks `C_s = ∂φ/∂s`, `C_z = ∂φ/∂z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NcpEval<T> {
    pub value: Vec<T>,
    pub d_s: Vec<T>,
    pub d_z: Vec<T>,
}

/// Floor on the square-root term before dividing by it.
const DENOM_FLOOR: f64 = 1e-16;

fn check_mu<T: Real>(mu: T) -> Result<(), NcpError> {
    if mu < T::zero() || mu.is_nan() {
        Err(NcpError::NegativeMu(mu.as_f64()))
    } else {
        Ok(())
    }
}

#[inline]
fn point<T: Real>(kind: NcpKind, s: T, z: T, mu: T) -> (T, T, T) {
    let floor = T::lit(DENOM_FLOOR);
    match kind {
        NcpKind::SmoothedMin => {
            let d = s - z;
            let r = (d * d + T::lit(4.0) * mu).sqrt();
            let rc = r.max(floor);
            (s + z - r, T::one() - d / rc, T::one() + d / rc)
        }
        NcpKind::FischerBurmeister => {
            let r = (s * s + z * z + T::lit(2.0) * mu).sqrt();
            let rc = r.max(floor);
            (s + z - r, T::one() - s / rc, T::one() - z / rc)
        }
    }
}

pub fn phi<T: Real>(kind: NcpKind, s: &[T], z: &[T], mu: T) -> Result<NcpEval<T>, NcpError> {
    let mut out = NcpEval { value: vec![T::zero(); s.len()], d_s: vec![T::zero(); s.len()], d_z: vec![T::zero(); s.len()] };
    phi_into(kind, s, z, mu, &mut out)?;
    Ok(out)
}

/// In-place form of [`phi`]; `out` must already have length `s.len()`.
pub fn phi_into<T: Real>(kind: NcpKind, s: &[T], z: &[T], mu: T, out: &mut NcpEval<T>) -> Result<(), NcpError> {
    check_mu(mu)?;
    assert_eq!(s.len(), z.len(), "s and z lengths differ");
    for j in 0..s.len() {
        let (v, ds, dz) = point(kind, s[j], z[j], mu);
        out.value[j] = v;
        out.d_s[j] = ds;
        out.d_z[j] = dz;
    }
    Ok(())
}

/// Values only.
pub fn phi_value<T: Real>(kind: NcpKind, s: &[T], z: &[T], mu: T) -> Result<Vec<T>, NcpError> {
    check_mu(mu)?;
    Ok(s.iter().zip(z).map(|(&a, &b)| point(kind, a, b, mu).0).collect())
}

/// Nonnegative root of `ξ² − (s − w)ξ − μ = 0`.
pub fn xi_closed_form<T: Real>(s: &[T], w: &[T], mu: T) -> Result<Vec<T>, NcpError> {
    check_mu(mu)?;
    let two = T::lit(2.0);
    Ok(s.iter()
        .zip(w)
        .map(|(&a, &b)| {
            let d = a - b;
            let r = (d * d + T::lit(4.0) * mu).sqrt();
            if d >= T::zero() {
                (d + r) / two
            } else {
                // avoids cancellation in d + r
                let den = r - d;
                if den > T::zero() { two * mu / den } else { T::zero() }
            }
        })
        .collect())
}

/// `φ(s, z; μ) + ρ_n(s − s_E) + ρ_n(z − z_E)`
pub fn shifted_residual<T: Real>(
    kind: NcpKind,
    s: &[T],
    z: &[T],
    mu: T,
    rho_n: T,
    s_e: &[T],
    z_e: &[T],
) -> Result<Vec<T>, NcpError> {
    let mut v = phi_value(kind, s, z, mu)?;
    for j in 0..v.len() {
        v[j] += rho_n * (s[j] - s_e[j]) + rho_n * (z[j] - z_e[j]);
    }
    Ok(v)
}
