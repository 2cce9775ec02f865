//! Certification functions: the values a quorum of votes certifies.

use thiserror::Error;

use crate::prefix::{is_prefix, longest_supported_prefix, mce, mcp, PrefixError, PrefixVector};

use super::{PcConfig, Qc1, Qc2, Qc3, Qc4, Variant};

/// Certification failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Prefix(#[from] PrefixError),
    #[error("minimum common extension undefined: certified values conflict")]
    MceUndefined,
}

/// `(mcp, mce)` of a set; errors if the set is not pairwise consistent.
pub fn mcp_mce<'a, I>(set: I) -> Result<(PrefixVector, PrefixVector), CertifyError>
where
    I: IntoIterator<Item = &'a PrefixVector> + Clone,
{
    let p = mcp(set.clone())?;
    let e = mce(set)?.ok_or(CertifyError::MceUndefined)?;
    Ok((p, e))
}

/// Values certified by a QC1: `x` (longest prefix with the variant's support)
/// and `y` (mcp of all votes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qc1Cert {
    pub x: PrefixVector,
    pub y: PrefixVector,
}

pub fn qc1_values(values: &[&PrefixVector], support: usize) -> Result<Qc1Cert, CertifyError> {
    let x = longest_supported_prefix(values.iter().copied(), support)?;
    let y = mcp(values.iter().copied())?;
    Ok(Qc1Cert { x, y })
}

/// The value a QC1 vote-2 must carry under `cfg`.
pub fn qc1_certify(qc: &Qc1, cfg: &PcConfig) -> Result<PrefixVector, CertifyError> {
    let c = qc1_values(&qc.values(), cfg.support())?;
    Ok(match cfg.variant {
        Variant::Optimistic => c.y,
        Variant::ThreeRound | Variant::Fast5f1 => c.x,
    })
}

/// `mcp` of the QC2 values (3-round `x_p`; optimistic `y_p`).
pub fn qc2_mcp(qc: &Qc2) -> Result<PrefixVector, CertifyError> {
    Ok(mcp(qc.values())?)
}

/// `(mcp, mce)` of the QC2 values (optimistic `(y_p, y_e)`; final outputs of
/// the 2-round protocol).
pub fn qc2_mcp_mce(qc: &Qc2) -> Result<(PrefixVector, PrefixVector), CertifyError> {
    mcp_mce(qc.values())
}

/// Optimistic round-3 value: `x` if `y_e ⪯ x`, else `y_e`.
pub fn z_select(x: &PrefixVector, y_e: &PrefixVector) -> PrefixVector {
    if is_prefix(y_e, x) {
        x.clone()
    } else {
        y_e.clone()
    }
}

/// Optimistic QC1&2 certification.
pub fn qc12_certify(qc1: &Qc1, qc2: &Qc2, cfg: &PcConfig) -> Result<PrefixVector, CertifyError> {
    let c1 = qc1_values(&qc1.values(), cfg.support())?;
    let (_, y_e) = qc2_mcp_mce(qc2)?;
    Ok(z_select(&c1.x, &y_e))
}

/// 3-round QC3: `(low, high) = (mcp, mce)` of the `x_p` values.
pub fn qc3_low_high(qc: &Qc3) -> Result<(PrefixVector, PrefixVector), CertifyError> {
    mcp_mce(qc.values())
}

/// Optimistic QC3: `z_p = mcp` of the `z` values, and `mce` of them when all
/// are pairwise consistent.
pub fn qc3_opt(qc: &Qc3) -> Result<(PrefixVector, Option<PrefixVector>), CertifyError> {
    let vals = qc.values();
    Ok((mcp(vals.iter().copied())?, mce(vals.iter().copied())?))
}

/// Optimistic QC4: `(mcp, mce)` of the `z_p` values.
pub fn qc4_low_high(qc: &Qc4) -> Result<(PrefixVector, PrefixVector), CertifyError> {
    mcp_mce(qc.values())
}
