//! Named invariant subsets of the Wilson cylinder.

use crate::geom::CylPoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `{r = 2}`.
    FullCylinder,
    /// `{r = 2, |z| <= 1}`.
    ReebCylinder,
    /// `{z = 0}`.
    CenterAnnulus,
    /// `{r = 2, z = -1}`.
    LowerOrbit,
    /// `{r = 2, z = 1}`.
    UpperOrbit,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::FullCylinder,
        Region::ReebCylinder,
        Region::CenterAnnulus,
        Region::LowerOrbit,
        Region::UpperOrbit,
    ];

    pub fn contains(&self, p: &CylPoint, tol: f64) -> bool {
        let on_c = (p.r - 2.0).abs() <= tol;
        match self {
            Region::FullCylinder => on_c,
            Region::ReebCylinder => on_c && p.z.abs() <= 1.0 + tol,
            Region::CenterAnnulus => p.z.abs() <= tol,
            Region::LowerOrbit => on_c && (p.z + 1.0).abs() <= tol,
            Region::UpperOrbit => on_c && (p.z - 1.0).abs() <= tol,
        }
    }

    /// The two periodic orbits bound the Reeb cylinder.
    pub fn boundary_of_reeb(p: &CylPoint, tol: f64) -> bool {
        Region::LowerOrbit.contains(p, tol) || Region::UpperOrbit.contains(p, tol)
    }
}
