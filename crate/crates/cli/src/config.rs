//! Run configuration: one TOML file with a section per command.

use plugflow::analysis::MeshConfig;
use plugflow::insertion::InsertionSpec;
use plugflow::quotient::flow::Direction;
use plugflow::quotient::{Budgets, PlugSpec, SearchConfig};
use plugflow::wilson::{Tolerances, WilsonProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory.
    pub out: PathBuf,
    pub plug: PlugConfig,
    pub tolerances: Tolerances,
    /// Per-direction budgets of orbit runs and the periodic search.
    pub budgets: Budgets,
    pub validate: ValidateConfig,
    pub orbit: OrbitConfig,
    pub periodic: PeriodicConfig,
    pub m0: M0Config,
    pub minimal: MinimalConfig,
    pub entropy: EntropyConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlugConfig {
    /// Offset of the radius inequality, shared by both insertions.
    pub epsilon: f64,
    pub wilson: WilsonProfile,
    /// Insertion 1 then insertion 2; empty for the Wilson plug alone.
    pub insertions: Vec<InsertionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Samples per face side.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    /// `(r, theta, z)`.
    pub start: [f64; 3],
    pub direction: Direction,
    pub return_tol: f64,
}

/// Seeds run in the fixed order `r`, then `theta`, then `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicConfig {
    pub nr: usize,
    pub ntheta: usize,
    pub nz: usize,
    pub return_tol: f64,
    pub max_refine: usize,
    pub closure_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M0Config {
    pub mesh: MeshConfig,
    /// Growth curve from `ds` to `s_max` in steps of `ds`.
    pub s_max: f64,
    pub ds: f64,
    /// Also write every node and edge; large at the default resolution.
    pub export_mesh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalConfig {
    /// Budgets at which the special orbits are sampled.
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub max_events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    R,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    /// Midpoint `(r, theta, z)` of the seed segment.
    pub center: [f64; 3],
    pub axis: Axis,
    pub half_width: f64,
    pub count: usize,
    pub t_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub dt: f64,
    pub alphas: Vec<f64>,
    pub max_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        RunConfig {
            out: PathBuf::from("out"),
            plug: PlugConfig {
                epsilon: 0.0,
                wilson: WilsonProfile::default(),
                insertions: vec![InsertionSpec::generic(1, 0.0), InsertionSpec::generic(2, 0.0)],
            },
            tolerances: Tolerances::default(),
            budgets: search.budgets,
            validate: ValidateConfig { grid: 200 },
            orbit: OrbitConfig { start: [2.0, std::f64::consts::PI, 0.0], direction: Direction::Both, return_tol: 1e-4 },
            periodic: PeriodicConfig {
                nr: search.nr,
                ntheta: search.ntheta,
                nz: search.nz,
                return_tol: search.return_tol,
                max_refine: search.max_refine,
                closure_tol: search.closure_tol,
            },
            m0: M0Config { mesh: MeshConfig::default(), s_max: 100.0, ds: 0.5, export_mesh: false },
            minimal: MinimalConfig { t_grid: vec![1e3, 5e3, 2e4], dt: 0.1, max_events: 10_000_000 },
            entropy: EntropyConfig {
                center: [2.0, std::f64::consts::PI, 0.0],
                axis: Axis::Z,
                half_width: 1e-3,
                count: 1000,
                t_grid: vec![100.0, 250.0, 500.0],
                eps_grid: vec![0.05, 0.1, 0.2],
                dt: 0.5,
                alphas: vec![0.25, 0.5, 0.75, 1.0],
                max_events: 1_000_000,
            },
            sweep: SweepConfig { epsilons: vec![-0.05, 0.0, 0.05] },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("the config serializes")
    }

    /// SHA-256 of the effective config in TOML form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Insertions carrying the shared offset.
    pub fn insertions(&self, epsilon: f64) -> Vec<InsertionSpec> {
        self.plug.insertions.iter().cloned().map(|mut s| {
            s.epsilon = epsilon;
            s
        }).collect()
    }

    /// The validated plug at offset `epsilon`.
    pub fn spec_at(&self, epsilon: f64) -> plugflow::Result<PlugSpec> {
        PlugSpec::new(self.plug.wilson.clone(), self.insertions(epsilon), self.tolerances, self.budgets)
    }

    pub fn spec(&self) -> plugflow::Result<PlugSpec> {
        self.spec_at(self.plug.epsilon)
    }

    pub fn search_config(&self) -> SearchConfig {
        let p = &self.periodic;
        SearchConfig {
            nr: p.nr,
            ntheta: p.ntheta,
            nz: p.nz,
            return_tol: p.return_tol,
            budgets: self.budgets,
            max_refine: p.max_refine,
            closure_tol: p.closure_tol,
        }
    }

    /// Seeds on the entropy segment, in order along the axis.
    pub fn entropy_seeds(&self) -> Vec<plugflow::CylPoint> {
        let e = &self.entropy;
        let [r, th, z] = e.center;
        (0..e.count)
            .map(|i| {
                let d = -e.half_width + 2.0 * e.half_width * (i as f64 + 0.5) / e.count as f64;
                match e.axis {
                    Axis::R => plugflow::CylPoint::new(r + d, th, z),
                    Axis::Z => plugflow::CylPoint::new(r, th, z + d),
                }
            })
            .collect()
    }
}

/// `NRxNTHETAxNZ`, for example `20x20x10`.
pub fn parse_seed_grid(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || format!("seed grid `{s}` is not NRxNTHETAxNZ");
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: Vec<usize> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    if n.contains(&0) {
        return Err(bad());
    }
    Ok((n[0], n[1], n[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn hash_changes_with_the_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.plug.epsilon = 0.1;
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RunConfig::default().to_toml() + "\nbogus = 1\n";
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn shipped_default_is_the_default() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_mutations_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/mutated");
        let paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        assert_eq!(paths.len(), 6);
        for p in &paths {
            assert!(RunConfig::load(p).is_ok(), "{}", p.display());
        }
    }

    #[test]
    fn seed_grid_flag() {
        assert_eq!(parse_seed_grid("20x20x10").unwrap(), (20, 20, 10));
        assert!(parse_seed_grid("20x20").is_err());
        assert!(parse_seed_grid("0x1x1").is_err());
    }
}
