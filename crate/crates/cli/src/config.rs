//! Run configuration: one TOML file, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use dtnwave::greenfn::GreenCutoffs;
use dtnwave::pdo::Absorber;
use dtnwave::rays::Hamiltonian;
use dtnwave::{AnalyticProfile, DepthProfile, GriddedDepth};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Depth data loaded from disk. A `sidecar` selects the raw float64 format;
/// without one the file is read as `x,y,depth` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<PathBuf>,
    /// Far-field depth for CSV data; defaults to the mean of the boundary ring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    File(GridFile),
    Analytic(AnalyticProfile),
}

/// Periodic box `[-X, X)²` with `n` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width: 5.5,
            n: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub center: [f64; 2],
    /// Relative half-width of the momentum annulus carrying the amplitude.
    pub support: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            center: [0.0, 0.0],
            support: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffSpec {
    pub band: f64,
    pub travel_widths: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        let c = GreenCutoffs::default();
        CutoffSpec {
            band: c.band,
            travel_widths: c.travel_widths,
        }
    }
}

impl CutoffSpec {
    pub fn cutoffs(&self) -> GreenCutoffs {
        GreenCutoffs {
            band: self.band,
            travel_widths: self.travel_widths,
        }
    }
}

/// Absorbing layer from sup-norm distance `start` out to the box edge;
/// `strength = 0` disables it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorberSpec {
    pub start: f64,
    pub strength: f64,
}

impl Default for AbsorberSpec {
    fn default() -> Self {
        AbsorberSpec {
            start: 3.5,
            strength: 3.0,
        }
    }
}

impl AbsorberSpec {
    pub fn absorber(&self) -> Option<Absorber> {
        (self.strength > 0.0).then_some(Absorber {
            start: self.start,
            strength: self.strength,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionSpec {
    pub depths: Vec<f64>,
    /// Log-spaced energies between the two ends, inclusive.
    pub energy_range: [f64; 2],
    pub energy_count: usize,
    pub rho_max: f64,
    pub rho_count: usize,
}

impl Default for DispersionSpec {
    fn default() -> Self {
        DispersionSpec {
            depths: vec![1.0],
            energy_range: [0.1, 10.0],
            energy_count: 21,
            rho_max: 5.0,
            rho_count: 51,
        }
    }
}

impl DispersionSpec {
    pub fn energies(&self) -> Vec<f64> {
        let [lo, hi] = self.energy_range;
        if self.energy_count == 1 {
            return vec![lo];
        }
        let (a, b) = (lo.log10(), hi.log10());
        (0..self.energy_count)
            .map(|k| {
                let u = k as f64 / (self.energy_count - 1) as f64;
                10f64.powf(a + (b - a) * u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripSpec {
    /// Half-width of the 1-D box, shared by the residual study and the
    /// dense DtN assembly.
    pub half_width: f64,
    /// Nodes of the dense DtN assembly, at most 128.
    pub n: usize,
    pub nz: usize,
    /// Semiclassical parameter of the dense assembly and sample solve.
    pub h: f64,
    /// Highest Fourier mode in the adjointness basis.
    pub max_mode: usize,
    pub tolerance: f64,
}

impl Default for StripSpec {
    fn default() -> Self {
        StripSpec {
            half_width: 14.0,
            n: 64,
            nz: 48,
            h: 0.5,
            max_mode: 6,
            tolerance: 5e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayKind {
    L0,
    Finsler,
    Schrodinger,
}

impl RayKind {
    pub fn hamiltonian(self, energy: f64) -> Hamiltonian {
        match self {
            RayKind::L0 => Hamiltonian::L0,
            RayKind::Finsler => Hamiltonian::Finsler { energy },
            RayKind::Schrodinger => Hamiltonian::Schrodinger { energy },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaySpec {
    pub hamiltonian: RayKind,
    pub n_angles: usize,
    pub t_max: f64,
    pub dt: f64,
    pub stride: usize,
}

impl Default for RaySpec {
    fn default() -> Self {
        RaySpec {
            hamiltonian: RayKind::Finsler,
            n_angles: 64,
            t_max: 10.0,
            dt: 1e-2,
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenSpec {
    /// Complex calibration constant `[re, im]` of the flow-out term.
    pub calibration: [f64; 2],
    pub n_angles: usize,
    pub dt: f64,
}

impl Default for GreenSpec {
    fn default() -> Self {
        GreenSpec {
            calibration: [0.0, 1.0],
            n_angles: 512,
            dt: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSpec {
    pub dim: usize,
    pub weight_exponent: f64,
}

impl Default for ScatterSpec {
    fn default() -> Self {
        ScatterSpec {
            dim: 1,
            weight_exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub energy: f64,
    pub h: f64,
    /// Decreasing semiclassical parameters for the convergence studies.
    pub h_list: Vec<f64>,
    /// Decreasing absorption schedule; defaults to `{4, 2, 1, 0.5}·h²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_schedule: Option<Vec<f64>>,
    pub output: PathBuf,
    pub seed: u64,
    pub profile: ProfileSpec,
    pub grid: GridSpec,
    pub source: SourceSpec,
    pub cutoffs: CutoffSpec,
    pub absorber: AbsorberSpec,
    pub dispersion: DispersionSpec,
    pub strip: StripSpec,
    pub rays: RaySpec,
    pub green: GreenSpec,
    pub scatter: ScatterSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            energy: 1.0,
            h: 0.05,
            h_list: vec![0.4, 0.2, 0.1],
            epsilon_schedule: None,
            output: PathBuf::from("dtnwave-out"),
            seed: 7,
            profile: ProfileSpec::Analytic(AnalyticProfile::Constant { d0: 1.0 }),
            grid: GridSpec::default(),
            source: SourceSpec::default(),
            cutoffs: CutoffSpec::default(),
            absorber: AbsorberSpec::default(),
            dispersion: DispersionSpec::default(),
            strip: StripSpec::default(),
            rays: RaySpec::default(),
            green: GreenSpec::default(),
            scatter: ScatterSpec::default(),
        }
    }
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(what()))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    require(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))
}

fn decreasing(name: &str, v: &[f64], min_len: usize) -> Result<(), CliError> {
    require(v.len() >= min_len, || format!("{name} needs at least {min_len} entries"))?;
    for x in v {
        positive(name, *x)?;
    }
    require(v.windows(2).all(|w| w[1] < w[0]), || format!("{name} must be strictly decreasing"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize to TOML")
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilon_schedule
            .clone()
            .unwrap_or_else(|| [4.0, 2.0, 1.0, 0.5].iter().map(|k| k * self.h * self.h).collect())
    }

    /// Checks ranges and referenced files; nothing is written before this passes.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("energy", self.energy)?;
        positive("h", self.h)?;
        decreasing("h_list", &self.h_list, 2)?;
        decreasing("epsilon_schedule", &self.epsilons(), 2)?;
        require(!self.output.as_os_str().is_empty(), || "output directory is empty".into())?;

        let g = &self.grid;
        positive("grid.half_width", g.half_width)?;
        require(g.n.is_power_of_two() && g.n >= 8, || format!("grid.n must be a power of two >= 8, got {}", g.n))?;

        require(self.source.support > 0.0 && self.source.support < 1.0, || {
            format!("source.support must lie in (0, 1), got {}", self.source.support)
        })?;
        for c in self.source.center {
            require(c.is_finite(), || "source.center must be finite".into())?;
        }
        positive("cutoffs.band", self.cutoffs.band)?;
        positive("cutoffs.travel_widths", self.cutoffs.travel_widths)?;
        require(self.absorber.start > 0.0 && self.absorber.start < g.half_width, || {
            format!("absorber.start must lie in (0, grid.half_width), got {}", self.absorber.start)
        })?;
        require(self.absorber.strength >= 0.0, || "absorber.strength must be non-negative".into())?;

        let d = &self.dispersion;
        require(!d.depths.is_empty(), || "dispersion.depths is empty".into())?;
        for x in &d.depths {
            positive("dispersion.depths", *x)?;
        }
        positive("dispersion.energy_range", d.energy_range[0])?;
        require(d.energy_range[1] >= d.energy_range[0], || "dispersion.energy_range must be increasing".into())?;
        require(d.energy_count >= 1, || "dispersion.energy_count must be at least 1".into())?;
        positive("dispersion.rho_max", d.rho_max)?;
        require(d.rho_count >= 2, || "dispersion.rho_count must be at least 2".into())?;

        let st = &self.strip;
        positive("strip.half_width", st.half_width)?;
        positive("strip.h", st.h)?;
        require((8..=128).contains(&st.n), || format!("strip.n must lie in 8..=128, got {}", st.n))?;
        require(st.nz >= 8, || format!("strip.nz must be at least 8, got {}", st.nz))?;
        require(st.max_mode >= 1 && 2 * st.max_mode < st.n, || {
            format!("strip.max_mode must lie in 1..{}, got {}", st.n / 2, st.max_mode)
        })?;
        positive("strip.tolerance", self.strip.tolerance)?;

        let r = &self.rays;
        require(r.n_angles >= 16, || format!("rays.n_angles must be at least 16, got {}", r.n_angles))?;
        positive("rays.t_max", r.t_max)?;
        positive("rays.dt", r.dt)?;
        require(r.stride >= 1, || "rays.stride must be at least 1".into())?;

        require(self.green.n_angles >= 16, || "green.n_angles must be at least 16".into())?;
        positive("green.dt", self.green.dt)?;
        for c in self.green.calibration {
            require(c.is_finite(), || "green.calibration must be finite".into())?;
        }

        require(matches!(self.scatter.dim, 1 | 2), || "scatter.dim must be 1 or 2".into())?;
        require(self.scatter.weight_exponent > 0.5, || "scatter.weight_exponent must exceed 1/2".into())?;

        self.profile_inputs()?;
        Ok(())
    }

    /// Files the profile is read from, checked for existence.
    pub fn profile_inputs(&self) -> Result<Vec<PathBuf>, CliError> {
        let ProfileSpec::File(grid) = &self.profile else {
            return Ok(Vec::new());
        };
        let mut files = vec![grid.file.clone()];
        files.extend(grid.sidecar.clone());
        for f in &files {
            require(f.is_file(), || format!("profile file {} does not exist", f.display()))?;
        }
        Ok(files)
    }

    pub fn load_profile(&self) -> Result<DepthProfile, CliError> {
        let loaded = match &self.profile {
            ProfileSpec::Analytic(spec) => DepthProfile::analytic(spec.clone()),
            ProfileSpec::File(g) => {
                let grid = match &g.sidecar {
                    Some(sidecar) => GriddedDepth::from_raw(&g.file, sidecar),
                    None => GriddedDepth::from_csv(&g.file, g.d0),
                };
                grid.and_then(DepthProfile::gridded)
            }
        };
        loaded.map_err(|e| CliError::Config(format!("profile: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("h = 0.2\n[grid]\nn = 64\n").unwrap();
        assert_eq!(c.h, 0.2);
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.strip.nz, 48);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("hh = 0.2\n").is_err());
    }

    #[test]
    fn default_energies_hit_one() {
        assert!(DispersionSpec::default().energies().contains(&1.0));
    }

    #[test]
    fn bad_ranges_fail_validation() {
        let c = RunConfig {
            h_list: vec![0.1, 0.2],
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.grid.n = 100;
        assert!(c.validate().is_err());
    }
}
