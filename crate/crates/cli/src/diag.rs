//! KL asymmetry grids over a range of standard deviations.

use std::path::Path;
use std::str::FromStr;

use rl_lab_core::gaussian::{kl_asymmetry, DiagGaussian};

use crate::error::{runtime, usage, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(usage(format!("unknown spacing '{other}' (expected linear|log)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub grid: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub sigma1: f64,
    pub sigma2: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub abs_diff: f64,
}

pub const GRID_HEADER: [&str; 5] = ["sigma1", "sigma2", "kl_pq", "kl_qp", "abs_diff"];

impl GridSpec {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(usage("means must be finite"));
        }
        if !(self.sigma_min > 0.0 && self.sigma_max.is_finite() && self.sigma_min < self.sigma_max) {
            return Err(usage(format!(
                "sigma range must satisfy 0 < min < max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.grid < 2 {
            return Err(usage(format!("grid must be >= 2, got {}", self.grid)));
        }
        Ok(())
    }

    /// Grid points, endpoints included exactly.
    pub fn sigmas(&self) -> Vec<f64> {
        let n = self.grid;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.sigma_min;
                }
                if i == n - 1 {
                    return self.sigma_max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.sigma_min + t * (self.sigma_max - self.sigma_min),
                    Spacing::Log => (self.sigma_min.ln() + t * (self.sigma_max / self.sigma_min).ln()).exp(),
                }
            })
            .collect()
    }

    /// Row-major cells, σ1 outer and σ2 inner.
    pub fn cells(&self) -> CliResult<Vec<GridCell>> {
        self.validate()?;
        let sigmas = self.sigmas();
        let mut out = Vec::with_capacity(sigmas.len() * sigmas.len());
        for &s1 in &sigmas {
            for &s2 in &sigmas {
                let p = DiagGaussian::scalar(self.mu1, s1).map_err(|e| usage(e.to_string()))?;
                let q = DiagGaussian::scalar(self.mu2, s2).map_err(|e| usage(e.to_string()))?;
                let kl = kl_asymmetry(&p, &q).map_err(|e| runtime(e.to_string()))?;
                out.push(GridCell {
                    sigma1: s1,
                    sigma2: s2,
                    kl_pq: kl.forward,
                    kl_qp: kl.reverse,
                    abs_diff: kl.asymmetry.abs(),
                });
            }
        }
        Ok(out)
    }
}

pub fn write_grid(path: &Path, cells: &[GridCell]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(GRID_HEADER)?;
    for c in cells {
        w.write_record([c.sigma1, c.sigma2, c.kl_pq, c.kl_qp, c.abs_diff].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mu2: f64, grid: usize, spacing: Spacing) -> GridSpec {
        GridSpec {
            mu1: 1.0,
            mu2,
            sigma_min: 0.01,
            sigma_max: 10.0,
            grid,
            spacing,
        }
    }

    #[test]
    fn diagonal_is_symmetric() {
        for spacing in [Spacing::Linear, Spacing::Log] {
            for mu2 in [1.0, 2.0] {
                let cells = spec(mu2, 7, spacing).cells().unwrap();
                for c in cells.iter().filter(|c| c.sigma1 == c.sigma2) {
                    assert_eq!(c.abs_diff, 0.0);
                }
            }
        }
    }

    #[test]
    fn small_grid_has_four_cells() {
        let cells = spec(2.0, 2, Spacing::Linear).cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].sigma1, 0.01);
        assert_eq!(cells[3].sigma2, 10.0);
    }

    #[test]
    fn wide_range_reaches_four_orders() {
        let cells = spec(2.0, 50, Spacing::Log).cells().unwrap();
        let max = cells.iter().map(|c| c.abs_diff).fold(0.0, f64::max);
        assert!(max >= 1e4, "{max}");
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let mut s = spec(2.0, 5, Spacing::Log);
        s.sigma_min = 0.0;
        assert!(s.cells().is_err());
        let mut s = spec(2.0, 5, Spacing::Log);
        s.sigma_max = 0.001;
        assert!(s.cells().is_err());
        assert!(spec(2.0, 1, Spacing::Log).cells().is_err());
    }
}
