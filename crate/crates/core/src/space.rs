//! Geometry of real hyperbolic spaces `H^n` (curvature -1) and their products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, unit_rule};
use crate::special::sphere_area;

/// A simple root of one hyperbolic factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    /// Index of the chamber coordinate the root reads off.
    pub direction: usize,
    pub multiplicity: usize,
}

/// A product of real hyperbolic spaces `H^{n_1} x ... x H^{n_l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDescriptor", into = "SpaceDescriptor")]
pub struct SpaceModel {
    factors: Vec<usize>,
    rho: Vec<f64>,
    rho_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct SpaceDescriptor {
    factors: Vec<usize>,
}

impl TryFrom<SpaceDescriptor> for SpaceModel {
    type Error = Error;
    fn try_from(d: SpaceDescriptor) -> Result<Self> {
        SpaceModel::product(&d.factors)
    }
}

impl From<SpaceModel> for SpaceDescriptor {
    fn from(s: SpaceModel) -> Self {
        SpaceDescriptor { factors: s.factors }
    }
}

impl SpaceModel {
    /// Rank-one space `H^n`.
    pub fn hyperbolic(n: usize) -> Result<Self> {
        Self::product(&[n])
    }

    pub fn product(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("no factors given".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSpace(format!(
                "factor dimension {d} is below 2"
            )));
        }
        let rho: Vec<f64> = dims.iter().map(|&d| (d as f64 - 1.0) / 2.0).collect();
        let rho_norm = rho.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(Self {
            factors: dims.to_vec(),
            rho,
            rho_norm,
        })
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().sum()
    }

    pub fn roots(&self) -> Vec<Root> {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, &d)| Root {
                direction: i,
                multiplicity: d - 1,
            })
            .collect()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_norm(&self) -> f64 {
        self.rho_norm
    }

    /// Number of indivisible positive roots (hyperbolic factors have no `2α`).
    pub fn num_indivisible(&self) -> usize {
        self.rank()
    }

    /// `ν = l + 2 |Σ₀⁺|`.
    pub fn pseudo_dim(&self) -> usize {
        self.rank() + 2 * self.num_indivisible()
    }

    pub fn weyl_order(&self) -> usize {
        1 << self.rank()
    }

    /// Product of the unit-sphere areas of the factors.
    pub fn angular_factor(&self) -> f64 {
        self.factors.iter().map(|&d| sphere_area(d)).product()
    }

    pub fn check_point(&self, h: &ChamberPoint) -> Result<()> {
        if h.0.len() != self.rank() {
            return Err(Error::OutsideChamber(format!(
                "expected {} coordinates, got {}",
                self.rank(),
                h.0.len()
            )));
        }
        Ok(())
    }

    /// `J(H) = ∏ sinh^{n_i - 1}(r_i)`.
    pub fn polar_density(&self, h: &ChamberPoint) -> Result<f64> {
        self.check_point(h)?;
        Ok(self
            .factors
            .iter()
            .zip(h.coords())
            .map(|(&d, &r)| r.sinh().powi(d as i32 - 1))
            .product())
    }

    /// Riemannian distance `|H|` and polyhedral distance `<ρ, H>/|ρ|`.
    pub fn distances(&self, h: &ChamberPoint) -> Result<Distances> {
        self.check_point(h)?;
        let riemannian = h.norm();
        let polyhedral = if self.rho_norm > 0.0 {
            self.rho
                .iter()
                .zip(h.coords())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / self.rho_norm
        } else {
            riemannian
        };
        Ok(Distances {
            riemannian,
            polyhedral,
        })
    }

    /// Density of the volume measure in the Riemannian distance `R = |x|`:
    /// the polar density integrated over the chamber sphere `|H| = R`,
    /// times the angular factor.
    pub fn shell_density(&self, radius: f64) -> f64 {
        if radius <= 0.0 {
            return 0.0;
        }
        if self.rank() == 1 {
            let d = self.factors[0];
            return sphere_area(d) * radius.sinh().powi(d as i32 - 1);
        }
        self.angular_factor() * radius.powi(self.rank() as i32 - 1) * self.chamber_sphere_integral(radius)
    }

    /// `∫ J(R θ) dθ` over the unit sphere intersected with the positive orthant,
    /// in hyperspherical coordinates with every angle in `[0, π/2]`.
    fn chamber_sphere_integral(&self, radius: f64) -> f64 {
        let l = self.rank();
        let nodes = 24usize.max(4 * (radius.ceil() as usize));
        let rule = unit_rule(nodes);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut total = 0.0;
        let mut idx = vec![0usize; l - 1];
        loop {
            let mut weight = 1.0;
            let mut coords = Vec::with_capacity(l);
            let mut sin_prod = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                let theta = half_pi * rule.nodes[i];
                weight *= half_pi * rule.weights[i] * theta.sin().powi((l - 2 - k) as i32);
                coords.push(radius * sin_prod * theta.cos());
                sin_prod *= theta.sin();
            }
            coords.push(radius * sin_prod);
            let dens: f64 = self
                .factors
                .iter()
                .zip(&coords)
                .map(|(&d, &r)| r.sinh().powi(d as i32 - 1))
                .product();
            total += weight * dens;
            // odometer over the angle multi-index
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < nodes {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Volume of the geodesic ball of Riemannian radius `radius`.
    pub fn ball_volume(&self, radius: f64) -> Result<f64> {
        if !(radius >= 0.0) {
            return Err(crate::error::invalid("radius", "must be nonnegative"));
        }
        if radius == 0.0 {
            return Ok(0.0);
        }
        let panels = (radius / 0.25).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (0..=panels)
            .map(|k| radius * k as f64 / panels as f64)
            .collect();
        Ok(integrate_panels(&breaks, 16, |r| self.shell_density(r)))
    }

    /// Direction `ρ/|ρ|` in chamber coordinates.
    pub fn rho_direction(&self) -> Vec<f64> {
        self.rho.iter().map(|x| x / self.rho_norm).collect()
    }
}

/// Riemannian and polyhedral distance from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    pub riemannian: f64,
    pub polyhedral: f64,
}

/// A point `H = (r_1, ..., r_l)` of the closed positive chamber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamberPoint(Vec<f64>);

impl ChamberPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::OutsideChamber("no coordinates".into()));
        }
        if let Some(x) = coords.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::OutsideChamber(format!(
                "coordinate {x} is negative or not a number"
            )));
        }
        Ok(Self(coords))
    }

    pub fn radial(r: f64) -> Result<Self> {
        Self::new(vec![r])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn h3_root_data() {
        let s = SpaceModel::hyperbolic(3).unwrap();
        assert_eq!(s.rho_norm(), 1.0);
        assert_eq!(s.pseudo_dim(), 3);
        assert_eq!(s.weyl_order(), 2);
        assert_eq!(s.roots()[0].multiplicity, 2);
    }

    #[test]
    fn h2_rho() {
        let s = SpaceModel::hyperbolic(2).unwrap();
        assert_eq!(s.rho_norm(), 0.5);
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn rejects_small_factors() {
        assert!(SpaceModel::hyperbolic(1).is_err());
        assert!(SpaceModel::product(&[]).is_err());
        assert!(SpaceModel::product(&[3, 1]).is_err());
    }

    #[test]
    fn product_data() {
        let s = SpaceModel::product(&[3, 3]).unwrap();
        assert_eq!((s.rank(), s.dim()), (2, 6));
        assert_relative_eq!(s.rho_norm(), 2f64.sqrt());
        let t = SpaceModel::product(&[2, 3, 3]).unwrap();
        assert_eq!((t.rank(), t.dim(), t.pseudo_dim()), (3, 8, 9));
        assert_eq!(SpaceModel::product(&[3]).unwrap(), SpaceModel::hyperbolic(3).unwrap());
    }

    #[test]
    fn density_values() {
        let s = SpaceModel::hyperbolic(3).unwrap();
        let at = |r| s.polar_density(&ChamberPoint::radial(r).unwrap()).unwrap();
        assert_eq!(at(0.0), 0.0);
        assert_relative_eq!(at(1.0), 1f64.sinh().powi(2));
        let p = SpaceModel::product(&[3, 3]).unwrap();
        let v = p.polar_density(&ChamberPoint::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_relative_eq!(v, 1f64.sinh().powi(4), max_relative = 1e-15);
    }

    #[test]
    fn distances_on_product() {
        let p = SpaceModel::product(&[3, 3]).unwrap();
        let d = p.distances(&ChamberPoint::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(d.riemannian, 1.0);
        assert_relative_eq!(d.polyhedral, 1.0 / 2f64.sqrt(), max_relative = 1e-15);
        let z = p.distances(&ChamberPoint::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!((z.riemannian, z.polyhedral), (0.0, 0.0));
    }

    #[test]
    fn rejects_negative_coordinates() {
        assert!(ChamberPoint::new(vec![1.0, -0.1]).is_err());
        let s = SpaceModel::product(&[3, 3]).unwrap();
        assert!(s.polar_density(&ChamberPoint::radial(1.0).unwrap()).is_err());
    }

    #[test]
    fn h3_ball_volume_closed_form() {
        let s = SpaceModel::hyperbolic(3).unwrap();
        assert_eq!(s.ball_volume(0.0).unwrap(), 0.0);
        // 4π ∫_0^1 sinh^2 = π (sinh 2 - 2)
        assert_relative_eq!(
            s.ball_volume(1.0).unwrap(),
            PI * (2f64.sinh() - 2.0),
            max_relative = 1e-13
        );
    }

    #[test]
    fn product_shell_density_matches_direct_polar_integral() {
        // For [3,3], vol{|H| <= R} = (4π)^2 ∫_0^R sinh^2 x (sinh(2T)/4 - T/2) dx with
        // T = sqrt(R^2 - x^2); substitute x = R sin φ to keep the integrand smooth.
        let s = SpaceModel::product(&[3, 3]).unwrap();
        let r = 1.3;
        let direct = 16.0 * PI * PI
            * integrate_panels(&[0.0, 0.5, 1.0, PI / 2.0], 24, |phi| {
                let x = r * phi.sin();
                let t = r * phi.cos();
                x.sinh().powi(2) * ((2.0 * t).sinh() / 4.0 - t / 2.0) * r * phi.cos()
            });
        assert_relative_eq!(s.ball_volume(r).unwrap(), direct, max_relative = 1e-9);
    }

    #[test]
    fn json_descriptor_round_trip() {
        let s: SpaceModel = serde_json::from_str(r#"{"factors":[3,3]}"#).unwrap();
        assert_eq!(s.rank(), 2);
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"factors":[3,3]}"#);
        assert!(serde_json::from_str::<SpaceModel>(r#"{"factors":[1]}"#).is_err());
    }
}
