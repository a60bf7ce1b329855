//! Surface reflectance: a Lambertian base blended with a GGX specular lobe.
//!
//! `f = (1 - metallic) * albedo / π + metallic * D G F / (4 cosθi cosθo)`
//! with `α = roughness²`, Smith-GGX shadowing and Schlick Fresnel using the
//! albedo as `F0`. At `metallic = 0` the material is exactly Lambertian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::sampling::{cosine_hemisphere, Frame};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub albedo: [f64; 3],
    #[serde(default)]
    pub metallic: f64,
    #[serde(default = "default_roughness")]
    pub roughness: f64,
}

fn default_roughness() -> f64 {
    1.0
}

impl Default for Material {
    fn default() -> Self {
        Self::lambertian([0.5; 3])
    }
}

impl Material {
    pub fn lambertian(albedo: [f64; 3]) -> Self {
        Self {
            albedo,
            metallic: 0.0,
            roughness: 1.0,
        }
    }

    pub fn metal(albedo: [f64; 3], roughness: f64) -> Self {
        Self {
            albedo,
            metallic: 1.0,
            roughness,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.albedo.iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(format!("albedo {:?} outside [0, 1]", self.albedo));
        }
        if !(0.0..=1.0).contains(&self.metallic) {
            return Err(format!("metallic {} outside [0, 1]", self.metallic));
        }
        if !(self.roughness > 0.0 && self.roughness <= 1.0) {
            return Err(format!("roughness {} outside (0, 1]", self.roughness));
        }
        Ok(())
    }

    #[inline]
    fn alpha2(&self) -> f64 {
        let a = (self.roughness * self.roughness).max(1e-4);
        a * a
    }

    fn ggx_d(&self, cos_h: f64) -> f64 {
        let a2 = self.alpha2();
        let d = cos_h * cos_h * (a2 - 1.0) + 1.0;
        a2 / (PI * d * d)
    }

    fn smith_g1(&self, cos: f64) -> f64 {
        let a2 = self.alpha2();
        2.0 * cos / (cos + (a2 + (1.0 - a2) * cos * cos).sqrt())
    }

    /// BRDF value for unit vectors pointing away from the surface.
    pub fn eval(&self, n: &Vec3, wo: &Vec3, wi: &Vec3) -> [f64; 3] {
        let (cos_o, cos_i) = (n.dot(wo), n.dot(wi));
        if cos_o <= 0.0 || cos_i <= 0.0 {
            return [0.0; 3];
        }
        let kd = (1.0 - self.metallic) / PI;
        let mut f = self.albedo.map(|a| a * kd);
        if self.metallic > 0.0 {
            let h = (wo + wi).normalize();
            let d = self.ggx_d(n.dot(&h).max(0.0));
            let g = self.smith_g1(cos_o) * self.smith_g1(cos_i);
            let schlick = (1.0 - wi.dot(&h).clamp(0.0, 1.0)).powi(5);
            let spec = self.metallic * d * g / (4.0 * cos_o * cos_i);
            for (c, a) in f.iter_mut().zip(self.albedo) {
                *c += spec * (a + (1.0 - a) * schlick);
            }
        }
        f
    }

    /// Density of [`Material::sample`] with respect to solid angle.
    pub fn pdf(&self, n: &Vec3, wo: &Vec3, wi: &Vec3) -> f64 {
        let cos_i = n.dot(wi);
        if cos_i <= 0.0 || n.dot(wo) <= 0.0 {
            return 0.0;
        }
        let mut pdf = (1.0 - self.metallic) * cos_i / PI;
        if self.metallic > 0.0 {
            let h = (wo + wi).normalize();
            let cos_h = n.dot(&h).max(0.0);
            let wo_h = wo.dot(&h).abs().max(1e-12);
            pdf += self.metallic * self.ggx_d(cos_h) * cos_h / (4.0 * wo_h);
        }
        pdf
    }

    /// Samples an incident direction. Returns `(wi, f cosθ / pdf)`, or
    /// `None` when the sample falls below the surface.
    pub fn sample(&self, n: &Vec3, wo: &Vec3, u: [f64; 3]) -> Option<(Vec3, [f64; 3])> {
        let frame = Frame::new(n);
        let wi = if u[0] < self.metallic {
            let a2 = self.alpha2();
            let cos2 = (1.0 - u[1]) / (1.0 + (a2 - 1.0) * u[1]);
            let (cos_t, sin_t) = (cos2.sqrt(), (1.0 - cos2).max(0.0).sqrt());
            let phi = 2.0 * PI * u[2];
            let h = frame.to_world(&Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t));
            2.0 * wo.dot(&h) * h - wo
        } else {
            frame.to_world(&cosine_hemisphere(u[1], u[2]))
        };
        let cos_i = n.dot(&wi);
        if cos_i <= 0.0 {
            return None;
        }
        if self.metallic == 0.0 {
            // f cos / pdf reduces to the albedo exactly.
            return Some((wi, self.albedo));
        }
        let pdf = self.pdf(n, wo, &wi);
        if pdf <= 0.0 {
            return None;
        }
        let f = self.eval(n, wo, &wi);
        Some((wi, f.map(|v| v * cos_i / pdf)))
    }
}
