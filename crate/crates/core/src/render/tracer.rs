use rayon::prelude::*;

use super::sampling::{SampleRng, PATTERN_STREAM};
use super::{AreaLight, Material, ProjectorLight, RenderSettings};
use crate::geometry::{Bvh, PinholeModel, Ray, Vec3};
use crate::raster::{luminance, Raster};

/// Offset along the normal for rays spawned at a surface, meters.
pub(crate) const RAY_OFFSET: f64 = 1e-7;

pub(crate) struct Lighting<'a> {
    pub ambient: [f64; 3],
    pub area_lights: &'a [AreaLight],
}

/// Bilinear lookup with pixel centres at integer coordinates; coordinates
/// beyond the outermost centres clamp to the border pixels.
pub fn sample_bilinear(img: &Raster<f32>, u: f64, v: f64) -> f64 {
    let (w, h) = img.dimensions();
    let x = u.clamp(0.0, (w - 1) as f64);
    let y = v.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as u32, y.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let p = |x, y| *img.get(x, y) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[inline]
fn madd(acc: &mut [f64; 3], a: [f64; 3], b: [f64; 3]) {
    for c in 0..3 {
        acc[c] += a[c] * b[c];
    }
}

/// Unidirectional path tracer with next-event estimation for the area
/// lights. Escaping rays pick up the ambient radiance.
pub(crate) fn radiance(
    bvh: &Bvh,
    materials: &[Material],
    lighting: &Lighting<'_>,
    mut ray: Ray,
    rng: &mut SampleRng,
    max_bounces: u32,
) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut throughput = [1.0; 3];
    for depth in 0..=max_bounces {
        let Some(hit) = bvh.intersect(&ray) else {
            madd(&mut out, throughput, lighting.ambient);
            break;
        };
        if depth == max_bounces {
            break;
        }
        let material = &materials[hit.material];
        let wo = -ray.direction;
        let n = if hit.normal.dot(&wo) < 0.0 { -hit.normal } else { hit.normal };
        if n == Vec3::zeros() {
            break;
        }
        let p = ray.at(hit.t);
        let origin = p + n * RAY_OFFSET;

        for light in lighting.area_lights {
            let [a, b] = rng.next2();
            let q = Vec3::new(
                light.position[0] + (a - 0.5) * light.size,
                light.position[1] + (b - 0.5) * light.size,
                light.position[2],
            );
            let to = q - p;
            let d2 = to.norm_squared();
            let d = d2.sqrt();
            let wi = to / d;
            let (cos_s, cos_l) = (n.dot(&wi), wi.z);
            if cos_s <= 0.0 || cos_l <= 0.0 {
                continue;
            }
            if bvh.occluded(&Ray::new_unchecked(origin, wi), d - RAY_OFFSET) {
                continue;
            }
            let f = material.eval(&n, &wo, &wi);
            let g = cos_s * cos_l * light.size * light.size / d2;
            let contrib = [
                f[0] * light.radiance[0] * g,
                f[1] * light.radiance[1] * g,
                f[2] * light.radiance[2] * g,
            ];
            madd(&mut out, throughput, contrib);
        }

        let Some((wi, weight)) = material.sample(&n, &wo, rng.next3()) else {
            break;
        };
        for c in 0..3 {
            throughput[c] *= weight[c];
        }
        if throughput.iter().all(|&t| t == 0.0) {
            break;
        }
        ray = Ray::new_unchecked(origin, wi);
    }
    out
}

/// Projector irradiance geometry at a surface point, shared by every
/// pattern frame: the projected position and the unpatterned irradiance.
pub(crate) struct ProjectorSample {
    pub u: f64,
    pub v: f64,
    pub irradiance: f64,
    pub direction: Vec3,
}

pub(crate) fn projector_sample(point: &Vec3, normal: &Vec3, projector: &ProjectorLight, bvh: &Bvh) -> Option<ProjectorSample> {
    let p = projector.model.project(point).ok()?;
    if !projector.model.contains(p.u, p.v) {
        return None;
    }
    let to_light = projector.model.center() - point;
    let dist = to_light.norm();
    let direction = to_light / dist;
    let cos = normal.dot(&direction);
    if cos <= 0.0 {
        return None;
    }
    let shadow = Ray::new_unchecked(point + normal * RAY_OFFSET, direction);
    if bvh.occluded(&shadow, dist - RAY_OFFSET) {
        return None;
    }
    Some(ProjectorSample {
        u: p.u,
        v: p.v,
        irradiance: projector.power * cos / (4.0 * std::f64::consts::PI * dist * dist),
        direction,
    })
}

/// Luminance of one path under every pattern frame at once. The path is
/// traced once; only the pattern lookups differ between frames, so all
/// frames see identical geometry and sampling noise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pattern_luminance(
    bvh: &Bvh,
    materials: &[Material],
    ambient: [f64; 3],
    projector: &ProjectorLight,
    patterns: &[Raster<f32>],
    mut ray: Ray,
    rng: &mut SampleRng,
    max_bounces: u32,
    out: &mut [f64],
) {
    let mut throughput = [1.0; 3];
    for depth in 0..=max_bounces {
        let Some(hit) = bvh.intersect(&ray) else {
            let l = luminance([throughput[0] * ambient[0], throughput[1] * ambient[1], throughput[2] * ambient[2]]);
            out.iter_mut().for_each(|o| *o += l);
            return;
        };
        if depth == max_bounces {
            return;
        }
        let material = &materials[hit.material];
        let wo = -ray.direction;
        let n = if hit.normal.dot(&wo) < 0.0 { -hit.normal } else { hit.normal };
        let p = ray.at(hit.t);
        if let Some(s) = projector_sample(&p, &n, projector, bvh) {
            let f = material.eval(&n, &wo, &s.direction);
            let base = s.irradiance
                * luminance([throughput[0] * f[0], throughput[1] * f[1], throughput[2] * f[2]]);
            if base > 0.0 {
                for (o, pattern) in out.iter_mut().zip(patterns) {
                    *o += base * sample_bilinear(pattern, s.u, s.v);
                }
            }
        }
        let Some((wi, weight)) = material.sample(&n, &wo, rng.next3()) else {
            return;
        };
        for c in 0..3 {
            throughput[c] *= weight[c];
        }
        if throughput.iter().all(|&t| t == 0.0) {
            return;
        }
        ray = Ray::new_unchecked(p + n * RAY_OFFSET, wi);
    }
}

/// Renders all pattern captures in one pass; see [`pattern_luminance`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn render_patterns(
    bvh: &Bvh,
    materials: &[Material],
    ambient: [f64; 3],
    projector: &ProjectorLight,
    patterns: &[Raster<f32>],
    camera: &PinholeModel,
    settings: &RenderSettings,
    seed: u64,
) -> Vec<Raster<f32>> {
    let (w, h) = (camera.width(), camera.height());
    let (k, spp) = (patterns.len(), settings.samples_per_pixel);
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w as usize * k);
            let mut sum = vec![0.0; k];
            for x in 0..w {
                sum.iter_mut().for_each(|s| *s = 0.0);
                for s in 0..spp {
                    let mut rng = SampleRng::new(seed, PATTERN_STREAM, x, y, s);
                    let [jx, jy] = rng.next2();
                    let ray = camera.pixel_ray(x as f64 + jx - 0.5, y as f64 + jy - 0.5);
                    pattern_luminance(
                        bvh,
                        materials,
                        ambient,
                        projector,
                        patterns,
                        ray,
                        &mut rng,
                        settings.max_bounces,
                        &mut sum,
                    );
                }
                row.extend(sum.iter().map(|v| (v / spp as f64).clamp(0.0, 1.0) as f32));
            }
            row
        })
        .collect();
    (0..k)
        .map(|f| {
            let data = rows
                .iter()
                .flat_map(|row| row.chunks_exact(k).map(move |px| px[f]))
                .collect();
            Raster::from_vec(w, h, data).expect("row sizes")
        })
        .collect()
}

/// Renders `spp` jittered samples per pixel, parallel over rows. The sample
/// order inside a pixel is fixed, so results are bit-identical for any
/// worker count.
#[allow(clippy::too_many_arguments)]
pub(crate) fn render_image<T: Send>(
    bvh: &Bvh,
    materials: &[Material],
    lighting: &Lighting<'_>,
    camera: &PinholeModel,
    settings: &RenderSettings,
    seed: u64,
    stream: u64,
    finish: impl Fn([f64; 3]) -> T + Sync,
) -> Raster<T> {
    let (w, h) = (camera.width(), camera.height());
    let spp = settings.samples_per_pixel;
    let rows: Vec<Vec<T>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let mut sum = [0.0; 3];
                    for s in 0..spp {
                        let mut rng = SampleRng::new(seed, stream, x, y, s);
                        let [jx, jy] = rng.next2();
                        let ray = camera.pixel_ray(x as f64 + jx - 0.5, y as f64 + jy - 0.5);
                        let l = radiance(bvh, materials, lighting, ray, &mut rng, settings.max_bounces);
                        for c in 0..3 {
                            sum[c] += l[c];
                        }
                    }
                    finish(sum.map(|v| v / spp as f64))
                })
                .collect()
        })
        .collect();
    Raster::from_vec(w, h, rows.into_iter().flatten().collect()).expect("row sizes")
}
