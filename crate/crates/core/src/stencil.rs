//! Fourth-order centered finite differences on periodic grids.

use std::f64::consts::PI;

/// Uniform periodic grid on `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1 {
    pub m: usize,
    pub h: f64,
}

impl Grid1 {
    pub fn new(m: usize) -> Self {
        Self { m, h: 2.0 * PI / m as f64 }
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.coord(i)).collect()
    }

    pub fn d1(&self, f: &[f64]) -> Vec<f64> {
        let m = self.m;
        let c = 1.0 / (12.0 * self.h);
        (0..m)
            .map(|i| {
                let (p1, p2) = ((i + 1) % m, (i + 2) % m);
                let (m1, m2) = ((i + m - 1) % m, (i + m - 2) % m);
                c * (-f[p2] + 8.0 * f[p1] - 8.0 * f[m1] + f[m2])
            })
            .collect()
    }

    pub fn d2(&self, f: &[f64]) -> Vec<f64> {
        let m = self.m;
        let c = 1.0 / (12.0 * self.h * self.h);
        (0..m)
            .map(|i| {
                let (p1, p2) = ((i + 1) % m, (i + 2) % m);
                let (m1, m2) = ((i + m - 1) % m, (i + m - 2) % m);
                c * (-f[p2] + 16.0 * f[p1] - 30.0 * f[i] + 16.0 * f[m1] - f[m2])
            })
            .collect()
    }

    /// Periodic trapezoid rule, spectrally accurate for smooth data.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.h
    }
}

/// Uniform periodic grid on `[0, 2π)²`, stored row-major with x fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2 {
    pub mx: usize,
    pub my: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2 {
    pub fn new(mx: usize, my: usize) -> Self {
        Self { mx, my, hx: 2.0 * PI / mx as f64, hy: 2.0 * PI / my as f64 }
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    pub fn coord(&self, k: usize) -> (f64, f64) {
        ((k % self.mx) as f64 * self.hx, (k / self.mx) as f64 * self.hy)
    }

    fn shifted(&self, f: &[f64], axis: usize, w: [f64; 5], scale: f64) -> Vec<f64> {
        let (mx, my) = (self.mx, self.my);
        let mut out = vec![0.0; f.len()];
        for j in 0..my {
            for i in 0..mx {
                let mut acc = 0.0;
                for (o, &wk) in w.iter().enumerate() {
                    if wk == 0.0 {
                        continue;
                    }
                    let off = o as isize - 2;
                    let (ii, jj) = if axis == 0 {
                        ((i as isize + off).rem_euclid(mx as isize) as usize, j)
                    } else {
                        (i, (j as isize + off).rem_euclid(my as isize) as usize)
                    };
                    acc += wk * f[jj * mx + ii];
                }
                out[j * mx + i] = acc * scale;
            }
        }
        out
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.shifted(f, 0, [1.0, -8.0, 0.0, 8.0, -1.0], 1.0 / (12.0 * self.hx))
    }

    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        self.shifted(f, 1, [1.0, -8.0, 0.0, 8.0, -1.0], 1.0 / (12.0 * self.hy))
    }

    pub fn dxx(&self, f: &[f64]) -> Vec<f64> {
        self.shifted(f, 0, [-1.0, 16.0, -30.0, 16.0, -1.0], 1.0 / (12.0 * self.hx * self.hx))
    }

    pub fn dyy(&self, f: &[f64]) -> Vec<f64> {
        self.shifted(f, 1, [-1.0, 16.0, -30.0, 16.0, -1.0], 1.0 / (12.0 * self.hy * self.hy))
    }

    pub fn dxy(&self, f: &[f64]) -> Vec<f64> {
        self.dy(&self.dx(f))
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.hx * self.hy
    }
}

/// Coordinate jet of a scalar on a 2-D grid: value, gradient, Hessian partials.
#[derive(Clone, Debug)]
pub struct Jet2Fields {
    pub f: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fxx: Vec<f64>,
    pub fxy: Vec<f64>,
    pub fyy: Vec<f64>,
}

impl Jet2Fields {
    pub fn new(grid: &Grid2, f: &[f64]) -> Self {
        let fx = grid.dx(f);
        let fy = grid.dy(f);
        Self {
            f: f.to_vec(),
            fxx: grid.dxx(f),
            fyy: grid.dyy(f),
            fxy: grid.dy(&fx),
            fx,
            fy,
        }
    }
}
