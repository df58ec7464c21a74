use super::angle::Spectrum4D;

/// Log-compressed range-azimuth map, row-major (range, azimuth).
#[derive(Debug, Clone, PartialEq)]
pub struct RaMap {
    pub data: Vec<f64>,
    pub n_range: usize,
    pub n_azimuth: usize,
}

impl RaMap {
    pub fn get(&self, r: usize, a: usize) -> f64 {
        self.data[r * self.n_azimuth + a]
    }

    /// First `n` range rows.
    pub fn crop_range(&self, n: usize) -> RaMap {
        let n = n.min(self.n_range);
        RaMap {
            data: self.data[..n * self.n_azimuth].to_vec(),
            n_range: n,
            n_azimuth: self.n_azimuth,
        }
    }
}

/// `log(1 + max over Doppler and elevation)` per (range, azimuth) cell.
pub fn collapse_to_ra(spec: &Spectrum4D) -> RaMap {
    let [nr, nd, na, ne] = spec.dims;
    let mut data = vec![0.0f64; nr * na];
    for r in 0..nr {
        for d in 0..nd {
            for a in 0..na {
                let base = spec.index(r, d, a, 0);
                let m = spec.power[base..base + ne].iter().fold(0.0f32, |m, &p| m.max(p));
                let cell = &mut data[r * na + a];
                *cell = cell.max(m as f64);
            }
        }
    }
    data.iter_mut().for_each(|v| *v = v.ln_1p());
    RaMap {
        data,
        n_range: nr,
        n_azimuth: na,
    }
}
