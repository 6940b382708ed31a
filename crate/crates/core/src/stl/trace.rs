use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Per-UAV position sequences on a shared time grid.
///
/// UAV `n` has samples at indices `0..=last(n)`; sequences may differ in
/// length but all start at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    dt: f64,
    dim: usize,
    samples: Vec<Vec<f64>>,
}

impl Trace {
    /// `samples[n]` is the flattened position sequence of UAV `n`.
    pub fn new(dt: f64, dim: usize, samples: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Trace("dimension must be positive".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Trace(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::Trace("trace has no UAVs".into()));
        }
        for (n, s) in samples.iter().enumerate() {
            if s.is_empty() || s.len() % dim != 0 {
                return Err(Error::Trace(format!(
                    "UAV {} has {} values, expected a non-empty multiple of {dim}",
                    n + 1,
                    s.len()
                )));
            }
        }
        Ok(Self { dt, dim, samples })
    }

    pub fn from_points(dt: f64, uavs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = uavs
            .first()
            .and_then(|u| u.first())
            .map(Vec::len)
            .unwrap_or(0);
        if uavs.iter().flatten().any(|p| p.len() != dim) {
            return Err(Error::Trace("inconsistent point dimension".into()));
        }
        Self::new(dt, dim, uavs.into_iter().map(|u| u.concat()).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uav_count(&self) -> usize {
        self.samples.len()
    }

    /// Number of samples of UAV `n`.
    pub fn len(&self, n: usize) -> usize {
        self.samples[n].len() / self.dim
    }

    /// Final sample index of UAV `n`.
    pub fn last(&self, n: usize) -> usize {
        self.len(n) - 1
    }

    pub fn lengths(&self) -> Vec<usize> {
        (0..self.uav_count()).map(|n| self.last(n)).collect()
    }

    pub fn max_len(&self) -> usize {
        (0..self.uav_count()).map(|n| self.len(n)).max().unwrap_or(0)
    }

    /// Position of UAV `n` at index `k`; a UAV holds its final sample.
    pub fn pos(&self, n: usize, k: usize) -> &[f64] {
        let k = k.min(self.last(n));
        &self.samples[n][k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples(&self, n: usize) -> &[f64] {
        &self.samples[n]
    }

    pub fn samples_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.samples[n]
    }

    pub fn into_samples(self) -> Vec<Vec<f64>> {
        self.samples
    }

    /// Keeps at most `k + 1` samples per UAV.
    pub fn truncated(&self, k: usize) -> Trace {
        let samples = self
            .samples
            .iter()
            .map(|s| s[..s.len().min((k + 1) * self.dim)].to_vec())
            .collect();
        Trace {
            dt: self.dt,
            dim: self.dim,
            samples,
        }
    }

    /// Writes `uav,k,x1..xd` rows, UAVs numbered from 1.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["uav".to_string(), "k".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for n in 0..self.uav_count() {
            for k in 0..self.len(n) {
                let mut row = vec![(n + 1).to_string(), k.to_string()];
                row.extend(self.pos(n, k).iter().map(|x| format!("{x:?}")));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Trace::write_csv`]. The `uav` column accepts
    /// `3` or `u3`; rows may come in any order but indices must be contiguous.
    pub fn read_csv<R: Read>(r: R, dt: f64) -> Result<Trace> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let dim = rdr
            .headers()?
            .iter()
            .filter(|h| h.starts_with('x'))
            .count();
        let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = |what: &str| Error::Trace(format!("bad {what} in row {:?}", rec.position()));
            let uav = rec.get(0).ok_or_else(|| bad("uav"))?;
            let uav: usize = uav
                .trim_start_matches('u')
                .parse()
                .map_err(|_| bad("uav"))?;
            if uav == 0 {
                return Err(bad("uav"));
            }
            let k: usize = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("k"))?;
            let x = (2..2 + dim)
                .map(|i| rec.get(i).and_then(|s| s.parse::<f64>().ok()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("coordinate"))?;
            rows.push((uav - 1, k, x));
        }
        rows.sort_by_key(|(n, k, _)| (*n, *k));
        let uavs = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let mut samples = vec![Vec::new(); uavs];
        let mut expected = vec![0usize; uavs];
        for (n, k, x) in rows {
            if k != expected[n] {
                return Err(Error::Trace(format!(
                    "UAV {} has a gap or duplicate at k = {k}",
                    n + 1
                )));
            }
            expected[n] += 1;
            samples[n].extend(x);
        }
        Trace::new(dt, dim, samples)
    }
}
