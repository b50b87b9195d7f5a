use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::dcg::Dcg;
use crate::error::{Error, Result};

/// One inference job: a model plus the number of frames to stream through it.
#[derive(Debug, Clone)]
pub struct Workload {
    pub id: u64,
    pub dcg: Arc<Dcg>,
    pub frames: u64,
    pub arrival_time: f64,
}

impl Workload {
    pub fn model(&self) -> &str {
        self.dcg.name()
    }
}

pub const MAX_FRAMES: u64 = 20_000;

/// Random workload stream with exponential inter-arrival times.
///
/// Model and frame choices come from a generator independent of the arrival
/// process, so streams with the same seed but different `admit_rate` carry
/// the same job sequence and differ only in arrival times.
pub fn synth_workload_stream(
    seed: u64,
    count: usize,
    frame_range: (u64, u64),
    model_pool: &[Arc<Dcg>],
    admit_rate: f64,
) -> Result<Vec<Workload>> {
    if model_pool.is_empty() {
        return Err(Error::Config("workload model pool is empty".into()));
    }
    if count == 0 {
        return Err(Error::Config("workload stream needs at least one job".into()));
    }
    let (lo, hi) = frame_range;
    if lo < 1 || lo > hi {
        return Err(Error::Config(format!("invalid frame range [{lo}, {hi}]")));
    }
    if !(admit_rate.is_finite() && admit_rate > 0.0) {
        return Err(Error::Config(format!("admit rate must be positive, got {admit_rate}")));
    }
    let exp = Exp::new(admit_rate).map_err(|e| Error::Config(format!("admit rate: {e}")))?;
    let mut content = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut t = 0.0;
    let mut jobs = Vec::with_capacity(count);
    for id in 0..count {
        t += exp.sample(&mut arrivals);
        let model = &model_pool[content.gen_range(0..model_pool.len())];
        let frames = content.gen_range(lo..=hi);
        jobs.push(Workload { id: id as u64, dcg: Arc::clone(model), frames, arrival_time: t });
    }
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{build_dcg, LayerShape};

    fn pool() -> Vec<Arc<Dcg>> {
        let a = build_dcg("a", &[LayerShape::fc(4, 4, 8)], &[], 32).unwrap();
        let b = build_dcg("b", &[LayerShape::fc(8, 4, 8), LayerShape::fc(4, 2, 8)], &[(0, 1)], 64).unwrap();
        vec![Arc::new(a), Arc::new(b)]
    }

    #[test]
    fn same_seed_same_stream() {
        let p = pool();
        let a = synth_workload_stream(7, 50, (1, MAX_FRAMES), &p, 1.0).unwrap();
        let b = synth_workload_stream(7, 50, (1, MAX_FRAMES), &p, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.id, x.model(), x.frames), (y.id, y.model(), y.frames));
            assert_eq!(x.arrival_time.to_bits(), y.arrival_time.to_bits());
        }
    }

    #[test]
    fn five_hundred_job_mix() {
        let s = synth_workload_stream(1, 500, (1, MAX_FRAMES), &pool(), 3.0).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().all(|w| (1..=MAX_FRAMES).contains(&w.frames)));
        assert!(s.windows(2).all(|w| w[0].arrival_time <= w[1].arrival_time));
        assert!(s[0].arrival_time >= 0.0);
    }

    #[test]
    fn mean_inter_arrival_matches_rate() {
        let s = synth_workload_stream(11, 10_000, (1, 10), &pool(), 2.0).unwrap();
        let mean = s.last().unwrap().arrival_time / s.len() as f64;
        assert!((mean - 0.5).abs() / 0.5 < 0.05, "mean inter-arrival {mean}");
    }

    #[test]
    fn content_independent_of_rate() {
        let p = pool();
        let a = synth_workload_stream(3, 40, (1, 100), &p, 0.5).unwrap();
        let b = synth_workload_stream(3, 40, (1, 100), &p, 8.0).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.model() == y.model() && x.frames == y.frames));
    }

    #[test]
    fn empty_pool_is_config_error() {
        assert!(matches!(synth_workload_stream(1, 1, (1, 2), &[], 1.0), Err(Error::Config(_))));
    }
}
