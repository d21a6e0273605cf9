//! Fixed workloads shared by the benchmarks.

use ngts_core::{draw_instance, to_real, trial_rng, Constellation, RealSystem};

/// A named system configuration.
#[derive(Debug, Clone, Copy)]
pub struct Workload {
    pub nt: usize,
    pub constellation: Constellation,
    pub snr_db: f64,
    pub iterations: usize,
}

impl Workload {
    pub fn label(&self) -> String {
        format!(
            "{}x{}-{}-I{}",
            self.nt, self.nt, self.constellation, self.iterations
        )
    }

    /// `count` reproducible instances.
    pub fn instances(&self, count: usize) -> Vec<RealSystem> {
        (0..count as u64)
            .map(|t| {
                let cs = draw_instance(
                    self.nt,
                    self.nt,
                    self.constellation,
                    self.snr_db,
                    &mut trial_rng(0xbe7c4, t),
                )
                .expect("valid workload");
                to_real(&cs).expect("valid workload")
            })
            .collect()
    }
}

pub const WORKLOADS: [Workload; 3] = [
    Workload {
        nt: 8,
        constellation: Constellation::Qpsk,
        snr_db: 8.0,
        iterations: 200,
    },
    Workload {
        nt: 8,
        constellation: Constellation::Qam16,
        snr_db: 14.0,
        iterations: 400,
    },
    Workload {
        nt: 8,
        constellation: Constellation::Qam64,
        snr_db: 16.0,
        iterations: 800,
    },
];
