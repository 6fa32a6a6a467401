//! Bench results as a table and as `strategy<TAB>metric<TAB>value` lines.

use std::fmt;
use std::time::Duration;

use packhash_core::storage::IoCounters;

#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub name: &'static str,
    pub accesses: u64,
    pub total: IoCounters,
    pub metadata: IoCounters,
    pub content: IoCounters,
    pub build_time: Duration,
    pub container_bytes: u64,
}

impl StrategyReport {
    fn mean(&self, v: u64) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            v as f64 / self.accesses as f64
        }
    }

    pub fn mean_read_ops(&self) -> f64 {
        self.mean(self.total.read_ops)
    }

    pub fn mean_read_bytes(&self) -> f64 {
        self.mean(self.total.read_bytes)
    }

    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mean_read_ops", self.mean_read_ops()),
            ("mean_read_bytes", self.mean_read_bytes()),
            ("mean_metadata_read_ops", self.mean(self.metadata.read_ops)),
            (
                "mean_metadata_read_bytes",
                self.mean(self.metadata.read_bytes),
            ),
            ("mean_content_read_ops", self.mean(self.content.read_ops)),
            (
                "mean_content_read_bytes",
                self.mean(self.content.read_bytes),
            ),
            (
                "mean_cached_read_ops",
                self.mean(self.total.cached_read_ops),
            ),
            ("mean_seek_like_ops", self.mean(self.total.seek_like_ops)),
            ("build_ms", self.build_time.as_secs_f64() * 1e3),
            ("container_bytes", self.container_bytes as f64),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub n: usize,
    pub accesses: usize,
    pub pinned: bool,
    pub strategies: Vec<StrategyReport>,
}

impl BenchReport {
    pub fn strategy(&self, name: &str) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.name == name)
    }

    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.strategies {
            for (metric, value) in s.metrics() {
                out.push_str(&format!("{}\t{metric}\t{value}\n", s.name));
            }
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# n={} accesses={} pin={}",
            self.n,
            self.accesses,
            if self.pinned { "on" } else { "off" }
        )?;
        writeln!(
            f,
            "# scan approximates a Hadoop archive: two fixed index reads, then a linear scan"
        )?;
        writeln!(
            f,
            "{:<8} {:>10} {:>14} {:>9} {:>12} {:>9} {:>14} {:>10} {:>10} {:>14}",
            "strategy",
            "read_ops",
            "read_bytes",
            "meta_ops",
            "meta_bytes",
            "data_ops",
            "data_bytes",
            "cached_ops",
            "build_ms",
            "size_bytes"
        )?;
        for s in &self.strategies {
            let m: Vec<f64> = s.metrics().into_iter().map(|(_, v)| v).collect();
            writeln!(
                f,
                "{:<8} {:>10.2} {:>14.1} {:>9.2} {:>12.1} {:>9.2} {:>14.1} {:>10.2} {:>10.1} {:>14}",
                s.name, m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[8], s.container_bytes
            )?;
        }
        Ok(())
    }
}
