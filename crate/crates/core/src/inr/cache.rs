use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::geometry::{GeometryError, Point};

/// Quantization grid for cache keys.
pub const CACHE_QUANTUM: f64 = 1e-12;

type Key = [i64; 3];

fn key(x: &Point) -> Key {
    [
        (x.x / CACHE_QUANTUM).round() as i64,
        (x.y / CACHE_QUANTUM).round() as i64,
        (x.z / CACHE_QUANTUM).round() as i64,
    ]
}

/// Memo of `(gradient, value)` keyed by quantized query point.
///
/// Safe for concurrent use. Two workers racing on the same key may both
/// compute, but they compute identical values, so whichever insert lands
/// last stores the same bits.
#[derive(Debug, Default)]
pub struct GradientCache {
    map: RwLock<HashMap<Key, (Point, f64)>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl GradientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &Point) -> Option<(Point, f64)> {
        self.map.read().expect("cache lock poisoned").get(&key(x)).copied()
    }

    pub fn get_or_compute(
        &self,
        x: &Point,
        compute: impl FnOnce() -> Result<(Point, f64), GeometryError>,
    ) -> Result<(Point, f64), GeometryError> {
        if let Some(hit) = self.get(x) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = compute()?;
        self.map
            .write()
            .expect("cache lock poisoned")
            .insert(key(x), value);
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}
