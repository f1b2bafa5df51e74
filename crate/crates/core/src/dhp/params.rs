use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Flat parameter vector with named segments. The layout is fixed by the
/// order of `register` calls, which makes checkpoints and gradient vectors
/// plain slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub values: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    name: String,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegId(usize);

impl SegId {
    /// Position in registration order; used to index per-pass leaf tables.
    pub fn index(self) -> usize {
        self.0
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            values: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn register_zeros(&mut self, name: &str, len: usize) -> SegId {
        self.register_with(name, len, || 0.0)
    }

    pub fn register_normal<R: Rng>(
        &mut self,
        name: &str,
        len: usize,
        std: f64,
        rng: &mut R,
    ) -> SegId {
        let normal = Normal::new(0.0, std).expect("std >= 0");
        self.register_with(name, len, || normal.sample(rng))
    }

    pub fn register_with(&mut self, name: &str, len: usize, mut init: impl FnMut() -> f64) -> SegId {
        let offset = self.values.len();
        self.values.extend((0..len).map(|_| init()));
        self.segments.push(Segment {
            name: name.to_string(),
            offset,
            len,
        });
        SegId(self.segments.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, id: SegId) -> &[f64] {
        let s = &self.segments[id.0];
        &self.values[s.offset..s.offset + s.len]
    }

    pub fn slice_mut(&mut self, id: SegId) -> &mut [f64] {
        let s = &self.segments[id.0];
        &mut self.values[s.offset..s.offset + s.len]
    }

    pub fn offset(&self, id: SegId) -> usize {
        self.segments[id.0].offset
    }

    pub fn seg_len(&self, id: SegId) -> usize {
        self.segments[id.0].len
    }

    pub fn name(&self, id: SegId) -> &str {
        &self.segments[id.0].name
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = SegId> {
        (0..self.segments.len()).map(SegId)
    }

    pub fn find(&self, name: &str) -> Option<SegId> {
        self.segments
            .iter()
            .position(|s| s.name == name)
            .map(SegId)
    }

    /// Name of the segment covering flat index `idx`, with the within-segment
    /// offset. For gradient-check reporting.
    pub fn locate(&self, idx: usize) -> (&str, usize) {
        for s in &self.segments {
            if idx >= s.offset && idx < s.offset + s.len {
                return (&s.name, idx - s.offset);
            }
        }
        ("<none>", idx)
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}
