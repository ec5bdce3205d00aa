//! Patch-embedding containers and the dataset-level invariants.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major set of equal-length embeddings.
///
/// Each row is one patch embedding. Storage is a single flat buffer so that
/// distance kernels walk contiguous memory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Embeddings {
    dim: usize,
    data: Vec<f32>,
}

impl Embeddings {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("embedding dimension must be at least 1".into()));
        }
        Ok(Self { dim, data: Vec::new() })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Result<Self> {
        let mut e = Self::new(dim)?;
        e.data.reserve(rows * dim);
        Ok(e)
    }

    /// Wraps a flat buffer of `rows * dim` floats.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("embedding dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "flat buffer of {} floats is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut e = Self::new(dim)?;
        for r in rows {
            e.push(r.as_ref())?;
        }
        Ok(e)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f32> {
        self.data
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn extend_from(&mut self, other: &Embeddings) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Copies the given rows, in the given order, into a new set.
    pub fn select(&self, indices: &[usize]) -> Embeddings {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Embeddings { dim: self.dim, data }
    }

    pub fn truncate(&mut self, rows: usize) {
        self.data.truncate(rows * self.dim);
    }

    /// Index of the first row holding a NaN or infinite component.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|p| p / self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomalous => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Normal),
            1 => Some(Label::Anomalous),
            _ => None,
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

/// One image: its patch grid, label and identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub class_name: String,
    pub image_id: String,
    pub label: Label,
    pub grid_h: usize,
    pub grid_w: usize,
    /// `grid_h * grid_w` rows in row-major grid order.
    pub patches: Embeddings,
}

impl EmbeddingRecord {
    pub fn new(
        class_name: impl Into<String>,
        image_id: impl Into<String>,
        label: Label,
        grid_h: usize,
        grid_w: usize,
        patches: Embeddings,
    ) -> Result<Self> {
        let record = Self {
            class_name: class_name.into(),
            image_id: image_id.into(),
            label,
            grid_h,
            grid_w,
            patches,
        };
        record.check_shape()?;
        Ok(record)
    }

    fn check_shape(&self) -> Result<()> {
        if self.grid_h == 0 || self.grid_w == 0 {
            return Err(Error::InvalidData(format!(
                "grid {}x{} must be positive",
                self.grid_h, self.grid_w
            )));
        }
        if self.patches.len() != self.grid_h * self.grid_w {
            return Err(Error::InvalidData(format!(
                "grid {}x{} needs {} patches, found {}",
                self.grid_h,
                self.grid_w,
                self.grid_h * self.grid_w,
                self.patches.len()
            )));
        }
        Ok(())
    }
}

/// A class with its normal-only training split and mixed test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassData {
    pub name: String,
    pub train: Vec<EmbeddingRecord>,
    pub test: Vec<EmbeddingRecord>,
}

impl ClassData {
    /// All training patches concatenated in record order.
    pub fn train_embeddings(&self, dim: usize) -> Result<Embeddings> {
        let rows: usize = self.train.iter().map(|r| r.patches.len()).sum();
        let mut all = Embeddings::with_capacity(dim, rows)?;
        for r in &self.train {
            all.extend_from(&r.patches)?;
        }
        Ok(all)
    }

    pub fn test_labels(&self) -> Vec<Label> {
        self.test.iter().map(|r| r.label).collect()
    }
}

/// Classes in continual-learning introduction order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStream {
    pub dim: usize,
    pub classes: Vec<ClassData>,
}

impl ClassStream {
    pub fn new(dim: usize, classes: Vec<ClassData>) -> Result<Self> {
        let s = Self { dim, classes };
        s.validate()?;
        Ok(s)
    }

    pub fn class(&self, name: &str) -> Option<&ClassData> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }

    /// Checks every dataset invariant, naming the first offending location.
    ///
    /// Record indices are global (counted across classes in file order, train
    /// before test) so they line up with the on-disk record sequence.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidData("embedding dimension must be at least 1".into()));
        }
        let mut global = 0usize;
        for (ci, class) in self.classes.iter().enumerate() {
            if self.classes[..ci].iter().any(|c| c.name == class.name) {
                return Err(Error::InvalidData(format!(
                    "duplicate class name '{}' at class index {ci}",
                    class.name
                )));
            }
            for (split, records) in [("train", &class.train), ("test", &class.test)] {
                for (ri, rec) in records.iter().enumerate() {
                    let at = || {
                        format!(
                            "record {global} (class '{}', {split} record {ri}, image '{}')",
                            class.name, rec.image_id
                        )
                    };
                    if rec.class_name != class.name {
                        return Err(Error::InvalidData(format!(
                            "{}: record class '{}' does not match its class",
                            at(),
                            rec.class_name
                        )));
                    }
                    if rec.patches.dim() != self.dim {
                        return Err(Error::InvalidData(format!(
                            "{}: dimension mismatch, expected {}, found {}",
                            at(),
                            self.dim,
                            rec.patches.dim()
                        )));
                    }
                    rec.check_shape().map_err(|e| Error::InvalidData(format!("{}: {e}", at())))?;
                    if let Some(p) = rec.patches.first_non_finite() {
                        return Err(Error::InvalidData(format!(
                            "{}: non-finite value in patch {p}",
                            at()
                        )));
                    }
                    if split == "train" && rec.label == Label::Anomalous {
                        return Err(Error::InvalidData(format!(
                            "{}: anomalous label in the train split of class '{}'",
                            at(),
                            class.name
                        )));
                    }
                    global += 1;
                }
            }
        }
        Ok(())
    }
}
