//! Dense embedding values behind a per-row prefix mask.
//!
//! Every user and item owns a full `d_max`-wide row of values, but only the
//! first `d_n` coordinates are visible: lookups multiply by an implied mask
//! that is ones on the prefix and zeros after. Shrinking a row hides values
//! without erasing them, so a later allocation can grow the row back.
//! Deployment storage is the sparse image, which keeps only the visible
//! prefix of each row.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::alloc::AllocationPlan;
use crate::error::{Error, Result};
use crate::rng::{domain, rng_from};
use crate::scalar::Scalar;

/// Row block layout: users first, then items.
#[derive(Clone, Debug)]
pub struct MaskedEmbeddingTable<T: Scalar> {
    values: Vec<T>,
    sizes: Vec<usize>,
    user_count: usize,
    item_count: usize,
    d_max: usize,
    d_min: usize,
}

fn init_row<T: Scalar>(rng: &mut impl Rng, d_max: usize, out: &mut Vec<T>) {
    // Zero-mean uniform, half-width 0.1/sqrt(d_max): keeps initial dot
    // products around 0.1 regardless of width.
    let half_width = 0.1 / (d_max as f64).sqrt();
    for _ in 0..d_max {
        let v = (rng.gen::<f64>() * 2.0 - 1.0) * half_width;
        out.push(T::from_f(v));
    }
}

impl<T: Scalar> MaskedEmbeddingTable<T> {
    /// Fresh table with every row at full width `d_max`.
    pub fn new(
        user_count: usize,
        item_count: usize,
        d_max: usize,
        d_min: usize,
        seed: u64,
    ) -> Result<Self> {
        if user_count == 0 || item_count == 0 {
            return Err(Error::EmptyTable);
        }
        if d_min < 1 || d_max < d_min {
            return Err(Error::Config(format!(
                "need d_max >= d_min >= 1, got d_max={d_max}, d_min={d_min}"
            )));
        }
        let rows = user_count + item_count;
        let mut values = Vec::with_capacity(rows * d_max);
        let mut rng = rng_from(seed, &[domain::TABLE_INIT]);
        for _ in 0..rows {
            init_row(&mut rng, d_max, &mut values);
        }
        Ok(MaskedEmbeddingTable {
            values,
            sizes: vec![d_max; rows],
            user_count,
            item_count,
            d_max,
            d_min,
        })
    }

    pub fn rows(&self) -> usize {
        self.user_count + self.item_count
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    /// Row index of a user id.
    pub fn user_row(&self, user: u32) -> usize {
        user as usize
    }

    /// Row index of an item id (items follow the user block).
    pub fn item_row(&self, item: u32) -> usize {
        self.user_count + item as usize
    }

    /// Effective size `d_n` of a row.
    pub fn size(&self, row: usize) -> usize {
        self.sizes[row]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Per-block size slices: (user sizes, item sizes).
    pub fn block_sizes(&self) -> (&[usize], &[usize]) {
        self.sizes.split_at(self.user_count)
    }

    /// Raw (unmasked) row values.
    pub fn row_values(&self, row: usize) -> &[T] {
        &self.values[row * self.d_max..(row + 1) * self.d_max]
    }

    pub(crate) fn row_values_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.values[row * self.d_max..(row + 1) * self.d_max]
    }

    /// Masked lookup: the stored values on the first `d_n` coordinates and
    /// exact zeros after.
    pub fn lookup(&self, row: usize) -> Result<Vec<T>> {
        if row >= self.rows() {
            return Err(Error::RowOutOfRange(row));
        }
        let mut out = self.row_values(row).to_vec();
        for v in out.iter_mut().skip(self.sizes[row]) {
            *v = T::zero();
        }
        Ok(out)
    }

    /// Materializes the masked table `E .* M` as a dense rows x d_max matrix.
    pub fn masked_matrix(&self) -> Vec<T> {
        let mut out = self.values.clone();
        for row in 0..self.rows() {
            let start = row * self.d_max + self.sizes[row];
            let end = (row + 1) * self.d_max;
            for v in &mut out[start..end] {
                *v = T::zero();
            }
        }
        out
    }

    /// Replaces every row size from an allocation plan. Values are never
    /// touched: coordinates hidden by a shrink reappear on a later grow.
    pub fn set_sizes(&mut self, plan: &AllocationPlan) -> Result<()> {
        if plan.user_sizes.len() != self.user_count || plan.item_sizes.len() != self.item_count {
            return Err(Error::PlanShape {
                expected: self.rows(),
                got: plan.user_sizes.len() + plan.item_sizes.len(),
            });
        }
        for &size in plan.user_sizes.iter().chain(plan.item_sizes.iter()) {
            if size < self.d_min || size > self.d_max {
                return Err(Error::SizeOutOfBounds {
                    size,
                    d_min: self.d_min,
                    d_max: self.d_max,
                });
            }
        }
        for (dst, &size) in self.sizes.iter_mut().zip(plan.user_sizes.iter()) {
            *dst = size;
        }
        for (dst, &size) in self.sizes[self.user_count..]
            .iter_mut()
            .zip(plan.item_sizes.iter())
        {
            *dst = size;
        }
        Ok(())
    }

    /// Sets every row to the same size.
    pub fn set_uniform_size(&mut self, size: usize) -> Result<()> {
        if size < self.d_min || size > self.d_max {
            return Err(Error::SizeOutOfBounds {
                size,
                d_min: self.d_min,
                d_max: self.d_max,
            });
        }
        self.sizes.fill(size);
        Ok(())
    }

    /// Number of visible parameters, `sum d_n` (the ones-count of the mask).
    pub fn param_count(&self) -> u64 {
        self.sizes.iter().map(|&s| s as u64).sum()
    }

    /// Appends freshly initialized rows at the end of each block. New rows
    /// start at `d_max` pending their first allocation.
    pub fn append_rows(&mut self, new_users: usize, new_items: usize, seed: u64) {
        if new_users == 0 && new_items == 0 {
            return;
        }
        let mut rng = rng_from(seed, &[domain::TABLE_APPEND]);
        let rows = self.rows() + new_users + new_items;
        let mut values = Vec::with_capacity(rows * self.d_max);
        let mut sizes = Vec::with_capacity(rows);

        values.extend_from_slice(&self.values[..self.user_count * self.d_max]);
        sizes.extend_from_slice(&self.sizes[..self.user_count]);
        for _ in 0..new_users {
            init_row(&mut rng, self.d_max, &mut values);
            sizes.push(self.d_max);
        }
        values.extend_from_slice(&self.values[self.user_count * self.d_max..]);
        sizes.extend_from_slice(&self.sizes[self.user_count..]);
        for _ in 0..new_items {
            init_row(&mut rng, self.d_max, &mut values);
            sizes.push(self.d_max);
        }

        self.values = values;
        self.sizes = sizes;
        self.user_count += new_users;
        self.item_count += new_items;
    }

    /// Snapshot of the raw values, for checkpoint/restore during training.
    pub(crate) fn values_snapshot(&self) -> Vec<T> {
        self.values.clone()
    }

    pub(crate) fn restore_values(&mut self, snapshot: Vec<T>) {
        debug_assert_eq!(snapshot.len(), self.values.len());
        self.values = snapshot;
    }

    /// Compressed row image of the visible prefixes.
    pub fn to_sparse_image(&self) -> SparseTableImage {
        let mut row_offsets = Vec::with_capacity(self.rows() + 1);
        let mut payload = Vec::with_capacity(self.param_count() as usize);
        row_offsets.push(0u64);
        for row in 0..self.rows() {
            let vals = self.row_values(row);
            for &v in &vals[..self.sizes[row]] {
                payload.push(v.as_f64() as f32);
            }
            row_offsets.push(payload.len() as u64);
        }
        SparseTableImage {
            row_offsets,
            payload,
            d_max: self.d_max as u32,
            d_min: self.d_min as u32,
            user_count: self.user_count as u64,
            item_count: self.item_count as u64,
        }
    }

    /// Rebuilds a table from a sparse image; hidden coordinates come back as
    /// zeros.
    pub fn from_sparse_image(image: &SparseTableImage) -> Result<Self> {
        image.validate()?;
        let user_count = image.user_count as usize;
        let item_count = image.item_count as usize;
        let d_max = image.d_max as usize;
        let rows = user_count + item_count;
        let mut values = vec![T::zero(); rows * d_max];
        let mut sizes = Vec::with_capacity(rows);
        for row in 0..rows {
            let lo = image.row_offsets[row] as usize;
            let hi = image.row_offsets[row + 1] as usize;
            sizes.push(hi - lo);
            for (k, &v) in image.payload[lo..hi].iter().enumerate() {
                values[row * d_max + k] = T::from_f(v as f64);
            }
        }
        Ok(MaskedEmbeddingTable {
            values,
            sizes,
            user_count,
            item_count,
            d_max,
            d_min: image.d_min as usize,
        })
    }

    /// Writes the sparse image to disk.
    pub fn export_sparse<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_sparse_image().write(path)
    }

    /// Reads a sparse image from disk and rebuilds the table.
    pub fn import_sparse<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_sparse_image(&SparseTableImage::read(path)?)
    }
}

const MAGIC: &[u8; 8] = b"MSKEMB01";

/// Compressed-row storage of the visible table: offsets plus a 4-byte-real
/// payload whose length is `sum d_n`, independent of `rows * d_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTableImage {
    /// `rows + 1` offsets into the payload, non-decreasing.
    pub row_offsets: Vec<u64>,
    pub payload: Vec<f32>,
    pub d_max: u32,
    pub d_min: u32,
    pub user_count: u64,
    pub item_count: u64,
}

impl SparseTableImage {
    pub fn rows(&self) -> usize {
        (self.user_count + self.item_count) as usize
    }

    fn validate(&self) -> Result<()> {
        let rows = self.rows();
        if rows == 0 {
            return Err(Error::Format("sparse image has zero rows".into()));
        }
        if self.row_offsets.len() != rows + 1 || self.row_offsets[0] != 0 {
            return Err(Error::Format("sparse image offsets malformed".into()));
        }
        for w in self.row_offsets.windows(2) {
            let width = w[1].checked_sub(w[0]).ok_or_else(|| {
                Error::Format("sparse image offsets not non-decreasing".into())
            })?;
            if width < self.d_min as u64 || width > self.d_max as u64 {
                return Err(Error::Format(format!(
                    "row width {width} outside [{}, {}]",
                    self.d_min, self.d_max
                )));
            }
        }
        if *self.row_offsets.last().unwrap() as usize != self.payload.len() {
            return Err(Error::Format("sparse image payload length mismatch".into()));
        }
        Ok(())
    }

    /// Little-endian layout: magic, user/item counts (u64), d_max/d_min
    /// (u32), offsets (u64 each), payload (f32 each).
    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut buf =
            Vec::with_capacity(32 + self.row_offsets.len() * 8 + self.payload.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.user_count.to_le_bytes());
        buf.extend_from_slice(&self.item_count.to_le_bytes());
        buf.extend_from_slice(&self.d_max.to_le_bytes());
        buf.extend_from_slice(&self.d_min.to_le_bytes());
        for &o in &self.row_offsets {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        for &v in &self.payload {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
            let end = *cursor + n;
            if end > bytes.len() {
                return Err(Error::Format("sparse image truncated".into()));
            }
            let s = &bytes[*cursor..end];
            *cursor = end;
            Ok(s)
        };
        if take(&mut cursor, 8)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let user_count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        let item_count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        let d_max = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        let d_min = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        let rows = (user_count + item_count) as usize;
        let mut row_offsets = Vec::with_capacity(rows + 1);
        for _ in 0..rows + 1 {
            row_offsets.push(u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
        }
        let payload_len = *row_offsets.last().unwrap_or(&0) as usize;
        let mut payload = Vec::with_capacity(payload_len);
        for _ in 0..payload_len {
            payload.push(f32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()));
        }
        if cursor != bytes.len() {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        let image = SparseTableImage {
            row_offsets,
            payload,
            d_max,
            d_min,
            user_count,
            item_count,
        };
        image.validate()?;
        Ok(image)
    }
}
