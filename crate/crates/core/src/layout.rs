//! Two-dimensional arrays whose linear index function is a type parameter.
//!
//! A [`Layout`] maps a logical `(x, y)` coordinate of a `size_x x size_y`
//! array to an offset in a flat buffer. Three layouts are provided:
//!
//! * [`RowMajor`]: `x * size_y + y` (for particle data this is AoS),
//! * [`ColumnMajor`]: `y * size_x + x` (SoA),
//! * [`Clustered<C>`]: `C * ((x >> log2 C) * size_y + y) + (x & (C - 1))` (AoSoA).
//!
//! Because the layout is a type, every accessor is monomorphized and the
//! index arithmetic (including the cluster shift and mask) folds into
//! constants. Atomic accumulation is likewise chosen at compile time: plain
//! `add` on [`ArrayData`] and linearizable `add` on the [`AtomicArray`] view.

use std::marker::PhantomData;
use std::ops::AddAssign;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::config::LayoutKind;
use crate::geometry::Vec3;

pub trait Layout: Copy + Default + Send + Sync + std::fmt::Debug + 'static {
    const KIND: LayoutKind;

    /// Buffer length needed for a `size_x x size_y` array.
    fn required_capacity(size_x: usize, size_y: usize) -> usize;

    fn index_2d(size_x: usize, size_y: usize, x: usize, y: usize) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RowMajor;

#[derive(Debug, Clone, Copy, Default)]
pub struct ColumnMajor;

/// Array of structures of arrays with `C` rows per cluster. `C` must be a
/// power of two.
#[derive(Debug, Clone, Copy, Default)]
pub struct Clustered<const C: usize>;

impl Layout for RowMajor {
    const KIND: LayoutKind = LayoutKind::Aos;

    #[inline(always)]
    fn required_capacity(size_x: usize, size_y: usize) -> usize {
        size_x * size_y
    }

    #[inline(always)]
    fn index_2d(_size_x: usize, size_y: usize, x: usize, y: usize) -> usize {
        x * size_y + y
    }
}

impl Layout for ColumnMajor {
    const KIND: LayoutKind = LayoutKind::Soa;

    #[inline(always)]
    fn required_capacity(size_x: usize, size_y: usize) -> usize {
        size_x * size_y
    }

    #[inline(always)]
    fn index_2d(size_x: usize, _size_y: usize, x: usize, y: usize) -> usize {
        y * size_x + x
    }
}

impl<const C: usize> Clustered<C> {
    const VALID: () = assert!(C.is_power_of_two(), "cluster size must be a power of two");
    pub const SHIFT: u32 = C.trailing_zeros();
    pub const MASK: usize = C - 1;
}

impl<const C: usize> Layout for Clustered<C> {
    const KIND: LayoutKind = LayoutKind::Aosoa(C);

    #[inline(always)]
    fn required_capacity(size_x: usize, size_y: usize) -> usize {
        #[allow(clippy::let_unit_value)]
        let _ = Self::VALID;
        size_x.div_ceil(C) * C * size_y
    }

    #[inline(always)]
    fn index_2d(_size_x: usize, size_y: usize, x: usize, y: usize) -> usize {
        #[allow(clippy::let_unit_value)]
        let _ = Self::VALID;
        let i = x >> Self::SHIFT;
        let j = x & Self::MASK;
        C * (i * size_y + y) + j
    }
}

/// Runtime description of a layout, for diagnostics and for checking the
/// specialized index functions against a single reference implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutDescriptor {
    pub kind: LayoutKind,
    pub atomic_add: bool,
}

impl LayoutDescriptor {
    pub fn new(kind: LayoutKind, atomic_add: bool) -> Self {
        if let LayoutKind::Aosoa(c) = kind {
            assert!(c.is_power_of_two(), "cluster size {c} is not a power of two");
        }
        Self { kind, atomic_add }
    }

    pub fn required_capacity(&self, size_x: usize, size_y: usize) -> usize {
        match self.kind {
            LayoutKind::Aos | LayoutKind::Soa => size_x * size_y,
            LayoutKind::Aosoa(c) => size_x.div_ceil(c) * c * size_y,
        }
    }

    pub fn index_2d(&self, size_x: usize, size_y: usize, x: usize, y: usize) -> usize {
        debug_assert!(x < size_x && y < size_y, "({x}, {y}) out of {size_x}x{size_y}");
        match self.kind {
            LayoutKind::Aos => x * size_y + y,
            LayoutKind::Soa => y * size_x + x,
            LayoutKind::Aosoa(c) => {
                let shift = c.trailing_zeros();
                let mask = c - 1;
                let i = x >> shift;
                let j = x & mask;
                c * (i * size_y + y) + j
            }
        }
    }
}

/// A `size_x x size_y` array stored under layout `L`.
#[derive(Debug, Clone)]
pub struct ArrayData<T, L: Layout> {
    data: Vec<T>,
    size_x: usize,
    size_y: usize,
    _layout: PhantomData<L>,
}

impl<T: Copy + Default, L: Layout> ArrayData<T, L> {
    /// Zero-initialized array (padding included).
    pub fn new(size_x: usize, size_y: usize) -> Self {
        Self {
            data: vec![T::default(); L::required_capacity(size_x, size_y)],
            size_x,
            size_y,
            _layout: PhantomData,
        }
    }

    pub fn size_x(&self) -> usize {
        self.size_x
    }

    pub fn size_y(&self) -> usize {
        self.size_y
    }

    pub fn descriptor(&self) -> LayoutDescriptor {
        LayoutDescriptor {
            kind: L::KIND,
            atomic_add: false,
        }
    }

    /// The flat backing buffer, including any cluster padding.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline(always)]
    pub fn index_2d(&self, x: usize, y: usize) -> usize {
        debug_assert!(
            x < self.size_x && y < self.size_y,
            "({x}, {y}) out of {}x{}",
            self.size_x,
            self.size_y
        );
        L::index_2d(self.size_x, self.size_y, x, y)
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.index_2d(x, y)]
    }

    #[inline(always)]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let k = self.index_2d(x, y);
        self.data[k] = v;
    }

    /// Change `size_x` keeping the first `min(old, new)` rows. Every layout
    /// whose offsets depend on `size_x` is re-packed element by element.
    pub fn resize_x(&mut self, new_size_x: usize) {
        if new_size_x == self.size_x {
            return;
        }
        let mut next = Self::new(new_size_x, self.size_y);
        for x in 0..self.size_x.min(new_size_x) {
            for y in 0..self.size_y {
                next.set(x, y, self.get(x, y));
            }
        }
        *self = next;
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|e| *e = v);
    }
}

impl<T: Copy + Default + AddAssign, L: Layout> ArrayData<T, L> {
    #[inline(always)]
    pub fn add(&mut self, x: usize, y: usize, v: T) {
        let k = self.index_2d(x, y);
        self.data[k] += v;
    }
}

impl<L: Layout> ArrayData<f64, L> {
    #[inline(always)]
    pub fn get_vec3(&self, i: usize) -> Vec3 {
        debug_assert_eq!(self.size_y, 3);
        Vec3::new(self.get(i, 0), self.get(i, 1), self.get(i, 2))
    }

    #[inline(always)]
    pub fn set_vec3(&mut self, i: usize, v: Vec3) {
        debug_assert_eq!(self.size_y, 3);
        self.set(i, 0, v.x);
        self.set(i, 1, v.y);
        self.set(i, 2, v.z);
    }

    #[inline(always)]
    pub fn add_vec3(&mut self, i: usize, v: Vec3) {
        debug_assert_eq!(self.size_y, 3);
        self.add(i, 0, v.x);
        self.add(i, 1, v.y);
        self.add(i, 2, v.z);
    }

    /// A shared view whose `add` is an atomic read-modify-write, usable
    /// from many threads at once.
    pub fn atomic_view(&mut self) -> AtomicArray<'_, L> {
        const _: () = assert!(
            std::mem::size_of::<AtomicU64>() == std::mem::size_of::<f64>()
                && std::mem::align_of::<AtomicU64>() == std::mem::align_of::<f64>()
        );
        let len = self.data.len();
        let ptr = self.data.as_mut_ptr() as *const AtomicU64;
        // SAFETY: same size and alignment (checked above); the exclusive
        // borrow of `self` guarantees no non-atomic access for 'a.
        let cells = unsafe { std::slice::from_raw_parts(ptr, len) };
        AtomicArray {
            cells,
            size_x: self.size_x,
            size_y: self.size_y,
            _layout: PhantomData,
        }
    }
}

/// Concurrent view of an `f64` array with atomic accumulation.
pub struct AtomicArray<'a, L: Layout> {
    cells: &'a [AtomicU64],
    size_x: usize,
    size_y: usize,
    _layout: PhantomData<L>,
}

impl<L: Layout> AtomicArray<'_, L> {
    pub fn descriptor(&self) -> LayoutDescriptor {
        LayoutDescriptor {
            kind: L::KIND,
            atomic_add: true,
        }
    }

    #[inline(always)]
    fn cell(&self, x: usize, y: usize) -> &AtomicU64 {
        debug_assert!(x < self.size_x && y < self.size_y);
        &self.cells[L::index_2d(self.size_x, self.size_y, x, y)]
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        f64::from_bits(self.cell(x, y).load(Ordering::Relaxed))
    }

    #[inline(always)]
    pub fn add(&self, x: usize, y: usize, v: f64) {
        let cell = self.cell(x, y);
        let mut cur = cell.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(cur) + v).to_bits();
            match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(actual) => cur = actual,
            }
        }
    }

    #[inline(always)]
    pub fn add_vec3(&self, i: usize, v: Vec3) {
        self.add(i, 0, v.x);
        self.add(i, 1, v.y);
        self.add(i, 2, v.z);
    }
}
