//! Least-recently-used cache of full Q-matrix rows.

const NIL: usize = usize::MAX;

#[derive(Debug)]
struct Slot {
    row: usize,
    data: Vec<f64>,
    prev: usize,
    next: usize,
}

#[derive(Debug)]
pub(crate) struct RowCache {
    row_len: usize,
    capacity: usize,
    slots: Vec<Slot>,
    where_is: Vec<usize>,
    head: usize,
    tail: usize,
    pub(crate) hits: u64,
    pub(crate) misses: u64,
}

impl RowCache {
    /// `budget_bytes` is rounded down to whole rows, with a floor of two rows
    /// so that a working pair always fits.
    pub(crate) fn new(n_rows: usize, budget_bytes: usize) -> Self {
        let row_bytes = (n_rows * std::mem::size_of::<f64>()).max(1);
        let capacity = (budget_bytes / row_bytes).clamp(2, n_rows.max(2));
        Self {
            row_len: n_rows,
            capacity,
            slots: Vec::new(),
            where_is: vec![NIL; n_rows],
            head: NIL,
            tail: NIL,
            hits: 0,
            misses: 0,
        }
    }

    fn unlink(&mut self, s: usize) {
        let (p, n) = (self.slots[s].prev, self.slots[s].next);
        if p != NIL {
            self.slots[p].next = n;
        } else {
            self.head = n;
        }
        if n != NIL {
            self.slots[n].prev = p;
        } else {
            self.tail = p;
        }
    }

    fn push_front(&mut self, s: usize) {
        self.slots[s].prev = NIL;
        self.slots[s].next = self.head;
        if self.head != NIL {
            self.slots[self.head].prev = s;
        }
        self.head = s;
        if self.tail == NIL {
            self.tail = s;
        }
    }

    /// Makes `row` resident and most recently used, never evicting `pinned`.
    fn ensure<F>(&mut self, row: usize, pinned: Option<usize>, fill: &mut F) -> usize
    where
        F: FnMut(usize, &mut [f64]),
    {
        let s = self.where_is[row];
        if s != NIL {
            self.hits += 1;
            self.unlink(s);
            self.push_front(s);
            return s;
        }
        self.misses += 1;
        let s = if self.slots.len() < self.capacity {
            self.slots.push(Slot {
                row,
                data: vec![0.0; self.row_len],
                prev: NIL,
                next: NIL,
            });
            self.slots.len() - 1
        } else {
            let mut victim = self.tail;
            if pinned.is_some_and(|p| self.slots[victim].row == p) {
                victim = self.slots[victim].prev;
            }
            self.unlink(victim);
            let old = self.slots[victim].row;
            self.where_is[old] = NIL;
            self.slots[victim].row = row;
            victim
        };
        fill(row, &mut self.slots[s].data);
        self.where_is[row] = s;
        self.push_front(s);
        s
    }

    pub(crate) fn get<F>(&mut self, row: usize, fill: &mut F) -> &[f64]
    where
        F: FnMut(usize, &mut [f64]),
    {
        let s = self.ensure(row, None, fill);
        &self.slots[s].data
    }

    pub(crate) fn get_pair<F>(&mut self, i: usize, j: usize, fill: &mut F) -> (&[f64], &[f64])
    where
        F: FnMut(usize, &mut [f64]),
    {
        let si = self.ensure(i, None, fill);
        let sj = self.ensure(j, Some(i), fill);
        (&self.slots[si].data, &self.slots[sj].data)
    }
}
