# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation tenant and assignment solver.

Array-based twin of ``_pyengine.PyTenant`` and ``oracle.hungarian``; every
floating-point expression is evaluated in the same order so results match
the pure-Python path exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

DEF LOCAL = 0
DEF REMOTE = 1

# policy codes, mirrored in engine.POLICY_CODES
DEF P_NONE = 0
DEF P_STATIC = 1
DEF P_EWMA = 2
DEF P_ADAPTIVE = 3
DEF P_BANDIT = 4
DEF P_ORACLE = 5


cdef inline long long _coalesce(long long size, double prev_rate, long long prev_mark, double rate,
                                long long mark, double delta1, bint relative, long long delta2_ps) nogil:
    cdef double tol
    if size <= 0:
        return 1
    tol = delta1 * prev_rate if relative else delta1
    if fabs(rate - prev_rate) < tol and mark - prev_mark <= delta2_ps:
        return size + 1
    return 1


def coalesce_sizes(double[::1] rates, long long[::1] marks, double delta1, bint relative, long long delta2_ps):
    """Burst size after each measurement of one page, as the tenant computes it."""
    cdef Py_ssize_t i, n = rates.shape[0]
    cdef long long size = 0
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] view = out
    for i in range(n):
        size = _coalesce(size, rates[i - 1] if i > 0 else 0.0, marks[i - 1] if i > 0 else 0,
                         rates[i], marks[i], delta1, relative, delta2_ps)
        view[i] = size
    return out

cdef class CTenant:
    cdef readonly long long clock, pos, n_accesses
    cdef readonly long long promotions, demotions, migration_bytes, remote_access_bytes
    cdef readonly long long local_count, remote_count, faults
    cdef readonly long long compute_total, access_total, transfer_total, bookkeeping_total
    cdef readonly long long peak_local, peak_remote, local_used, remote_used, n_local
    cdef long long n_pages, page_size, low_wm, high_wm, bucket
    cdef long long compute_ps, local_ps, k_ps, cacheline, delta2_ps
    cdef long long remote_ps, xfer_ps
    cdef double bw
    cdef double delta1, alpha, window, dlat_s, p_cut, p_rate, na_threshold
    cdef bint relative
    cdef long long p_burst
    cdef int policy
    cdef object pages_obj
    cdef readonly object spec
    cdef const long long[::1] trace
    cdef signed char[::1] loc
    cdef unsigned char[::1] marked, has_ewma
    cdef long long[::1] mark_t, last_access, prev_mark, cl_size, access_t
    cdef double[::1] prev_rate, rate_f, ewma

    def __init__(self, spec):
        cdef long long i, n_fill
        self.spec = spec
        self.pages_obj = spec.pages
        self.trace = np.ascontiguousarray(spec.pages, dtype=np.int64)
        self.n_accesses = self.trace.shape[0]
        self.n_pages = spec.n_pages
        self.page_size = spec.page_size
        self.low_wm = spec.local_alloc
        self.high_wm = spec.local_alloc + spec.slack_bytes
        self.bucket = spec.telemetry.interval_ps
        self.compute_ps = spec.compute_ps
        self.local_ps = spec.local_ps
        self.k_ps = spec.k_ps
        self.cacheline = spec.link_kwargs["cacheline"]
        self.delta1 = spec.telemetry.delta1
        self.relative = spec.telemetry.relative_delta1
        self.delta2_ps = spec.telemetry.delta2_ps
        self.alpha = spec.telemetry.ewma_alpha
        self.window = spec.cost.lookahead
        self.dlat_s = spec.cost.delta_latency * 1e-9
        self.policy = spec.policy_code
        self.p_cut = spec.policy_cutoff
        self.p_burst = spec.policy_burst
        self.p_rate = spec.policy_rate
        self.na_threshold = spec.policy_threshold
        self.remote_ps = 0
        self.xfer_ps = 0
        self.bw = 0.0

        n = self.n_pages
        self.loc = np.full(n, REMOTE, dtype=np.int8)
        self.marked = np.zeros(n, dtype=np.uint8)
        self.has_ewma = np.zeros(n, dtype=np.uint8)
        self.mark_t = np.zeros(n, dtype=np.int64)
        self.access_t = np.full(n, -1, dtype=np.int64)
        self.last_access = np.full(n, -1, dtype=np.int64)
        self.prev_mark = np.zeros(n, dtype=np.int64)
        self.cl_size = np.zeros(n, dtype=np.int64)
        self.prev_rate = np.zeros(n, dtype=np.float64)
        self.rate_f = np.zeros(n, dtype=np.float64)
        self.ewma = np.zeros(n, dtype=np.float64)

        n_fill = 0
        if spec.placement_fill:
            n_fill = min(n, spec.local_alloc // spec.page_size)
        for i in range(n_fill):
            self.loc[i] = LOCAL
        self.n_local = n_fill
        self.local_used = n_fill * self.page_size
        self.remote_used = (n - n_fill) * self.page_size
        self.peak_local = self.local_used
        self.peak_remote = self.remote_used

    @property
    def done(self):
        return self.pos >= self.n_accesses

    def mark(self, long long now):
        cdef long long i, count = 0
        for i in range(self.n_pages):
            if not self.marked[i]:
                self.marked[i] = 1
                self.mark_t[i] = now
                count += 1
        return count

    def run_until(self, long long until, long long[::1] seg_start, long long[::1] seg_remote,
                  long long[::1] seg_xfer, double[::1] seg_bw):
        cdef Py_ssize_t seg = 0, nseg = seg_start.shape[0]
        cdef long long pid
        self.remote_ps = seg_remote[0]
        self.xfer_ps = seg_xfer[0]
        self.bw = seg_bw[0]
        while self.pos < self.n_accesses and self.clock <= until:
            self.clock += self.compute_ps
            self.compute_total += self.compute_ps
            while seg + 1 < nseg and seg_start[seg + 1] <= self.clock:
                seg += 1
                self.remote_ps = seg_remote[seg]
                self.xfer_ps = seg_xfer[seg]
                self.bw = seg_bw[seg]
            pid = self.trace[self.pos]
            self._access(pid)
            self.pos += 1

    cdef inline void _access(self, long long pid):
        cdef long long now = self.clock
        cdef long long latency, victim
        cdef double rate
        if self.marked[pid]:
            self.faults += 1
            rate = 1e12 / <double>(now - self.mark_t[pid])
            self.access_t[pid] = now
            self.marked[pid] = 0
            self.cl_size[pid] = _coalesce(self.cl_size[pid], self.prev_rate[pid], self.prev_mark[pid],
                                          rate, self.mark_t[pid], self.delta1, self.relative, self.delta2_ps)
            self.prev_rate[pid] = rate
            self.prev_mark[pid] = self.mark_t[pid]
            self.rate_f[pid] = rate
            if self.has_ewma[pid]:
                self.ewma[pid] = self.alpha * rate + (1.0 - self.alpha) * self.ewma[pid]
            else:
                self.ewma[pid] = rate
                self.has_ewma[pid] = 1
            if self.loc[pid] == REMOTE and self._wants(pid, rate):
                if self.local_used + self.page_size <= self.low_wm:
                    self._migrate(pid, -1)
                elif self.n_local > 0:
                    self._migrate(pid, self._victim())
        if self.loc[pid] == LOCAL:
            latency = self.local_ps
            self.local_count += 1
        else:
            latency = self.remote_ps
            self.remote_count += 1
            self.remote_access_bytes += self.cacheline
        self.clock += latency
        self.access_total += latency
        self.last_access[pid] = now

    cdef inline bint _wants(self, long long pid, double rate):
        cdef double demote_rate, gain, threshold
        cdef long long v
        if self.policy == P_STATIC:
            return rate * self.window > self.p_cut
        if self.policy == P_EWMA:
            return self.ewma[pid] * self.window > self.p_cut
        if self.policy == P_BANDIT:
            return self.cl_size[pid] >= self.p_burst and rate * self.window >= self.p_rate
        if self.policy == P_ADAPTIVE:
            demote_rate = 0.0
            if not (self.local_used + self.page_size <= self.low_wm) and self.n_local > 0:
                v = self._victim()
                demote_rate = self.ewma[v] if self.has_ewma[v] else 0.0
            gain = (rate - demote_rate) * self.window * self.bw * self.dlat_s
            return gain > self.na_threshold
        return False

    cdef long long _victim(self):
        """Local page with the smallest demotion key, or -1."""
        cdef long long i, best = -1, rec, best_rec = 0, la, best_la = 0
        cdef double r, best_r = 0.0
        for i in range(self.n_pages):
            if self.loc[i] != LOCAL:
                continue
            la = self.last_access[i]
            rec = la // self.bucket if la >= 0 else -1
            r = self.ewma[i] if self.has_ewma[i] else 0.0
            if best < 0 or rec < best_rec or (rec == best_rec and (r < best_r or (r == best_r and la < best_la))):
                best = i
                best_rec = rec
                best_r = r
                best_la = la
        return best

    cdef void _migrate(self, long long pid, long long victim):
        cdef long long copies = 1 if victim < 0 else 2
        cdef long long cost = copies * self.xfer_ps
        self.clock += cost + self.k_ps
        self.transfer_total += cost
        self.bookkeeping_total += self.k_ps
        self.migration_bytes += copies * self.page_size
        self.promotions += 1
        if victim < 0:
            self.local_used += self.page_size
            self.remote_used -= self.page_size
            self.n_local += 1
        else:
            self.demotions += 1
            self.loc[victim] = REMOTE
        self.loc[pid] = LOCAL
        if self.local_used > self.peak_local:
            self.peak_local = self.local_used
        self._reclaim()

    cdef void _reclaim(self):
        cdef long long v
        if self.local_used <= self.high_wm:
            return
        while self.local_used >= self.low_wm and self.n_local > 0:
            v = self._victim()
            self.loc[v] = REMOTE
            self.n_local -= 1
            self.local_used -= self.page_size
            self.remote_used += self.page_size
            self.clock += self.xfer_ps
            self.transfer_total += self.xfer_ps
            self.migration_bytes += self.page_size
            self.demotions += 1
            if self.remote_used > self.peak_remote:
                self.peak_remote = self.remote_used

    # planner hooks
    def local_pages(self):
        return np.flatnonzero(np.asarray(self.loc) == LOCAL).astype(np.int64)

    def remote_pages(self):
        return np.flatnonzero(np.asarray(self.loc) == REMOTE).astype(np.int64)

    def free_slots(self):
        cdef long long free = self.low_wm - self.local_used
        return max(0, free // self.page_size)

    def upcoming(self, long long count):
        return self.pages_obj[self.pos:self.pos + count]

    def planned_migrate(self, long long pid, long long victim, long long xfer_ps):
        if self.loc[pid] != REMOTE:
            raise ValueError(f"page {pid} is already local")
        if victim >= 0 and self.loc[victim] != LOCAL:
            raise ValueError(f"page {victim} is not local")
        if victim < 0 and self.local_used + self.page_size > self.low_wm:
            raise ValueError("promotion would exceed the low watermark")
        self.xfer_ps = xfer_ps
        self._migrate(pid, victim)

    def page_view(self, long long pid):
        """Telemetry fields of one page, for cross-checking against PyTenant."""
        return {
            "location": int(self.loc[pid]),
            "marked": bool(self.marked[pid]),
            "mark_time": int(self.mark_t[pid]),
            "burst": int(self.cl_size[pid]),
            "rate_f": float(self.rate_f[pid]),
            "ewma_rate": float(self.ewma[pid]) if self.has_ewma[pid] else None,
            "last_access": int(self.last_access[pid]),
        }

    def stats(self):
        return {
            "clock": self.clock,
            "promotions": self.promotions,
            "demotions": self.demotions,
            "migration_bytes": self.migration_bytes,
            "remote_access_bytes": self.remote_access_bytes,
            "local_count": self.local_count,
            "remote_count": self.remote_count,
            "faults": self.faults,
            "compute_ps": self.compute_total,
            "access_ps": self.access_total,
            "transfer_ps": self.transfer_total,
            "bookkeeping_ps": self.bookkeeping_total,
            "peak_local": self.peak_local,
            "peak_remote": self.peak_remote,
            "local_used": self.local_used,
        }


def hungarian_max(double[:, ::1] weight):
    """Maximum-weight assignment of every row to a distinct column.

    ``weight`` has rows <= columns; ``-inf`` marks a missing edge. Returns
    the column chosen for each row. Shortest augmenting path with
    potentials, O(rows^2 * cols).
    """
    cdef Py_ssize_t n = weight.shape[0], m = weight.shape[1]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(m + 1)
    p_arr = np.zeros(m + 1, dtype=np.intp)
    way_arr = np.zeros(m + 1, dtype=np.intp)
    minv_arr = np.empty(m + 1)
    used_arr = np.empty(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    if n > m:
        raise ValueError("more rows than columns")
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    # costs are negated weights; missing edges cost +inf
                    cur = -weight[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            if j1 < 0 or delta == INFINITY:
                raise ValueError("no feasible assignment")
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    result = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            result[p[j] - 1] = j - 1
    return result
